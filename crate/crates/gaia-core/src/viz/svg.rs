//! Deterministic SVG rendering of the four-row comparison figure: per model
//! column, an interpolation overlay on the data heat-map, the decoded latent
//! meshgrid, the reconstructed data meshgrid, and the reconstruction density.
//!
//! Output bytes are a pure function of the input: coordinates use fixed
//! two-decimal formatting and no unordered containers feed the emitter. CSV
//! sidecars for the meshgrids come from [`MeshGrid::to_csv`].

use crate::error::{CoreError, Result};
use crate::tensor::{ensure_finite, Matrix};
use crate::viz::meshgrid::MeshGrid;
use std::fmt::Write as _;

/// Everything rendered in one model's column.
#[derive(Debug, Clone)]
pub struct PanelColumn {
    pub title: String,
    /// Real data points, the heat-map behind the interpolation overlay.
    pub data: Matrix,
    /// Decoded latent interpolations; zero rows renders the heat-map alone.
    pub interpolants: Matrix,
    /// Latent-space lattice decoded to data space.
    pub z_mesh: MeshGrid,
    /// Data-space lattice passed through encode-then-decode.
    pub x_mesh: MeshGrid,
    /// Reconstructions of real data points.
    pub recon: Matrix,
}

/// Layout and histogram parameters.
#[derive(Debug, Clone)]
pub struct FigureStyle {
    /// Side length of each square panel in pixels.
    pub panel_size: f64,
    /// Histogram resolution per axis.
    pub bins: usize,
    /// Fraction of the bounding box added as margin on every side.
    pub margin_frac: f64,
}

impl Default for FigureStyle {
    fn default() -> Self {
        Self {
            panel_size: 240.0,
            bins: 128,
            margin_frac: 0.05,
        }
    }
}

const ROW_LABELS: [&str; 4] = [
    "interpolations",
    "latent meshgrid",
    "data meshgrid",
    "reconstruction",
];
const GUTTER_LEFT: f64 = 110.0;
const GUTTER_TOP: f64 = 26.0;
const GAP: f64 = 8.0;

/// Renders the full figure. Panel count is `columns.len() * 4`, each wrapped
/// in `<g class="panel">`. Empty data or reconstruction sets are an error;
/// an empty interpolation set degrades that panel to the heat-map only.
pub fn render_figure(columns: &[PanelColumn], style: &FigureStyle) -> Result<String> {
    if columns.is_empty() {
        return Err(CoreError::InvalidInput("no panel columns".into()));
    }
    if style.panel_size < 40.0 || style.bins < 2 || !(0.0..1.0).contains(&style.margin_frac) {
        return Err(CoreError::InvalidInput(format!(
            "bad figure style: size {}, bins {}, margin {}",
            style.panel_size, style.bins, style.margin_frac
        )));
    }
    for col in columns {
        if col.data.nrows() == 0 || col.recon.nrows() == 0 {
            return Err(CoreError::InvalidInput(format!(
                "panel column {:?} has no data to draw",
                col.title
            )));
        }
        ensure_finite("panel data", &col.data)?;
        ensure_finite("panel interpolants", &col.interpolants)?;
        ensure_finite("panel reconstructions", &col.recon)?;
    }

    let s = style.panel_size;
    let width = GUTTER_LEFT + columns.len() as f64 * (s + GAP) + GAP;
    let height = GUTTER_TOP + 4.0 * (s + GAP) + GAP;
    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    );
    let _ = writeln!(
        out,
        r##"<rect x="0" y="0" width="{width:.0}" height="{height:.0}" fill="#ffffff"/>"##
    );
    for (r, label) in ROW_LABELS.iter().enumerate() {
        let y = GUTTER_TOP + r as f64 * (s + GAP) + s / 2.0;
        let _ = writeln!(
            out,
            r##"<text x="8" y="{y:.2}" font-family="monospace" font-size="12" fill="#333333">{label}</text>"##
        );
    }
    for (c, col) in columns.iter().enumerate() {
        let x = GUTTER_LEFT + c as f64 * (s + GAP);
        let _ = writeln!(
            out,
            r##"<text x="{:.2}" y="18" font-family="monospace" font-size="13" fill="#111111">{}</text>"##,
            x + s / 2.0 - 4.0 * col.title.len() as f64 / 2.0,
            escape(&col.title)
        );
        for row in 0..4 {
            let y = GUTTER_TOP + row as f64 * (s + GAP);
            let _ = writeln!(
                out,
                r#"<g class="panel" transform="translate({x:.2},{y:.2})">"#
            );
            let _ = writeln!(
                out,
                r##"<rect x="0" y="0" width="{s:.0}" height="{s:.0}" fill="#fcfcfc" stroke="#888888" stroke-width="1"/>"##
            );
            match row {
                0 => {
                    let frame = Frame::around(&col.data, style)?;
                    heatmap(&mut out, &col.data, &frame, style);
                    if col.interpolants.nrows() > 0 {
                        for p in col.interpolants.rows() {
                            let (px, py) = frame.project(p[0], p[1]);
                            let _ = writeln!(
                                out,
                                r##"<circle class="interp" cx="{px:.2}" cy="{py:.2}" r="1.6" fill="#d62728"/>"##
                            );
                        }
                    }
                }
                1 => mesh_lines(&mut out, &col.z_mesh, style)?,
                2 => mesh_lines(&mut out, &col.x_mesh, style)?,
                _ => {
                    let frame = Frame::around(&col.data, style)?;
                    heatmap(&mut out, &col.recon, &frame, style);
                }
            }
            let _ = writeln!(out, "</g>");
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Affine world-to-panel transform with margin and flipped y.
struct Frame {
    x0: f64,
    y0: f64,
    sx: f64,
    sy: f64,
    size: f64,
}

impl Frame {
    fn around(points: &Matrix, style: &FigureStyle) -> Result<Frame> {
        if points.nrows() == 0 {
            return Err(CoreError::InvalidInput("empty point set for panel".into()));
        }
        let (mut x0, mut x1) = column_extent(points, 0);
        let (mut y0, mut y1) = column_extent(points, 1);
        for (lo, hi) in [(&mut x0, &mut x1), (&mut y0, &mut y1)] {
            let span = *hi - *lo;
            let pad = if span > 0.0 {
                span * style.margin_frac
            } else {
                0.5
            };
            *lo -= pad;
            *hi += pad;
        }
        Ok(Frame {
            x0,
            y0,
            sx: style.panel_size / (x1 - x0),
            sy: style.panel_size / (y1 - y0),
            size: style.panel_size,
        })
    }

    fn project(&self, x: f64, y: f64) -> (f64, f64) {
        (
            (x - self.x0) * self.sx,
            self.size - (y - self.y0) * self.sy,
        )
    }
}

fn column_extent(m: &Matrix, col: usize) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in m.column(col) {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    (lo, hi)
}

/// 2D histogram as one rect per occupied bin, white-to-blue by sqrt count.
fn heatmap(out: &mut String, points: &Matrix, frame: &Frame, style: &FigureStyle) {
    let bins = style.bins;
    let mut counts = vec![0u32; bins * bins];
    let inv_w = frame.sx / style.panel_size * bins as f64; // bins per world unit / panel scale
    let inv_h = frame.sy / style.panel_size * bins as f64;
    for p in points.rows() {
        let bx = ((p[0] - frame.x0) * inv_w).floor();
        let by = ((p[1] - frame.y0) * inv_h).floor();
        if bx >= 0.0 && by >= 0.0 {
            let (bx, by) = (bx as usize, by as usize);
            if bx < bins && by < bins {
                counts[by * bins + bx] += 1;
            }
        }
    }
    let max = counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let cell = style.panel_size / bins as f64;
    for by in 0..bins {
        for bx in 0..bins {
            let c = counts[by * bins + bx];
            if c == 0 {
                continue;
            }
            let t = (c as f64 / max).sqrt();
            let r = (255.0 - 225.0 * t).round() as u8;
            let g = (255.0 - 205.0 * t).round() as u8;
            let b = (255.0 - 75.0 * t).round() as u8;
            let px = bx as f64 * cell;
            // Flip y: bin 0 is the bottom row of the world box.
            let py = style.panel_size - (by + 1) as f64 * cell;
            let _ = writeln!(
                out,
                r#"<rect x="{px:.2}" y="{py:.2}" width="{cell:.2}" height="{cell:.2}" fill="rgb({r},{g},{b})"/>"#
            );
        }
    }
}

/// Warped-grid panel: mapped lattice sites joined along retained neighbors.
fn mesh_lines(out: &mut String, mesh: &MeshGrid, style: &FigureStyle) -> Result<()> {
    if mesh.points.is_empty() {
        return Err(CoreError::InvalidInput("empty meshgrid panel".into()));
    }
    let mapped = mesh.mapped_matrix();
    ensure_finite("meshgrid mapped points", &mapped)?;
    let frame = Frame::around(&mapped, style)?;
    let mut path = String::new();
    for (a, b) in mesh.segments() {
        let (ax, ay) = frame.project(mapped[[a, 0]], mapped[[a, 1]]);
        let (bx, by) = frame.project(mapped[[b, 0]], mapped[[b, 1]]);
        let _ = write!(path, "M{ax:.2} {ay:.2}L{bx:.2} {by:.2}");
    }
    let _ = writeln!(
        out,
        r##"<path d="{path}" fill="none" stroke="#1f77b4" stroke-width="0.8" stroke-opacity="0.85"/>"##
    );
    for p in &mesh.points {
        let (px, py) = frame.project(p.mapped[0], p.mapped[1]);
        let _ = writeln!(
            out,
            r##"<circle cx="{px:.2}" cy="{py:.2}" r="0.9" fill="#1f77b4"/>"##
        );
    }
    Ok(())
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::viz::meshgrid::meshgrid_through;
    use ndarray::array;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample_column(title: &str, seed: u64, with_interp: bool) -> PanelColumn {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = Matrix::from_shape_fn((200, 2), |_| rng.random_range(-2.0..2.0));
        let interpolants = if with_interp {
            Matrix::from_shape_fn((40, 2), |_| rng.random_range(-1.5..1.5))
        } else {
            Matrix::zeros((0, 2))
        };
        let mesh_anchor = array![[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];
        let z_mesh = meshgrid_through(|m| Ok(m.mapv(|v| v * 1.1)), &mesh_anchor, 6).unwrap();
        let x_mesh = meshgrid_through(|m| Ok(m.mapv(|v| v * 0.9 + 0.1)), &mesh_anchor, 6).unwrap();
        let recon = data.mapv(|v| 0.95 * v);
        PanelColumn {
            title: title.into(),
            data,
            interpolants,
            z_mesh,
            x_mesh,
            recon,
        }
    }

    #[test]
    fn panel_count_is_four_per_model_column() {
        let columns = vec![
            sample_column("ae", 1, true),
            sample_column("vae", 2, true),
            sample_column("gaia", 3, true),
        ];
        let svg = render_figure(&columns, &FigureStyle::default()).unwrap();
        let panels = svg.matches(r#"<g class="panel""#).count();
        assert_eq!(panels, columns.len() * 4);
        assert_eq!(svg.matches("<svg").count(), 1);
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(!svg.contains("NaN"));
    }

    #[test]
    fn identical_inputs_render_identical_bytes() {
        let make = || vec![sample_column("gaia", 7, true), sample_column("ae", 8, true)];
        let a = render_figure(&make(), &FigureStyle::default()).unwrap();
        let b = render_figure(&make(), &FigureStyle::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_interpolations_degrade_to_the_heatmap_alone() {
        let with = render_figure(&[sample_column("m", 4, true)], &FigureStyle::default()).unwrap();
        let without =
            render_figure(&[sample_column("m", 4, false)], &FigureStyle::default()).unwrap();
        assert!(with.contains(r#"class="interp""#));
        assert!(!without.contains(r#"class="interp""#));
        assert_eq!(without.matches(r#"<g class="panel""#).count(), 4);
    }

    #[test]
    fn empty_data_is_an_error() {
        let mut col = sample_column("m", 5, true);
        col.data = Matrix::zeros((0, 2));
        assert!(render_figure(&[col], &FigureStyle::default()).is_err());
        let mut col2 = sample_column("m", 5, true);
        col2.recon = Matrix::zeros((0, 2));
        assert!(render_figure(&[col2], &FigureStyle::default()).is_err());
        assert!(render_figure(&[], &FigureStyle::default()).is_err());
    }

    #[test]
    fn heatmap_bins_every_point_once() {
        // 4 points in a unit box, 2x2 bins: each lands in a distinct bin and
        // all rects share the same fill (equal counts -> equal color).
        let style = FigureStyle {
            bins: 2,
            ..FigureStyle::default()
        };
        let data = array![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let frame = Frame::around(&data, &style).unwrap();
        let mut out = String::new();
        heatmap(&mut out, &data, &frame, &style);
        let rects = out.matches("<rect").count();
        assert_eq!(rects, 4);
        let first_fill = out
            .split("fill=\"")
            .nth(1)
            .and_then(|s| s.split('"').next())
            .unwrap()
            .to_string();
        assert_eq!(out.matches(&format!("fill=\"{first_fill}\"")).count(), 4);
    }

    #[test]
    fn titles_are_escaped() {
        let mut col = sample_column("a<b&c", 6, false);
        col.title = "a<b&c".into();
        let svg = render_figure(&[col], &FigureStyle::default()).unwrap();
        assert!(svg.contains("a&lt;b&amp;c"));
        assert!(!svg.contains("a<b&c"));
    }

    #[test]
    fn style_validation_rejects_nonsense() {
        let col = sample_column("m", 9, true);
        for style in [
            FigureStyle {
                panel_size: 10.0,
                ..FigureStyle::default()
            },
            FigureStyle {
                bins: 1,
                ..FigureStyle::default()
            },
            FigureStyle {
                margin_frac: 1.5,
                ..FigureStyle::default()
            },
        ] {
            assert!(render_figure(std::slice::from_ref(&col), &style).is_err());
        }
    }
}
