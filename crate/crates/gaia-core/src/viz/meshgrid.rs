//! Uniform lattices restricted to the convex hull of a point cloud and pushed
//! through a model map, showing how the map warps space.

use crate::error::{CoreError, Result};
use crate::tensor::Matrix;
use crate::train::TrainedModel;
use crate::viz::geometry::convex_hull;
use std::collections::HashMap;

/// One retained lattice site: its integer grid coordinates, its location in
/// the source space, and its image under the map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshPoint {
    pub gi: usize,
    pub gj: usize,
    pub source: [f64; 2],
    pub mapped: [f64; 2],
}

/// A hull-restricted lattice and its image. Points are stored row-major in
/// `(gi, gj)` order, so output is deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshGrid {
    pub resolution: usize,
    pub points: Vec<MeshPoint>,
}

impl MeshGrid {
    /// Index pairs of lattice neighbors that were both retained, for drawing
    /// grid lines. Each undirected neighbor pair appears once.
    pub fn segments(&self) -> Vec<(usize, usize)> {
        let lookup: HashMap<(usize, usize), usize> = self
            .points
            .iter()
            .enumerate()
            .map(|(idx, p)| ((p.gi, p.gj), idx))
            .collect();
        let mut segments = Vec::new();
        for (idx, p) in self.points.iter().enumerate() {
            if let Some(&right) = lookup.get(&(p.gi + 1, p.gj)) {
                segments.push((idx, right));
            }
            if let Some(&up) = lookup.get(&(p.gi, p.gj + 1)) {
                segments.push((idx, up));
            }
        }
        segments
    }

    /// CSV sidecar: `grid_i,grid_j,zx,zy,xx,xy` with source coordinates under
    /// `z` and mapped coordinates under `x`. Floats round-trip exactly.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("grid_i,grid_j,zx,zy,xx,xy\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                p.gi, p.gj, p.source[0], p.source[1], p.mapped[0], p.mapped[1]
            ));
        }
        out
    }

    /// Mapped points as an `n x 2` matrix.
    pub fn mapped_matrix(&self) -> Matrix {
        let mut m = Matrix::zeros((self.points.len(), 2));
        for (i, p) in self.points.iter().enumerate() {
            m[[i, 0]] = p.mapped[0];
            m[[i, 1]] = p.mapped[1];
        }
        m
    }
}

/// Builds a `resolution x resolution` lattice over the bounding box of
/// `anchor`, keeps the sites inside the convex hull of `anchor`, and maps
/// them through `map` in one batch.
pub fn meshgrid_through<F>(map: F, anchor: &Matrix, resolution: usize) -> Result<MeshGrid>
where
    F: Fn(&Matrix) -> Result<Matrix>,
{
    if resolution < 2 {
        return Err(CoreError::InvalidInput(format!(
            "meshgrid resolution must be >= 2, got {resolution}"
        )));
    }
    let hull = convex_hull(anchor)?;
    let (min_x, max_x) = extent(anchor, 0);
    let (min_y, max_y) = extent(anchor, 1);
    let step_x = (max_x - min_x) / (resolution - 1) as f64;
    let step_y = (max_y - min_y) / (resolution - 1) as f64;

    let mut retained: Vec<(usize, usize, [f64; 2])> = Vec::new();
    for gi in 0..resolution {
        for gj in 0..resolution {
            let p = [min_x + gi as f64 * step_x, min_y + gj as f64 * step_y];
            if hull.contains(p) {
                retained.push((gi, gj, p));
            }
        }
    }
    // The hull always contains its own interior bbox lattice corners' mixture;
    // at resolution >= 2 at least the hull vertices' nearest sites survive,
    // but guard anyway.
    if retained.is_empty() {
        return Err(CoreError::Degenerate(
            "no lattice points fall inside the hull".into(),
        ));
    }

    let mut source = Matrix::zeros((retained.len(), 2));
    for (row, (_, _, p)) in retained.iter().enumerate() {
        source[[row, 0]] = p[0];
        source[[row, 1]] = p[1];
    }
    let mapped = map(&source)?;
    if mapped.dim() != source.dim() {
        return Err(CoreError::ShapeMismatch {
            context: "meshgrid map",
            expected: format!("{}x2 output", source.nrows()),
            got: format!("{}x{} output", mapped.nrows(), mapped.ncols()),
        });
    }
    let points = retained
        .into_iter()
        .enumerate()
        .map(|(row, (gi, gj, p))| MeshPoint {
            gi,
            gj,
            source: p,
            mapped: [mapped[[row, 0]], mapped[[row, 1]]],
        })
        .collect();
    Ok(MeshGrid { resolution, points })
}

fn extent(m: &Matrix, col: usize) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in m.column(col) {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    (lo, hi)
}

/// Lattice over the hull of encoded latents `z`, decoded back to data space.
pub fn latent_meshgrid(model: &TrainedModel, z: &Matrix, resolution: usize) -> Result<MeshGrid> {
    meshgrid_through(|m| model.decode(m), z, resolution)
}

/// Lattice over the hull of data `x`, passed through encode-then-decode.
pub fn data_meshgrid(model: &TrainedModel, x: &Matrix, resolution: usize) -> Result<MeshGrid> {
    meshgrid_through(|m| model.reconstruct(m), x, resolution)
}
