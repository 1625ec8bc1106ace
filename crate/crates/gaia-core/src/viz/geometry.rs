//! Convex-hull geometry for restricting meshgrids to the region actually
//! covered by encoded data.

use crate::error::{CoreError, Result};
use crate::tensor::{ensure_finite, Matrix};

/// A strictly convex polygon with counter-clockwise vertex order.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon2D {
    vertices: Vec<[f64; 2]>,
}

impl Polygon2D {
    /// Validates CCW orientation and strict convexity (no collinear triples,
    /// which also rules out self-intersection and repeated vertices).
    pub fn new(vertices: Vec<[f64; 2]>) -> Result<Self> {
        let n = vertices.len();
        if n < 3 {
            return Err(CoreError::InvalidInput(format!(
                "polygon needs >= 3 vertices, got {n}"
            )));
        }
        for v in &vertices {
            if !v[0].is_finite() || !v[1].is_finite() {
                return Err(CoreError::NonFinite("polygon vertex"));
            }
        }
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let c = vertices[(i + 2) % n];
            if cross(a, b, c) <= 0.0 {
                return Err(CoreError::InvalidInput(format!(
                    "vertices are not in strictly convex CCW order at index {i}"
                )));
            }
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    /// Enclosed area via the shoelace formula; positive for CCW polygons.
    pub fn area(&self) -> f64 {
        let v = &self.vertices;
        let n = v.len();
        let mut twice = 0.0;
        for i in 0..n {
            let j = (i + 1) % n;
            twice += v[i][0] * v[j][1] - v[j][0] * v[i][1];
        }
        0.5 * twice
    }

    /// True iff the point lies inside or on the boundary. Uses half-plane
    /// tests with a small relative tolerance so points that were dropped from
    /// the hull as collinear still count as members.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let v = &self.vertices;
        let n = v.len();
        for i in 0..n {
            let a = v[i];
            let b = v[(i + 1) % n];
            let ex = b[0] - a[0];
            let ey = b[1] - a[1];
            let wx = p[0] - a[0];
            let wy = p[1] - a[1];
            let cross = ex * wy - ey * wx;
            let scale = (ex.abs() + ey.abs()) * (wx.abs() + wy.abs() + ex.abs() + ey.abs());
            if cross < -1e-12 * scale {
                return false;
            }
        }
        true
    }
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Free-function form of [`Polygon2D::contains`]; boundary counts as inside.
pub fn point_in_polygon(p: [f64; 2], poly: &Polygon2D) -> bool {
    poly.contains(p)
}

/// Smallest convex polygon containing all rows of `points` (n x 2), built with
/// Andrew's monotone chain. Interior and collinear-boundary points are
/// dropped; all-collinear input is degenerate.
pub fn convex_hull(points: &Matrix) -> Result<Polygon2D> {
    let (n, d) = points.dim();
    if d != 2 {
        return Err(CoreError::ShapeMismatch {
            context: "convex_hull",
            expected: "2 columns".into(),
            got: format!("{d} columns"),
        });
    }
    if n < 3 {
        return Err(CoreError::InvalidInput(format!(
            "convex hull needs >= 3 points, got {n}"
        )));
    }
    ensure_finite("convex_hull points", points)?;

    let mut pts: Vec<[f64; 2]> = points.rows().into_iter().map(|r| [r[0], r[1]]).collect();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();

    // Lower then upper chain; popping on cross <= 0 keeps only strict left
    // turns, giving a CCW, strictly convex vertex cycle.
    let build = |iter: &mut dyn Iterator<Item = [f64; 2]>| {
        let mut chain: Vec<[f64; 2]> = Vec::new();
        for p in iter {
            while chain.len() >= 2
                && cross(chain[chain.len() - 2], chain[chain.len() - 1], p) <= 0.0
            {
                chain.pop();
            }
            chain.push(p);
        }
        chain
    };
    let mut lower = build(&mut pts.iter().copied());
    let mut upper = build(&mut pts.iter().rev().copied());

    // Each chain ends where the other begins; drop the shared endpoints.
    lower.pop();
    upper.pop();
    lower.extend(upper);
    Polygon2D::new(lower).map_err(|_| {
        CoreError::Degenerate("input points are collinear; hull is not a polygon".into())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cloud(n: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_shape_fn((n, 2), |_| rng.random_range(-5.0..5.0))
    }

    /// O(n^3) oracle: a directed edge (a, b) is on the CCW hull iff every
    /// other point lies strictly to its left. Chains the edges into a cycle.
    fn brute_force_hull(points: &Matrix) -> Vec<[f64; 2]> {
        let pts: Vec<[f64; 2]> = points.rows().into_iter().map(|r| [r[0], r[1]]).collect();
        let n = pts.len();
        let mut next = std::collections::HashMap::new();
        for i in 0..n {
            'pair: for j in 0..n {
                if i == j {
                    continue;
                }
                for (k, p) in pts.iter().enumerate() {
                    if k == i || k == j {
                        continue;
                    }
                    if cross(pts[i], pts[j], *p) <= 0.0 {
                        continue 'pair;
                    }
                }
                next.insert(i, j);
            }
        }
        let start = *next
            .keys()
            .min_by(|a, b| pts[**a][0].total_cmp(&pts[**b][0]).then(pts[**a][1].total_cmp(&pts[**b][1])))
            .unwrap();
        let mut cycle = vec![pts[start]];
        let mut cur = next[&start];
        while cur != start {
            cycle.push(pts[cur]);
            cur = next[&cur];
        }
        cycle
    }

    /// Winding-number oracle for point membership (nonzero rule).
    fn winding_contains(poly: &Polygon2D, p: [f64; 2]) -> bool {
        let v = poly.vertices();
        let n = v.len();
        let mut wn = 0i32;
        for i in 0..n {
            let a = v[i];
            let b = v[(i + 1) % n];
            if a[1] <= p[1] {
                if b[1] > p[1] && cross(a, b, p) > 0.0 {
                    wn += 1;
                }
            } else if b[1] <= p[1] && cross(a, b, p) < 0.0 {
                wn -= 1;
            }
        }
        wn != 0
    }

    #[test]
    fn square_with_interior_point_yields_the_square() {
        let pts = array![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.4, 0.6]];
        let hull = convex_hull(&pts).unwrap();
        assert_eq!(
            hull.vertices(),
            &[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]
        );
        assert!((hull.area() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn circle_points_are_all_hull_vertices() {
        let n = 12;
        let pts = Matrix::from_shape_fn((n, 2), |(i, c)| {
            let theta = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            if c == 0 {
                theta.cos()
            } else {
                theta.sin()
            }
        });
        let hull = convex_hull(&pts).unwrap();
        assert_eq!(hull.vertices().len(), n);
    }

    #[test]
    fn hull_matches_brute_force_oracle_on_random_clouds() {
        for seed in 0..5 {
            let pts = random_cloud(100, seed);
            let hull = convex_hull(&pts).unwrap();
            let oracle = brute_force_hull(&pts);
            assert_eq!(hull.vertices(), oracle.as_slice(), "seed {seed}");
        }
    }

    #[test]
    fn hull_contains_every_input_point() {
        for seed in 10..14 {
            let pts = random_cloud(200, seed);
            let hull = convex_hull(&pts).unwrap();
            for row in pts.rows() {
                assert!(hull.contains([row[0], row[1]]));
            }
        }
    }

    #[test]
    fn hull_area_dominates_all_inscribed_triangles() {
        let pts = random_cloud(60, 20);
        let hull = convex_hull(&pts).unwrap();
        let area = hull.area();
        let v: Vec<[f64; 2]> = pts.rows().into_iter().map(|r| [r[0], r[1]]).collect();
        for i in 0..v.len() {
            for j in (i + 1)..v.len() {
                for k in (j + 1)..v.len() {
                    let tri = 0.5 * cross(v[i], v[j], v[k]).abs();
                    assert!(area >= tri - 1e-12);
                }
            }
        }
    }

    #[test]
    fn membership_agrees_with_winding_number_oracle() {
        let hull = convex_hull(&random_cloud(40, 30)).unwrap();
        let probes = random_cloud(1000, 31).mapv(|v| v * 1.6);
        let mut inside = 0;
        for row in probes.rows() {
            let p = [row[0], row[1]];
            let a = hull.contains(p);
            let b = winding_contains(&hull, p);
            assert_eq!(a, b, "disagreement at {p:?}");
            inside += usize::from(a);
        }
        // Sanity: the probe cloud straddles the hull boundary.
        assert!(inside > 50 && inside < 950, "inside = {inside}");
    }

    #[test]
    fn triangle_centroid_is_inside_and_far_points_are_outside() {
        let tri = convex_hull(&array![[0.0, 0.0], [4.0, 0.0], [0.0, 3.0]]).unwrap();
        assert!(tri.contains([4.0 / 3.0, 1.0]));
        assert!(!tri.contains([10.0, 10.0]));
        assert!(!tri.contains([-8.0, 0.0]));
        // Boundary counts as inside: a vertex and an edge midpoint.
        assert!(tri.contains([0.0, 0.0]));
        assert!(tri.contains([2.0, 0.0]));
    }

    #[test]
    fn collinear_and_undersized_inputs_are_rejected() {
        let line = array![[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]];
        assert!(matches!(convex_hull(&line), Err(CoreError::Degenerate(_))));
        assert!(convex_hull(&array![[0.0, 0.0], [1.0, 0.0]]).is_err());
        assert!(convex_hull(&Matrix::zeros((5, 3))).is_err());
        // Duplicated points collapse to fewer than three distinct locations.
        let dup = array![[1.0, 1.0], [1.0, 1.0], [2.0, 2.0], [2.0, 2.0]];
        assert!(convex_hull(&dup).is_err());
    }

    #[test]
    fn polygon_constructor_enforces_ccw_convexity() {
        let ccw = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        assert!(Polygon2D::new(ccw.clone()).is_ok());
        let cw: Vec<[f64; 2]> = ccw.into_iter().rev().collect();
        assert!(Polygon2D::new(cw).is_err());
        assert!(Polygon2D::new(vec![[0.0, 0.0], [1.0, 0.0]]).is_err());
        // Collinear triple on the boundary is rejected.
        assert!(Polygon2D::new(vec![
            [0.0, 0.0],
            [1.0, 0.0],
            [2.0, 0.0],
            [1.0, 1.0]
        ])
        .is_err());
        assert!(Polygon2D::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, f64::NAN]]).is_err());
    }
}
