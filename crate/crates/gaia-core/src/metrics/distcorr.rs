//! Pearson correlation between pairwise point distances in two spaces.
//!
//! For matched row sets X and Z this measures how well relative geometry is
//! preserved: r close to 1 means points that are far apart in X are also far
//! apart in Z. Pair count grows quadratically, so beyond `max_pairs` the pairs
//! are subsampled without replacement using a seeded generator.

use crate::error::{CoreError, Result};
use crate::tensor::{ensure_finite, Matrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Pair budget used by the evaluation pipeline.
pub const DEFAULT_MAX_PAIRS: usize = 200_000;

/// Correlation between `dist(x_i, x_j)` and `dist(z_i, z_j)` over unordered
/// index pairs `i < j`. Requires matched row counts (>= 3 rows) and returns a
/// value clamped to [-1, 1]. Constant distances in either space are an error.
pub fn pairwise_distance_correlation(
    x: &Matrix,
    z: &Matrix,
    max_pairs: usize,
    seed: u64,
) -> Result<f64> {
    let n = x.nrows();
    if z.nrows() != n {
        return Err(CoreError::ShapeMismatch {
            context: "pairwise_distance_correlation",
            expected: format!("{n} rows"),
            got: format!("{} rows", z.nrows()),
        });
    }
    if n < 3 {
        return Err(CoreError::InvalidInput(format!(
            "need >= 3 rows to correlate pair distances, got {n}"
        )));
    }
    if max_pairs == 0 {
        return Err(CoreError::InvalidInput("max_pairs must be >= 1".into()));
    }
    ensure_finite("distance correlation X", x)?;
    ensure_finite("distance correlation Z", z)?;

    let total = n * (n - 1) / 2;
    let mut dx = Vec::new();
    let mut dz = Vec::new();
    if total <= max_pairs {
        dx.reserve(total);
        dz.reserve(total);
        for i in 0..n {
            for j in (i + 1)..n {
                dx.push(row_dist(x, i, j));
                dz.push(row_dist(z, i, j));
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let picks = rand::seq::index::sample(&mut rng, total, max_pairs);
        dx.reserve(max_pairs);
        dz.reserve(max_pairs);
        for k in picks {
            let (i, j) = unrank_pair(k, n);
            dx.push(row_dist(x, i, j));
            dz.push(row_dist(z, i, j));
        }
    }
    pearson(&dx, &dz)
}

fn row_dist(m: &Matrix, i: usize, j: usize) -> f64 {
    m.row(i)
        .iter()
        .zip(m.row(j).iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Maps a flat index `k` in `[0, n(n-1)/2)` to the k-th pair `(i, j)`, `i < j`,
/// in lexicographic order. Closed-form inverse of the triangular offset
/// `start(i) = i*n - i*(i+1)/2`, with an integer fix-up for rounding.
fn unrank_pair(k: usize, n: usize) -> (usize, usize) {
    let start = |i: usize| i * n - i * (i + 1) / 2;
    let nf = n as f64;
    let disc = (2.0 * nf - 1.0) * (2.0 * nf - 1.0) - 8.0 * k as f64;
    let mut i = (((2.0 * nf - 1.0) - disc.max(0.0).sqrt()) / 2.0).floor() as usize;
    i = i.min(n - 2);
    while i > 0 && start(i) > k {
        i -= 1;
    }
    while start(i + 1) <= k {
        i += 1;
    }
    let j = k - start(i) + i + 1;
    (i, j)
}

fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        let da = x - ma;
        let db = y - mb;
        cov += da * db;
        va += da * da;
        vb += db * db;
    }
    if va <= 0.0 || vb <= 0.0 {
        return Err(CoreError::Degenerate(
            "pair distances are constant; correlation undefined".into(),
        ));
    }
    Ok((cov / (va.sqrt() * vb.sqrt())).clamp(-1.0, 1.0))
}
