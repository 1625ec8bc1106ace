//! Latent interpolation sampling: each batch row is blended with a partner
//! row using a Gaussian-distributed coefficient centered at the midpoint.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{CoreError, Result};
use crate::tensor::Matrix;

/// One sampled interpolation plan: row `i` blends with row `partner[i]`
/// using coefficient `betas[i]` on itself. Keeping the plan around (rather
/// than only the blended matrix) lets the backward pass route gradients to
/// both endpoints.
#[derive(Debug, Clone)]
pub struct Interpolation {
    pub betas: Vec<f64>,
    pub partner: Vec<usize>,
}

impl Interpolation {
    /// Draws coefficients `beta_i ~ N(mu, sigma)` and pairs row `i` with row
    /// `(i + 1) mod rows`, which guarantees a distinct partner for every
    /// row. `sigma == 0` short-circuits to exactly `mu` so the degenerate
    /// case produces exact midpoints for `mu = 0.5`. Coefficients may land
    /// outside [0, 1]; interpolations are allowed to overshoot endpoints.
    pub fn sample<R: Rng>(rows: usize, mu: f64, sigma: f64, rng: &mut R) -> Result<Self> {
        if rows < 2 {
            return Err(CoreError::InvalidInput(format!(
                "interpolation needs >= 2 rows, got {rows}"
            )));
        }
        if !mu.is_finite() || !sigma.is_finite() || sigma < 0.0 {
            return Err(CoreError::InvalidInput(format!(
                "interpolation coefficients need finite mu and sigma >= 0, got mu={mu} sigma={sigma}"
            )));
        }
        let betas = if sigma == 0.0 {
            vec![mu; rows]
        } else {
            let normal = Normal::new(mu, sigma).expect("validated parameters");
            (0..rows).map(|_| normal.sample(rng)).collect()
        };
        let partner = (0..rows).map(|i| (i + 1) % rows).collect();
        Ok(Interpolation { betas, partner })
    }

    /// Blends `z` by the plan: `out_i = beta_i * z_i + (1 - beta_i) * z_p(i)`.
    pub fn apply(&self, z: &Matrix) -> Result<Matrix> {
        if z.nrows() != self.betas.len() {
            return Err(CoreError::ShapeMismatch {
                context: "interpolation apply",
                expected: format!("{} rows", self.betas.len()),
                got: format!("{} rows", z.nrows()),
            });
        }
        let mut out = Matrix::zeros(z.dim());
        for i in 0..z.nrows() {
            let b = self.betas[i];
            let p = self.partner[i];
            for c in 0..z.ncols() {
                out[[i, c]] = b * z[[i, c]] + (1.0 - b) * z[[p, c]];
            }
        }
        Ok(out)
    }

    /// Routes a gradient with respect to the blended rows back to `z`:
    /// row `i` of `z` receives `beta_i * g_i` plus `(1 - beta_j) * g_j` from
    /// every row `j` it partners.
    pub fn backward(&self, g_blend: &Matrix) -> Result<Matrix> {
        if g_blend.nrows() != self.betas.len() {
            return Err(CoreError::ShapeMismatch {
                context: "interpolation backward",
                expected: format!("{} rows", self.betas.len()),
                got: format!("{} rows", g_blend.nrows()),
            });
        }
        let mut out = Matrix::zeros(g_blend.dim());
        for i in 0..g_blend.nrows() {
            let b = self.betas[i];
            let p = self.partner[i];
            for c in 0..g_blend.ncols() {
                out[[i, c]] += b * g_blend[[i, c]];
                out[[p, c]] += (1.0 - b) * g_blend[[i, c]];
            }
        }
        Ok(out)
    }
}

/// Convenience wrapper: sample a plan and immediately blend `z` with it.
pub fn sample_interpolations<R: Rng>(
    z: &Matrix,
    mu: f64,
    sigma: f64,
    rng: &mut R,
) -> Result<Matrix> {
    Interpolation::sample(z.nrows(), mu, sigma, rng)?.apply(z)
}
