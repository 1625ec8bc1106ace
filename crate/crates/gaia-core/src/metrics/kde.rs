//! Gaussian kernel density estimation with per-dimension Scott bandwidths,
//! used as the log-likelihood proxy for "samples fall within the data
//! distribution".

use crate::error::{CoreError, Result};
use crate::tensor::{ensure_finite, Matrix};

/// A fitted product-kernel Gaussian KDE: an equal-weight mixture with one
/// axis-aligned Gaussian per reference point.
#[derive(Debug, Clone)]
pub struct KdeModel {
    reference: Matrix,
    bandwidth: Vec<f64>,
}

/// Fits a KDE to `reference` (rows are points). Bandwidth per dimension `j`
/// follows Scott's rule, `std_j * n^(-1/(d+4))`, with the sample standard
/// deviation (n-1 denominator).
pub fn kde_fit(reference: &Matrix) -> Result<KdeModel> {
    let (n, d) = reference.dim();
    if n < 2 {
        return Err(CoreError::InvalidInput(format!(
            "KDE needs >= 2 reference points, got {n}"
        )));
    }
    ensure_finite("kde reference", reference)?;
    let factor = (n as f64).powf(-1.0 / (d as f64 + 4.0));
    let mut bandwidth = Vec::with_capacity(d);
    for j in 0..d {
        let col = reference.column(j);
        let mean = col.sum() / n as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
        let h = var.sqrt() * factor;
        if !(h > 0.0) {
            return Err(CoreError::Degenerate(format!(
                "reference dimension {j} has zero variance"
            )));
        }
        bandwidth.push(h);
    }
    Ok(KdeModel {
        reference: reference.clone(),
        bandwidth,
    })
}

impl KdeModel {
    pub fn bandwidth(&self) -> &[f64] {
        &self.bandwidth
    }

    pub fn reference_count(&self) -> usize {
        self.reference.nrows()
    }

    /// Log-density of a single point under the mixture, via log-sum-exp so
    /// far-out points underflow gracefully instead of hitting log(0).
    pub fn log_density(&self, point: &[f64]) -> Result<f64> {
        let (n, d) = self.reference.dim();
        if point.len() != d {
            return Err(CoreError::ShapeMismatch {
                context: "kde log_density",
                expected: format!("{d} coordinates"),
                got: format!("{} coordinates", point.len()),
            });
        }
        let mut exponents = Vec::with_capacity(n);
        for row in self.reference.rows() {
            let mut e = 0.0;
            for j in 0..d {
                let u = (point[j] - row[j]) / self.bandwidth[j];
                e -= 0.5 * u * u;
            }
            exponents.push(e);
        }
        let max = exponents.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = exponents.iter().map(|e| (e - max).exp()).sum();
        let log_norm: f64 = self.bandwidth.iter().map(|h| h.ln()).sum::<f64>()
            + 0.5 * d as f64 * (2.0 * std::f64::consts::PI).ln()
            + (n as f64).ln();
        Ok(max + sum.ln() - log_norm)
    }
}

/// Total log-likelihood of `samples` under the fitted model: the sum of
/// per-sample log-densities.
pub fn kde_loglik(model: &KdeModel, samples: &Matrix) -> Result<f64> {
    ensure_finite("kde samples", samples)?;
    let mut total = 0.0;
    let mut point = Vec::new();
    for row in samples.rows() {
        point.clear();
        point.extend(row.iter());
        total += model.log_density(&point)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent oracle: evaluate the 5-kernel 1-D mixture density by a
    /// direct probability-space sum, no log-sum-exp.
    #[test]
    fn one_dimensional_mixture_matches_hand_sum() {
        let reference = array![[0.0], [1.0], [2.0], [4.0], [7.0]];
        let model = kde_fit(&reference).unwrap();
        let n = 5.0f64;
        // Scott bandwidth recomputed by hand: std * n^(-1/5).
        let mean = 14.0 / 5.0;
        let var = reference
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / 4.0;
        let h = var.sqrt() * n.powf(-0.2);
        assert!((model.bandwidth()[0] - h).abs() < 1e-15);

        let point = 1.7;
        let mut density = 0.0;
        for r in reference.iter() {
            let u = (point - r) / h;
            density += (-0.5 * u * u).exp() / (h * (2.0 * std::f64::consts::PI).sqrt());
        }
        density /= n;
        let got = model.log_density(&[point]).unwrap();
        assert!(
            (got - density.ln()).abs() < 1e-12,
            "log-density {got} vs oracle {}",
            density.ln()
        );

        // kde_loglik over two samples is the sum of the two log-densities.
        let samples = array![[1.7], [4.2]];
        let total = kde_loglik(&model, &samples).unwrap();
        let expected =
            model.log_density(&[1.7]).unwrap() + model.log_density(&[4.2]).unwrap();
        assert_eq!(total, expected);
    }

    #[test]
    fn in_distribution_samples_score_higher_than_shifted_ones() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let reference = Matrix::from_shape_fn((300, 2), |_| rng.random_range(-1.0..1.0));
        let model = kde_fit(&reference).unwrap();
        let inside = kde_loglik(&model, &reference).unwrap();
        let shifted = kde_loglik(&model, &reference.mapv(|v| v + 50.0)).unwrap();
        assert!(inside.is_finite() && shifted.is_finite());
        assert!(inside > shifted);
    }

    #[test]
    fn gaussian_tail_separation_exceeds_one_hundred() {
        // Single tight cluster: a sample at the mean vs 100 bandwidths away.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let reference = Matrix::from_shape_fn((200, 1), |_| 0.01 * rng.random_range(-1.0..1.0f64));
        let model = kde_fit(&reference).unwrap();
        let sigma = 0.01 / 3.0f64.sqrt(); // uniform(-a,a) std = a/sqrt(3)
        let at_mean = model.log_density(&[0.0]).unwrap();
        let far = model.log_density(&[100.0 * sigma]).unwrap();
        assert!(
            at_mean - far > 100.0,
            "difference {} too small",
            at_mean - far
        );
    }

    #[test]
    fn loglik_is_order_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let reference = Matrix::from_shape_fn((64, 2), |_| rng.random_range(-2.0..2.0));
        let samples = Matrix::from_shape_fn((32, 2), |_| rng.random_range(-2.0..2.0));
        let rev_ref = reference.slice(ndarray::s![..;-1, ..]).to_owned();
        let rev_smp = samples.slice(ndarray::s![..;-1, ..]).to_owned();
        let a = kde_loglik(&kde_fit(&reference).unwrap(), &samples).unwrap();
        let b = kde_loglik(&kde_fit(&rev_ref).unwrap(), &rev_smp).unwrap();
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }

    #[test]
    fn degenerate_references_are_rejected() {
        assert!(kde_fit(&Matrix::zeros((1, 2))).is_err());
        assert!(matches!(
            kde_fit(&Matrix::zeros((10, 2))),
            Err(CoreError::Degenerate(_))
        ));
        let mut constant_col = Matrix::zeros((10, 2));
        for (i, mut row) in constant_col.rows_mut().into_iter().enumerate() {
            row[0] = i as f64;
        }
        assert!(kde_fit(&constant_col).is_err());

        let ok = Matrix::from_shape_fn((10, 2), |(r, c)| (r * 2 + c) as f64);
        let model = kde_fit(&ok).unwrap();
        assert!(model.log_density(&[0.0]).is_err()); // wrong dimension count
    }
}
