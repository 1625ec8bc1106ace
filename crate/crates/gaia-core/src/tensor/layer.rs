use ndarray::Array1;
use rand::{Rng, RngExt};

use super::{Activation, Matrix};
use crate::error::{CoreError, Result};

/// One fully connected layer: `out = activation(x . weights + bias)`.
///
/// `weights` is `in_dim x out_dim` so a batch of row vectors multiplies from
/// the left.
#[derive(Debug, Clone)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    /// Builds a layer with fan-in-scaled uniform weights, `U(-l, l)` with
    /// `l = sqrt(6 / in_dim)`, and zero bias. Draws come from `rng` in
    /// row-major order, so a seeded generator reproduces the layer exactly.
    pub fn new_seeded<R: Rng>(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(CoreError::InvalidInput(format!(
                "layer dimensions must be positive, got {in_dim}x{out_dim}"
            )));
        }
        let limit = (6.0 / in_dim as f64).sqrt();
        let weights =
            Matrix::from_shape_fn((in_dim, out_dim), |_| rng.random_range(-limit..limit));
        Ok(DenseLayer {
            weights,
            bias: Array1::zeros(out_dim),
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn seeded_init_is_reproducible_and_bounded() {
        let mut a = ChaCha8Rng::seed_from_u64(11);
        let mut b = ChaCha8Rng::seed_from_u64(11);
        let la = DenseLayer::new_seeded(24, 8, Activation::LeakyRelu, &mut a).unwrap();
        let lb = DenseLayer::new_seeded(24, 8, Activation::LeakyRelu, &mut b).unwrap();
        assert_eq!(la.weights, lb.weights);
        assert!(la.bias.iter().all(|&v| v == 0.0));
        let limit = (6.0f64 / 24.0).sqrt();
        assert!(la.weights.iter().all(|v| v.abs() < limit));
        assert_eq!(la.param_count(), 24 * 8 + 8);
    }

    #[test]
    fn rejects_empty_dims() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(DenseLayer::new_seeded(0, 4, Activation::Relu, &mut rng).is_err());
        assert!(DenseLayer::new_seeded(4, 0, Activation::Relu, &mut rng).is_err());
    }
}
