//! Model wrappers around [`MlpNetwork`]: a plain autoencoder, a variational
//! autoencoder, and the adversarial pair in which both the generator and the
//! discriminator are themselves autoencoders.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::tensor::{Activation, Matrix, MlpNetwork};

/// Architecture shared by every model: `hidden_layers` dense layers of
/// `hidden_units` each between the data space and the latent space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub latent_dim: usize,
    pub hidden_layers: usize,
    pub hidden_units: usize,
}

impl Default for ModelConfig {
    /// 2-D data, 2-D latent, six hidden layers of 256 units.
    fn default() -> Self {
        ModelConfig {
            input_dim: 2,
            latent_dim: 2,
            hidden_layers: 6,
            hidden_units: 256,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("input_dim", self.input_dim),
            ("latent_dim", self.latent_dim),
            ("hidden_layers", self.hidden_layers),
            ("hidden_units", self.hidden_units),
        ] {
            if v == 0 {
                return Err(CoreError::InvalidInput(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    /// Width list for an encoder whose final layer emits `out` values.
    fn dims(&self, from: usize, to: usize) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden_layers + 2);
        dims.push(from);
        dims.extend(std::iter::repeat(self.hidden_units).take(self.hidden_layers));
        dims.push(to);
        dims
    }

    fn build_net<R: Rng>(&self, from: usize, to: usize, rng: &mut R) -> Result<MlpNetwork> {
        MlpNetwork::from_dims(
            &self.dims(from, to),
            Activation::LeakyRelu,
            Activation::Identity,
            rng,
        )
    }
}

/// Encoder/decoder pair trained for reconstruction.
#[derive(Debug, Clone)]
pub struct Autoencoder {
    pub encoder: MlpNetwork,
    pub decoder: MlpNetwork,
}

impl Autoencoder {
    pub fn build<R: Rng>(config: &ModelConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        Ok(Autoencoder {
            encoder: config.build_net(config.input_dim, config.latent_dim, rng)?,
            decoder: config.build_net(config.latent_dim, config.input_dim, rng)?,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.output_dim()
    }

    pub fn encode(&self, x: &Matrix) -> Result<Matrix> {
        self.encoder.apply(x)
    }

    pub fn decode(&self, z: &Matrix) -> Result<Matrix> {
        self.decoder.apply(z)
    }

    pub fn reconstruct(&self, x: &Matrix) -> Result<Matrix> {
        self.decode(&self.encode(x)?)
    }

    pub fn param_count(&self) -> usize {
        self.encoder.param_count() + self.decoder.param_count()
    }
}

/// Variational autoencoder. The encoder emits `2 * latent_dim` values per
/// sample: the posterior mean followed by the log-variance.
#[derive(Debug, Clone)]
pub struct VaeModel {
    pub encoder: MlpNetwork,
    pub decoder: MlpNetwork,
    latent_dim: usize,
}

impl VaeModel {
    pub fn build<R: Rng>(config: &ModelConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        Ok(VaeModel {
            encoder: config.build_net(config.input_dim, 2 * config.latent_dim, rng)?,
            decoder: config.build_net(config.latent_dim, config.input_dim, rng)?,
            latent_dim: config.latent_dim,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    /// Posterior parameters `(mean, log_variance)`, each `batch x latent_dim`.
    pub fn encode_params(&self, x: &Matrix) -> Result<(Matrix, Matrix)> {
        let both = self.encoder.apply(x)?;
        let k = self.latent_dim;
        Ok((
            both.slice(ndarray::s![.., ..k]).to_owned(),
            both.slice(ndarray::s![.., k..]).to_owned(),
        ))
    }

    /// Deterministic encoding: the posterior mean.
    pub fn encode(&self, x: &Matrix) -> Result<Matrix> {
        Ok(self.encode_params(x)?.0)
    }

    /// Reparameterized draw `z = mean + exp(log_var / 2) * eps`,
    /// `eps ~ N(0, 1)`. Returns `(z, mean, log_var)`.
    pub fn sample<R: Rng>(&self, x: &Matrix, rng: &mut R) -> Result<(Matrix, Matrix, Matrix)> {
        let (mean, log_var) = self.encode_params(x)?;
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let eps = Matrix::from_shape_fn(mean.dim(), |_| normal.sample(rng));
        let z = &mean + &(log_var.mapv(|lv| (0.5 * lv).exp()) * &eps);
        Ok((z, mean, log_var))
    }

    pub fn decode(&self, z: &Matrix) -> Result<Matrix> {
        self.decoder.apply(z)
    }

    /// Mean-path reconstruction (no sampling noise).
    pub fn reconstruct(&self, x: &Matrix) -> Result<Matrix> {
        self.decode(&self.encode(x)?)
    }

    pub fn param_count(&self) -> usize {
        self.encoder.param_count() + self.decoder.param_count()
    }
}

/// The adversarial pair: a generator autoencoder that must also decode
/// convincing latent interpolations, and a discriminator autoencoder that
/// learns to reconstruct real data better than generated data.
#[derive(Debug, Clone)]
pub struct GaiaModel {
    pub generator: Autoencoder,
    pub discriminator: Autoencoder,
}

impl GaiaModel {
    /// Builds both autoencoders from one RNG stream (generator first).
    pub fn build<R: Rng>(config: &ModelConfig, rng: &mut R) -> Result<Self> {
        Ok(GaiaModel {
            generator: Autoencoder::build(config, rng)?,
            discriminator: Autoencoder::build(config, rng)?,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.generator.latent_dim()
    }

    pub fn param_count(&self) -> usize {
        self.generator.param_count() + self.discriminator.param_count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny() -> ModelConfig {
        ModelConfig {
            input_dim: 2,
            latent_dim: 2,
            hidden_layers: 2,
            hidden_units: 8,
        }
    }

    /// Frozen parameter count for the default architecture. Each half is
    /// 2*256 + 256 (first layer) + 5 * (256*256 + 256) (hidden) +
    /// 256*2 + 2 (final) = 330_242; an autoencoder is two halves.
    #[test]
    fn default_architecture_param_count_is_frozen() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ae = Autoencoder::build(&ModelConfig::default(), &mut rng).unwrap();
        assert_eq!(ae.encoder.param_count(), 330_242);
        assert_eq!(ae.param_count(), 660_484);
        assert_eq!(ae.encoder.input_dim(), 2);
        assert_eq!(ae.encoder.output_dim(), 2);
        assert_eq!(ae.decoder.input_dim(), 2);
        assert_eq!(ae.decoder.output_dim(), 2);
    }

    #[test]
    fn reconstruct_is_decode_of_encode() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ae = Autoencoder::build(&tiny(), &mut rng).unwrap();
        let x = Matrix::from_shape_fn((6, 2), |(r, c)| 0.1 * r as f64 - 0.2 * c as f64);
        let z = ae.encode(&x).unwrap();
        assert_eq!(z.dim(), (6, 2));
        assert_eq!(ae.reconstruct(&x).unwrap(), ae.decode(&z).unwrap());
    }

    #[test]
    fn vae_encoder_emits_mean_and_log_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let vae = VaeModel::build(&tiny(), &mut rng).unwrap();
        assert_eq!(vae.encoder.output_dim(), 4);
        let x = Matrix::from_shape_fn((5, 2), |(r, _)| r as f64 * 0.3);
        let (mean, log_var) = vae.encode_params(&x).unwrap();
        assert_eq!(mean.dim(), (5, 2));
        assert_eq!(log_var.dim(), (5, 2));
        assert_eq!(vae.encode(&x).unwrap(), mean);

        // Two draws with the same RNG seed agree; different seeds differ.
        let mut r1 = ChaCha8Rng::seed_from_u64(50);
        let mut r2 = ChaCha8Rng::seed_from_u64(50);
        let (z1, ..) = vae.sample(&x, &mut r1).unwrap();
        let (z2, ..) = vae.sample(&x, &mut r2).unwrap();
        assert_eq!(z1, z2);
        let mut r3 = ChaCha8Rng::seed_from_u64(51);
        let (z3, ..) = vae.sample(&x, &mut r3).unwrap();
        assert_ne!(z1, z3);
    }

    #[test]
    fn gaia_halves_are_independent_autoencoders() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let gaia = GaiaModel::build(&tiny(), &mut rng).unwrap();
        assert_ne!(
            gaia.generator.encoder.params_vec(),
            gaia.discriminator.encoder.params_vec(),
            "generator and discriminator must start from different weights"
        );
        assert_eq!(gaia.latent_dim(), 2);
        assert_eq!(
            gaia.param_count(),
            gaia.generator.param_count() + gaia.discriminator.param_count()
        );
    }

    #[test]
    fn zero_dimensions_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for field in 0..4 {
            let mut cfg = tiny();
            match field {
                0 => cfg.input_dim = 0,
                1 => cfg.latent_dim = 0,
                2 => cfg.hidden_layers = 0,
                _ => cfg.hidden_units = 0,
            }
            assert!(Autoencoder::build(&cfg, &mut rng).is_err());
        }
    }
}
