//! Baseline trainers: a plain reconstruction autoencoder and a Gaussian
//! VAE, sharing the architecture and optimizer setup of the adversarial
//! model so comparisons isolate the training objective.

use ndarray::{concatenate, s, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::losses::pixel_loss_grad;
use crate::error::{CoreError, Result};
use crate::model::{Autoencoder, VaeModel};
use crate::tensor::{adam_step, AdamState, Matrix, NetworkGrads};

/// Adam states for an encoder/decoder pair.
#[derive(Debug, Clone)]
pub struct PairOptimizers {
    pub encoder: AdamState,
    pub decoder: AdamState,
}

impl PairOptimizers {
    pub fn for_autoencoder(model: &Autoencoder) -> Self {
        PairOptimizers {
            encoder: AdamState::new(&model.encoder),
            decoder: AdamState::new(&model.decoder),
        }
    }

    pub fn for_vae(model: &VaeModel) -> Self {
        PairOptimizers {
            encoder: AdamState::new(&model.encoder),
            decoder: AdamState::new(&model.decoder),
        }
    }
}

/// One mean-absolute-error reconstruction step. Returns the loss before the
/// update.
pub fn ae_step(
    model: &mut Autoencoder,
    x: &Matrix,
    lr: f64,
    opt: &mut PairOptimizers,
) -> Result<f64> {
    let (z, enc_tape) = model.encoder.forward(x)?;
    let (x_hat, dec_tape) = model.decoder.forward(&z)?;
    let (loss, seed) = pixel_loss_grad(&x_hat, x)?;
    let (dec_grads, g_z) = model.decoder.backward(&dec_tape, &seed)?;
    let (enc_grads, _) = model.encoder.backward(&enc_tape, &g_z)?;
    adam_step(&mut model.encoder, &enc_grads, &mut opt.encoder, lr)?;
    adam_step(&mut model.decoder, &dec_grads, &mut opt.decoder, lr)?;
    Ok(loss)
}

/// Loss components of one VAE step (per-sample averages).
#[derive(Debug, Clone, Copy)]
pub struct VaeStepLosses {
    pub total: f64,
    pub recon: f64,
    pub kl: f64,
}

/// One negative-ELBO step with the reparameterization trick. `obs_var` is
/// the fixed observation variance of the Gaussian likelihood; smaller
/// values weight reconstruction more heavily against the KL term.
pub fn vae_step<R: Rng>(
    model: &mut VaeModel,
    x: &Matrix,
    lr: f64,
    obs_var: f64,
    rng: &mut R,
    opt: &mut PairOptimizers,
) -> Result<VaeStepLosses> {
    if !obs_var.is_finite() || obs_var <= 0.0 {
        return Err(CoreError::InvalidInput(format!(
            "observation variance must be finite and > 0, got {obs_var}"
        )));
    }
    let k = model.latent_dim();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let eps = Matrix::from_shape_fn((x.nrows(), k), |_| normal.sample(rng));
    let (losses, enc_grads, dec_grads) = vae_loss_with_grads(model, x, &eps, obs_var)?;
    adam_step(&mut model.encoder, &enc_grads, &mut opt.encoder, lr)?;
    adam_step(&mut model.decoder, &dec_grads, &mut opt.decoder, lr)?;
    Ok(losses)
}

/// Negative ELBO and its parameter gradients for a fixed noise draw `eps`.
/// Split out from [`vae_step`] so the gradients can be checked against
/// finite differences with the randomness held constant.
fn vae_loss_with_grads(
    model: &VaeModel,
    x: &Matrix,
    eps: &Matrix,
    obs_var: f64,
) -> Result<(VaeStepLosses, NetworkGrads, NetworkGrads)> {
    let b = x.nrows() as f64;
    let k = model.latent_dim();

    let (enc_out, enc_tape) = model.encoder.forward(x)?;
    let mu = enc_out.slice(s![.., ..k]).to_owned();
    let log_var = enc_out.slice(s![.., k..]).to_owned();
    let sigma = log_var.mapv(|lv| (0.5 * lv).exp());
    let z = &mu + &(&sigma * eps);
    let (x_hat, dec_tape) = model.decoder.forward(&z)?;

    // Gaussian likelihood with fixed variance: 0.5/obs_var * SSE, averaged
    // over the batch (constant terms dropped).
    let diff = &x_hat - x;
    let recon = 0.5 / obs_var * diff.iter().map(|v| v * v).sum::<f64>() / b;
    // KL(q(z|x) || N(0, I)) per sample, averaged over the batch.
    let kl = mu
        .iter()
        .zip(log_var.iter())
        .map(|(m, lv)| 0.5 * (m * m + lv.exp() - lv - 1.0))
        .sum::<f64>()
        / b;
    let total = recon + kl;

    let recon_seed = diff.mapv(|v| v / (obs_var * b));
    let (dec_grads, g_z) = model.decoder.backward(&dec_tape, &recon_seed)?;

    // Reparameterization: z = mu + exp(lv/2) * eps, so dz/dmu = 1 and
    // dz/dlv = sigma * eps / 2; KL adds mu/B and (e^lv - 1)/(2B).
    let g_mu = &g_z + &mu.mapv(|m| m / b);
    let g_lv = &(&g_z * &(&sigma * eps)).mapv(|v| 0.5 * v)
        + &log_var.mapv(|lv| 0.5 * (lv.exp() - 1.0) / b);
    let enc_seed = concatenate(Axis(1), &[g_mu.view(), g_lv.view()])
        .expect("mu and log-var gradients share row count");
    let (enc_grads, _) = model.encoder.backward(&enc_tape, &enc_seed)?;

    Ok((VaeStepLosses { total, recon, kl }, enc_grads, dec_grads))
}
