//! Training loops for all model kinds, with per-step loss records and
//! seed-deterministic behavior.

mod baseline;
mod gaia;
pub mod interp;
pub mod losses;

pub use baseline::{ae_step, vae_step, PairOptimizers, VaeStepLosses};
pub use gaia::{
    discriminator_gradients, gaia_forward, gaia_step, generator_gradients, GaiaForward,
    GaiaOptimizers,
};
pub use interp::{sample_interpolations, Interpolation};
pub use losses::{
    balance_sigmoid, distance_loss, distance_loss_with_grad, pixel_loss, pixel_loss_grad,
};

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{minibatches, DataBatch};
use crate::error::{CoreError, Result};
use crate::model::{Autoencoder, GaiaModel, ModelConfig, VaeModel};
use crate::tensor::Matrix;

/// Which training objective to run. `GaiaNoDist` is the ablation: the full
/// adversarial model with the distance regularizer weight forced to zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Ae,
    Vae,
    GaiaNoDist,
    Gaia,
}

impl ModelKind {
    /// All kinds in canonical report order.
    pub const ALL: [ModelKind; 4] = [
        ModelKind::Ae,
        ModelKind::Vae,
        ModelKind::GaiaNoDist,
        ModelKind::Gaia,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Ae => "ae",
            ModelKind::Vae => "vae",
            ModelKind::GaiaNoDist => "gaia-nodist",
            ModelKind::Gaia => "gaia",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ae" => Ok(ModelKind::Ae),
            "vae" => Ok(ModelKind::Vae),
            "gaia-nodist" => Ok(ModelKind::GaiaNoDist),
            "gaia" => Ok(ModelKind::Gaia),
            other => Err(CoreError::InvalidInput(format!(
                "unknown model '{other}' (expected ae, vae, gaia-nodist, or gaia)"
            ))),
        }
    }
}

/// Hyperparameters for one training run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub kind: ModelKind,
    pub lr: f64,
    pub batch: usize,
    pub steps: usize,
    /// Slope of [`balance_sigmoid`] in all balance weights.
    pub sigmoid_slope: f64,
    /// Diversity ratio in the discriminator's fake-loss weight.
    pub gamma: f64,
    /// Weight of the pairwise-distance regularizer in the generator loss.
    pub alpha: f64,
    pub interp_mu: f64,
    pub interp_sigma: f64,
    /// Observation variance of the VAE likelihood (VAE runs only).
    pub vae_obs_var: f64,
    /// Apply each balance weight to its namesake network instead of the
    /// published crossed assignment (see [`gaia_step`]).
    pub swap_balance: bool,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(kind: ModelKind) -> Self {
        let lr = 1e-4;
        TrainConfig {
            kind,
            lr,
            batch: 64,
            steps: 50_000,
            sigmoid_slope: 20.0,
            gamma: 0.5,
            alpha: 0.5 * lr,
            interp_mu: 0.5,
            interp_sigma: 0.25,
            vae_obs_var: 1.0,
            swap_balance: false,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lr", self.lr),
            ("sigmoid_slope", self.sigmoid_slope),
            ("interp_sigma", self.interp_sigma),
            ("vae_obs_var", self.vae_obs_var),
        ];
        for (name, v) in positive {
            if !v.is_finite() || v <= 0.0 {
                return Err(CoreError::InvalidInput(format!(
                    "{name} must be finite and > 0, got {v}"
                )));
            }
        }
        if self.batch < 2 {
            return Err(CoreError::InvalidInput(format!(
                "batch must be >= 2, got {}",
                self.batch
            )));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(CoreError::InvalidInput(format!(
                "gamma must lie in (0, 1], got {}",
                self.gamma
            )));
        }
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            return Err(CoreError::InvalidInput(format!(
                "alpha must be finite and >= 0, got {}",
                self.alpha
            )));
        }
        if !self.interp_mu.is_finite() {
            return Err(CoreError::InvalidInput("interp_mu must be finite".into()));
        }
        Ok(())
    }
}

/// Loss record for one adversarial step. The balance weights satisfy
/// `delta_disc + delta_gen == 1` and `w_gen_int + w_gen_gen == 1` exactly,
/// and all of them lie strictly inside (0, 1).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StepLosses {
    pub l_x: f64,
    pub l_x_gen: f64,
    pub l_x_int: f64,
    pub l_distance: f64,
    pub delta_disc: f64,
    pub delta_gen: f64,
    pub w_gen_int: f64,
    pub w_gen_gen: f64,
    pub w_disc_fake: f64,
}

/// Per-step loss history of a completed run.
#[derive(Debug, Clone)]
pub enum TrainHistory {
    Ae(Vec<f64>),
    Vae(Vec<VaeStepLosses>),
    Gaia(Vec<StepLosses>),
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        match self {
            TrainHistory::Ae(v) => v.len(),
            TrainHistory::Vae(v) => v.len(),
            TrainHistory::Gaia(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Loss of the final step: reconstruction loss for the baselines
    /// (VAE: total), the real-data reconstruction loss for the adversarial
    /// model.
    pub fn final_loss(&self) -> Option<f64> {
        match self {
            TrainHistory::Ae(v) => v.last().copied(),
            TrainHistory::Vae(v) => v.last().map(|s| s.total),
            TrainHistory::Gaia(v) => v.last().map(|s| s.l_x),
        }
    }

    /// Per-step CSV. Adversarial runs use the fixed column set
    /// `step,L_x,L_x_gen,L_x_int,L_distance,delta_disc,w_gen_int,w_disc_fake`
    /// (the complementary weights are implied); baselines report their own
    /// losses.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match self {
            TrainHistory::Ae(v) => {
                out.push_str("step,loss\n");
                for (i, l) in v.iter().enumerate() {
                    out.push_str(&format!("{i},{l}\n"));
                }
            }
            TrainHistory::Vae(v) => {
                out.push_str("step,loss,recon,kl\n");
                for (i, s) in v.iter().enumerate() {
                    out.push_str(&format!("{i},{},{},{}\n", s.total, s.recon, s.kl));
                }
            }
            TrainHistory::Gaia(v) => {
                out.push_str("step,L_x,L_x_gen,L_x_int,L_distance,delta_disc,w_gen_int,w_disc_fake\n");
                for (i, s) in v.iter().enumerate() {
                    out.push_str(&format!(
                        "{i},{},{},{},{},{},{},{}\n",
                        s.l_x,
                        s.l_x_gen,
                        s.l_x_int,
                        s.l_distance,
                        s.delta_disc,
                        s.w_gen_int,
                        s.w_disc_fake
                    ));
                }
            }
        }
        out
    }
}

/// A trained model of any kind, with a uniform encode/decode surface for
/// evaluation. The VAE encodes to its posterior mean; the adversarial model
/// exposes its generator.
#[derive(Debug, Clone)]
pub enum TrainedModel {
    Ae(Autoencoder),
    Vae(VaeModel),
    Gaia(GaiaModel),
}

impl TrainedModel {
    pub fn encode(&self, x: &Matrix) -> Result<Matrix> {
        match self {
            TrainedModel::Ae(m) => m.encode(x),
            TrainedModel::Vae(m) => m.encode(x),
            TrainedModel::Gaia(m) => m.generator.encode(x),
        }
    }

    pub fn decode(&self, z: &Matrix) -> Result<Matrix> {
        match self {
            TrainedModel::Ae(m) => m.decode(z),
            TrainedModel::Vae(m) => m.decode(z),
            TrainedModel::Gaia(m) => m.generator.decode(z),
        }
    }

    pub fn reconstruct(&self, x: &Matrix) -> Result<Matrix> {
        self.decode(&self.encode(x)?)
    }

    pub fn latent_dim(&self) -> usize {
        match self {
            TrainedModel::Ae(m) => m.latent_dim(),
            TrainedModel::Vae(m) => m.latent_dim(),
            TrainedModel::Gaia(m) => m.latent_dim(),
        }
    }
}

/// Optimizer state at the end of a run, for checkpointing and resumption.
#[derive(Debug, Clone)]
pub enum TrainerState {
    Pair(PairOptimizers),
    Gaia(GaiaOptimizers),
}

/// Result of [`train`]: the model, its loss history, and optimizer states.
#[derive(Debug)]
pub struct TrainOutcome {
    pub model: TrainedModel,
    pub history: TrainHistory,
    pub optimizers: TrainerState,
}

/// Trains a model of `config.kind` on `data` for `config.steps` steps.
///
/// Three independent seeded RNG streams are derived from `config.seed`:
/// weight initialization, minibatch shuffling, and per-step noise
/// (interpolation coefficients or VAE draws). Identical `(data, config)`
/// therefore yields bit-identical weights. Divergence (any non-finite loss
/// or activation) aborts with the failing step index.
pub fn train(data: &DataBatch, arch: &ModelConfig, config: &TrainConfig) -> Result<TrainOutcome> {
    arch.validate()?;
    config.validate()?;
    if config.batch > data.n() {
        return Err(CoreError::InvalidInput(format!(
            "batch {} exceeds dataset size {}",
            config.batch,
            data.n()
        )));
    }

    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let batch_seed = config.seed ^ 0x9E37_79B9_7F4A_7C15;
    let mut step_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0xD1B5_4A32_D192_ED03);
    let mut batches = minibatches(data, config.batch, batch_seed)?;

    // The ablation runs the identical loop with the regularizer unplugged.
    let mut effective = config.clone();
    if config.kind == ModelKind::GaiaNoDist {
        effective.alpha = 0.0;
    }

    let at_step = |step: usize, err: CoreError| match err {
        CoreError::NonFinite(what) => CoreError::Diverged {
            step,
            detail: format!("non-finite values in {what}"),
        },
        CoreError::Diverged { detail, .. } => CoreError::Diverged { step, detail },
        other => other,
    };

    match config.kind {
        ModelKind::Ae => {
            let mut model = Autoencoder::build(arch, &mut init_rng)?;
            let mut opt = PairOptimizers::for_autoencoder(&model);
            let mut history = Vec::with_capacity(config.steps);
            for step in 0..config.steps {
                let x = batches.next().expect("minibatch stream is endless");
                let loss =
                    ae_step(&mut model, &x, config.lr, &mut opt).map_err(|e| at_step(step, e))?;
                history.push(loss);
            }
            Ok(TrainOutcome {
                model: TrainedModel::Ae(model),
                history: TrainHistory::Ae(history),
                optimizers: TrainerState::Pair(opt),
            })
        }
        ModelKind::Vae => {
            let mut model = VaeModel::build(arch, &mut init_rng)?;
            let mut opt = PairOptimizers::for_vae(&model);
            let mut history = Vec::with_capacity(config.steps);
            for step in 0..config.steps {
                let x = batches.next().expect("minibatch stream is endless");
                let losses = vae_step(
                    &mut model,
                    &x,
                    config.lr,
                    config.vae_obs_var,
                    &mut step_rng,
                    &mut opt,
                )
                .map_err(|e| at_step(step, e))?;
                history.push(losses);
            }
            Ok(TrainOutcome {
                model: TrainedModel::Vae(model),
                history: TrainHistory::Vae(history),
                optimizers: TrainerState::Pair(opt),
            })
        }
        ModelKind::Gaia | ModelKind::GaiaNoDist => {
            let mut model = GaiaModel::build(arch, &mut init_rng)?;
            let mut opt = GaiaOptimizers::new(&model);
            let mut history = Vec::with_capacity(config.steps);
            for step in 0..config.steps {
                let x = batches.next().expect("minibatch stream is endless");
                let losses = gaia_step(&mut model, &x, &effective, &mut step_rng, &mut opt)
                    .map_err(|e| at_step(step, e))?;
                history.push(losses);
            }
            Ok(TrainOutcome {
                model: TrainedModel::Gaia(model),
                history: TrainHistory::Gaia(history),
                optimizers: TrainerState::Gaia(opt),
            })
        }
    }
}
