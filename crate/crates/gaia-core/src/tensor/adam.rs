use ndarray::Zip;

use super::{LayerGrads, MlpNetwork, NetworkGrads};
use crate::error::{CoreError, Result};

/// Adam first/second moment buffers for one network, plus the step counter.
/// Defaults: beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<LayerGrads>,
    v: Vec<LayerGrads>,
    step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(net: &MlpNetwork) -> Self {
        AdamState {
            m: NetworkGrads::zeros_like(net).layers,
            v: NetworkGrads::zeros_like(net).layers,
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Moment buffers flattened in the same canonical order as
    /// [`MlpNetwork::params_vec`]: all of `m`, then all of `v`.
    pub fn moments_vec(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for bank in [&self.m, &self.v] {
            for l in bank.iter() {
                out.extend(l.d_weights.iter());
                out.extend(l.d_bias.iter());
            }
        }
        out
    }

    /// Rebuilds a state from checkpointed moments. `flat` must hold exactly
    /// `2 * net.param_count()` values in [`Self::moments_vec`] order.
    pub fn from_moments(net: &MlpNetwork, flat: &[f64], step: u64) -> Result<Self> {
        let n = net.param_count();
        if flat.len() != 2 * n {
            return Err(CoreError::ShapeMismatch {
                context: "adam moments",
                expected: format!("{} values", 2 * n),
                got: format!("{} values", flat.len()),
            });
        }
        let mut state = AdamState::new(net);
        state.step = step;
        let mut pos = 0;
        for bank in [&mut state.m, &mut state.v] {
            for l in bank.iter_mut() {
                for w in l.d_weights.iter_mut().chain(l.d_bias.iter_mut()) {
                    *w = flat[pos];
                    pos += 1;
                }
            }
        }
        Ok(state)
    }
}

/// One in-place Adam update of `net`. Gradients must be finite and shaped
/// like the network. `lr == 0` is accepted and leaves both the parameters
/// and the optimizer state untouched, so a zero effective learning rate is
/// an exact no-op.
pub fn adam_step(
    net: &mut MlpNetwork,
    grads: &NetworkGrads,
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    if !lr.is_finite() || lr < 0.0 {
        return Err(CoreError::InvalidInput(format!(
            "learning rate must be finite and >= 0, got {lr}"
        )));
    }
    if grads.layers.len() != net.layers().len() {
        return Err(CoreError::ShapeMismatch {
            context: "adam_step",
            expected: format!("{} layers", net.layers().len()),
            got: format!("{} layers", grads.layers.len()),
        });
    }
    for (g, l) in grads.layers.iter().zip(net.layers()) {
        if g.d_weights.dim() != l.weights.dim() || g.d_bias.len() != l.bias.len() {
            return Err(CoreError::ShapeMismatch {
                context: "adam_step",
                expected: format!("{:?}", l.weights.dim()),
                got: format!("{:?}", g.d_weights.dim()),
            });
        }
        if !g.d_weights.iter().chain(g.d_bias.iter()).all(|v| v.is_finite()) {
            return Err(CoreError::NonFinite("adam_step gradients"));
        }
    }
    if lr == 0.0 {
        return Ok(());
    }

    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    let update = move |p: &mut f64, g: &f64, m: &mut f64, v: &mut f64| {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        *p -= lr * (*m / bc1) / ((*v / bc2).sqrt() + eps);
    };

    for (((layer, g), m), v) in net
        .layers_mut()
        .iter_mut()
        .zip(&grads.layers)
        .zip(&mut state.m)
        .zip(&mut state.v)
    {
        Zip::from(&mut layer.weights)
            .and(&g.d_weights)
            .and(&mut m.d_weights)
            .and(&mut v.d_weights)
            .for_each(update);
        Zip::from(&mut layer.bias)
            .and(&g.d_bias)
            .and(&mut m.d_bias)
            .and(&mut v.d_bias)
            .for_each(update);
    }
    Ok(())
}
