use ndarray::{Array1, Axis};
use rand::Rng;

use super::{ensure_finite, Activation, DenseLayer, Matrix};
use crate::error::{CoreError, Result};

/// A feed-forward stack of [`DenseLayer`]s. Batches of row vectors go in,
/// batches of row vectors come out.
#[derive(Debug, Clone)]
pub struct MlpNetwork {
    layers: Vec<DenseLayer>,
}

/// Per-layer activation record from one forward pass. Holds each layer's
/// input and pre-activation so [`MlpNetwork::backward`] can run without
/// recomputing the pass. A tape is only valid for the network and batch it
/// was recorded from.
#[derive(Debug)]
pub struct Tape {
    batch: usize,
    inputs: Vec<Matrix>,
    preacts: Vec<Matrix>,
}

impl Tape {
    pub fn batch(&self) -> usize {
        self.batch
    }
}

/// Gradient of some scalar loss with respect to one layer's parameters.
#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub d_weights: Matrix,
    pub d_bias: Array1<f64>,
}

/// Gradients for every layer of a network, in layer order.
#[derive(Debug, Clone)]
pub struct NetworkGrads {
    pub layers: Vec<LayerGrads>,
}

impl NetworkGrads {
    pub fn zeros_like(net: &MlpNetwork) -> Self {
        NetworkGrads {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrads {
                    d_weights: Matrix::zeros((l.in_dim(), l.out_dim())),
                    d_bias: Array1::zeros(l.out_dim()),
                })
                .collect(),
        }
    }

    /// Largest absolute entry across all layers; 0 for an empty gradient.
    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.d_weights.iter().chain(l.d_bias.iter()))
            .fold(0.0, |acc: f64, v| acc.max(v.abs()))
    }
}

impl MlpNetwork {
    /// Assembles a network from explicit layers. Consecutive layers must
    /// chain: each layer's input width equals the previous output width.
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(CoreError::InvalidInput("network needs >= 1 layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(CoreError::ShapeMismatch {
                    context: "layer chain",
                    expected: format!("in_dim {}", pair[0].out_dim()),
                    got: format!("in_dim {}", pair[1].in_dim()),
                });
            }
        }
        Ok(MlpNetwork { layers })
    }

    /// Builds a seeded network from a width list, e.g. `[2, 64, 64, 2]`.
    /// Hidden layers use `hidden`, the final layer uses `output`.
    pub fn from_dims<R: Rng>(
        dims: &[usize],
        hidden: Activation,
        output: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        if dims.len() < 2 {
            return Err(CoreError::InvalidInput(
                "width list needs >= 2 entries".into(),
            ));
        }
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for (i, pair) in dims.windows(2).enumerate() {
            let act = if i + 2 == dims.len() { output } else { hidden };
            layers.push(DenseLayer::new_seeded(pair[0], pair[1], act, rng)?);
        }
        MlpNetwork::new(layers)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    /// Mutable layer access for the optimizer; kept crate-internal so the
    /// chain invariant cannot be broken from outside.
    pub(crate) fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.param_count()).sum()
    }

    /// All parameters flattened in canonical order: for each layer, weights
    /// row-major, then bias. This is the layout used by checkpoints.
    pub fn params_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    /// Overwrites all parameters from the canonical flat layout.
    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(CoreError::ShapeMismatch {
                context: "set_params",
                expected: format!("{} values", self.param_count()),
                got: format!("{} values", flat.len()),
            });
        }
        let mut pos = 0;
        for l in &mut self.layers {
            for w in l.weights.iter_mut() {
                *w = flat[pos];
                pos += 1;
            }
            for b in l.bias.iter_mut() {
                *b = flat[pos];
                pos += 1;
            }
        }
        Ok(())
    }

    /// Inference-only pass; no tape is recorded.
    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        Ok(self.forward(x)?.0)
    }

    /// Forward pass that records the tape needed for [`Self::backward`].
    /// Errors on input width mismatch and on non-finite inputs or outputs.
    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, Tape)> {
        if x.ncols() != self.input_dim() {
            return Err(CoreError::ShapeMismatch {
                context: "forward",
                expected: format!("{} columns", self.input_dim()),
                got: format!("{} columns", x.ncols()),
            });
        }
        ensure_finite("forward input", x)?;
        let batch = x.nrows();
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut preacts = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for layer in &self.layers {
            let pre = cur.dot(&layer.weights) + &layer.bias;
            let out = pre.mapv(|v| layer.activation.apply(v));
            inputs.push(cur);
            preacts.push(pre);
            cur = out;
        }
        ensure_finite("forward output", &cur)?;
        Ok((
            cur,
            Tape {
                batch,
                inputs,
                preacts,
            },
        ))
    }

    /// Reverse pass. `out_grad` is dLoss/dOutput for the batch the tape was
    /// recorded on; returns parameter gradients and dLoss/dInput.
    pub fn backward(&self, tape: &Tape, out_grad: &Matrix) -> Result<(NetworkGrads, Matrix)> {
        self.check_tape(tape, out_grad)?;
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut d_out = out_grad.clone();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let d_pre = &d_out * &tape.preacts[idx].mapv(|v| layer.activation.derivative(v));
            grads.push(LayerGrads {
                d_weights: tape.inputs[idx].t().dot(&d_pre),
                d_bias: d_pre.sum_axis(Axis(0)),
            });
            d_out = d_pre.dot(&layer.weights.t());
        }
        grads.reverse();
        Ok((NetworkGrads { layers: grads }, d_out))
    }

    /// Reverse pass that only propagates to the input, skipping parameter
    /// gradients. Used when a loss flows *through* a frozen network.
    pub fn backward_input(&self, tape: &Tape, out_grad: &Matrix) -> Result<Matrix> {
        self.check_tape(tape, out_grad)?;
        let mut d_out = out_grad.clone();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let d_pre = &d_out * &tape.preacts[idx].mapv(|v| layer.activation.derivative(v));
            d_out = d_pre.dot(&layer.weights.t());
        }
        Ok(d_out)
    }

    fn check_tape(&self, tape: &Tape, out_grad: &Matrix) -> Result<()> {
        if tape.inputs.len() != self.layers.len() {
            return Err(CoreError::ShapeMismatch {
                context: "backward tape",
                expected: format!("{} layers", self.layers.len()),
                got: format!("{} layers", tape.inputs.len()),
            });
        }
        for (idx, layer) in self.layers.iter().enumerate() {
            let (got_in, got_pre) = (tape.inputs[idx].dim(), tape.preacts[idx].dim());
            if got_in != (tape.batch, layer.in_dim()) || got_pre != (tape.batch, layer.out_dim()) {
                return Err(CoreError::ShapeMismatch {
                    context: "backward tape",
                    expected: format!(
                        "layer {idx} shapes {:?}/{:?}",
                        (tape.batch, layer.in_dim()),
                        (tape.batch, layer.out_dim())
                    ),
                    got: format!("{got_in:?}/{got_pre:?}"),
                });
            }
        }
        if out_grad.dim() != (tape.batch, self.output_dim()) {
            return Err(CoreError::ShapeMismatch {
                context: "backward seed",
                expected: format!("{:?}", (tape.batch, self.output_dim())),
                got: format!("{:?}", out_grad.dim()),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn identity_layer(dim: usize) -> DenseLayer {
        DenseLayer {
            weights: Matrix::eye(dim),
            bias: Array1::zeros(dim),
            activation: Activation::Identity,
        }
    }

    #[test]
    fn identity_network_passes_input_through() {
        let net = MlpNetwork::new(vec![identity_layer(3), identity_layer(3)]).unwrap();
        let x = array![[1.0, -2.0, 0.5], [0.0, 4.0, -1.0]];
        assert_eq!(net.apply(&x).unwrap(), x);
    }

    /// Oracle: an explicit loop-nest recomputation of a two-layer pass,
    /// written without ndarray's dot so a gemm bug cannot hide itself.
    #[test]
    fn forward_matches_scalar_recomputation() {
        let w1 = array![[0.5, -1.0, 0.25], [2.0, 0.0, -0.5]];
        let b1 = array![0.1, -0.2, 0.3];
        let w2 = array![[1.0, -1.0], [0.5, 0.5], [-2.0, 1.0]];
        let b2 = array![0.0, 1.0];
        let net = MlpNetwork::new(vec![
            DenseLayer {
                weights: w1.clone(),
                bias: b1.clone(),
                activation: Activation::LeakyRelu,
            },
            DenseLayer {
                weights: w2.clone(),
                bias: b2.clone(),
                activation: Activation::Identity,
            },
        ])
        .unwrap();

        let x = array![[0.3, -0.7], [-1.2, 0.4], [2.0, 2.0]];
        let got = net.apply(&x).unwrap();

        for r in 0..x.nrows() {
            let mut h = [0.0f64; 3];
            for (j, hj) in h.iter_mut().enumerate() {
                let mut acc = b1[j];
                for k in 0..2 {
                    acc += x[[r, k]] * w1[[k, j]];
                }
                *hj = if acc > 0.0 { acc } else { 0.2 * acc };
            }
            for c in 0..2 {
                let mut acc = b2[c];
                for (k, hk) in h.iter().enumerate() {
                    acc += hk * w2[[k, c]];
                }
                assert!(
                    (got[[r, c]] - acc).abs() < 1e-12,
                    "row {r} col {c}: {} vs oracle {acc}",
                    got[[r, c]]
                );
            }
        }
    }

    /// Central finite differences over every parameter and every input entry
    /// of a mixed-activation network, against the tape gradients. Loss is
    /// 0.5 * sum(out^2), whose output seed is simply the output itself.
    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let net = MlpNetwork::from_dims(&[3, 5, 4, 2], Activation::Tanh, Activation::Identity, &mut rng)
            .unwrap();
        let x = Matrix::from_shape_fn((4, 3), |_| {
            use rand::RngExt;
            rng.random_range(-1.0..1.0)
        });

        let loss = |n: &MlpNetwork, x: &Matrix| -> f64 {
            n.apply(x).unwrap().iter().map(|v| 0.5 * v * v).sum()
        };

        let (out, tape) = net.forward(&x).unwrap();
        let (grads, d_input) = net.backward(&tape, &out).unwrap();

        // Parameters.
        let params = net.params_vec();
        let mut flat_grads = Vec::with_capacity(params.len());
        for l in &grads.layers {
            flat_grads.extend(l.d_weights.iter().copied());
            flat_grads.extend(l.d_bias.iter().copied());
        }
        let h = 1e-5;
        for i in 0..params.len() {
            let mut p_hi = params.clone();
            let mut p_lo = params.clone();
            p_hi[i] += h;
            p_lo[i] -= h;
            let mut net_hi = net.clone();
            let mut net_lo = net.clone();
            net_hi.set_params(&p_hi).unwrap();
            net_lo.set_params(&p_lo).unwrap();
            let fd = (loss(&net_hi, &x) - loss(&net_lo, &x)) / (2.0 * h);
            let denom = fd.abs().max(flat_grads[i].abs()).max(1e-6);
            assert!(
                (fd - flat_grads[i]).abs() / denom < 1e-4,
                "param {i}: analytic {} vs fd {fd}",
                flat_grads[i]
            );
        }

        // Inputs.
        for r in 0..x.nrows() {
            for c in 0..x.ncols() {
                let mut x_hi = x.clone();
                let mut x_lo = x.clone();
                x_hi[[r, c]] += h;
                x_lo[[r, c]] -= h;
                let fd = (loss(&net, &x_hi) - loss(&net, &x_lo)) / (2.0 * h);
                let denom = fd.abs().max(d_input[[r, c]].abs()).max(1e-6);
                assert!(
                    (fd - d_input[[r, c]]).abs() / denom < 1e-4,
                    "input [{r},{c}]: analytic {} vs fd {fd}",
                    d_input[[r, c]]
                );
            }
        }
    }

    #[test]
    fn backward_input_agrees_with_full_backward() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net =
            MlpNetwork::from_dims(&[2, 6, 3], Activation::LeakyRelu, Activation::Identity, &mut rng)
                .unwrap();
        let x = Matrix::from_shape_fn((5, 2), |(r, c)| (r as f64 - 2.0) * 0.3 + c as f64 * 0.1);
        let (out, tape) = net.forward(&x).unwrap();
        let seed = out.mapv(|v| v.signum());
        let (_, d_in_full) = net.backward(&tape, &seed).unwrap();
        let d_in_only = net.backward_input(&tape, &seed).unwrap();
        assert_eq!(d_in_full, d_in_only);
    }

    #[test]
    fn params_vec_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut net =
            MlpNetwork::from_dims(&[4, 3, 2], Activation::Relu, Activation::Tanh, &mut rng).unwrap();
        let before = net.params_vec();
        assert_eq!(before.len(), net.param_count());
        net.set_params(&before).unwrap();
        assert_eq!(net.params_vec(), before);
        assert!(net.set_params(&before[1..]).is_err());
    }

    #[test]
    fn seeded_builds_are_identical() {
        let dims = [2, 8, 8, 2];
        let mk = || {
            let mut rng = ChaCha8Rng::seed_from_u64(1234);
            MlpNetwork::from_dims(&dims, Activation::LeakyRelu, Activation::Identity, &mut rng)
                .unwrap()
        };
        assert_eq!(mk().params_vec(), mk().params_vec());
    }

    #[test]
    fn shape_errors_are_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net =
            MlpNetwork::from_dims(&[3, 4, 2], Activation::Relu, Activation::Identity, &mut rng)
                .unwrap();
        // Wrong input width.
        assert!(matches!(
            net.apply(&Matrix::zeros((2, 5))),
            Err(CoreError::ShapeMismatch { .. })
        ));
        // Non-finite input.
        let mut bad = Matrix::zeros((1, 3));
        bad[[0, 1]] = f64::NAN;
        assert!(matches!(net.apply(&bad), Err(CoreError::NonFinite(_))));
        // Seed with the wrong batch size.
        let (_, tape) = net.forward(&Matrix::zeros((4, 3))).unwrap();
        assert!(net.backward(&tape, &Matrix::zeros((3, 2))).is_err());
        // Tape replayed through a different network.
        let other =
            MlpNetwork::from_dims(&[3, 7, 2], Activation::Relu, Activation::Identity, &mut rng)
                .unwrap();
        assert!(other.backward(&tape, &Matrix::zeros((4, 2))).is_err());
        // Mismatched chain is rejected at construction.
        assert!(MlpNetwork::new(vec![identity_layer(3), identity_layer(2)]).is_err());
    }
}
