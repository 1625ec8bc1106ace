//! Matrix plumbing and a small fixed-topology MLP with hand-written
//! reverse-mode gradients. This is the numeric substrate everything else
//! builds on: batches of row vectors flow forward through dense layers,
//! and gradient seeds flow back through a tape recorded during the pass.

mod activation;
mod adam;
mod layer;
mod network;

pub use activation::Activation;
pub use adam::{adam_step, AdamState};
pub use layer::DenseLayer;
pub use network::{LayerGrads, MlpNetwork, NetworkGrads, Tape};

use crate::error::{CoreError, Result};

/// Row-major dense matrix of f64. Rows are samples, columns are features.
pub type Matrix = ndarray::Array2<f64>;

/// Rejects matrices containing NaN or infinity. Every public operation in
/// this crate keeps the all-finite invariant; this is where it is enforced.
pub fn ensure_finite(context: &'static str, m: &Matrix) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(CoreError::NonFinite(context))
    }
}

/// Stacks matrices vertically. All inputs must share a column count.
pub fn vstack(parts: &[&Matrix]) -> Result<Matrix> {
    let views: Vec<_> = parts.iter().map(|m| m.view()).collect();
    ndarray::concatenate(ndarray::Axis(0), &views).map_err(|_| CoreError::ShapeMismatch {
        context: "vstack",
        expected: "equal column counts".into(),
        got: format!("{:?}", parts.iter().map(|m| m.dim()).collect::<Vec<_>>()),
    })
}
