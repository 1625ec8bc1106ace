//! Core library: a hand-rolled MLP gradient engine, 2-D toy datasets,
//! three trainable models (autoencoder, VAE, and an adversarial pair of
//! autoencoders trained on latent interpolations), distribution metrics,
//! and deterministic SVG figure rendering.

pub mod dataset;
pub mod error;
pub mod metrics;
pub mod model;
pub mod tensor;
pub mod train;
pub mod viz;

pub use error::{CoreError, Result};
