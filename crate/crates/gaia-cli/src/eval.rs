//! Per-cell evaluation: given a trained model, draw a fresh evaluation set,
//! map it into the model's input space, and compute every metric plus the
//! geometry needed for figures.
//!
//! Seed derivation keeps comparisons fair: the evaluation sample depends only
//! on (run seed, dataset), so every model of a grid is scored against the
//! same points; the interpolation betas and distance-correlation subsample
//! depend on the cell so parallel cells never share an RNG.

use crate::checkpoint::SavedRun;
use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use gaia_core::dataset::{generate, DatasetKind};
use gaia_core::metrics::{
    kde_fit, kde_loglik, kl_divergence, pairwise_distance_correlation, MetricRecord,
};
use gaia_core::tensor::Matrix;
use gaia_core::train::{sample_interpolations, ModelKind};
use gaia_core::viz::{data_meshgrid, latent_meshgrid, MeshGrid};
use ndarray::s;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

// Domain-separation constants for the derived seed streams.
const TRAIN_DATA_STREAM: u64 = 0x5452_4149_4e44_4154; // training sample
const EVAL_DATA_STREAM: u64 = 0x4556_414c_4441_5441; // evaluation sample
const CELL_STREAM: u64 = 0x4345_4c4c_5354_5245; // per-cell training run
const INTERP_STREAM: u64 = 0x494e_5452_5053_5444; // evaluation-time betas
const DISTCORR_STREAM: u64 = 0x4449_5354_434f_5252; // pair subsampling

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent stream: the run seed is hashed together with the
/// stream constant before the index is added, so nearby run seeds (0, 1, 2…)
/// never alias each other's streams the way a plain XOR of small values
/// would.
fn derive(run_seed: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(run_seed ^ stream).wrapping_add(index))
}

fn dataset_index(kind: DatasetKind) -> u64 {
    DatasetKind::ALL.iter().position(|d| *d == kind).expect("exhaustive") as u64
}

fn model_index(kind: ModelKind) -> u64 {
    ModelKind::ALL.iter().position(|m| *m == kind).expect("exhaustive") as u64
}

/// Cell coordinate in the full canonical grid, independent of which subset a
/// particular invocation trains.
fn cell_index(model: ModelKind, dataset: DatasetKind) -> u64 {
    model_index(model) * DatasetKind::ALL.len() as u64 + dataset_index(dataset)
}

/// Seed of the training sample: shared by every model on the dataset.
pub fn train_data_seed(run_seed: u64, dataset: DatasetKind) -> u64 {
    derive(run_seed, TRAIN_DATA_STREAM, dataset_index(dataset))
}

/// Seed of the evaluation sample: shared by every model on the dataset.
pub fn eval_data_seed(run_seed: u64, dataset: DatasetKind) -> u64 {
    derive(run_seed, EVAL_DATA_STREAM, dataset_index(dataset))
}

/// Seed of one cell's training run (weight init, batch order, betas).
pub fn cell_train_seed(run_seed: u64, model: ModelKind, dataset: DatasetKind) -> u64 {
    derive(run_seed, CELL_STREAM, cell_index(model, dataset))
}

fn interp_seed(run_seed: u64, model: ModelKind, dataset: DatasetKind) -> u64 {
    derive(run_seed, INTERP_STREAM, cell_index(model, dataset))
}

fn distcorr_seed(run_seed: u64, model: ModelKind, dataset: DatasetKind) -> u64 {
    derive(run_seed, DISTCORR_STREAM, cell_index(model, dataset))
}

/// Everything one cell contributes to metrics and figures.
#[derive(Debug)]
pub struct CellEval {
    pub record: MetricRecord,
    /// Evaluation points in the model's (training-standardized) input space.
    pub eval_x: Matrix,
    /// Decoded interpolations between probe encodings.
    pub x_int: Matrix,
    /// Reconstructions of the probe half.
    pub x_rec: Matrix,
    pub z_mesh: MeshGrid,
    pub x_mesh: MeshGrid,
}

/// Draws the evaluation sample for a dataset and maps it into the input
/// space defined by the training statistics `(mean, std)`.
pub fn eval_points(
    config: &ExperimentConfig,
    dataset: DatasetKind,
    run_seed: u64,
    mean: [f64; 2],
    std: [f64; 2],
) -> Result<(Matrix, Vec<usize>)> {
    let dcfg = config.dataset_config(dataset);
    let batch = generate(&dcfg, config.data.n_eval, eval_data_seed(run_seed, dataset))?;
    let mut x = batch.destandardized();
    for mut row in x.rows_mut() {
        for c in 0..2 {
            row[c] = (row[c] - mean[c]) / std[c];
        }
    }
    Ok((x, batch.labels))
}

/// Scores one trained cell. The evaluation set is split in half: the first
/// half is the reference for density estimates, the second is the probe that
/// gets encoded, interpolated, and reconstructed.
pub fn evaluate_cell(
    run: &SavedRun,
    config: &ExperimentConfig,
    run_seed: u64,
) -> Result<CellEval> {
    let kind = run.train_config.kind;
    let (eval_x, _) = eval_points(config, run.dataset, run_seed, run.data_mean, run.data_std)?;
    let half = eval_x.nrows() / 2;
    let reference = eval_x.slice(s![..half, ..]).to_owned();
    let probe = eval_x.slice(s![half.., ..]).to_owned();

    let z = run.model.encode(&probe)?;
    let mut rng = ChaCha8Rng::seed_from_u64(interp_seed(run_seed, kind, run.dataset));
    let z_int = sample_interpolations(
        &z,
        run.train_config.interp_mu,
        run.train_config.interp_sigma,
        &mut rng,
    )?;
    let x_int = run.model.decode(&z_int)?;
    let x_rec = run.model.decode(&z)?;

    let kde = kde_fit(&reference)?;
    let loglik_interp = kde_loglik(&kde, &x_int)?;
    let loglik_recon = kde_loglik(&kde, &x_rec)?;
    let k = config.eval.knn_k;
    let kl_interp = kl_divergence(&reference, &x_int, k)?;
    let kl_recon = kl_divergence(&reference, &x_rec, k)?;
    let r_xz = pairwise_distance_correlation(
        &probe,
        &z,
        config.eval.max_pairs,
        distcorr_seed(run_seed, kind, run.dataset),
    )?;

    let z_mesh = latent_meshgrid(&run.model, &z, config.viz.resolution)?;
    let x_mesh = data_meshgrid(&run.model, &eval_x, config.viz.resolution)?;

    Ok(CellEval {
        record: MetricRecord {
            model: kind,
            dataset: run.dataset,
            r_xz,
            loglik_interp,
            loglik_recon,
            kl_interp,
            kl_recon,
            seed: run_seed,
        },
        eval_x,
        x_int,
        x_rec,
        z_mesh,
        x_mesh,
    })
}

/// Binary indicator columns, class c vs. everything else, for each label
/// class except 0 (the reference class), in ascending class order.
pub fn label_indicators(labels: &[usize]) -> Result<(Vec<usize>, Matrix)> {
    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(CliError::Config(format!(
            "attribute extraction needs >= 2 label classes, found {}",
            classes.len()
        )));
    }
    let others = &classes[1..];
    let mut attrs = Matrix::zeros((labels.len(), others.len()));
    for (i, &label) in labels.iter().enumerate() {
        if let Some(j) = others.iter().position(|&c| c == label) {
            attrs[[i, j]] = 1.0;
        }
    }
    Ok((others.to_vec(), attrs))
}
