//! Deterministic 2-D toy datasets: interleaved half-circles, concentric
//! circles, an S-curve, a swiss-roll spiral, and Gaussian blobs. Every
//! generator is driven by a seeded ChaCha stream, optionally jittered with
//! Gaussian noise, and standardized to zero mean / unit variance per column.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::tensor::Matrix;

/// Fixed blob centers; far enough apart that clusters stay separated at the
/// default spread.
const BLOB_CENTERS: [[f64; 2]; 3] = [[-6.0, -4.0], [0.0, 6.0], [6.0, -4.0]];

/// Which toy distribution to sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetKind {
    Moons,
    Circles,
    SCurve,
    SwissRoll,
    Blobs,
}

impl DatasetKind {
    /// All kinds in canonical order (the order used in reports and grids).
    pub const ALL: [DatasetKind; 5] = [
        DatasetKind::Moons,
        DatasetKind::Circles,
        DatasetKind::SCurve,
        DatasetKind::SwissRoll,
        DatasetKind::Blobs,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DatasetKind::Moons => "moons",
            DatasetKind::Circles => "circles",
            DatasetKind::SCurve => "s-curve",
            DatasetKind::SwissRoll => "swiss-roll",
            DatasetKind::Blobs => "blobs",
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetKind {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "moons" => Ok(DatasetKind::Moons),
            "circles" => Ok(DatasetKind::Circles),
            "s-curve" => Ok(DatasetKind::SCurve),
            "swiss-roll" => Ok(DatasetKind::SwissRoll),
            "blobs" => Ok(DatasetKind::Blobs),
            other => Err(CoreError::InvalidInput(format!(
                "unknown dataset '{other}' (expected moons, circles, s-curve, swiss-roll, or blobs)"
            ))),
        }
    }
}

/// Generator settings. `noise` is the standard deviation of Gaussian jitter
/// added to the raw curve; `circle_factor` is the inner/outer radius ratio
/// for [`DatasetKind::Circles`]; `blob_std` and `blob_centers` control the
/// spread and the number of clusters for [`DatasetKind::Blobs`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub kind: DatasetKind,
    pub noise: f64,
    pub circle_factor: f64,
    pub blob_std: f64,
    pub blob_centers: usize,
}

impl DatasetConfig {
    pub fn new(kind: DatasetKind) -> Self {
        DatasetConfig {
            kind,
            noise: 0.05,
            circle_factor: 0.8,
            blob_std: 1.0,
            blob_centers: BLOB_CENTERS.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.noise.is_finite() || self.noise < 0.0 {
            return Err(CoreError::InvalidInput(format!(
                "noise must be finite and >= 0, got {}",
                self.noise
            )));
        }
        if !(self.circle_factor > 0.0 && self.circle_factor < 1.0) {
            return Err(CoreError::InvalidInput(format!(
                "circle_factor must lie in (0, 1), got {}",
                self.circle_factor
            )));
        }
        if !self.blob_std.is_finite() || self.blob_std <= 0.0 {
            return Err(CoreError::InvalidInput(format!(
                "blob_std must be finite and > 0, got {}",
                self.blob_std
            )));
        }
        if self.blob_centers == 0 || self.blob_centers > BLOB_CENTERS.len() {
            return Err(CoreError::InvalidInput(format!(
                "blob_centers must lie in 1..={}, got {}",
                BLOB_CENTERS.len(),
                self.blob_centers
            )));
        }
        Ok(())
    }
}

/// A standardized sample with enough bookkeeping to undo the standardization.
#[derive(Debug, Clone)]
pub struct DataBatch {
    /// Standardized points, one row per sample.
    pub x: Matrix,
    /// Per-sample structural label (cluster index, curve branch, ...).
    pub labels: Vec<usize>,
    pub kind: DatasetKind,
    pub seed: u64,
    /// Per-column mean of the raw (pre-standardization) data.
    pub mean: [f64; 2],
    /// Per-column population standard deviation of the raw data.
    pub std: [f64; 2],
}

impl DataBatch {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    /// Maps the standardized points back to raw data coordinates.
    pub fn destandardized(&self) -> Matrix {
        let mut out = self.x.clone();
        for mut row in out.rows_mut() {
            for c in 0..2 {
                row[c] = row[c] * self.std[c] + self.mean[c];
            }
        }
        out
    }

    /// CSV dump of the standardized points, header `x0,x1`. Floats use the
    /// shortest representation that round-trips, so output is reproducible.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x0,x1\n");
        for row in self.x.rows() {
            out.push_str(&format!("{},{}\n", row[0], row[1]));
        }
        out
    }
}

/// Draws `n` points from the configured distribution and standardizes them.
/// The same `(config, n, seed)` triple always yields bit-identical output.
pub fn generate(config: &DatasetConfig, n: usize, seed: u64) -> Result<DataBatch> {
    config.validate()?;
    if n < 2 {
        return Err(CoreError::InvalidInput(format!(
            "need at least 2 samples, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut x, labels) = match config.kind {
        DatasetKind::Moons => moons(n),
        DatasetKind::Circles => circles(n, config.circle_factor),
        DatasetKind::SCurve => s_curve(n, &mut rng),
        DatasetKind::SwissRoll => swiss_roll(n, &mut rng),
        DatasetKind::Blobs => blobs(n, config.blob_std, config.blob_centers, &mut rng),
    };
    if config.noise > 0.0 {
        let normal = Normal::new(0.0, config.noise).expect("validated noise");
        for v in x.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    let (mean, std) = standardize(&mut x)?;
    Ok(DataBatch {
        x,
        labels,
        kind: config.kind,
        seed,
        mean,
        std,
    })
}

/// Two interleaved half-circles: the upper unit half-circle and a lower one
/// shifted to (1, 0.5). Points are spread evenly along each arc.
fn moons(n: usize) -> (Matrix, Vec<usize>) {
    let n_out = n - n / 2;
    let n_in = n / 2;
    let mut x = Matrix::zeros((n, 2));
    let mut labels = vec![0; n];
    for i in 0..n_out {
        let theta = PI * i as f64 / (n_out.max(2) - 1) as f64;
        x[[i, 0]] = theta.cos();
        x[[i, 1]] = theta.sin();
    }
    for i in 0..n_in {
        let theta = PI * i as f64 / (n_in.max(2) - 1) as f64;
        x[[n_out + i, 0]] = 1.0 - theta.cos();
        x[[n_out + i, 1]] = 0.5 - theta.sin();
        labels[n_out + i] = 1;
    }
    (x, labels)
}

/// Two concentric circles with radius 1 and `factor`.
fn circles(n: usize, factor: f64) -> (Matrix, Vec<usize>) {
    let n_out = n - n / 2;
    let n_in = n / 2;
    let mut x = Matrix::zeros((n, 2));
    let mut labels = vec![0; n];
    for i in 0..n_out {
        let theta = 2.0 * PI * i as f64 / n_out as f64;
        x[[i, 0]] = theta.cos();
        x[[i, 1]] = theta.sin();
    }
    for i in 0..n_in {
        let theta = 2.0 * PI * i as f64 / n_in as f64;
        x[[n_out + i, 0]] = factor * theta.cos();
        x[[n_out + i, 1]] = factor * theta.sin();
        labels[n_out + i] = 1;
    }
    (x, labels)
}

/// The 2-D silhouette of the classic S-curve: `(sin t, sign(t)(cos t - 1))`
/// with `t` uniform on `[-1.5 pi, 1.5 pi]`. Label 1 marks the upper branch.
fn s_curve<R: Rng>(n: usize, rng: &mut R) -> (Matrix, Vec<usize>) {
    let mut x = Matrix::zeros((n, 2));
    let mut labels = vec![0; n];
    for i in 0..n {
        let t = 3.0 * PI * (rng.random::<f64>() - 0.5);
        x[[i, 0]] = t.sin();
        x[[i, 1]] = t.signum() * (t.cos() - 1.0);
        labels[i] = usize::from(t > 0.0);
    }
    (x, labels)
}

/// A 2-D spiral: `(t cos t, t sin t)` with `t` uniform on
/// `[1.5 pi, 4.5 pi]`. Label 1 marks the outer half of the roll.
fn swiss_roll<R: Rng>(n: usize, rng: &mut R) -> (Matrix, Vec<usize>) {
    let mut x = Matrix::zeros((n, 2));
    let mut labels = vec![0; n];
    for i in 0..n {
        let t = 1.5 * PI * (1.0 + 2.0 * rng.random::<f64>());
        x[[i, 0]] = t * t.cos();
        x[[i, 1]] = t * t.sin();
        labels[i] = usize::from(t > 3.0 * PI);
    }
    (x, labels)
}

/// Isotropic Gaussian clusters at fixed centers. Sample `i` belongs to
/// cluster `i % centers`, so cluster sizes differ by at most one.
fn blobs<R: Rng>(n: usize, spread: f64, centers: usize, rng: &mut R) -> (Matrix, Vec<usize>) {
    let normal = Normal::new(0.0, spread).expect("validated spread");
    let mut x = Matrix::zeros((n, 2));
    let mut labels = vec![0; n];
    for i in 0..n {
        let c = i % centers;
        x[[i, 0]] = BLOB_CENTERS[c][0] + normal.sample(rng);
        x[[i, 1]] = BLOB_CENTERS[c][1] + normal.sample(rng);
        labels[i] = c;
    }
    (x, labels)
}

/// Shifts and scales each column to zero mean and unit population variance,
/// returning the mean and standard deviation that were removed.
fn standardize(x: &mut Matrix) -> Result<([f64; 2], [f64; 2])> {
    let n = x.nrows() as f64;
    let mut mean = [0.0; 2];
    let mut std = [0.0; 2];
    for c in 0..2 {
        let col = x.column(c);
        let mu = col.sum() / n;
        let var = col.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
        if var.sqrt() <= 1e-12 {
            return Err(CoreError::Degenerate(format!(
                "column {c} has zero variance; cannot standardize"
            )));
        }
        mean[c] = mu;
        std[c] = var.sqrt();
    }
    for mut row in x.rows_mut() {
        for c in 0..2 {
            row[c] = (row[c] - mean[c]) / std[c];
        }
    }
    Ok((mean, std))
}

/// Endless stream of shuffled minibatches. Each pass over the data draws a
/// fresh permutation; when `batch` divides the dataset size, the batches of
/// one pass partition the dataset exactly.
pub struct Minibatches<'a> {
    data: &'a Matrix,
    order: Vec<usize>,
    pos: usize,
    batch: usize,
    rng: ChaCha8Rng,
}

impl<'a> Minibatches<'a> {
    pub fn batches_per_epoch(&self) -> usize {
        self.data.nrows() / self.batch
    }
}

/// Creates the minibatch stream for `data.x`. Requires `2 <= batch <= n`.
pub fn minibatches(data: &DataBatch, batch: usize, seed: u64) -> Result<Minibatches<'_>> {
    let n = data.n();
    if batch < 2 || batch > n {
        return Err(CoreError::InvalidInput(format!(
            "batch size must satisfy 2 <= batch <= {n}, got {batch}"
        )));
    }
    let mut mb = Minibatches {
        data: &data.x,
        order: (0..n).collect(),
        pos: 0,
        batch,
        rng: ChaCha8Rng::seed_from_u64(seed),
    };
    mb.shuffle();
    Ok(mb)
}

impl Minibatches<'_> {
    fn shuffle(&mut self) {
        // Fisher-Yates over the index vector.
        for i in (1..self.order.len()).rev() {
            let j = self.rng.random_range(0..=i);
            self.order.swap(i, j);
        }
        self.pos = 0;
    }
}

impl Iterator for Minibatches<'_> {
    type Item = Matrix;

    fn next(&mut self) -> Option<Matrix> {
        if self.pos + self.batch > self.order.len() {
            self.shuffle();
        }
        let idx = &self.order[self.pos..self.pos + self.batch];
        self.pos += self.batch;
        Some(self.data.select(ndarray::Axis(0), idx))
    }
}
