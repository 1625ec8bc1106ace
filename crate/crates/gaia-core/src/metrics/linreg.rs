//! Ordinary least squares: a dense normal-equations solver, the per-model
//! intercept aggregation used by the comparison table, and latent
//! attribute-vector extraction (mean-difference and OLS-coefficient forms).

use crate::dataset::DatasetKind;
use crate::error::{CoreError, Result};
use crate::metrics::{MetricRecord, METRIC_COLUMNS};
use crate::tensor::{ensure_finite, Matrix};
use crate::train::ModelKind;

/// Relative pivot threshold below which the design matrix counts as singular.
const PIVOT_TOLERANCE: f64 = 1e-10;

/// Solves `A * X = B` for square `A` by Gaussian elimination with partial
/// pivoting. `B` may have multiple columns.
fn solve_linear(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let p = a.nrows();
    if a.ncols() != p || b.nrows() != p {
        return Err(CoreError::ShapeMismatch {
            context: "solve_linear",
            expected: format!("{p}x{p} system with {p}-row rhs"),
            got: format!("{}x{} system, {}-row rhs", a.nrows(), a.ncols(), b.nrows()),
        });
    }
    let q = b.ncols();
    let mut m = a.clone();
    let mut rhs = b.clone();
    let scale = a.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);

    for col in 0..p {
        let mut pivot_row = col;
        let mut pivot_val = m[[col, col]].abs();
        for row in (col + 1)..p {
            let v = m[[row, col]].abs();
            if v > pivot_val {
                pivot_val = v;
                pivot_row = row;
            }
        }
        if pivot_val < PIVOT_TOLERANCE * scale {
            return Err(CoreError::Degenerate(
                "rank-deficient linear system".into(),
            ));
        }
        if pivot_row != col {
            for j in 0..p {
                m.swap([col, j], [pivot_row, j]);
            }
            for j in 0..q {
                rhs.swap([col, j], [pivot_row, j]);
            }
        }
        for row in (col + 1)..p {
            let factor = m[[row, col]] / m[[col, col]];
            if factor == 0.0 {
                continue;
            }
            for j in col..p {
                m[[row, j]] -= factor * m[[col, j]];
            }
            for j in 0..q {
                rhs[[row, j]] -= factor * rhs[[col, j]];
            }
        }
    }
    let mut x = Matrix::zeros((p, q));
    for col in (0..p).rev() {
        for j in 0..q {
            let mut v = rhs[[col, j]];
            for k in (col + 1)..p {
                v -= m[[col, k]] * x[[k, j]];
            }
            x[[col, j]] = v / m[[col, col]];
        }
    }
    Ok(x)
}

/// Multi-output least squares: minimizes `||X*B - Y||_F` over `B` via the
/// normal equations `(X^T X) B = X^T Y`. Requires at least as many rows as
/// columns and a full-column-rank `X`.
pub fn lstsq(x: &Matrix, y: &Matrix) -> Result<Matrix> {
    let (n, p) = x.dim();
    if y.nrows() != n {
        return Err(CoreError::ShapeMismatch {
            context: "lstsq",
            expected: format!("{n} target rows"),
            got: format!("{} target rows", y.nrows()),
        });
    }
    if n < p || p == 0 {
        return Err(CoreError::InvalidInput(format!(
            "lstsq needs rows >= columns >= 1, got {n} rows and {p} columns"
        )));
    }
    ensure_finite("lstsq design", x)?;
    ensure_finite("lstsq targets", y)?;
    let xt = x.t();
    solve_linear(&xt.dot(x), &xt.dot(y))
}

/// Per-model metric intercepts from an OLS fit that controls for dataset kind.
#[derive(Debug, Clone)]
pub struct OlsTable {
    /// Models present in the records, canonical order.
    pub models: Vec<ModelKind>,
    /// Dataset whose effect is absorbed into the intercepts (reference level).
    pub reference_dataset: DatasetKind,
    /// Intercepts per model, one `[f64; 5]` per model in [`METRIC_COLUMNS`] order.
    pub intercepts: Vec<[f64; 5]>,
    /// Additive adjustment of each non-reference dataset relative to the
    /// reference, per metric.
    pub dataset_effects: Vec<(DatasetKind, [f64; 5])>,
}

impl OlsTable {
    /// CSV with one row per model: `model,r_xz,...,kl_recon`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("model");
        for c in METRIC_COLUMNS {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (model, row) in self.models.iter().zip(self.intercepts.iter()) {
            out.push_str(model.as_str());
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Regresses each metric on model indicators plus dataset dummy variables
/// (first present dataset kind, in canonical order, is the reference level)
/// and returns the model-indicator intercepts.
///
/// With a single dataset kind the dummies vanish and the intercepts are
/// exactly the per-model group means. Records are sorted internally, so the
/// result is bitwise independent of input order.
pub fn ols_aggregate(records: &[MetricRecord]) -> Result<OlsTable> {
    if records.is_empty() {
        return Err(CoreError::InvalidInput(
            "ols_aggregate needs at least one record".into(),
        ));
    }
    let mut sorted: Vec<&MetricRecord> = records.iter().collect();
    sorted.sort_by(|a, b| {
        let ka = (kind_index(a.model), dataset_index(a.dataset), a.seed);
        let kb = (kind_index(b.model), dataset_index(b.dataset), b.seed);
        ka.cmp(&kb).then_with(|| {
            (0..METRIC_COLUMNS.len())
                .map(|m| a.metric(m).total_cmp(&b.metric(m)))
                .fold(std::cmp::Ordering::Equal, std::cmp::Ordering::then)
        })
    });

    let models: Vec<ModelKind> = ModelKind::ALL
        .into_iter()
        .filter(|m| sorted.iter().any(|r| r.model == *m))
        .collect();
    let datasets: Vec<DatasetKind> = DatasetKind::ALL
        .into_iter()
        .filter(|d| sorted.iter().any(|r| r.dataset == *d))
        .collect();

    let n = sorted.len();
    let p = models.len() + datasets.len() - 1; // model indicators + dataset dummies
    if n < p {
        return Err(CoreError::InvalidInput(format!(
            "{n} records cannot identify {p} regression coefficients"
        )));
    }
    let mut x = Matrix::zeros((n, p));
    let mut y = Matrix::zeros((n, METRIC_COLUMNS.len()));
    for (row, rec) in sorted.iter().enumerate() {
        let mi = models.iter().position(|m| *m == rec.model).expect("present");
        x[[row, mi]] = 1.0;
        let di = datasets
            .iter()
            .position(|d| *d == rec.dataset)
            .expect("present");
        if di > 0 {
            x[[row, models.len() + di - 1]] = 1.0;
        }
        for m in 0..METRIC_COLUMNS.len() {
            y[[row, m]] = rec.metric(m);
        }
    }
    let beta = lstsq(&x, &y)?;

    let mut intercepts = Vec::with_capacity(models.len());
    for i in 0..models.len() {
        let mut row = [0.0; 5];
        for m in 0..METRIC_COLUMNS.len() {
            row[m] = beta[[i, m]];
        }
        intercepts.push(row);
    }
    let mut dataset_effects = Vec::with_capacity(datasets.len() - 1);
    for (di, d) in datasets.iter().enumerate().skip(1) {
        let mut row = [0.0; 5];
        for m in 0..METRIC_COLUMNS.len() {
            row[m] = beta[[models.len() + di - 1, m]];
        }
        dataset_effects.push((*d, row));
    }
    Ok(OlsTable {
        models,
        reference_dataset: datasets[0],
        intercepts,
        dataset_effects,
    })
}

fn kind_index(kind: ModelKind) -> usize {
    ModelKind::ALL.iter().position(|m| *m == kind).expect("known kind")
}

fn dataset_index(kind: DatasetKind) -> usize {
    DatasetKind::ALL
        .iter()
        .position(|d| *d == kind)
        .expect("known kind")
}

/// Difference of class-conditional latent means: `mean(z | label) - mean(z | !label)`.
pub fn attribute_vector_mean(z: &Matrix, labels: &[bool]) -> Result<Vec<f64>> {
    let (n, d) = z.dim();
    if labels.len() != n {
        return Err(CoreError::ShapeMismatch {
            context: "attribute_vector_mean",
            expected: format!("{n} labels"),
            got: format!("{} labels", labels.len()),
        });
    }
    ensure_finite("attribute_vector_mean latents", z)?;
    let pos = labels.iter().filter(|l| **l).count();
    if pos == 0 || pos == n {
        return Err(CoreError::InvalidInput(
            "both label classes must be nonempty".into(),
        ));
    }
    let mut sum_pos = vec![0.0; d];
    let mut sum_neg = vec![0.0; d];
    for (row, &label) in z.rows().into_iter().zip(labels) {
        let target = if label { &mut sum_pos } else { &mut sum_neg };
        for (acc, v) in target.iter_mut().zip(row.iter()) {
            *acc += v;
        }
    }
    Ok((0..d)
        .map(|j| sum_pos[j] / pos as f64 - sum_neg[j] / (n - pos) as f64)
        .collect())
}

/// Multi-output OLS of latents on `[1 | attributes]`; returns one coefficient
/// row per attribute column (the intercept row is dropped). Unlike repeated
/// mean differences, jointly fitted coefficients separate effects of
/// correlated attributes.
pub fn attribute_vectors_ols(z: &Matrix, attributes: &Matrix) -> Result<Matrix> {
    let (n, _) = z.dim();
    let (na, a) = attributes.dim();
    if na != n {
        return Err(CoreError::ShapeMismatch {
            context: "attribute_vectors_ols",
            expected: format!("{n} attribute rows"),
            got: format!("{na} attribute rows"),
        });
    }
    if a == 0 {
        return Err(CoreError::InvalidInput("no attribute columns".into()));
    }
    let mut design = Matrix::ones((n, a + 1));
    design.slice_mut(ndarray::s![.., 1..]).assign(attributes);
    let beta = lstsq(&design, z)?;
    Ok(beta.slice(ndarray::s![1.., ..]).to_owned())
}
