//! Quantitative evaluation: density/KL scores for generated points, latent
//! geometry preservation, regression-based aggregation across datasets, and
//! latent attribute-vector extraction.

mod distcorr;
mod kde;
mod knn_kl;
mod linreg;

pub use distcorr::{pairwise_distance_correlation, DEFAULT_MAX_PAIRS};
pub use kde::{kde_fit, kde_loglik, KdeModel};
pub use knn_kl::{kl_divergence, DEFAULT_KNN_K};
pub use linreg::{
    attribute_vector_mean, attribute_vectors_ols, lstsq, ols_aggregate, OlsTable,
};

use crate::dataset::DatasetKind;
use crate::error::{CoreError, Result};
use crate::train::ModelKind;
use serde::{Deserialize, Serialize};

/// Metric column names in canonical order, matching the CSV layout.
pub const METRIC_COLUMNS: [&str; 5] = [
    "r_xz",
    "loglik_interp",
    "loglik_recon",
    "kl_interp",
    "kl_recon",
];

/// One evaluated (model, dataset, seed) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub model: ModelKind,
    pub dataset: DatasetKind,
    /// Correlation between pairwise data-space and latent-space distances.
    pub r_xz: f64,
    /// KDE log-likelihood of decoded latent interpolations under real data.
    pub loglik_interp: f64,
    /// KDE log-likelihood of reconstructions under real data.
    pub loglik_recon: f64,
    /// kNN KL divergence from real data to decoded interpolations.
    pub kl_interp: f64,
    /// kNN KL divergence from real data to reconstructions.
    pub kl_recon: f64,
    pub seed: u64,
}

impl MetricRecord {
    /// Metric value by canonical column index (see [`METRIC_COLUMNS`]).
    pub fn metric(&self, index: usize) -> f64 {
        match index {
            0 => self.r_xz,
            1 => self.loglik_interp,
            2 => self.loglik_recon,
            3 => self.kl_interp,
            4 => self.kl_recon,
            _ => panic!("metric index {index} out of range"),
        }
    }
}

const RECORD_HEADER: &str = "model,dataset,r_xz,loglik_interp,loglik_recon,kl_interp,kl_recon,seed";

/// Serializes records to CSV. Float formatting round-trips exactly.
pub fn records_to_csv(records: &[MetricRecord]) -> String {
    let mut out = String::from(RECORD_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.model.as_str(),
            r.dataset.as_str(),
            r.r_xz,
            r.loglik_interp,
            r.loglik_recon,
            r.kl_interp,
            r.kl_recon,
            r.seed
        ));
    }
    out
}

/// Parses the CSV produced by [`records_to_csv`].
pub fn records_from_csv(text: &str) -> Result<Vec<MetricRecord>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim_end() == RECORD_HEADER => {}
        other => {
            return Err(CoreError::InvalidInput(format!(
                "bad metrics CSV header: {other:?}"
            )))
        }
    }
    let mut records = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(CoreError::InvalidInput(format!(
                "metrics CSV line {}: expected 8 fields, got {}",
                lineno + 2,
                fields.len()
            )));
        }
        let parse = |s: &str, what: &str| -> Result<f64> {
            s.trim().parse::<f64>().map_err(|e| {
                CoreError::InvalidInput(format!(
                    "metrics CSV line {}: bad {what} value {s:?}: {e}",
                    lineno + 2
                ))
            })
        };
        records.push(MetricRecord {
            model: fields[0].trim().parse()?,
            dataset: fields[1].trim().parse()?,
            r_xz: parse(fields[2], "r_xz")?,
            loglik_interp: parse(fields[3], "loglik_interp")?,
            loglik_recon: parse(fields[4], "loglik_recon")?,
            kl_interp: parse(fields[5], "kl_interp")?,
            kl_recon: parse(fields[6], "kl_recon")?,
            seed: fields[7].trim().parse::<u64>().map_err(|e| {
                CoreError::InvalidInput(format!(
                    "metrics CSV line {}: bad seed {:?}: {e}",
                    lineno + 2,
                    fields[7]
                ))
            })?,
        });
    }
    Ok(records)
}
