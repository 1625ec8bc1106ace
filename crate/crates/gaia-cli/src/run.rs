//! Subcommand implementations. `train` executes the full grid (train →
//! checkpoint → evaluate → figures → manifest); `evaluate`, `plot`,
//! `compare`, `attr-vectors`, and `generate-data` re-derive their outputs
//! deterministically from checkpoints or earlier artifacts, so re-running
//! any of them in the same directory reproduces the same bytes.

use crate::checkpoint::{load_checkpoint, save_checkpoint, SavedRun};
use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::eval::{
    cell_train_seed, eval_points, evaluate_cell, label_indicators, train_data_seed, CellEval,
};
use crate::manifest::{RunManifest, MANIFEST_NAME};
use gaia_core::dataset::{generate, DatasetKind};
use gaia_core::metrics::{
    attribute_vector_mean, attribute_vectors_ols, ols_aggregate, records_from_csv,
    records_to_csv, MetricRecord,
};
use gaia_core::train::{train, ModelKind};
use gaia_core::viz::{render_figure, FigureStyle, PanelColumn};
use rayon::prelude::*;
use std::path::Path;
use std::time::Instant;

pub const THREADS_ENV: &str = "GAIA_LAB_THREADS";

/// One (model, dataset) coordinate of the experiment grid.
pub type Cell = (ModelKind, DatasetKind);

/// The requested grid in canonical order: datasets outer, models inner, both
/// in their canonical enum order regardless of config listing order.
pub fn grid(config: &ExperimentConfig) -> Result<Vec<Cell>> {
    let models = config.model_kinds()?;
    let datasets = config.dataset_kinds()?;
    let mut cells = Vec::with_capacity(models.len() * datasets.len());
    for &d in &datasets {
        for &m in &models {
            cells.push((m, d));
        }
    }
    Ok(cells)
}

pub fn checkpoint_rel(model: ModelKind, dataset: DatasetKind, seed: u64) -> String {
    format!("checkpoints/{}-{}-seed{}.ckpt", model.as_str(), dataset.as_str(), seed)
}

pub fn log_rel(model: ModelKind, dataset: DatasetKind, seed: u64) -> String {
    format!("logs/{}-{}-seed{}.csv", model.as_str(), dataset.as_str(), seed)
}

pub fn figure_rel(dataset: DatasetKind) -> String {
    format!("figures/{}.svg", dataset.as_str())
}

fn mesh_rel(dataset: DatasetKind, model: ModelKind, which: &str) -> String {
    format!("figures/{}-{}-{which}.csv", dataset.as_str(), model.as_str())
}

fn write_artifact(
    manifest: &mut RunManifest,
    dir: &Path,
    relative: &str,
    contents: &str,
) -> Result<()> {
    let full = dir.join(relative);
    if let Some(parent) = full.parent() {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    std::fs::write(&full, contents).map_err(|e| CliError::io(&full, e))?;
    manifest.record_artifact(dir, relative)
}

/// Resolves the worker count from `--jobs` (0 = one per core) and the
/// `GAIA_LAB_THREADS` cap.
fn effective_threads(jobs: usize, available: usize, cap: Option<&str>) -> Result<usize> {
    let mut threads = if jobs == 0 { available.max(1) } else { jobs };
    if let Some(cap) = cap {
        let cap: usize = cap.parse().map_err(|_| {
            CliError::Config(format!("{THREADS_ENV} must be a positive integer, got {cap:?}"))
        })?;
        if cap == 0 {
            return Err(CliError::Config(format!("{THREADS_ENV} must be >= 1")));
        }
        threads = threads.min(cap);
    }
    Ok(threads)
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    let available = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let cap = std::env::var(THREADS_ENV).ok();
    let threads = effective_threads(jobs, available, cap.as_deref())?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))
}

/// Trains one cell end to end and returns its evaluation.
fn run_cell(
    config: &ExperimentConfig,
    dir: &Path,
    model: ModelKind,
    dataset: DatasetKind,
) -> Result<(SavedRun, CellEval, String)> {
    let run_seed = config.experiment.seed;
    let data = generate(
        &config.dataset_config(dataset),
        config.data.n_train,
        train_data_seed(run_seed, dataset),
    )?;
    let arch = config.model_config();
    let tc = config.train_config(model, cell_train_seed(run_seed, model, dataset));
    let outcome = train(&data, &arch, &tc)?;
    let saved = SavedRun {
        model: outcome.model,
        state: outcome.optimizers,
        dataset,
        model_config: arch,
        train_config: tc,
        data_mean: data.mean,
        data_std: data.std,
        step: outcome.history.len() as u64,
    };
    save_checkpoint(&dir.join(checkpoint_rel(model, dataset, run_seed)), &saved)?;
    let log_csv = outcome.history.to_csv();
    let cell = evaluate_cell(&saved, config, run_seed)?;
    Ok((saved, cell, log_csv))
}

/// Writes metrics.csv / metrics.json / comparison.csv from a record set.
fn write_metric_outputs(
    manifest: &mut RunManifest,
    dir: &Path,
    records: &[MetricRecord],
) -> Result<()> {
    write_artifact(manifest, dir, "metrics.csv", &records_to_csv(records))?;
    let json = serde_json::to_string_pretty(records)
        .map_err(|e| CliError::Internal(e.to_string()))?;
    write_artifact(manifest, dir, "metrics.json", &(json + "\n"))?;
    match ols_aggregate(records) {
        Ok(table) => write_artifact(manifest, dir, "comparison.csv", &table.to_csv())?,
        Err(e) => {
            // A thin grid (e.g. one record) can be unidentifiable; the raw
            // metrics still stand on their own.
            eprintln!("note: comparison table skipped: {e}");
        }
    }
    Ok(())
}

/// Renders one dataset figure plus its mesh CSV sidecars from the cells
/// evaluated on that dataset (canonical model order).
fn write_dataset_figure(
    manifest: &mut RunManifest,
    dir: &Path,
    config: &ExperimentConfig,
    dataset: DatasetKind,
    cells: Vec<(ModelKind, CellEval)>,
) -> Result<()> {
    if cells.is_empty() {
        return Ok(());
    }
    let style = FigureStyle {
        panel_size: config.viz.panel_size,
        bins: config.viz.bins,
        margin_frac: config.viz.margin_frac,
    };
    let mut columns = Vec::with_capacity(cells.len());
    for (model, cell) in cells {
        write_artifact(
            manifest,
            dir,
            &mesh_rel(dataset, model, "zmesh"),
            &cell.z_mesh.to_csv(),
        )?;
        write_artifact(
            manifest,
            dir,
            &mesh_rel(dataset, model, "xmesh"),
            &cell.x_mesh.to_csv(),
        )?;
        columns.push(PanelColumn {
            title: model.as_str().to_string(),
            data: cell.eval_x,
            interpolants: cell.x_int,
            z_mesh: cell.z_mesh,
            x_mesh: cell.x_mesh,
            recon: cell.x_rec,
        });
    }
    let svg = render_figure(&columns, &style)?;
    write_artifact(manifest, dir, &figure_rel(dataset), &svg)
}

/// Full experiment: train every grid cell, evaluate, render, manifest.
/// Failures (divergence, degenerate evaluation) are recorded per cell and
/// reported together; surviving cells still produce artifacts.
pub fn cmd_train(config: &ExperimentConfig, dir: &Path) -> Result<()> {
    let started = Instant::now();
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let cells = grid(config)?;
    let pool = thread_pool(config.experiment.jobs)?;

    let results: Vec<(Cell, Result<(SavedRun, CellEval, String)>)> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(model, dataset)| ((model, dataset), run_cell(config, dir, model, dataset)))
            .collect()
    });

    let mut manifest = RunManifest::new(config.experiment.seed, config.clone());
    let run_seed = config.experiment.seed;
    let mut records = Vec::new();
    let mut by_dataset: Vec<(DatasetKind, Vec<(ModelKind, CellEval)>)> = Vec::new();
    for ((model, dataset), result) in results {
        match result {
            Ok((_, cell, log_csv)) => {
                manifest.record_artifact(dir, &checkpoint_rel(model, dataset, run_seed))?;
                write_artifact(&mut manifest, dir, &log_rel(model, dataset, run_seed), &log_csv)?;
                records.push(cell.record.clone());
                match by_dataset.iter_mut().find(|(d, _)| *d == dataset) {
                    Some((_, v)) => v.push((model, cell)),
                    None => by_dataset.push((dataset, vec![(model, cell)])),
                }
            }
            Err(e) => {
                manifest
                    .failures
                    .push(format!("{}-{}: {e}", model.as_str(), dataset.as_str()));
            }
        }
    }

    if !records.is_empty() {
        write_metric_outputs(&mut manifest, dir, &records)?;
    }
    for (dataset, dataset_cells) in by_dataset {
        write_dataset_figure(&mut manifest, dir, config, dataset, dataset_cells)?;
    }

    manifest.duration_secs = started.elapsed().as_secs_f64();
    let failures = manifest.failures.clone();
    manifest.save(dir)?;
    println!(
        "trained {} cells, {} failed, wrote {}",
        cells.len(),
        failures.len(),
        dir.display()
    );
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Diverged(failures.join("; ")))
    }
}

/// Loads every checkpoint of the grid. Missing checkpoints are I/O errors.
fn load_grid(config: &ExperimentConfig, dir: &Path) -> Result<Vec<(Cell, SavedRun)>> {
    let arch = config.model_config();
    grid(config)?
        .into_iter()
        .map(|(model, dataset)| {
            let rel = checkpoint_rel(model, dataset, config.experiment.seed);
            let run = load_checkpoint(&dir.join(rel), Some(&arch))?;
            if run.train_config.kind != model || run.dataset != dataset {
                return Err(CliError::Config(format!(
                    "checkpoint for {}-{} stores a different cell ({}-{})",
                    model.as_str(),
                    dataset.as_str(),
                    run.train_config.kind.as_str(),
                    run.dataset.as_str()
                )));
            }
            Ok(((model, dataset), run))
        })
        .collect()
}

fn evaluate_grid(
    config: &ExperimentConfig,
    dir: &Path,
) -> Result<Vec<(Cell, CellEval)>> {
    let runs = load_grid(config, dir)?;
    let pool = thread_pool(config.experiment.jobs)?;
    pool.install(|| {
        runs.into_par_iter()
            .map(|(cell, run)| {
                let eval = evaluate_cell(&run, config, config.experiment.seed)?;
                Ok((cell, eval))
            })
            .collect()
    })
}

/// Opens the run's manifest and enforces its integrity invariant: every
/// recorded artifact must still exist and hash to its recorded value. A
/// directory without a manifest (e.g. hand-assembled checkpoints) starts a
/// fresh one.
fn manifest_or_new(config: &ExperimentConfig, dir: &Path) -> Result<RunManifest> {
    if !dir.join(MANIFEST_NAME).exists() {
        return Ok(RunManifest::new(config.experiment.seed, config.clone()));
    }
    let manifest = RunManifest::load(dir)?;
    let bad = manifest.verify(dir);
    if !bad.is_empty() {
        let listed: Vec<String> = bad.iter().map(|p| p.display().to_string()).collect();
        return Err(CliError::Io(format!(
            "artifacts do not match the run manifest (rerun train, or delete {MANIFEST_NAME} \
             to adopt the directory as-is): {}",
            listed.join(", ")
        )));
    }
    Ok(manifest)
}

/// Re-derives metrics from saved checkpoints.
pub fn cmd_evaluate(config: &ExperimentConfig, dir: &Path) -> Result<()> {
    let mut manifest = manifest_or_new(config, dir)?;
    let evals = evaluate_grid(config, dir)?;
    let records: Vec<MetricRecord> = evals.iter().map(|(_, e)| e.record.clone()).collect();
    write_metric_outputs(&mut manifest, dir, &records)?;
    manifest.save(dir)?;
    println!("{}", records_to_csv(&records));
    Ok(())
}

/// Re-renders figures from saved checkpoints.
pub fn cmd_plot(config: &ExperimentConfig, dir: &Path) -> Result<()> {
    let mut manifest = manifest_or_new(config, dir)?;
    let evals = evaluate_grid(config, dir)?;
    let mut by_dataset: Vec<(DatasetKind, Vec<(ModelKind, CellEval)>)> = Vec::new();
    for ((model, dataset), cell) in evals {
        match by_dataset.iter_mut().find(|(d, _)| *d == dataset) {
            Some((_, v)) => v.push((model, cell)),
            None => by_dataset.push((dataset, vec![(model, cell)])),
        }
    }
    let mut count = 0;
    for (dataset, cells) in by_dataset {
        count += 1;
        write_dataset_figure(&mut manifest, dir, config, dataset, cells)?;
    }
    manifest.save(dir)?;
    println!("rendered {count} figures into {}", dir.join("figures").display());
    Ok(())
}

/// Aggregates an existing metrics.csv into the comparison table.
pub fn cmd_compare(config: &ExperimentConfig, dir: &Path) -> Result<()> {
    let path = dir.join("metrics.csv");
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let records = records_from_csv(&text).map_err(CliError::from)?;
    let table = ols_aggregate(&records).map_err(CliError::from)?;
    let csv = table.to_csv();
    let mut manifest = manifest_or_new(config, dir)?;
    write_artifact(&mut manifest, dir, "comparison.csv", &csv)?;
    manifest.save(dir)?;
    print!("{csv}");
    Ok(())
}

/// Writes the train/eval samples of every requested dataset as CSV.
pub fn cmd_generate_data(config: &ExperimentConfig, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let run_seed = config.experiment.seed;
    let mut manifest = manifest_or_new(config, dir)?;
    for dataset in config.dataset_kinds()? {
        let dcfg = config.dataset_config(dataset);
        let train_batch = generate(&dcfg, config.data.n_train, train_data_seed(run_seed, dataset))?;
        let eval_batch = generate(
            &dcfg,
            config.data.n_eval,
            crate::eval::eval_data_seed(run_seed, dataset),
        )?;
        write_artifact(
            &mut manifest,
            dir,
            &format!("data/{}-train.csv", dataset.as_str()),
            &train_batch.to_csv(),
        )?;
        write_artifact(
            &mut manifest,
            dir,
            &format!("data/{}-eval.csv", dataset.as_str()),
            &eval_batch.to_csv(),
        )?;
    }
    manifest.save(dir)?;
    println!("wrote dataset CSVs into {}", dir.join("data").display());
    Ok(())
}

/// Latent attribute vectors from label indicators, by class-mean difference
/// and by joint least squares, one CSV per trained cell.
pub fn cmd_attr_vectors(config: &ExperimentConfig, dir: &Path) -> Result<()> {
    let mut manifest = manifest_or_new(config, dir)?;
    let runs = load_grid(config, dir)?;
    let mut written = 0;
    for ((model, dataset), run) in runs {
        let (eval_x, labels) = eval_points(
            config,
            dataset,
            config.experiment.seed,
            run.data_mean,
            run.data_std,
        )?;
        let z = run.model.encode(&eval_x)?;
        let (classes, attrs) = label_indicators(&labels)?;
        let ols = attribute_vectors_ols(&z, &attrs).map_err(CliError::from)?;

        let latent = z.ncols();
        let mut csv = String::from("method,class");
        for j in 0..latent {
            csv.push_str(&format!(",z{j}"));
        }
        csv.push('\n');
        for (col, &class) in classes.iter().enumerate() {
            let flags: Vec<bool> = attrs.column(col).iter().map(|&v| v == 1.0).collect();
            let mean_vec = attribute_vector_mean(&z, &flags).map_err(CliError::from)?;
            csv.push_str(&format!("mean,{class}"));
            for v in &mean_vec {
                csv.push_str(&format!(",{v}"));
            }
            csv.push('\n');
            csv.push_str(&format!("ols,{class}"));
            for v in ols.row(col) {
                csv.push_str(&format!(",{v}"));
            }
            csv.push('\n');
        }
        let rel = format!(
            "attr-vectors/{}-{}-seed{}.csv",
            model.as_str(),
            dataset.as_str(),
            config.experiment.seed
        );
        write_artifact(&mut manifest, dir, &rel, &csv)?;
        written += 1;
    }
    manifest.save(dir)?;
    println!("wrote {written} attribute-vector tables into {}", dir.join("attr-vectors").display());
    Ok(())
}
