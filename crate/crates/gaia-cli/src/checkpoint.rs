//! Model checkpoints: an 8-byte magic, a little-endian u64 header length, a
//! JSON header (kinds, architecture, optimizer steps, data statistics, SHA-256
//! of the payload), then the payload itself — every network's parameters
//! followed by every optimizer's Adam moments, as little-endian f64.
//!
//! Round trips are bit-exact: loading a saved run reproduces evaluation
//! outputs to the last bit.

use crate::error::{CliError, Result};
use gaia_core::dataset::DatasetKind;
use gaia_core::model::{Autoencoder, GaiaModel, ModelConfig, VaeModel};
use gaia_core::tensor::{AdamState, MlpNetwork};
use gaia_core::train::{
    GaiaOptimizers, ModelKind, PairOptimizers, TrainConfig, TrainedModel, TrainerState,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

const MAGIC: &[u8; 8] = b"GAIALAB1";
const VERSION: u32 = 1;

/// Everything persisted for one trained grid cell.
#[derive(Debug)]
pub struct SavedRun {
    pub model: TrainedModel,
    pub state: TrainerState,
    pub dataset: DatasetKind,
    pub model_config: ModelConfig,
    pub train_config: TrainConfig,
    /// Standardization statistics of the training batch, needed to map fresh
    /// evaluation samples into the model's input space.
    pub data_mean: [f64; 2],
    pub data_std: [f64; 2],
    /// Completed training steps.
    pub step: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct NetworkMeta {
    name: String,
    dims: Vec<usize>,
    param_count: usize,
    moment_count: usize,
    adam_step: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    version: u32,
    model: ModelKind,
    dataset: DatasetKind,
    step: u64,
    model_config: ModelConfig,
    train_config: TrainConfig,
    data_mean: [f64; 2],
    data_std: [f64; 2],
    networks: Vec<NetworkMeta>,
    payload_values: usize,
    payload_sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn net_dims(net: &MlpNetwork) -> Vec<usize> {
    let mut dims = vec![net.input_dim()];
    dims.extend(net.layers().iter().map(|l| l.out_dim()));
    dims
}

/// Networks of a model in canonical order, paired with their names.
fn networks_of(model: &TrainedModel) -> Vec<(&'static str, &MlpNetwork)> {
    match model {
        TrainedModel::Ae(m) => vec![("encoder", &m.encoder), ("decoder", &m.decoder)],
        TrainedModel::Vae(m) => vec![("encoder", &m.encoder), ("decoder", &m.decoder)],
        TrainedModel::Gaia(m) => vec![
            ("generator.encoder", &m.generator.encoder),
            ("generator.decoder", &m.generator.decoder),
            ("discriminator.encoder", &m.discriminator.encoder),
            ("discriminator.decoder", &m.discriminator.decoder),
        ],
    }
}

fn optimizers_of(state: &TrainerState) -> Vec<&AdamState> {
    match state {
        TrainerState::Pair(p) => vec![&p.encoder, &p.decoder],
        TrainerState::Gaia(g) => vec![
            &g.gen_encoder,
            &g.gen_decoder,
            &g.disc_encoder,
            &g.disc_decoder,
        ],
    }
}

pub fn save_checkpoint(path: &Path, run: &SavedRun) -> Result<()> {
    let nets = networks_of(&run.model);
    let opts = optimizers_of(&run.state);
    if nets.len() != opts.len() {
        return Err(CliError::Internal(
            "network/optimizer count mismatch".into(),
        ));
    }

    let mut values: Vec<f64> = Vec::new();
    let mut metas = Vec::with_capacity(nets.len());
    for ((name, net), opt) in nets.iter().zip(opts.iter()) {
        let params = net.params_vec();
        let moments = opt.moments_vec();
        metas.push(NetworkMeta {
            name: (*name).to_string(),
            dims: net_dims(net),
            param_count: params.len(),
            moment_count: moments.len(),
            adam_step: opt.step_count(),
        });
        values.extend(params);
    }
    for opt in &opts {
        values.extend(opt.moments_vec());
    }

    let mut payload = Vec::with_capacity(values.len() * 8);
    for v in &values {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    let header = Header {
        version: VERSION,
        model: run.train_config.kind,
        dataset: run.dataset,
        step: run.step,
        model_config: run.model_config.clone(),
        train_config: run.train_config.clone(),
        data_mean: run.data_mean,
        data_std: run.data_std,
        networks: metas,
        payload_values: values.len(),
        payload_sha256: sha256_hex(&payload),
    };
    let header_json =
        serde_json::to_vec(&header).map_err(|e| CliError::Internal(e.to_string()))?;

    let mut bytes = Vec::with_capacity(16 + header_json.len() + payload.len());
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&(header_json.len() as u64).to_le_bytes());
    bytes.extend_from_slice(&header_json);
    bytes.extend_from_slice(&payload);
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Loads and integrity-checks a checkpoint. When `expected_arch` is given, a
/// differing stored architecture is a configuration error rather than a
/// silent reinterpretation of the payload.
pub fn load_checkpoint(path: &Path, expected_arch: Option<&ModelConfig>) -> Result<SavedRun> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let corrupt = |what: &str| {
        CliError::Io(format!("{}: corrupted checkpoint ({what})", path.display()))
    };
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    if bytes.len() < 16 + header_len {
        return Err(corrupt("truncated header"));
    }
    let header: Header = serde_json::from_slice(&bytes[16..16 + header_len])
        .map_err(|_| corrupt("unparseable header"))?;
    if header.version != VERSION {
        return Err(CliError::Config(format!(
            "{}: checkpoint version {} unsupported (expected {VERSION})",
            path.display(),
            header.version
        )));
    }
    if let Some(expected) = expected_arch {
        if header.model_config != *expected {
            return Err(CliError::Config(format!(
                "{}: checkpoint architecture {:?} does not match configured {:?}",
                path.display(),
                header.model_config,
                expected
            )));
        }
    }
    let payload = &bytes[16 + header_len..];
    if payload.len() != header.payload_values * 8 {
        return Err(corrupt("truncated payload"));
    }
    if sha256_hex(payload) != header.payload_sha256 {
        return Err(corrupt("payload hash mismatch"));
    }
    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();

    // Rebuild the model skeleton from the stored config, then overwrite its
    // parameters. The dummy seed never leaks: every weight is replaced.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let arch = &header.model_config;
    let mut model = match header.model {
        ModelKind::Ae => TrainedModel::Ae(Autoencoder::build(arch, &mut rng)?),
        ModelKind::Vae => TrainedModel::Vae(VaeModel::build(arch, &mut rng)?),
        ModelKind::Gaia | ModelKind::GaiaNoDist => {
            TrainedModel::Gaia(GaiaModel::build(arch, &mut rng)?)
        }
    };

    let expected_names: Vec<&str> = match &model {
        TrainedModel::Ae(_) | TrainedModel::Vae(_) => vec!["encoder", "decoder"],
        TrainedModel::Gaia(_) => vec![
            "generator.encoder",
            "generator.decoder",
            "discriminator.encoder",
            "discriminator.decoder",
        ],
    };
    if header.networks.len() != expected_names.len()
        || header
            .networks
            .iter()
            .zip(&expected_names)
            .any(|(m, n)| m.name != *n)
    {
        return Err(corrupt("unexpected network list"));
    }

    {
        let mut nets: Vec<&mut MlpNetwork> = match &mut model {
            TrainedModel::Ae(m) => vec![&mut m.encoder, &mut m.decoder],
            TrainedModel::Vae(m) => vec![&mut m.encoder, &mut m.decoder],
            TrainedModel::Gaia(m) => vec![
                &mut m.generator.encoder,
                &mut m.generator.decoder,
                &mut m.discriminator.encoder,
                &mut m.discriminator.decoder,
            ],
        };
        let mut offset = 0usize;
        for (net, meta) in nets.iter_mut().zip(&header.networks) {
            if net_dims(net) != meta.dims {
                return Err(CliError::Config(format!(
                    "{}: stored {} dims {:?} do not match architecture {:?}",
                    path.display(),
                    meta.name,
                    meta.dims,
                    net_dims(net)
                )));
            }
            let end = offset + meta.param_count;
            if end > values.len() {
                return Err(corrupt("parameter payload too short"));
            }
            net.set_params(&values[offset..end])?;
            offset = end;
        }
        // Optimizer moments follow all parameters.
        let nets_ro: Vec<&MlpNetwork> = nets.iter().map(|n| &**n).collect();
        let mut states = Vec::with_capacity(nets_ro.len());
        for (net, meta) in nets_ro.iter().zip(&header.networks) {
            let end = offset + meta.moment_count;
            if end > values.len() {
                return Err(corrupt("moment payload too short"));
            }
            states.push(AdamState::from_moments(net, &values[offset..end], meta.adam_step)?);
            offset = end;
        }
        if offset != values.len() {
            return Err(corrupt("payload length mismatch"));
        }
        let state = match header.model {
            ModelKind::Ae | ModelKind::Vae => {
                let mut it = states.into_iter();
                TrainerState::Pair(PairOptimizers {
                    encoder: it.next().expect("two states"),
                    decoder: it.next().expect("two states"),
                })
            }
            ModelKind::Gaia | ModelKind::GaiaNoDist => {
                let mut it = states.into_iter();
                TrainerState::Gaia(GaiaOptimizers {
                    gen_encoder: it.next().expect("four states"),
                    gen_decoder: it.next().expect("four states"),
                    disc_encoder: it.next().expect("four states"),
                    disc_decoder: it.next().expect("four states"),
                })
            }
        };
        Ok(SavedRun {
            model,
            state,
            dataset: header.dataset,
            model_config: header.model_config,
            train_config: header.train_config,
            data_mean: header.data_mean,
            data_std: header.data_std,
            step: header.step,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use gaia_core::dataset::{generate, DatasetConfig};
    use gaia_core::tensor::Matrix;
    use gaia_core::train::{train, TrainOutcome};
    use tempfile::tempdir;

    fn small_run(kind: ModelKind) -> (TrainOutcome, SavedRun) {
        let data = generate(&DatasetConfig::new(DatasetKind::Moons), 256, 3).unwrap();
        let arch = ModelConfig {
            hidden_layers: 2,
            hidden_units: 16,
            ..ModelConfig::default()
        };
        let mut config = TrainConfig::new(kind);
        config.steps = 30;
        config.batch = 32;
        config.seed = 11;
        let outcome = train(&data, &arch, &config).unwrap();
        let saved = SavedRun {
            model: outcome.model.clone(),
            state: outcome.optimizers.clone(),
            dataset: DatasetKind::Moons,
            model_config: arch,
            train_config: config,
            data_mean: data.mean,
            data_std: data.std,
            step: 30,
        };
        (outcome, saved)
    }

    #[test]
    fn round_trip_reproduces_evaluation_bitwise() {
        for kind in ModelKind::ALL {
            let dir = tempdir().unwrap();
            let path = dir.path().join("model.ckpt");
            let (outcome, saved) = small_run(kind);
            save_checkpoint(&path, &saved).unwrap();
            let loaded = load_checkpoint(&path, Some(&saved.model_config)).unwrap();

            let probe = Matrix::from_shape_fn((40, 2), |(i, j)| {
                0.05 * i as f64 - 0.1 * j as f64
            });
            let a = outcome.model.reconstruct(&probe).unwrap();
            let b = loaded.model.reconstruct(&probe).unwrap();
            assert_eq!(a, b, "{kind:?} reconstruction must be bit-identical");
            let za = outcome.model.encode(&probe).unwrap();
            let zb = loaded.model.encode(&probe).unwrap();
            assert_eq!(za, zb);
            assert_eq!(loaded.step, 30);
            assert_eq!(loaded.dataset, DatasetKind::Moons);
            assert_eq!(loaded.data_mean, saved.data_mean);
            assert_eq!(loaded.data_std, saved.data_std);

            // Optimizer states survive too.
            let orig = optimizers_of(&saved.state);
            let back = optimizers_of(&loaded.state);
            for (x, y) in orig.iter().zip(back.iter()) {
                assert_eq!(x.step_count(), y.step_count());
                assert_eq!(x.moments_vec(), y.moments_vec());
            }
        }
    }

    #[test]
    fn truncated_files_are_rejected_not_misread() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let (_, saved) = small_run(ModelKind::Ae);
        save_checkpoint(&path, &saved).unwrap();
        let full = std::fs::read(&path).unwrap();

        for cut in [0, 4, 15, 40, full.len() - 9, full.len() - 1] {
            std::fs::write(&path, &full[..cut]).unwrap();
            let err = load_checkpoint(&path, None).unwrap_err();
            assert_eq!(err.exit_code(), 4, "cut at {cut}: {err}");
        }
    }

    #[test]
    fn corrupted_payload_fails_the_hash_check() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let (_, saved) = small_run(ModelKind::Gaia);
        save_checkpoint(&path, &saved).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let last = bytes.len() - 3;
        bytes[last] ^= 0xff;
        std::fs::write(&path, &bytes).unwrap();
        let err = load_checkpoint(&path, None).unwrap_err();
        assert!(err.to_string().contains("hash mismatch"), "{err}");
    }

    #[test]
    fn architecture_mismatch_is_an_explicit_config_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let (_, saved) = small_run(ModelKind::Vae);
        save_checkpoint(&path, &saved).unwrap();
        let other = ModelConfig {
            hidden_layers: 3,
            hidden_units: 16,
            ..ModelConfig::default()
        };
        let err = load_checkpoint(&path, Some(&other)).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("architecture"), "{err}");
        // Without an expectation the stored architecture is authoritative.
        assert!(load_checkpoint(&path, None).is_ok());
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        std::fs::write(&path, b"NOTAMODELxxxxxxxxxxxxxxxx").unwrap();
        let err = load_checkpoint(&path, None).unwrap_err();
        assert!(err.to_string().contains("bad magic"), "{err}");
    }
}
