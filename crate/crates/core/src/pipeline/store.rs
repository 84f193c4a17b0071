use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ModelBank, ModelSet, NetworkModel, PipelineError, RunConfig, Standardizer, Task, TaskModel};
use crate::ingest::{Dataset, Provenance};
use crate::nn::{read_checkpoint, write_checkpoint, CheckpointHeader};
use crate::skeleton::JointIndexMap;

/// Everything needed to rerun an evaluation exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub config: RunConfig,
    pub seed: u64,
    pub config_digest: String,
    pub dataset_checksum: String,
    pub provenance: Provenance,
    pub n_sequences: usize,
    pub n_static: usize,
    pub n_dynamic: usize,
    pub patients: Vec<u32>,
}

impl RunManifest {
    pub fn new(cfg: &RunConfig, ds: &Dataset) -> Self {
        let (n_static, n_dynamic) = super::kind_counts(ds);
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: cfg.clone(),
            seed: cfg.seed,
            config_digest: cfg.digest(),
            dataset_checksum: ds.checksum(),
            provenance: ds.provenance,
            n_sequences: ds.sequences.len(),
            n_static,
            n_dynamic,
            patients: ds.patients(),
        }
    }

    /// Fails unless `ds` is byte-for-byte the dataset the manifest was made from.
    pub fn verify(&self, ds: &Dataset) -> Result<(), PipelineError> {
        let found = ds.checksum();
        if found != self.dataset_checksum {
            return Err(PipelineError::ConfigMismatch(format!(
                "dataset checksum {found} differs from the recorded {}",
                self.dataset_checksum
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CheckpointMeta {
    #[serde(flatten)]
    task: Task,
    window: usize,
    scaler: Standardizer,
}

pub fn checkpoint_name(task: Task, window: usize) -> String {
    format!("{}_w{window}.ckpt", task.name())
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes one checkpoint per trained model into `dir`; returns the paths
/// in bank, then task, order.
pub fn save_model_set(set: &ModelSet<NetworkModel>, cfg: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let digest = cfg.digest();
    let mut paths = Vec::new();
    for bank in &set.banks {
        for tm in &bank.models {
            let meta = CheckpointMeta {
                task: tm.task,
                window: bank.window,
                scaler: tm.model.scaler.clone(),
            };
            let header = CheckpointHeader::new(
                &tm.model.params,
                cfg.seed,
                digest.clone(),
                serde_json::to_value(meta).expect("meta is serializable"),
            );
            let path = dir.join(checkpoint_name(tm.task, bank.window));
            let file = File::create(&path).map_err(io_err(&path))?;
            write_checkpoint(BufWriter::new(file), &header, &tm.model.params)?;
            paths.push(path);
        }
    }
    Ok(paths)
}

/// Reads the checkpoints `save_model_set` wrote for `cfg`. Every header
/// must carry the digest of `cfg`.
pub fn load_model_set(dir: &Path, cfg: &RunConfig, joint_map: &JointIndexMap) -> Result<ModelSet<NetworkModel>, PipelineError> {
    cfg.validate()?;
    let digest = cfg.digest();
    let mut banks = Vec::new();
    for window in cfg.windows.lengths() {
        let mut models = Vec::new();
        for task in Task::for_protocol(cfg.protocol) {
            let path = dir.join(checkpoint_name(task, window));
            let file = File::open(&path).map_err(io_err(&path))?;
            let (header, params) = read_checkpoint(BufReader::new(file))?;
            if header.config_digest != digest {
                return Err(PipelineError::ConfigMismatch(format!(
                    "{} was trained with config {}, current config is {digest}",
                    path.display(),
                    header.config_digest
                )));
            }
            let meta: CheckpointMeta = serde_json::from_value(header.meta)
                .map_err(|e| PipelineError::ConfigMismatch(format!("{}: {e}", path.display())))?;
            if meta.task != task || meta.window != window {
                return Err(PipelineError::ConfigMismatch(format!(
                    "{} holds task {} window {}",
                    path.display(),
                    meta.task,
                    meta.window
                )));
            }
            models.push(TaskModel {
                task,
                model: NetworkModel {
                    params,
                    scaler: meta.scaler,
                },
            });
        }
        banks.push(ModelBank {
            window,
            preprocessor: cfg.preprocessor(window, joint_map)?,
            models,
        });
    }
    Ok(ModelSet {
        protocol: cfg.protocol,
        plan: cfg.windows,
        banks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{generate_synthetic, SynthConfig};
    use crate::nn::TrainConfig;
    use crate::pipeline::{train_protocol, NetKind, NetworkLearner, Protocol, WindowPlan};
    use crate::preprocess::NormMethod;
    use crate::skeleton::GestureSequence;

    fn tiny_cfg() -> RunConfig {
        let mut c = RunConfig::new(Protocol::MultiClass, NormMethod::M1, WindowPlan::Single { window: 8 }, 3);
        c.net = NetKind::Lstm { hidden: 3 };
        c.stride = 8;
        c.train = TrainConfig {
            epochs: 1,
            ..TrainConfig::new(3)
        };
        c
    }

    #[test]
    fn model_set_roundtrip() {
        let ds = generate_synthetic(&SynthConfig::new(1, 9)).unwrap();
        let seqs: Vec<&GestureSequence> = ds.sequences.iter().collect();
        let cfg = tiny_cfg();
        let set = train_protocol(&seqs, &ds.joint_map, &cfg, &NetworkLearner::from_config(&cfg), 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let paths = save_model_set(&set, &cfg, dir.path()).unwrap();
        assert_eq!(paths.len(), 2);
        let back = load_model_set(dir.path(), &cfg, &ds.joint_map).unwrap();
        for s in &ds.sequences {
            assert_eq!(set.predict(s).unwrap(), back.predict(s).unwrap());
        }
        let other = RunConfig { seed: 4, ..cfg };
        assert!(matches!(
            load_model_set(dir.path(), &other, &ds.joint_map),
            Err(PipelineError::ConfigMismatch(_))
        ));
    }

    #[test]
    fn manifest_verifies_dataset() {
        let ds = generate_synthetic(&SynthConfig::new(1, 9)).unwrap();
        let m = RunManifest::new(&tiny_cfg(), &ds);
        m.verify(&ds).unwrap();
        let other = generate_synthetic(&SynthConfig::new(1, 10)).unwrap();
        assert!(m.verify(&other).is_err());
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(serde_json::from_str::<RunManifest>(&json).unwrap(), m);
    }
}
