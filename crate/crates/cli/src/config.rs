//! Layered configuration: built-in defaults, then an optional TOML file,
//! then command-line flags.
//!
//! ```toml
//! seed = 42
//!
//! [dataset]
//! root = "data"
//! manifest = "data/manifest.csv"
//!
//! [folds]
//! boundaries = [15, 35]
//!
//! [synth]
//! patients = 55
//! frames_static = [40, 60]
//! frames_dynamic = [60, 90]
//! noise_sigma = 1.0
//! camera_offset_range = 80.0
//!
//! [preprocess]
//! method = 3
//! window = [128, 256]   # or a single length
//! threshold = 128
//! stride = 16
//! include_confidence = false
//! savgol = { enabled = true, m = 5, order = 2 }
//!
//! [joints]
//! names = ["head_top", "chin", ...]
//! chin = "chin"
//!
//! [model]
//! protocol = "multiclass"   # or "binary"
//! net = "lstm"              # or "tcn"
//! hidden = 128
//! channels = 32
//! kernel = 3
//! dilations = [1, 2, 4, 8]
//! rebalance = false
//!
//! [train]
//! learning_rate = 0.001
//! epochs = 50
//! batch_size = 32
//! optimizer = "adam"
//! clip_norm = 5.0   # 0 disables clipping
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use skelgest::ingest::{SynthConfig, DEFAULT_FOLD_BOUNDARIES};
use skelgest::nn::{OptimizerKind, TrainConfig};
use skelgest::pipeline::{LengthRouter, NetKind, Protocol, RunConfig, SmoothingConfig, WindowPlan};
use skelgest::preprocess::NormMethod;
use skelgest::skeleton::{JointIndexMap, DEFAULT_JOINT_NAMES};

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub dataset: DatasetSection,
    #[serde(default, skip_serializing_if = "is_default")]
    pub folds: FoldsSection,
    #[serde(default, skip_serializing_if = "is_default")]
    pub synth: SynthSection,
    #[serde(default, skip_serializing_if = "is_default")]
    pub preprocess: PreprocessSection,
    #[serde(default, skip_serializing_if = "is_default")]
    pub joints: JointsSection,
    #[serde(default, skip_serializing_if = "is_default")]
    pub model: ModelSection,
    #[serde(default, skip_serializing_if = "is_default")]
    pub train: TrainSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub root: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FoldsSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundaries: Option<[u32; 2]>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub patients: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frames_static: Option<[usize; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frames_dynamic: Option<[usize; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub camera_offset_range: Option<f64>,
}

/// A single window length or a short/long pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WindowLengths {
    One(usize),
    Many(Vec<usize>),
}

impl WindowLengths {
    pub fn to_vec(&self) -> Vec<usize> {
        match self {
            WindowLengths::One(w) => vec![*w],
            WindowLengths::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SavgolSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub enabled: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<WindowLengths>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub include_confidence: Option<bool>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub savgol: SavgolSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointsSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub names: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chin: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub protocol: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub net: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hidden: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channels: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dilations: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rebalance: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clip_norm: Option<f64>,
}

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

/// `a.field = b.field.or(a.field)` for every listed field.
macro_rules! overlay {
    ($a:expr, $b:expr; $($f:ident),+) => {
        $( if $b.$f.is_some() { $a.$f = $b.$f.clone(); } )+
    };
}

/// `a.field = a.field.or(default)` for every listed field.
macro_rules! fill {
    ($a:expr; $($f:ident = $v:expr),+ $(,)?) => {
        $( if $a.$f.is_none() { $a.$f = Some($v); } )+
    };
}

impl AppConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is representable as TOML")
    }

    /// Values set in `over` replace the ones in `self`.
    pub fn merge(&mut self, over: &AppConfig) {
        overlay!(self, over; seed);
        overlay!(self.dataset, over.dataset; root, manifest);
        overlay!(self.folds, over.folds; boundaries);
        overlay!(self.synth, over.synth; patients, frames_static, frames_dynamic, noise_sigma, camera_offset_range);
        overlay!(self.preprocess, over.preprocess; method, window, threshold, stride, include_confidence);
        overlay!(self.preprocess.savgol, over.preprocess.savgol; enabled, m, order);
        overlay!(self.joints, over.joints; names, chin);
        overlay!(self.model, over.model; protocol, net, hidden, channels, kernel, dilations, rebalance);
        overlay!(self.train, over.train; learning_rate, epochs, batch_size, optimizer, clip_norm);
    }

    /// Fills every unset key except the seed and dataset paths with its default.
    pub fn with_defaults(mut self) -> Self {
        let windows = self.preprocess.window.clone().unwrap_or(WindowLengths::Many(vec![128, 256]));
        let short = windows.to_vec().first().copied().unwrap_or(128);
        fill!(self.folds; boundaries = [DEFAULT_FOLD_BOUNDARIES.0, DEFAULT_FOLD_BOUNDARIES.1]);
        fill!(self.synth;
            patients = 55,
            frames_static = [40, 60],
            frames_dynamic = [60, 90],
            noise_sigma = 1.0,
            camera_offset_range = 80.0,
        );
        fill!(self.preprocess;
            method = 3,
            window = windows,
            threshold = short,
            stride = 16,
            include_confidence = false,
        );
        fill!(self.preprocess.savgol; enabled = true, m = 5, order = 2);
        fill!(self.joints;
            names = DEFAULT_JOINT_NAMES.iter().map(|s| s.to_string()).collect(),
            chin = "chin".to_string(),
        );
        fill!(self.model;
            protocol = "multiclass".to_string(),
            net = "lstm".to_string(),
            hidden = 128,
            channels = 32,
            kernel = 3,
            dilations = vec![1, 2, 4, 8],
            rebalance = false,
        );
        fill!(self.train;
            learning_rate = 1e-3,
            epochs = 50,
            batch_size = 32,
            optimizer = "adam".to_string(),
            clip_norm = 5.0,
        );
        if let Some(root) = &self.dataset.root {
            if self.dataset.manifest.is_none() {
                self.dataset.manifest = Some(root.join("manifest.csv"));
            }
        }
        self
    }

    pub fn require_seed(&self) -> Result<u64, CliError> {
        self.seed.ok_or_else(|| {
            CliError::Usage("an explicit seed is required: pass --seed or set `seed` in the config file".into())
        })
    }

    pub fn dataset_paths(&self) -> Result<(PathBuf, PathBuf), CliError> {
        let root = self
            .dataset
            .root
            .clone()
            .ok_or_else(|| CliError::Usage("dataset root is required: pass --data or set dataset.root".into()))?;
        let manifest = self.dataset.manifest.clone().unwrap_or_else(|| root.join("manifest.csv"));
        Ok((root, manifest))
    }

    pub fn joint_map(&self) -> Result<JointIndexMap, CliError> {
        let c = self.clone().with_defaults();
        let names = c.joints.names.expect("filled");
        let chin = c.joints.chin.expect("filled");
        let idx = names
            .iter()
            .position(|n| *n == chin)
            .ok_or_else(|| CliError::Usage(format!("joints.chin {chin:?} is not among joints.names")))?;
        Ok(JointIndexMap::new(names, idx)?)
    }

    pub fn synth_config(&self) -> Result<SynthConfig, CliError> {
        let seed = self.require_seed()?;
        let s = self.clone().with_defaults().synth;
        let [sl, sh] = s.frames_static.expect("filled");
        let [dl, dh] = s.frames_dynamic.expect("filled");
        let cfg = SynthConfig {
            n_patients: s.patients.expect("filled"),
            frames_static: (sl, sh),
            frames_dynamic: (dl, dh),
            noise_sigma: s.noise_sigma.expect("filled"),
            camera_offset_range: s.camera_offset_range.expect("filled"),
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// The keys that describe `run`, e.g. to echo a run read back from a manifest.
    pub fn from_run_config(run: &RunConfig) -> Self {
        let mut c = AppConfig {
            seed: Some(run.seed),
            ..AppConfig::default()
        };
        c.folds.boundaries = Some([run.fold_boundaries.0, run.fold_boundaries.1]);
        let p = &mut c.preprocess;
        p.method = Some(run.method.number());
        match run.windows {
            WindowPlan::Single { window } => p.window = Some(WindowLengths::One(window)),
            WindowPlan::Routed(r) => {
                p.window = Some(WindowLengths::Many(vec![r.short_window, r.long_window]));
                p.threshold = Some(r.threshold);
            }
        }
        p.stride = Some(run.stride);
        p.include_confidence = Some(run.include_confidence);
        p.savgol.enabled = Some(run.savgol.is_some());
        if let Some(s) = run.savgol {
            p.savgol.m = Some(s.m);
            p.savgol.order = Some(s.order);
        }
        let m = &mut c.model;
        m.protocol = Some(run.protocol.to_string());
        m.net = Some(run.net.label().to_string());
        match &run.net {
            NetKind::Lstm { hidden } => m.hidden = Some(*hidden),
            NetKind::Tcn {
                channels,
                kernel,
                dilations,
            } => {
                m.channels = Some(*channels);
                m.kernel = Some(*kernel);
                m.dilations = Some(dilations.clone());
            }
        }
        m.rebalance = Some(run.rebalance);
        let t = &mut c.train;
        t.learning_rate = Some(run.train.learning_rate);
        t.epochs = Some(run.train.epochs);
        t.batch_size = Some(run.train.batch_size);
        t.optimizer = Some(
            match run.train.optimizer {
                OptimizerKind::Adam => "adam",
                OptimizerKind::Sgd => "sgd",
            }
            .to_string(),
        );
        t.clip_norm = Some(run.train.clip_norm.unwrap_or(0.0));
        c
    }

    pub fn run_config(&self) -> Result<RunConfig, CliError> {
        let seed = self.require_seed()?;
        let c = self.clone().with_defaults();
        let usage = CliError::Usage;

        let p = &c.preprocess;
        let method_n = p.method.expect("filled");
        let method = NormMethod::from_number(method_n)
            .ok_or_else(|| usage(format!("preprocess.method must be 1-5, got {method_n}")))?;
        let lengths = p.window.as_ref().expect("filled").to_vec();
        let windows = match lengths[..] {
            [w] => WindowPlan::Single { window: w },
            [s, l] => WindowPlan::Routed(LengthRouter::new(s, l, p.threshold.expect("filled"))?),
            _ => return Err(usage(format!("preprocess.window takes one length or a pair, got {lengths:?}"))),
        };

        let m = &c.model;
        let protocol: Protocol = m.protocol.as_deref().expect("filled").parse().map_err(usage)?;
        let net = match m.net.as_deref().expect("filled") {
            "lstm" => NetKind::Lstm {
                hidden: m.hidden.expect("filled"),
            },
            "tcn" => NetKind::Tcn {
                channels: m.channels.expect("filled"),
                kernel: m.kernel.expect("filled"),
                dilations: m.dilations.clone().expect("filled"),
            },
            other => return Err(usage(format!("model.net must be lstm or tcn, got {other:?}"))),
        };

        let t = &c.train;
        let optimizer = match t.optimizer.as_deref().expect("filled") {
            "adam" => OptimizerKind::Adam,
            "sgd" => OptimizerKind::Sgd,
            other => return Err(usage(format!("train.optimizer must be adam or sgd, got {other:?}"))),
        };
        let clip = t.clip_norm.expect("filled");
        let train = TrainConfig {
            learning_rate: t.learning_rate.expect("filled"),
            epochs: t.epochs.expect("filled"),
            batch_size: t.batch_size.expect("filled"),
            seed,
            optimizer,
            clip_norm: (clip > 0.0).then_some(clip),
        };

        let [b1, b2] = c.folds.boundaries.expect("filled");
        let sg = &p.savgol;
        let cfg = RunConfig {
            protocol,
            method,
            windows,
            stride: p.stride.expect("filled"),
            net,
            train,
            fold_boundaries: (b1, b2),
            savgol: sg.enabled.expect("filled").then(|| SmoothingConfig {
                m: sg.m.expect("filled"),
                order: sg.order.expect("filled"),
            }),
            include_confidence: p.include_confidence.expect("filled"),
            rebalance: m.rebalance.expect("filled"),
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(AppConfig::from_toml("seed = 1\nbogus = 2").is_err());
        assert!(AppConfig::from_toml("[preprocess]\nwindoww = 3").is_err());
        assert!(AppConfig::from_toml("[preprocess.savgol]\nm = 5\nx = 1").is_err());
    }

    #[test]
    fn window_accepts_int_or_pair() {
        let a = AppConfig::from_toml("[preprocess]\nwindow = 64").unwrap();
        assert_eq!(a.preprocess.window, Some(WindowLengths::One(64)));
        let b = AppConfig::from_toml("[preprocess]\nwindow = [128, 256]").unwrap();
        assert_eq!(b.preprocess.window.unwrap().to_vec(), vec![128, 256]);
    }

    #[test]
    fn flags_override_file() {
        let mut base = AppConfig::from_toml("seed = 1\n[train]\nepochs = 3\nbatch_size = 8").unwrap();
        let mut over = AppConfig::default();
        over.train.epochs = Some(7);
        base.merge(&over);
        assert_eq!(base.train.epochs, Some(7));
        assert_eq!(base.train.batch_size, Some(8));
        assert_eq!(base.seed, Some(1));
    }

    #[test]
    fn resolved_config_roundtrips_through_toml() {
        let mut c = AppConfig {
            seed: Some(4),
            ..AppConfig::default()
        };
        c.dataset.root = Some("data".into());
        let resolved = c.with_defaults();
        let text = resolved.to_toml();
        assert_eq!(AppConfig::from_toml(&text).unwrap(), resolved);
        let run = resolved.run_config().unwrap();
        assert_eq!(run.protocol, Protocol::MultiClass);
        assert!(matches!(run.windows, WindowPlan::Routed(r) if r.threshold == 128));
    }

    #[test]
    fn run_config_maps_back() {
        let mut c = AppConfig::from_toml(
            "seed = 9\n[preprocess]\nwindow = [16, 48]\nthreshold = 20\nmethod = 5\n[model]\nnet = \"tcn\"\nprotocol = \"binary\"",
        )
        .unwrap();
        c.train.clip_norm = Some(0.0);
        let run = c.run_config().unwrap();
        assert_eq!(run.train.clip_norm, None);
        assert_eq!(AppConfig::from_run_config(&run).run_config().unwrap(), run);
    }

    #[test]
    fn seed_is_mandatory() {
        let c = AppConfig::default();
        assert!(matches!(c.run_config(), Err(CliError::Usage(_))));
        assert!(matches!(c.synth_config(), Err(CliError::Usage(_))));
    }

    #[test]
    fn bad_method_is_a_usage_error() {
        let c = AppConfig::from_toml("seed = 1\n[preprocess]\nmethod = 6").unwrap();
        assert!(matches!(c.run_config(), Err(CliError::Usage(_))));
    }

    #[test]
    fn custom_chin_column() {
        let c = AppConfig::from_toml("[joints]\nchin = \"head_top\"").unwrap();
        assert_eq!(c.joint_map().unwrap().chin_index(), 0);
        let bad = AppConfig::from_toml("[joints]\nchin = \"nose\"").unwrap();
        assert!(bad.joint_map().is_err());
    }
}
