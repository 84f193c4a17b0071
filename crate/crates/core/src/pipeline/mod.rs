//! Evaluation protocols, window aggregation, length routing and
//! patient-based cross-validation.
//!
//! Two protocols are supported:
//!
//! - [`Protocol::MultiClass`]: one softmax model over the 15 static gestures
//!   and one over the 14 dynamic gestures. A test gesture is scored by the
//!   model of its own kind.
//! - [`Protocol::MultiClassBinary`]: 29 one-vs-rest sigmoid models, one per
//!   gesture.
//!
//! Metrics are computed per gesture, after the window predictions of a
//! sequence have been aggregated by [`aggregate_windows`].

mod cv;
mod learner;
mod store;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ingest::{Dataset, DEFAULT_FOLD_BOUNDARIES};
use crate::nn::{Architecture, LstmSpec, NnError, TcnSpec, TrainConfig};
use crate::preprocess::{FeatureOptions, NormMethod, PreprocessError, Preprocessor, SavgolSpec, WindowSpec};
use crate::skeleton::{GestureId, GestureKind, JointIndexMap};

pub use cv::{cross_validate, cross_validate_with, evaluate_model_set};
pub use learner::{Learner, NetworkLearner, NetworkModel, OracleLearner, OracleModel, Standardizer, WindowScorer};
pub use store::{checkpoint_name, load_model_set, save_model_set, RunManifest};
pub use train::{
    aggregate_windows, route_by_length, train_protocol, Aggregate, GesturePrediction, ModelBank, ModelSet,
    TaskModel,
};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("class {class} has no training gestures for the {task} model")]
    MissingClass { task: String, class: GestureId },
    #[error("no training gestures for the {0} model")]
    EmptyTask(String),
    #[error("cross-validation needs at least 2 populated folds, found {0}")]
    FoldCoverage(usize),
    #[error("patient {0} appears in both the training and the test split")]
    PatientLeak(u32),
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
    #[error("checkpoint does not match the run configuration: {0}")]
    ConfigMismatch(String),
    #[error("no model for task {0}")]
    MissingModel(String),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    /// Separate static (15-way) and dynamic (14-way) softmax models.
    #[serde(rename = "multiclass")]
    MultiClass,
    /// 29 one-vs-rest sigmoid models.
    #[serde(rename = "binary")]
    MultiClassBinary,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::MultiClass => "multiclass",
            Protocol::MultiClassBinary => "binary",
        })
    }
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "multiclass" | "multi-class" => Ok(Protocol::MultiClass),
            "binary" | "multiclass-binary" | "ovr" => Ok(Protocol::MultiClassBinary),
            _ => Err(format!("unknown protocol {s:?} (expected multiclass or binary)")),
        }
    }
}

/// One trained classifier's job.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "task", content = "target", rename_all = "lowercase")]
pub enum Task {
    /// Softmax over all gestures of one kind.
    Partition(GestureKind),
    /// Sigmoid: this gesture versus every other gesture.
    OneVsRest(GestureId),
}

impl Task {
    pub fn for_protocol(protocol: Protocol) -> Vec<Task> {
        match protocol {
            Protocol::MultiClass => vec![
                Task::Partition(GestureKind::Static),
                Task::Partition(GestureKind::Dynamic),
            ],
            Protocol::MultiClassBinary => GestureId::all().map(Task::OneVsRest).collect(),
        }
    }

    /// Stable short name used in file names and messages.
    pub fn name(&self) -> String {
        match self {
            Task::Partition(k) => k.to_string(),
            Task::OneVsRest(g) => g.to_string(),
        }
    }

    /// Gestures this task's model outputs, in output order. One-vs-rest
    /// tasks list their single positive class.
    pub fn classes(&self) -> Vec<GestureId> {
        match self {
            Task::Partition(k) => GestureId::of_kind(*k),
            Task::OneVsRest(g) => vec![*g],
        }
    }

    /// Whether a gesture contributes training windows to this task.
    pub fn accepts(&self, label: GestureId) -> bool {
        match self {
            Task::Partition(k) => label.kind() == *k,
            Task::OneVsRest(_) => true,
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Routes sequences of at most `threshold` frames to the short-window
/// models and longer ones to the long-window models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LengthRouter {
    pub threshold: usize,
    pub short_window: usize,
    pub long_window: usize,
}

impl LengthRouter {
    pub fn new(short_window: usize, long_window: usize, threshold: usize) -> Result<Self, PipelineError> {
        if !(short_window <= threshold && threshold <= long_window) || short_window == 0 {
            return Err(PipelineError::InvalidConfig(format!(
                "length router needs 0 < short window ({short_window}) <= threshold ({threshold}) <= long window ({long_window})"
            )));
        }
        Ok(Self {
            threshold,
            short_window,
            long_window,
        })
    }

    /// Window length used for a sequence of `t` frames.
    pub fn window_for(&self, t: usize) -> usize {
        if t <= self.threshold {
            self.short_window
        } else {
            self.long_window
        }
    }
}

/// Which window length(s) a run trains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum WindowPlan {
    Single { window: usize },
    Routed(LengthRouter),
}

impl WindowPlan {
    /// Default router threshold for a `(short, long)` pair is the short window.
    pub fn from_lengths(lengths: &[usize]) -> Result<Self, PipelineError> {
        match *lengths {
            [w] if w > 0 => Ok(WindowPlan::Single { window: w }),
            [s, l] => Ok(WindowPlan::Routed(LengthRouter::new(s, l, s)?)),
            _ => Err(PipelineError::InvalidConfig(format!(
                "expected one window length or a short,long pair, got {lengths:?}"
            ))),
        }
    }

    pub fn lengths(&self) -> Vec<usize> {
        match self {
            WindowPlan::Single { window } => vec![*window],
            WindowPlan::Routed(r) => vec![r.short_window, r.long_window],
        }
    }

    pub fn window_for(&self, t: usize) -> usize {
        match self {
            WindowPlan::Single { window } => *window,
            WindowPlan::Routed(r) => r.window_for(t),
        }
    }
}

/// Classifier family and size; input and output sizes come from the data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum NetKind {
    Lstm { hidden: usize },
    Tcn { channels: usize, kernel: usize, dilations: Vec<usize> },
}

impl NetKind {
    pub fn default_lstm() -> Self {
        NetKind::Lstm { hidden: 128 }
    }

    pub fn default_tcn() -> Self {
        NetKind::Tcn {
            channels: 32,
            kernel: 3,
            dilations: vec![1, 2, 4, 8],
        }
    }

    pub fn architecture(&self, input_dim: usize, n_classes: usize) -> Architecture {
        match self {
            NetKind::Lstm { hidden } => Architecture::Lstm(LstmSpec {
                input_dim,
                hidden_dim: *hidden,
                n_classes,
            }),
            NetKind::Tcn {
                channels,
                kernel,
                dilations,
            } => Architecture::Tcn(TcnSpec {
                input_dim,
                channels: *channels,
                kernel: *kernel,
                dilations: dilations.clone(),
                n_classes,
            }),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            NetKind::Lstm { .. } => "lstm",
            NetKind::Tcn { .. } => "tcn",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothingConfig {
    pub m: usize,
    pub order: usize,
}

/// Everything that determines a training/evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub protocol: Protocol,
    pub method: NormMethod,
    pub windows: WindowPlan,
    pub stride: usize,
    pub net: NetKind,
    pub train: TrainConfig,
    pub fold_boundaries: (u32, u32),
    /// `None` disables smoothing.
    pub savgol: Option<SmoothingConfig>,
    pub include_confidence: bool,
    /// Oversample positives of one-vs-rest tasks to the negative count.
    pub rebalance: bool,
    pub seed: u64,
}

impl RunConfig {
    /// Defaults for everything but the protocol, method, windows and seed.
    pub fn new(protocol: Protocol, method: NormMethod, windows: WindowPlan, seed: u64) -> Self {
        Self {
            protocol,
            method,
            windows,
            stride: 16,
            net: NetKind::default_lstm(),
            train: TrainConfig::new(seed),
            fold_boundaries: DEFAULT_FOLD_BOUNDARIES,
            savgol: Some(SmoothingConfig { m: 5, order: 2 }),
            include_confidence: false,
            rebalance: false,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::InvalidConfig(m));
        if self.fold_boundaries.0 >= self.fold_boundaries.1 {
            return bad(format!("fold boundaries {:?} must be strictly increasing", self.fold_boundaries));
        }
        for w in self.windows.lengths() {
            WindowSpec::new(w, self.stride)?;
        }
        if let WindowPlan::Routed(r) = self.windows {
            LengthRouter::new(r.short_window, r.long_window, r.threshold)?;
        }
        if let Some(s) = self.savgol {
            SavgolSpec::new(s.m, s.order)?;
        }
        self.net.architecture(1, 2).validate()?;
        self.train.validate()?;
        Ok(())
    }

    pub fn feature_options(&self) -> FeatureOptions {
        FeatureOptions {
            include_confidence: self.include_confidence,
        }
    }

    pub fn preprocessor(&self, window: usize, joint_map: &JointIndexMap) -> Result<Preprocessor, PipelineError> {
        Ok(Preprocessor {
            savgol: self.savgol.map(|s| SavgolSpec::new(s.m, s.order)).transpose()?,
            method: self.method,
            window: WindowSpec::new(window, self.stride)?,
            joint_map: joint_map.clone(),
            options: self.feature_options(),
        })
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config is serializable");
        hex::encode(Sha256::digest(json))
    }
}

/// Deterministic child seed for a labelled sub-job.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_le_bytes());
    for p in path {
        h.update(p.to_le_bytes());
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

/// Number of sequences of the dataset per gesture kind.
pub(crate) fn kind_counts(ds: &Dataset) -> (usize, usize) {
    let s = ds.sequences.iter().filter(|q| q.label.kind() == GestureKind::Static).count();
    (s, ds.sequences.len() - s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn protocol_tasks() {
        assert_eq!(Task::for_protocol(Protocol::MultiClass).len(), 2);
        let ovr = Task::for_protocol(Protocol::MultiClassBinary);
        assert_eq!(ovr.len(), 29);
        assert_eq!(Task::Partition(GestureKind::Static).classes().len(), 15);
        assert_eq!(Task::Partition(GestureKind::Dynamic).classes().len(), 14);
    }

    #[test]
    fn routing_rule() {
        let r = LengthRouter::new(128, 256, 128).unwrap();
        assert_eq!(r.window_for(100), 128);
        assert_eq!(r.window_for(128), 128);
        assert_eq!(r.window_for(129), 256);
        assert_eq!(r.window_for(300), 256);
        assert!(LengthRouter::new(256, 128, 128).is_err());
        assert!(LengthRouter::new(128, 256, 300).is_err());
    }

    #[test]
    fn window_plan_parsing() {
        assert_eq!(WindowPlan::from_lengths(&[64]).unwrap(), WindowPlan::Single { window: 64 });
        assert!(matches!(WindowPlan::from_lengths(&[128, 256]).unwrap(), WindowPlan::Routed(_)));
        assert!(WindowPlan::from_lengths(&[]).is_err());
        assert!(WindowPlan::from_lengths(&[1, 2, 3]).is_err());
    }

    #[test]
    fn config_roundtrip_and_digest() {
        let cfg = RunConfig::new(Protocol::MultiClass, NormMethod::M3, WindowPlan::Single { window: 32 }, 7);
        cfg.validate().unwrap();
        let json = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.digest(), cfg.digest());
        let other = RunConfig { seed: 8, ..cfg.clone() };
        assert_ne!(other.digest(), cfg.digest());
    }

    #[test]
    fn protocol_names() {
        assert_eq!("multiclass".parse::<Protocol>().unwrap(), Protocol::MultiClass);
        assert_eq!("binary".parse::<Protocol>().unwrap(), Protocol::MultiClassBinary);
        assert!("x".parse::<Protocol>().is_err());
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, &[0]), derive_seed(1, &[1]));
        assert_eq!(derive_seed(1, &[2, 3]), derive_seed(1, &[2, 3]));
    }
}
