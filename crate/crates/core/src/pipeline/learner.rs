use serde::{Deserialize, Serialize};

use super::{NetKind, PipelineError, RunConfig, Task};
use crate::matrix::Matrix;
use crate::nn::{fit, Example, HeadKind, ModelParameters, Target, TrainConfig};
use crate::preprocess::FeatureWindow;

/// A trained per-task classifier, applied one window at a time.
pub trait WindowScorer: Send + Sync {
    /// Probabilities over `task.classes()` for a partition task, or
    /// `[p(positive)]` for a one-vs-rest task.
    fn score(&self, window: &FeatureWindow) -> Result<Vec<f64>, PipelineError>;
}

/// Produces a [`WindowScorer`] for a task from its training windows.
pub trait Learner: Sync {
    type Model: WindowScorer;

    fn fit(&self, task: Task, windows: &[&FeatureWindow], seed: u64) -> Result<Self::Model, PipelineError>;
}

fn target_of(task: Task, w: &FeatureWindow) -> Target {
    match task {
        Task::Partition(_) => Target::Class(
            task.classes()
                .iter()
                .position(|g| *g == w.source.label)
                .expect("partition task only sees its own gestures"),
        ),
        Task::OneVsRest(g) => Target::Binary(w.source.label == g),
    }
}

/// Per-column affine scaling fitted on the real (non-padding) frames of
/// the training windows. Padding rows stay exactly zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    pub fn fit(windows: &[&FeatureWindow]) -> Self {
        let dim = windows.first().map_or(0, |w| w.data.cols());
        let mut sum = vec![0.0; dim];
        let mut sq = vec![0.0; dim];
        let mut n = 0usize;
        for w in windows {
            for r in w.pad_count..w.data.rows() {
                for (c, v) in w.data.row(r).iter().enumerate() {
                    sum[c] += v;
                    sq[c] += v * v;
                }
                n += 1;
            }
        }
        if n == 0 {
            return Self::identity(dim);
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        let scale = sq
            .iter()
            .zip(&mean)
            .map(|(q, m)| {
                let sd = (q / n as f64 - m * m).max(0.0).sqrt();
                if sd > 1e-9 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn apply(&self, w: &FeatureWindow) -> Matrix {
        let mut out = Matrix::zeros(w.data.rows(), w.data.cols());
        for r in w.pad_count..w.data.rows() {
            for (c, (o, v)) in out.row_mut(r).iter_mut().zip(w.data.row(r)).enumerate() {
                *o = (v - self.mean[c]) / self.scale[c];
            }
        }
        out
    }
}

/// LSTM or TCN trained by minibatch gradient descent.
#[derive(Debug, Clone)]
pub struct NetworkLearner {
    pub net: NetKind,
    pub train: TrainConfig,
    pub rebalance: bool,
}

impl NetworkLearner {
    pub fn from_config(cfg: &RunConfig) -> Self {
        Self {
            net: cfg.net.clone(),
            train: cfg.train.clone(),
            rebalance: cfg.rebalance,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    pub params: ModelParameters,
    pub scaler: Standardizer,
}

impl WindowScorer for NetworkModel {
    fn score(&self, window: &FeatureWindow) -> Result<Vec<f64>, PipelineError> {
        Ok(self.params.predict(&self.scaler.apply(window))?)
    }
}

impl Learner for NetworkLearner {
    type Model = NetworkModel;

    fn fit(&self, task: Task, windows: &[&FeatureWindow], seed: u64) -> Result<NetworkModel, PipelineError> {
        let first = windows.first().ok_or_else(|| PipelineError::EmptyTask(task.name()))?;
        let (head, n_classes) = match task {
            Task::Partition(_) => (HeadKind::Softmax, task.classes().len()),
            Task::OneVsRest(_) => (HeadKind::Sigmoid, 2),
        };
        let arch = self.net.architecture(first.data.cols(), n_classes);
        let mut params = ModelParameters::xavier(arch, head, seed)?;
        let scaler = Standardizer::fit(windows);
        let inputs: Vec<Matrix> = windows.iter().map(|w| scaler.apply(w)).collect();
        let targets: Vec<Target> = windows.iter().map(|w| target_of(task, w)).collect();
        let mut order: Vec<usize> = (0..inputs.len()).collect();
        if self.rebalance {
            if let Task::OneVsRest(_) = task {
                order = rebalanced(&targets);
            }
        }
        let examples: Vec<Example> = order
            .iter()
            .map(|&i| Example {
                input: &inputs[i],
                target: targets[i],
            })
            .collect();
        let cfg = TrainConfig {
            seed,
            ..self.train.clone()
        };
        let history = fit(&mut params, &examples, &cfg)?;
        log::debug!(
            "task {task}: {} windows, loss {:.4} -> {:.4}",
            examples.len(),
            history.first().copied().unwrap_or(f64::NAN),
            history.last().copied().unwrap_or(f64::NAN)
        );
        Ok(NetworkModel { params, scaler })
    }
}

/// Indices with the minority binary class repeated cyclically until both
/// classes have the same count.
fn rebalanced(targets: &[Target]) -> Vec<usize> {
    let (pos, neg): (Vec<usize>, Vec<usize>) =
        (0..targets.len()).partition(|&i| targets[i] == Target::Binary(true));
    let (minority, majority) = if pos.len() < neg.len() { (pos, neg) } else { (neg, pos) };
    if minority.is_empty() {
        return majority;
    }
    let mut order = majority.clone();
    order.extend((0..majority.len()).map(|i| minority[i % minority.len()]));
    order
}

/// Classifier that reads the true label from the window's provenance.
/// Used to test the evaluation plumbing independently of learning.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleLearner;

#[derive(Debug, Clone, Copy)]
pub struct OracleModel {
    task: Task,
}

impl WindowScorer for OracleModel {
    fn score(&self, window: &FeatureWindow) -> Result<Vec<f64>, PipelineError> {
        let label = window.source.label;
        Ok(match self.task {
            Task::Partition(_) => self
                .task
                .classes()
                .iter()
                .map(|g| if *g == label { 1.0 } else { 0.0 })
                .collect(),
            Task::OneVsRest(g) => vec![if g == label { 1.0 } else { 0.0 }],
        })
    }
}

impl Learner for OracleLearner {
    type Model = OracleModel;

    fn fit(&self, task: Task, windows: &[&FeatureWindow], _seed: u64) -> Result<OracleModel, PipelineError> {
        if windows.is_empty() {
            return Err(PipelineError::EmptyTask(task.name()));
        }
        Ok(OracleModel { task })
    }
}
