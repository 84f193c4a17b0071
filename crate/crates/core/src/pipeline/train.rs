use rayon::prelude::*;

use super::{derive_seed, LengthRouter, Learner, PipelineError, Protocol, RunConfig, Task, WindowPlan, WindowScorer};
use crate::preprocess::{FeatureWindow, Preprocessor};
use crate::skeleton::{GestureId, GestureSequence, JointIndexMap};

/// Mean of per-window probability vectors and its argmax.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub mean: Vec<f64>,
    /// Index of the largest mean probability; ties go to the lowest index.
    pub class: usize,
}

/// Combines the window predictions of one gesture.
///
/// # Panics
///
/// Panics if `window_probs` is empty or the vectors differ in length.
pub fn aggregate_windows(window_probs: &[Vec<f64>]) -> Aggregate {
    assert!(!window_probs.is_empty(), "a gesture has at least one window");
    let k = window_probs[0].len();
    let mut mean = vec![0.0; k];
    for p in window_probs {
        assert_eq!(p.len(), k, "window probability vectors differ in length");
        for (m, v) in mean.iter_mut().zip(p) {
            *m += v;
        }
    }
    let n = window_probs.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    Aggregate {
        class: argmax(&mean),
        mean,
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct TaskModel<M> {
    pub task: Task,
    pub model: M,
}

/// All task models trained on one window length.
#[derive(Debug, Clone)]
pub struct ModelBank<M> {
    pub window: usize,
    pub preprocessor: Preprocessor,
    pub models: Vec<TaskModel<M>>,
}

/// The trained output of [`train_protocol`].
#[derive(Debug, Clone)]
pub struct ModelSet<M> {
    pub protocol: Protocol,
    pub plan: WindowPlan,
    pub banks: Vec<ModelBank<M>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GesturePrediction {
    pub class: GestureId,
    /// Window length of the models that produced the prediction.
    pub window: usize,
    pub n_windows: usize,
    /// One-vs-rest protocol: mean positive probability of each of the 29
    /// models, in taxonomy order.
    pub binary: Option<Vec<f64>>,
}

impl<M: WindowScorer> ModelBank<M> {
    fn model(&self, task: Task) -> Result<&M, PipelineError> {
        self.models
            .iter()
            .find(|m| m.task == task)
            .map(|m| &m.model)
            .ok_or_else(|| PipelineError::MissingModel(task.name()))
    }

    fn mean_scores(&self, task: Task, windows: &[FeatureWindow]) -> Result<Aggregate, PipelineError> {
        let model = self.model(task)?;
        let probs = windows.iter().map(|w| model.score(w)).collect::<Result<Vec<_>, _>>()?;
        Ok(aggregate_windows(&probs))
    }

    /// Classifies a sequence with this bank's models. The gesture kind
    /// (static or dynamic) of the sequence selects the candidate classes.
    pub fn predict(&self, protocol: Protocol, seq: &GestureSequence) -> Result<GesturePrediction, PipelineError> {
        let windows = self.preprocessor.windows(seq)?;
        let kind = seq.label.kind();
        let (class, binary) = match protocol {
            Protocol::MultiClass => {
                let task = Task::Partition(kind);
                let agg = self.mean_scores(task, &windows)?;
                (task.classes()[agg.class], None)
            }
            Protocol::MultiClassBinary => {
                let probs = GestureId::all()
                    .map(|g| Ok(self.mean_scores(Task::OneVsRest(g), &windows)?.mean[0]))
                    .collect::<Result<Vec<f64>, PipelineError>>()?;
                let candidates = GestureId::of_kind(kind);
                let local: Vec<f64> = candidates.iter().map(|g| probs[g.index()]).collect();
                (candidates[argmax(&local)], Some(probs))
            }
        };
        Ok(GesturePrediction {
            class,
            window: self.window,
            n_windows: windows.len(),
            binary,
        })
    }
}

impl<M: WindowScorer> ModelSet<M> {
    pub fn bank(&self, window: usize) -> Option<&ModelBank<M>> {
        self.banks.iter().find(|b| b.window == window)
    }

    pub fn n_models(&self) -> usize {
        self.banks.iter().map(|b| b.models.len()).sum()
    }

    pub fn predict(&self, seq: &GestureSequence) -> Result<GesturePrediction, PipelineError> {
        match self.plan {
            WindowPlan::Single { window } => self
                .bank(window)
                .ok_or_else(|| PipelineError::MissingModel(format!("window {window}")))?
                .predict(self.protocol, seq),
            WindowPlan::Routed(router) => route_by_length(&router, self, seq),
        }
    }
}

/// Classifies `seq` with the short-window models when it has at most
/// `router.threshold` frames and with the long-window models otherwise.
pub fn route_by_length<M: WindowScorer>(
    router: &LengthRouter,
    set: &ModelSet<M>,
    seq: &GestureSequence,
) -> Result<GesturePrediction, PipelineError> {
    let window = router.window_for(seq.len());
    set.bank(window)
        .ok_or_else(|| PipelineError::MissingModel(format!("window {window}")))?
        .predict(set.protocol, seq)
}

fn check_classes(task: Task, windows: &[&FeatureWindow]) -> Result<(), PipelineError> {
    for class in task.classes() {
        if !windows.iter().any(|w| w.source.label == class) {
            return Err(PipelineError::MissingClass {
                task: task.name(),
                class,
            });
        }
    }
    Ok(())
}

/// Trains every model the protocol needs, for every window length of the
/// plan. Each window length is trained on all training sequences.
pub fn train_protocol<L: Learner>(
    train: &[&GestureSequence],
    joint_map: &JointIndexMap,
    cfg: &RunConfig,
    learner: &L,
    seed: u64,
) -> Result<ModelSet<L::Model>, PipelineError> {
    cfg.validate()?;
    let tasks = Task::for_protocol(cfg.protocol);
    let mut banks = Vec::new();
    for window in cfg.windows.lengths() {
        let preprocessor = cfg.preprocessor(window, joint_map)?;
        let per_seq = train
            .par_iter()
            .map(|s| preprocessor.windows(s))
            .collect::<Result<Vec<_>, _>>()?;
        let all: Vec<&FeatureWindow> = per_seq.iter().flatten().collect();
        let subsets: Vec<Vec<&FeatureWindow>> = tasks
            .iter()
            .map(|t| all.iter().copied().filter(|w| t.accepts(w.source.label)).collect())
            .collect();
        for (task, subset) in tasks.iter().zip(&subsets) {
            check_classes(*task, subset)?;
        }
        let models = tasks
            .par_iter()
            .zip(&subsets)
            .enumerate()
            .map(|(i, (task, subset))| {
                let model = learner.fit(*task, subset, derive_seed(seed, &[window as u64, i as u64]))?;
                Ok(TaskModel { task: *task, model })
            })
            .collect::<Result<Vec<_>, PipelineError>>()?;
        banks.push(ModelBank {
            window,
            preprocessor,
            models,
        });
    }
    Ok(ModelSet {
        protocol: cfg.protocol,
        plan: cfg.windows,
        banks,
    })
}
