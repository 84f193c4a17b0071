//! From-scratch sequence classifiers with exact gradients.
//!
//! A model is a flat `Vec<f64>` of parameters plus an [`Architecture`] that
//! says how to slice it. Both architectures read a `W x D` window and
//! finish with an affine head on the last time step's representation,
//! followed by softmax (K-way) or sigmoid (binary).

mod checkpoint;
mod gradcheck;
mod lstm;
mod optim;
mod tcn;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

pub use checkpoint::{read_checkpoint, write_checkpoint, CheckpointHeader, CHECKPOINT_MAGIC};
pub use gradcheck::{
    compare_gradients, grad_check, numeric_gradient, relative_error, GradCheckReport,
};
pub use lstm::{lstm_forward, LstmSpec};
pub use optim::{clip_gradient, fit, train_step, Optimizer, OptimizerKind, TrainConfig};
pub use tcn::{tcn_activations, tcn_forward, TcnSpec};

/// Probabilities are clamped to at least this before taking logs.
pub const LOG_EPS: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("target {0:?} does not fit the model head")]
    TargetMismatch(Target),
    #[error("empty batch")]
    EmptyBatch,
    #[error("training diverged: loss {0}")]
    Diverged(f64),
    #[error("invalid architecture: {0}")]
    InvalidSpec(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Architecture {
    Lstm(LstmSpec),
    Tcn(TcnSpec),
}

impl Architecture {
    pub fn input_dim(&self) -> usize {
        match self {
            Architecture::Lstm(s) => s.input_dim,
            Architecture::Tcn(s) => s.input_dim,
        }
    }

    pub fn n_classes(&self) -> usize {
        match self {
            Architecture::Lstm(s) => s.n_classes,
            Architecture::Tcn(s) => s.n_classes,
        }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        match self {
            Architecture::Lstm(s) => s.validate(),
            Architecture::Tcn(s) => s.validate(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadKind {
    /// K logits, softmax, cross-entropy.
    Softmax,
    /// One logit, sigmoid, binary cross-entropy.
    Sigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Target {
    Class(usize),
    Binary(bool),
}

/// One training input with its target.
#[derive(Debug, Clone, Copy)]
pub struct Example<'a> {
    pub input: &'a Matrix,
    pub target: Target,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParameters {
    pub arch: Architecture,
    pub head: HeadKind,
    pub values: Vec<f64>,
}

/// Number of head outputs.
pub fn output_dim(arch: &Architecture, head: HeadKind) -> usize {
    match head {
        HeadKind::Softmax => arch.n_classes(),
        HeadKind::Sigmoid => 1,
    }
}

/// Length of the flat parameter vector for an architecture and head.
pub fn param_count(arch: &Architecture, head: HeadKind) -> usize {
    let out = output_dim(arch, head);
    match arch {
        Architecture::Lstm(s) => s.param_count(out),
        Architecture::Tcn(s) => s.param_count(out),
    }
}

impl ModelParameters {
    pub fn zeros(arch: Architecture, head: HeadKind) -> Result<Self, NnError> {
        arch.validate()?;
        let n = param_count(&arch, head);
        Ok(Self {
            arch,
            head,
            values: vec![0.0; n],
        })
    }

    /// Xavier-uniform weights and zero biases (LSTM forget-gate bias 1).
    pub fn xavier(arch: Architecture, head: HeadKind, seed: u64) -> Result<Self, NnError> {
        let mut p = Self::zeros(arch, head)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let out = p.output_dim();
        let blocks = match &p.arch {
            Architecture::Lstm(s) => s.init_blocks(out),
            Architecture::Tcn(s) => s.init_blocks(out),
        };
        for b in blocks {
            let slice = &mut p.values[b.range];
            match b.init {
                Init::Uniform(limit) => {
                    for v in slice {
                        *v = rng.random_range(-limit..=limit);
                    }
                }
                Init::Constant(c) => slice.fill(c),
            }
        }
        Ok(p)
    }

    pub fn output_dim(&self) -> usize {
        output_dim(&self.arch, self.head)
    }

    pub fn input_dim(&self) -> usize {
        self.arch.input_dim()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    fn check_input(&self, x: &Matrix) -> Result<(), NnError> {
        if self.values.len() != param_count(&self.arch, self.head) {
            return Err(NnError::DimensionMismatch {
                expected: param_count(&self.arch, self.head),
                got: self.values.len(),
            });
        }
        if x.cols() != self.input_dim() {
            return Err(NnError::DimensionMismatch {
                expected: self.input_dim(),
                got: x.cols(),
            });
        }
        if x.rows() == 0 {
            return Err(NnError::DimensionMismatch {
                expected: 1,
                got: 0,
            });
        }
        Ok(())
    }

    pub fn logits(&self, x: &Matrix) -> Result<Vec<f64>, NnError> {
        self.check_input(x)?;
        let out = self.output_dim();
        Ok(match &self.arch {
            Architecture::Lstm(s) => lstm::forward(s, out, &self.values, x).logits,
            Architecture::Tcn(s) => tcn::forward(s, out, &self.values, x).logits,
        })
    }

    /// Class probabilities (softmax) or `[p(positive)]` (sigmoid).
    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>, NnError> {
        Ok(head_probabilities(self.head, &self.logits(x)?))
    }

    fn check_target(&self, target: Target) -> Result<(), NnError> {
        match (self.head, target) {
            (HeadKind::Softmax, Target::Class(k)) if k < self.output_dim() => Ok(()),
            (HeadKind::Sigmoid, Target::Binary(_)) => Ok(()),
            _ => Err(NnError::TargetMismatch(target)),
        }
    }

    /// Loss and gradient of one example, accumulated into `grad`.
    fn example_gradient(&self, ex: &Example, grad: &mut [f64]) -> Result<f64, NnError> {
        self.check_input(ex.input)?;
        self.check_target(ex.target)?;
        let out = self.output_dim();
        match &self.arch {
            Architecture::Lstm(s) => {
                let trace = lstm::forward(s, out, &self.values, ex.input);
                let probs = head_probabilities(self.head, &trace.logits);
                let dlogits = logit_gradient(&probs, ex.target);
                lstm::backward(s, out, &self.values, ex.input, &trace, &dlogits, grad);
                Ok(loss(&probs, ex.target))
            }
            Architecture::Tcn(s) => {
                let trace = tcn::forward(s, out, &self.values, ex.input);
                let probs = head_probabilities(self.head, &trace.logits);
                let dlogits = logit_gradient(&probs, ex.target);
                tcn::backward(s, out, &self.values, &trace, &dlogits, grad);
                Ok(loss(&probs, ex.target))
            }
        }
    }

    /// Mean loss over a batch, without gradients.
    pub fn batch_loss(&self, batch: &[Example]) -> Result<f64, NnError> {
        if batch.is_empty() {
            return Err(NnError::EmptyBatch);
        }
        let mut total = 0.0;
        for ex in batch {
            self.check_target(ex.target)?;
            total += loss(&self.predict(ex.input)?, ex.target);
        }
        Ok(total / batch.len() as f64)
    }
}

/// Applies the head's output nonlinearity to raw logits.
pub fn head_probabilities(head: HeadKind, logits: &[f64]) -> Vec<f64> {
    match head {
        HeadKind::Softmax => softmax(logits),
        HeadKind::Sigmoid => logits.iter().map(|&z| sigmoid(z)).collect(),
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Negative log-likelihood of `target` under `probs`.
pub fn loss(probs: &[f64], target: Target) -> f64 {
    match target {
        Target::Class(k) => -probs[k].max(LOG_EPS).ln(),
        Target::Binary(true) => -probs[0].max(LOG_EPS).ln(),
        Target::Binary(false) => -(1.0 - probs[0]).max(LOG_EPS).ln(),
    }
}

/// d(loss)/d(logits); the same form for softmax+CE and sigmoid+BCE.
fn logit_gradient(probs: &[f64], target: Target) -> Vec<f64> {
    let mut d = probs.to_vec();
    match target {
        Target::Class(k) => d[k] -= 1.0,
        Target::Binary(y) => d[0] -= if y { 1.0 } else { 0.0 },
    }
    d
}

/// Mean batch loss and its exact gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub loss: f64,
    pub grad: Vec<f64>,
}

/// Analytic gradient of the mean batch loss with respect to every parameter.
///
/// Examples are processed in parallel and summed in batch order, so the
/// result is bitwise reproducible.
pub fn backward(params: &ModelParameters, batch: &[Example]) -> Result<Gradient, NnError> {
    if batch.is_empty() {
        return Err(NnError::EmptyBatch);
    }
    let n = params.values.len();
    let per_example = batch
        .par_iter()
        .map(|ex| {
            let mut g = vec![0.0; n];
            params.example_gradient(ex, &mut g).map(|l| (l, g))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let scale = 1.0 / batch.len() as f64;
    let mut grad = vec![0.0; n];
    let mut total = 0.0;
    for (l, g) in &per_example {
        total += l;
        for (acc, v) in grad.iter_mut().zip(g) {
            *acc += v;
        }
    }
    grad.iter_mut().for_each(|v| *v *= scale);
    Ok(Gradient {
        loss: total * scale,
        grad,
    })
}

/// Parameter initialization for one contiguous block.
#[derive(Debug, Clone)]
pub(crate) struct InitBlock {
    pub range: std::ops::Range<usize>,
    pub init: Init,
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum Init {
    Uniform(f64),
    Constant(f64),
}

pub(crate) fn xavier_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}
