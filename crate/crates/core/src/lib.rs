//! Hand-gesture classification from 2-D skeletal joint data.
//!
//! The crate covers the whole path from raw per-frame joint matrices to
//! evaluated classifiers:
//!
//! - [`skeleton`]: joints, frames, sequences and the 29-gesture taxonomy.
//! - [`ingest`]: the frames/manifest file formats, patient folds and a
//!   seeded synthetic gesture generator.
//! - [`preprocess`]: Savitzky–Golay smoothing, sliding windows and the five
//!   chin-referenced normalization methods.
//! - [`nn`]: from-scratch LSTM and dilated causal TCN classifiers with exact
//!   gradients, optimizers, gradient checking and checkpoints.
//! - [`pipeline`]: the multi-class and one-vs-rest protocols, window
//!   aggregation, length routing and patient-based cross-validation.
//! - [`metrics`]: confusion matrices, accuracy/precision/recall and report
//!   rendering.

pub mod ingest;
pub mod matrix;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod preprocess;
pub mod skeleton;

pub use matrix::Matrix;

/// Crate-level error, wrapping the per-module error types.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Skeleton(#[from] skeleton::SkeletonError),
    #[error(transparent)]
    Ingest(#[from] ingest::IngestError),
    #[error(transparent)]
    Preprocess(#[from] preprocess::PreprocessError),
    #[error(transparent)]
    Nn(#[from] nn::NnError),
    #[error(transparent)]
    Pipeline(#[from] pipeline::PipelineError),
    #[error(transparent)]
    Metrics(#[from] metrics::MetricsError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
