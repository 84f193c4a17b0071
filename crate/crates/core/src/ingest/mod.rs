//! Reading and writing gesture datasets, patient folds and synthetic data.

mod folds;
mod format;
mod manifest;
mod synth;

use std::io;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::skeleton::{GestureSequence, JointIndexMap};

pub use folds::{assign_folds, fold_of, FoldSplit, DEFAULT_FOLD_BOUNDARIES};
pub use format::{parse_skeletal_file, write_frames, ParseError};
pub use manifest::{load_dataset, write_dataset, ManifestRow, MANIFEST_HEADER};
pub use synth::{generate_synthetic, SynthConfig};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("missing frames file {0}")]
    MissingFile(PathBuf),
    #[error("{path}: {source}")]
    Frames {
        path: PathBuf,
        #[source]
        source: ParseError,
    },
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error("manifest line {line}: unknown gesture label {label:?}")]
    UnknownLabel { line: usize, label: String },
    #[error("manifest/frame-file mismatch for {path}: {detail}")]
    Mismatch { path: PathBuf, detail: String },
    #[error("dataset is empty after filtering incorrect gestures")]
    EmptyDataset,
    #[error("invalid synthetic config: {0}")]
    InvalidSynthConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Real,
    Synthetic,
}

/// A validated collection of correctly performed gestures.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub sequences: Vec<GestureSequence>,
    pub joint_map: JointIndexMap,
    pub provenance: Provenance,
}

impl Dataset {
    /// Sorted, deduplicated patient ids.
    pub fn patients(&self) -> Vec<u32> {
        let mut p: Vec<u32> = self.sequences.iter().map(|s| s.patient_id).collect();
        p.sort_unstable();
        p.dedup();
        p
    }

    /// SHA-256 over a canonical binary encoding of every sequence.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        for s in &self.sequences {
            h.update(s.patient_id.to_le_bytes());
            h.update(s.label.as_str().as_bytes());
            h.update([s.correct as u8]);
            h.update((s.frames.len() as u64).to_le_bytes());
            for f in &s.frames {
                for j in &f.joints {
                    h.update(j.x.to_le_bytes());
                    h.update(j.y.to_le_bytes());
                    h.update(j.confidence.to_le_bytes());
                }
                if let Some(aux) = &f.aux {
                    for v in aux.iter().flatten() {
                        h.update(v.to_le_bytes());
                    }
                }
            }
        }
        hex::encode(h.finalize())
    }
}
