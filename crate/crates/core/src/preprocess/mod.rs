//! Smoothing, windowing and normalization of gesture sequences.
//!
//! Order of operations for one sequence: Savitzky–Golay smoothing of the
//! whole sequence, then sliding windows, then per-window normalization.

mod normalize;
mod savgol;
mod window;

use serde::{Deserialize, Serialize};

use crate::skeleton::{GestureSequence, JointIndexMap};

pub use normalize::{
    feature_dim, feature_dim_with, normalize_window, to_polar, FeatureOptions, FeatureWindow,
    NormMethod, WindowSource,
};
pub use savgol::{savgol_coefficients, savgol_smooth, SavgolSpec};
pub use window::{slide_windows, RawWindow, WindowSpec};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PreprocessError {
    #[error("invalid Savitzky-Golay parameters: window {m}, order {order} (window must be odd and exceed the order)")]
    InvalidSavgol { m: usize, order: usize },
    #[error("invalid window spec: length {length}, stride {stride}")]
    InvalidWindow { length: usize, stride: usize },
    #[error("window has no real frames")]
    EmptyWindow,
    #[error("frame has {0} joints, expected 14")]
    JointCount(usize),
    #[error("degenerate reference chin ({x}, {y}): divisive normalization needs nonzero coordinates")]
    DegenerateReference { x: f64, y: f64 },
}

/// Full per-sequence preprocessing recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub savgol: Option<SavgolSpec>,
    pub method: NormMethod,
    pub window: WindowSpec,
    pub joint_map: JointIndexMap,
    pub options: FeatureOptions,
}

impl Preprocessor {
    pub fn feature_dim(&self) -> usize {
        feature_dim_with(self.method, self.options)
    }

    /// Smooths, windows and normalizes one sequence.
    pub fn windows(&self, seq: &GestureSequence) -> Result<Vec<FeatureWindow>, PreprocessError> {
        let smoothed;
        let seq = match &self.savgol {
            Some(spec) => {
                smoothed = savgol_smooth(seq, spec);
                &smoothed
            }
            None => seq,
        };
        slide_windows(seq, self.window)
            .iter()
            .map(|w| normalize_window(w, self.method, &self.joint_map, self.options))
            .collect()
    }
}
