use serde::{Deserialize, Serialize};

use super::PreprocessError;
use crate::skeleton::{GestureId, GestureSequence, SkeletalFrame};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub length: usize,
    pub stride: usize,
}

impl WindowSpec {
    pub fn new(length: usize, stride: usize) -> Result<Self, PreprocessError> {
        if length == 0 || stride == 0 {
            return Err(PreprocessError::InvalidWindow { length, stride });
        }
        Ok(Self { length, stride })
    }

    /// Number of windows a sequence of `t` frames produces.
    pub fn count_for(&self, t: usize) -> usize {
        if t >= self.length {
            (t - self.length) / self.stride + 1
        } else {
            1
        }
    }
}

/// `pad_count` implicit zero frames followed by a verbatim slice of the
/// source sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawWindow<'a> {
    pub patient_id: u32,
    pub label: GestureId,
    pub start: usize,
    pub pad_count: usize,
    pub frames: &'a [SkeletalFrame],
}

impl RawWindow<'_> {
    pub fn len(&self) -> usize {
        self.pad_count + self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Cuts a sequence into windows of `spec.length` frames advanced by
/// `spec.stride`. Sequences shorter than a window yield a single window
/// padded with leading zero frames. Empty sequences yield nothing.
pub fn slide_windows<'a>(seq: &'a GestureSequence, spec: WindowSpec) -> Vec<RawWindow<'a>> {
    let t = seq.frames.len();
    let w = spec.length;
    let make = |start: usize, pad_count: usize, frames: &'a [SkeletalFrame]| RawWindow {
        patient_id: seq.patient_id,
        label: seq.label,
        start,
        pad_count,
        frames,
    };
    if t == 0 {
        return Vec::new();
    }
    if t < w {
        return vec![make(0, w - t, &seq.frames)];
    }
    (0..spec.count_for(t))
        .map(|k| {
            let start = k * spec.stride;
            make(start, 0, &seq.frames[start..start + w])
        })
        .collect()
}
