//! Chin-referenced feature extraction.
//!
//! All five methods use the chin of the first non-padded frame of a window
//! as the reference point. Features are laid out joint-major: `[x0, y0, x1,
//! y1, ...]` for Cartesian methods and `[e0, a0, e1, a1, ...]` for polar.
//! Combined methods concatenate the Cartesian block and the polar block.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{PreprocessError, RawWindow};
use crate::matrix::Matrix;
use crate::skeleton::{GestureId, Joint2D, JointIndexMap, N_JOINTS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NormMethod {
    /// Offsets from the reference chin.
    M1,
    /// Offsets divided by the reference chin coordinates.
    M2,
    /// Polar distance and angle around the reference chin.
    M3,
    /// M1 followed by M3.
    M4,
    /// M2 followed by M3.
    M5,
}

impl NormMethod {
    pub const ALL: [NormMethod; 5] = [Self::M1, Self::M2, Self::M3, Self::M4, Self::M5];

    pub fn from_number(n: u8) -> Option<Self> {
        Self::ALL.get((n as usize).checked_sub(1)?).copied()
    }

    pub fn number(self) -> u8 {
        self as u8 + 1
    }
}

impl fmt::Display for NormMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

impl FromStr for NormMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.trim()
            .trim_start_matches(['M', 'm'])
            .parse::<u8>()
            .ok()
            .and_then(Self::from_number)
            .ok_or_else(|| format!("normalization method must be 1-5, got {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FeatureOptions {
    /// Append the 14 detector confidences as extra columns.
    pub include_confidence: bool,
}

/// Columns produced by a method: 14 joints times values per joint.
pub fn feature_dim(method: NormMethod) -> usize {
    match method {
        NormMethod::M1 | NormMethod::M2 | NormMethod::M3 => 2 * N_JOINTS,
        NormMethod::M4 | NormMethod::M5 => 4 * N_JOINTS,
    }
}

pub fn feature_dim_with(method: NormMethod, opts: FeatureOptions) -> usize {
    feature_dim(method) + if opts.include_confidence { N_JOINTS } else { 0 }
}

/// Distance and full-quadrant angle of `p` around `reference`.
/// Coincident points map to `(0, 0)`.
pub fn to_polar(p: Joint2D, reference: Joint2D) -> (f64, f64) {
    let (dx, dy) = (p.x - reference.x, p.y - reference.y);
    let e = dx.hypot(dy);
    if e == 0.0 {
        (0.0, 0.0)
    } else {
        (e, dy.atan2(dx))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSource {
    pub patient_id: u32,
    pub label: GestureId,
    pub start: usize,
}

/// Normalized `W x D` features of one window. Rows `0..pad_count` are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureWindow {
    pub data: Matrix,
    pub pad_count: usize,
    pub method: NormMethod,
    pub source: WindowSource,
}

impl FeatureWindow {
    pub fn len(&self) -> usize {
        self.data.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.rows() == 0
    }
}

fn cartesian(window: &RawWindow, chin: Joint2D, divide: bool) -> Matrix {
    let mut m = Matrix::zeros(window.len(), 2 * N_JOINTS);
    for (t, frame) in window.frames.iter().enumerate() {
        let row = m.row_mut(window.pad_count + t);
        for (j, joint) in frame.joints.iter().enumerate() {
            let (mut dx, mut dy) = (joint.x - chin.x, joint.y - chin.y);
            if divide {
                dx /= chin.x;
                dy /= chin.y;
            }
            row[2 * j] = dx;
            row[2 * j + 1] = dy;
        }
    }
    m
}

fn polar(window: &RawWindow, chin: Joint2D) -> Matrix {
    let mut m = Matrix::zeros(window.len(), 2 * N_JOINTS);
    for (t, frame) in window.frames.iter().enumerate() {
        let row = m.row_mut(window.pad_count + t);
        for (j, joint) in frame.joints.iter().enumerate() {
            let (e, a) = to_polar(*joint, chin);
            row[2 * j] = e;
            row[2 * j + 1] = a;
        }
    }
    m
}

fn confidences(window: &RawWindow) -> Matrix {
    let mut m = Matrix::zeros(window.len(), N_JOINTS);
    for (t, frame) in window.frames.iter().enumerate() {
        let row = m.row_mut(window.pad_count + t);
        for (j, joint) in frame.joints.iter().enumerate() {
            row[j] = joint.confidence;
        }
    }
    m
}

/// Converts a raw window into normalized features.
pub fn normalize_window(
    window: &RawWindow,
    method: NormMethod,
    joint_map: &JointIndexMap,
    opts: FeatureOptions,
) -> Result<FeatureWindow, PreprocessError> {
    let first = window.frames.first().ok_or(PreprocessError::EmptyWindow)?;
    if let Some(bad) = window.frames.iter().find(|f| f.joints.len() != N_JOINTS) {
        return Err(PreprocessError::JointCount(bad.joints.len()));
    }
    let chin = first.joints[joint_map.chin_index()];
    let divides = matches!(method, NormMethod::M2 | NormMethod::M5);
    if divides && (chin.x == 0.0 || chin.y == 0.0) {
        return Err(PreprocessError::DegenerateReference {
            x: chin.x,
            y: chin.y,
        });
    }
    let mut data = match method {
        NormMethod::M1 => cartesian(window, chin, false),
        NormMethod::M2 => cartesian(window, chin, true),
        NormMethod::M3 => polar(window, chin),
        NormMethod::M4 => cartesian(window, chin, false).hcat(&polar(window, chin)),
        NormMethod::M5 => cartesian(window, chin, true).hcat(&polar(window, chin)),
    };
    if opts.include_confidence {
        data = data.hcat(&confidences(window));
    }
    Ok(FeatureWindow {
        data,
        pad_count: window.pad_count,
        method,
        source: WindowSource {
            patient_id: window.patient_id,
            label: window.label,
            start: window.start,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::{slide_windows, WindowSpec};
    use crate::skeleton::{GestureSequence, SkeletalFrame};
    use std::f64::consts::PI;

    fn seq_with(chin: (f64, f64), joint: (f64, f64), t: usize) -> GestureSequence {
        let mut joints = vec![Joint2D::new(joint.0, joint.1); N_JOINTS];
        joints[1] = Joint2D::with_confidence(chin.0, chin.1, 0.5);
        GestureSequence {
            patient_id: 2,
            label: GestureId::from_index(0).unwrap(),
            correct: true,
            frames: vec![SkeletalFrame::new(joints); t],
        }
    }

    fn features(seq: &GestureSequence, w: usize, m: NormMethod) -> FeatureWindow {
        let raw = slide_windows(seq, WindowSpec::new(w, 1).unwrap())[0];
        normalize_window(&raw, m, &JointIndexMap::default(), FeatureOptions::default()).unwrap()
    }

    #[test]
    fn polar_cases() {
        let o = Joint2D::new(0.0, 0.0);
        let (e, a) = to_polar(Joint2D::new(3.0, 4.0), o);
        assert_eq!(e, 5.0);
        assert!((a - 4f64.atan2(3.0)).abs() < 1e-15);
        assert!((a - 0.9273).abs() < 1e-4);
        assert_eq!(to_polar(Joint2D::new(2.0, 7.0), Joint2D::new(2.0, 7.0)), (0.0, 0.0));
        assert_eq!(to_polar(Joint2D::new(-1.0, 0.0), o), (1.0, PI));
    }

    #[test]
    fn method_one_and_two_examples() {
        let s = seq_with((100.0, 200.0), (130.0, 180.0), 2);
        let f1 = features(&s, 2, NormMethod::M1);
        assert_eq!(&f1.data.row(1)[..2], &[30.0, -20.0]);
        let f2 = features(&s, 2, NormMethod::M2);
        assert!((f2.data.get(0, 0) - 0.3).abs() < 1e-15);
        assert!((f2.data.get(0, 1) + 0.1).abs() < 1e-15);
    }

    #[test]
    fn chin_maps_to_origin_in_polar() {
        let s = seq_with((100.0, 200.0), (130.0, 180.0), 3);
        let f3 = features(&s, 3, NormMethod::M3);
        assert_eq!(&f3.data.row(0)[2..4], &[0.0, 0.0]);
    }

    #[test]
    fn padded_rows_stay_zero_and_dims_match() {
        let s = seq_with((100.0, 200.0), (130.0, 180.0), 3);
        for m in NormMethod::ALL {
            let f = features(&s, 8, m);
            assert_eq!(f.pad_count, 5);
            assert_eq!(f.data.cols(), feature_dim(m));
            for r in 0..5 {
                assert!(f.data.row(r).iter().all(|v| *v == 0.0));
            }
            assert!(f.data.row(5).iter().any(|v| *v != 0.0));
        }
    }

    #[test]
    fn zero_chin_is_degenerate_for_divisive_methods() {
        let s = seq_with((0.0, 200.0), (130.0, 180.0), 2);
        let raw = slide_windows(&s, WindowSpec::new(2, 1).unwrap())[0];
        for m in [NormMethod::M2, NormMethod::M5] {
            assert!(matches!(
                normalize_window(&raw, m, &JointIndexMap::default(), FeatureOptions::default()),
                Err(PreprocessError::DegenerateReference { .. })
            ));
        }
        assert!(normalize_window(&raw, NormMethod::M1, &JointIndexMap::default(), FeatureOptions::default()).is_ok());
    }

    #[test]
    fn confidence_columns_are_optional() {
        let s = seq_with((100.0, 200.0), (130.0, 180.0), 2);
        let raw = slide_windows(&s, WindowSpec::new(3, 1).unwrap())[0];
        let opts = FeatureOptions {
            include_confidence: true,
        };
        let f = normalize_window(&raw, NormMethod::M4, &JointIndexMap::default(), opts).unwrap();
        assert_eq!(f.data.cols(), 56 + 14);
        assert_eq!(f.data.cols(), feature_dim_with(NormMethod::M4, opts));
        assert_eq!(f.data.get(1, 56 + 1), 0.5);
        assert_eq!(f.data.get(0, 56 + 1), 0.0);
    }

    #[test]
    fn feature_dims() {
        assert_eq!(feature_dim(NormMethod::M3), 28);
        assert_eq!(feature_dim(NormMethod::M5), 56);
        assert_eq!(feature_dim(NormMethod::M1), 28);
        assert_eq!(feature_dim(NormMethod::M4), 56);
    }

    #[test]
    fn method_parsing() {
        assert_eq!("3".parse::<NormMethod>(), Ok(NormMethod::M3));
        assert_eq!("M5".parse::<NormMethod>(), Ok(NormMethod::M5));
        assert!("6".parse::<NormMethod>().is_err());
        assert!("0".parse::<NormMethod>().is_err());
    }
}
