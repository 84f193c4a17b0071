//! Skeletal data types and the gesture taxonomy.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Number of body joints per frame.
pub const N_JOINTS: usize = 14;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SkeletonError {
    #[error("unknown gesture label {0:?}")]
    UnknownLabel(String),
    #[error("invalid joint map: {0}")]
    InvalidJointMap(String),
}

/// Static gestures are held poses; dynamic gestures are defined by motion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GestureKind {
    Static,
    Dynamic,
}

impl fmt::Display for GestureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GestureKind::Static => f.write_str("static"),
            GestureKind::Dynamic => f.write_str("dynamic"),
        }
    }
}

struct TaxonomyEntry {
    id: &'static str,
    kind: GestureKind,
    description: &'static str,
}

const fn entry(id: &'static str, kind: GestureKind, description: &'static str) -> TaxonomyEntry {
    TaxonomyEntry {
        id,
        kind,
        description,
    }
}

use GestureKind::{Dynamic, Static};

static TAXONOMY: [TaxonomyEntry; 29] = [
    entry("A1_1", Static, "Left hand on left ear"),
    entry("A1_2", Static, "Left hand on right ear"),
    entry("A1_3", Static, "Right hand on right ear"),
    entry("A1_4", Static, "Right hand on left ear"),
    entry("A1_5", Static, "Index and baby finger on table"),
    entry("A2_1", Static, "Stick together index and baby fingers"),
    entry("A2_2", Dynamic, "Hands on table, twist toward body"),
    entry("A2_3", Static, "Bird"),
    entry("A2_4", Static, "Diamond"),
    entry("A2_5", Static, "Ring together"),
    entry("S1_1", Static, "Do a military salute"),
    entry("S1_2", Static, "Ask for silence"),
    entry("S1_3", Static, "Show something smells bad"),
    entry("S1_4", Dynamic, "Tell someone is crazy"),
    entry("S1_5", Dynamic, "Blow a kiss"),
    entry("S2_1", Dynamic, "Twiddle your thumbs"),
    entry("S2_2", Static, "Indicate there is unbearable noise"),
    entry("S2_3", Static, "Indicate you want to sleep"),
    entry("S2_4", Static, "Pray"),
    entry("P1_1", Dynamic, "Comb hair"),
    entry("P1_2", Dynamic, "Drink a glass of water"),
    entry("P1_3", Dynamic, "Answer the phone"),
    entry("P1_4", Dynamic, "Pick up a needle"),
    entry("P1_5", Dynamic, "Smoke a cigarette"),
    entry("P2_1", Dynamic, "Unscrew a stopper"),
    entry("P2_2", Dynamic, "Play piano"),
    entry("P2_3", Dynamic, "Hammer a nail"),
    entry("P2_4", Dynamic, "Tear up a paper"),
    entry("P2_5", Dynamic, "Strike a match"),
];

/// One of the 29 gesture identifiers, stored as its taxonomy position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GestureId(u8);

impl GestureId {
    pub const COUNT: usize = TAXONOMY.len();

    /// All ids in taxonomy order.
    pub fn all() -> impl Iterator<Item = GestureId> + Clone {
        (0..Self::COUNT as u8).map(GestureId)
    }

    /// Ids of one kind, in taxonomy order.
    pub fn of_kind(kind: GestureKind) -> Vec<GestureId> {
        Self::all().filter(|g| g.kind() == kind).collect()
    }

    pub fn from_index(index: usize) -> Option<GestureId> {
        (index < Self::COUNT).then_some(GestureId(index as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn as_str(self) -> &'static str {
        TAXONOMY[self.index()].id
    }

    pub fn kind(self) -> GestureKind {
        TAXONOMY[self.index()].kind
    }

    pub fn description(self) -> &'static str {
        TAXONOMY[self.index()].description
    }
}

impl fmt::Display for GestureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GestureId {
    type Err = SkeletonError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TAXONOMY
            .iter()
            .position(|e| e.id == s)
            .map(|i| GestureId(i as u8))
            .ok_or_else(|| SkeletonError::UnknownLabel(s.to_string()))
    }
}

impl Serialize for GestureId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for GestureId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Looks up the taxonomy type of a gesture id string.
pub fn label_kind(id: &str) -> Result<GestureKind, SkeletonError> {
    id.parse::<GestureId>().map(GestureId::kind)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassCounts {
    pub n_static: usize,
    pub n_dynamic: usize,
    pub n_total: usize,
}

/// Class tallies computed from the built-in taxonomy.
pub fn class_counts() -> ClassCounts {
    let n_static = TAXONOMY.iter().filter(|e| e.kind == Static).count();
    let n_dynamic = TAXONOMY.iter().filter(|e| e.kind == Dynamic).count();
    ClassCounts {
        n_static,
        n_dynamic,
        n_total: TAXONOMY.len(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Joint2D {
    pub x: f64,
    pub y: f64,
    /// Detector confidence in `[0, 1]`; synthetic data uses 1.0.
    pub confidence: f64,
}

impl Joint2D {
    pub fn new(x: f64, y: f64) -> Self {
        Self {
            x,
            y,
            confidence: 1.0,
        }
    }

    pub fn with_confidence(x: f64, y: f64, confidence: f64) -> Self {
        Self { x, y, confidence }
    }
}

/// Rows 4 and 5 of a raw frame block. Kept for ingest fidelity only.
pub type AuxRows = [Vec<f64>; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletalFrame {
    pub joints: Vec<Joint2D>,
    pub aux: Option<Box<AuxRows>>,
}

impl SkeletalFrame {
    pub fn new(joints: Vec<Joint2D>) -> Self {
        Self { joints, aux: None }
    }

    pub fn with_aux(joints: Vec<Joint2D>, aux: AuxRows) -> Self {
        Self {
            joints,
            aux: Some(Box::new(aux)),
        }
    }

    /// Applies `f` to every joint's (x, y).
    pub fn map_xy(&self, mut f: impl FnMut(f64, f64) -> (f64, f64)) -> SkeletalFrame {
        let joints = self
            .joints
            .iter()
            .map(|j| {
                let (x, y) = f(j.x, j.y);
                Joint2D { x, y, ..*j }
            })
            .collect();
        SkeletalFrame {
            joints,
            aux: self.aux.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GestureSequence {
    pub patient_id: u32,
    pub label: GestureId,
    pub correct: bool,
    pub frames: Vec<SkeletalFrame>,
}

impl GestureSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Names of the 14 joint columns and which of them is the chin.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointIndexMap {
    names: Vec<String>,
    chin_index: usize,
}

/// Default column order, head to ankle.
pub const DEFAULT_JOINT_NAMES: [&str; N_JOINTS] = [
    "head_top",
    "chin",
    "right_shoulder",
    "right_elbow",
    "right_wrist",
    "left_shoulder",
    "left_elbow",
    "left_wrist",
    "right_hip",
    "right_knee",
    "right_ankle",
    "left_hip",
    "left_knee",
    "left_ankle",
];

impl JointIndexMap {
    pub fn new(names: Vec<String>, chin_index: usize) -> Result<Self, SkeletonError> {
        if names.len() != N_JOINTS {
            return Err(SkeletonError::InvalidJointMap(format!(
                "expected {N_JOINTS} joint names, got {}",
                names.len()
            )));
        }
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != names.len() {
            return Err(SkeletonError::InvalidJointMap(
                "joint names must be unique".into(),
            ));
        }
        if chin_index >= N_JOINTS {
            return Err(SkeletonError::InvalidJointMap(format!(
                "chin index {chin_index} out of range"
            )));
        }
        Ok(Self { names, chin_index })
    }

    /// Map whose chin is the named column of the default ordering.
    pub fn with_chin_named(name: &str) -> Result<Self, SkeletonError> {
        let idx = DEFAULT_JOINT_NAMES
            .iter()
            .position(|n| *n == name)
            .ok_or_else(|| SkeletonError::InvalidJointMap(format!("no joint named {name:?}")))?;
        Self::new(
            DEFAULT_JOINT_NAMES.iter().map(|s| s.to_string()).collect(),
            idx,
        )
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn chin_index(&self) -> usize {
        self.chin_index
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

impl Default for JointIndexMap {
    fn default() -> Self {
        Self {
            names: DEFAULT_JOINT_NAMES.iter().map(|s| s.to_string()).collect(),
            chin_index: 1,
        }
    }
}

/// A single broken invariant found by [`validate_sequence`].
#[derive(Debug, Clone, PartialEq)]
pub struct Violation(pub String);

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Checks every type invariant of a sequence. An empty result means valid.
pub fn validate_sequence(seq: &GestureSequence) -> Vec<Violation> {
    let mut out = Vec::new();
    if seq.patient_id < 1 {
        out.push(Violation(format!(
            "patient id must be >= 1, got {}",
            seq.patient_id
        )));
    }
    if seq.frames.is_empty() {
        out.push(Violation("sequence has no frames".into()));
        return out;
    }
    let aux_present = seq.frames[0].aux.is_some();
    for (fi, frame) in seq.frames.iter().enumerate() {
        if frame.joints.len() != N_JOINTS {
            out.push(Violation(format!(
                "frame {fi}: expected {N_JOINTS} joints, got {}",
                frame.joints.len()
            )));
        }
        for (ji, j) in frame.joints.iter().enumerate() {
            if !j.x.is_finite() || !j.y.is_finite() {
                out.push(Violation(format!(
                    "frame {fi}, joint {ji}: non-finite coordinate ({}, {})",
                    j.x, j.y
                )));
            }
            if !(0.0..=1.0).contains(&j.confidence) {
                out.push(Violation(format!(
                    "frame {fi}, joint {ji}: confidence {} outside [0, 1]",
                    j.confidence
                )));
            }
        }
        if let Some(aux) = &frame.aux {
            for (ri, row) in aux.iter().enumerate() {
                if row.len() != N_JOINTS {
                    out.push(Violation(format!(
                        "frame {fi}: aux row {ri} has {} values, expected {N_JOINTS}",
                        row.len()
                    )));
                }
            }
        }
        if frame.aux.is_some() != aux_present {
            out.push(Violation(format!(
                "frame {fi}: aux rows presence differs from frame 0"
            )));
        }
    }
    out
}
