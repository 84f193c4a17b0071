//! Seeded synthetic gesture generator.
//!
//! Every class gets a distinct template pose drawn once from the seed.
//! Dynamic classes additionally move one arm (elbow and wrist) along a
//! class-specific sinusoid. Each patient gets a camera translation shared by
//! all of their sequences, and every coordinate receives Gaussian jitter.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Dataset, IngestError, Provenance};
use crate::skeleton::{
    GestureId, GestureKind, GestureSequence, Joint2D, JointIndexMap, SkeletalFrame, N_JOINTS,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub n_patients: u32,
    /// Inclusive frame-count range for static gestures.
    pub frames_static: (usize, usize),
    /// Inclusive frame-count range for dynamic gestures.
    pub frames_dynamic: (usize, usize),
    /// Per-coordinate jitter standard deviation, pixels.
    pub noise_sigma: f64,
    /// Camera translation is uniform in `[-r, r]` on each axis, pixels.
    pub camera_offset_range: f64,
    pub seed: u64,
}

impl SynthConfig {
    pub fn new(n_patients: u32, seed: u64) -> Self {
        Self {
            n_patients,
            frames_static: (40, 60),
            frames_dynamic: (60, 90),
            noise_sigma: 1.0,
            camera_offset_range: 80.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        let bad = |m: String| Err(IngestError::InvalidSynthConfig(m));
        if self.n_patients < 1 {
            return bad("n_patients must be >= 1".into());
        }
        for (name, (lo, hi)) in [
            ("frames_static", self.frames_static),
            ("frames_dynamic", self.frames_dynamic),
        ] {
            if lo < 1 || lo > hi {
                return bad(format!("{name} range {lo}..={hi} is empty or starts at 0"));
            }
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise_sigma must be >= 0, got {}", self.noise_sigma));
        }
        // Keeps the chin well away from zero so divisive normalization is defined.
        if !(0.0..=100.0).contains(&self.camera_offset_range) {
            return bad(format!(
                "camera_offset_range must be in [0, 100], got {}",
                self.camera_offset_range
            ));
        }
        Ok(())
    }
}

/// Neutral upright pose in image pixels, default joint order.
const BASE_POSE: [(f64, f64); N_JOINTS] = [
    (320.0, 90.0),
    (320.0, 150.0),
    (270.0, 175.0),
    (250.0, 245.0),
    (245.0, 315.0),
    (370.0, 175.0),
    (390.0, 245.0),
    (395.0, 315.0),
    (290.0, 330.0),
    (290.0, 420.0),
    (290.0, 470.0),
    (350.0, 330.0),
    (350.0, 420.0),
    (350.0, 470.0),
];

const RIGHT_ARM: (usize, usize) = (3, 4);
const LEFT_ARM: (usize, usize) = (6, 7);

#[derive(Debug, Clone)]
struct Motion {
    elbow: usize,
    wrist: usize,
    amplitude: (f64, f64),
    period: f64,
    phase: f64,
}

#[derive(Debug, Clone)]
struct ClassTemplate {
    pose: [(f64, f64); N_JOINTS],
    motion: Option<Motion>,
}

impl ClassTemplate {
    fn draw(kind: GestureKind, rng: &mut ChaCha8Rng) -> Self {
        let mut pose = BASE_POSE;
        for j in [RIGHT_ARM.0, RIGHT_ARM.1, LEFT_ARM.0, LEFT_ARM.1] {
            pose[j].0 += rng.random_range(-60.0..60.0);
            pose[j].1 += rng.random_range(-60.0..60.0);
        }
        pose[0].0 += rng.random_range(-8.0..8.0);
        let motion = (kind == GestureKind::Dynamic).then(|| {
            let (elbow, wrist) = if rng.random_bool(0.5) {
                RIGHT_ARM
            } else {
                LEFT_ARM
            };
            let angle = rng.random_range(0.0..TAU);
            let radius = rng.random_range(15.0..35.0);
            Motion {
                elbow,
                wrist,
                amplitude: (radius * angle.cos(), radius * angle.sin()),
                period: rng.random_range(6.0..24.0),
                phase: rng.random_range(0.0..TAU),
            }
        });
        Self { pose, motion }
    }

    fn pose_at(&self, t: usize) -> [(f64, f64); N_JOINTS] {
        let mut pose = self.pose;
        if let Some(m) = &self.motion {
            let s = (TAU * t as f64 / m.period + m.phase).sin();
            pose[m.wrist].0 += m.amplitude.0 * s;
            pose[m.wrist].1 += m.amplitude.1 * s;
            pose[m.elbow].0 += 0.5 * m.amplitude.0 * s;
            pose[m.elbow].1 += 0.5 * m.amplitude.1 * s;
        }
        pose
    }
}

/// Generates one correct performance of every gesture for every patient.
///
/// Output is a pure function of `cfg`.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<Dataset, IngestError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let templates: Vec<ClassTemplate> = GestureId::all()
        .map(|g| ClassTemplate::draw(g.kind(), &mut rng))
        .collect();

    let r = cfg.camera_offset_range;
    let mut sequences = Vec::with_capacity(cfg.n_patients as usize * GestureId::COUNT);
    for patient_id in 1..=cfg.n_patients {
        let offset = if r > 0.0 {
            (rng.random_range(-r..=r), rng.random_range(-r..=r))
        } else {
            (0.0, 0.0)
        };
        for g in GestureId::all() {
            let (lo, hi) = match g.kind() {
                GestureKind::Static => cfg.frames_static,
                GestureKind::Dynamic => cfg.frames_dynamic,
            };
            let len = rng.random_range(lo..=hi);
            let template = &templates[g.index()];
            let frames = (0..len)
                .map(|t| {
                    let joints = template
                        .pose_at(t)
                        .iter()
                        .map(|&(x, y)| {
                            let nx: f64 = rng.sample(StandardNormal);
                            let ny: f64 = rng.sample(StandardNormal);
                            Joint2D::new(
                                x + offset.0 + cfg.noise_sigma * nx,
                                y + offset.1 + cfg.noise_sigma * ny,
                            )
                        })
                        .collect();
                    SkeletalFrame::new(joints)
                })
                .collect();
            sequences.push(GestureSequence {
                patient_id,
                label: g,
                correct: true,
                frames,
            });
        }
    }
    Ok(Dataset {
        sequences,
        joint_map: JointIndexMap::default(),
        provenance: Provenance::Synthetic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::validate_sequence;

    #[test]
    fn same_seed_same_dataset() {
        let cfg = SynthConfig::new(3, 42);
        let a = generate_synthetic(&cfg).unwrap();
        let b = generate_synthetic(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.checksum(), b.checksum());
        let c = generate_synthetic(&SynthConfig::new(3, 43)).unwrap();
        assert_ne!(a.checksum(), c.checksum());
    }

    #[test]
    fn every_class_once_per_patient() {
        let ds = generate_synthetic(&SynthConfig::new(6, 1)).unwrap();
        assert_eq!(ds.sequences.len(), 6 * 29);
        for g in GestureId::all() {
            assert_eq!(ds.sequences.iter().filter(|s| s.label == g).count(), 6);
        }
        assert!(ds.sequences.iter().all(|s| s.correct && validate_sequence(s).is_empty()));
    }

    #[test]
    fn noiseless_static_classes_are_identical_frames() {
        let cfg = SynthConfig {
            noise_sigma: 0.0,
            camera_offset_range: 0.0,
            ..SynthConfig::new(4, 9)
        };
        let ds = generate_synthetic(&cfg).unwrap();
        for g in GestureId::of_kind(GestureKind::Static) {
            let seqs: Vec<_> = ds.sequences.iter().filter(|s| s.label == g).collect();
            let reference = &seqs[0].frames[0];
            for s in seqs {
                assert!(s.frames.iter().all(|f| f == reference));
            }
        }
    }

    #[test]
    fn lengths_respect_ranges() {
        let cfg = SynthConfig {
            frames_static: (10, 12),
            frames_dynamic: (20, 20),
            ..SynthConfig::new(3, 5)
        };
        let ds = generate_synthetic(&cfg).unwrap();
        for s in &ds.sequences {
            match s.label.kind() {
                GestureKind::Static => assert!((10..=12).contains(&s.len())),
                GestureKind::Dynamic => assert_eq!(s.len(), 20),
            }
        }
    }

    #[test]
    fn invalid_configs() {
        let base = SynthConfig::new(2, 0);
        assert!(SynthConfig { n_patients: 0, ..base.clone() }.validate().is_err());
        assert!(SynthConfig { frames_static: (5, 4), ..base.clone() }.validate().is_err());
        assert!(SynthConfig { noise_sigma: -1.0, ..base.clone() }.validate().is_err());
        assert!(SynthConfig { camera_offset_range: 500.0, ..base }.validate().is_err());
    }
}
