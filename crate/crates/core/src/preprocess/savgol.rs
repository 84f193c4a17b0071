//! Savitzky–Golay smoothing.
//!
//! Coefficients come from the Gram-polynomial expansion of the local
//! least-squares fit (Gorry's method), so no table is needed and any
//! odd window / polynomial order pair is supported.

use serde::{Deserialize, Serialize};

use super::PreprocessError;
use crate::skeleton::GestureSequence;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavgolSpec {
    m: usize,
    order: usize,
    coefficients: Vec<f64>,
}

impl SavgolSpec {
    pub fn new(m: usize, order: usize) -> Result<Self, PreprocessError> {
        let coefficients = savgol_coefficients(m, order)?;
        Ok(Self {
            m,
            order,
            coefficients,
        })
    }

    pub fn window(&self) -> usize {
        self.m
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Convolution weights for offsets `-(m-1)/2 ..= (m-1)/2`.
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Smooths one series; the `(m-1)/2` samples at each end pass through.
    ///
    /// The filter is applied as `y[j] + sum_i c_i ((y[j+i] - y[j]) + (y[j-i] - y[j]))`,
    /// which equals the plain convolution because the weights are symmetric
    /// and sum to one. In this form constant series, and linear series
    /// whose differences are exactly representable, come out bit-identical.
    pub fn smooth_series(&self, y: &[f64]) -> Vec<f64> {
        let half = self.m / 2;
        let mut out = y.to_vec();
        if y.len() < self.m {
            return out;
        }
        for j in half..y.len() - half {
            let centre = y[j];
            let offset: f64 = (1..=half)
                .map(|i| self.coefficients[half + i] * ((y[j + i] - centre) + (y[j - i] - centre)))
                .sum();
            out[j] = centre + offset;
        }
        out
    }
}

impl Default for SavgolSpec {
    fn default() -> Self {
        Self::new(5, 2).expect("(5, 2) is a valid filter")
    }
}

/// `a (a-1) ... (a-b+1)`, with an empty product of 1.
fn gen_fact(a: i64, b: i64) -> f64 {
    ((a - b + 1)..=a).fold(1.0, |acc, j| acc * j as f64)
}

/// Gram polynomial of degree `k` over the points `-half..=half`, at `i`.
fn gram_poly(i: i64, half: i64, k: i64) -> f64 {
    let (mut prev, mut cur) = (0.0, 1.0);
    for d in 1..=k {
        let denom = (d * (2 * half - d + 1)) as f64;
        let next = (4 * d - 2) as f64 / denom * i as f64 * cur
            - ((d - 1) * (2 * half + d)) as f64 / denom * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Least-squares smoothing weights for a degree-`order` fit on `m` points,
/// evaluated at the centre point.
pub fn savgol_coefficients(m: usize, order: usize) -> Result<Vec<f64>, PreprocessError> {
    if m.is_multiple_of(2) || order >= m {
        return Err(PreprocessError::InvalidSavgol { m, order });
    }
    let half = (m / 2) as i64;
    let coeffs = (-half..=half)
        .map(|i| {
            (0..=order as i64)
                .map(|k| {
                    (2 * k + 1) as f64 * gen_fact(2 * half, k) / gen_fact(2 * half + k + 1, k + 1)
                        * gram_poly(i, half, k)
                        * gram_poly(0, half, k)
                })
                .sum()
        })
        .collect();
    Ok(coeffs)
}

/// Smooths every joint's x and y series independently. Confidence and aux
/// rows are left untouched.
pub fn savgol_smooth(seq: &GestureSequence, spec: &SavgolSpec) -> GestureSequence {
    let mut out = seq.clone();
    let n_joints = seq.frames.first().map_or(0, |f| f.joints.len());
    for j in 0..n_joints {
        let xs: Vec<f64> = seq.frames.iter().map(|f| f.joints[j].x).collect();
        let ys: Vec<f64> = seq.frames.iter().map(|f| f.joints[j].y).collect();
        let (xs, ys) = (spec.smooth_series(&xs), spec.smooth_series(&ys));
        for (t, frame) in out.frames.iter_mut().enumerate() {
            frame.joints[j].x = xs[t];
            frame.joints[j].y = ys[t];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::{GestureId, Joint2D, SkeletalFrame};

    #[test]
    fn rejects_even_or_overfit_windows() {
        assert!(savgol_coefficients(4, 2).is_err());
        assert!(savgol_coefficients(5, 5).is_err());
        assert!(savgol_coefficients(1, 0).is_ok());
    }

    #[test]
    fn coefficients_are_symmetric_and_normalized() {
        for (m, order) in [(5, 2), (7, 2), (9, 4), (11, 3), (3, 1)] {
            let c = savgol_coefficients(m, order).unwrap();
            assert!((c.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for i in 0..m {
                assert!((c[i] - c[m - 1 - i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_is_unchanged() {
        let spec = SavgolSpec::default();
        let y = [5.0; 6];
        assert_eq!(spec.smooth_series(&y), y.to_vec());
    }

    #[test]
    fn linear_ramp_interior_is_reproduced() {
        let spec = SavgolSpec::default();
        let y: Vec<f64> = (0..7).map(f64::from).collect();
        let s = spec.smooth_series(&y);
        for (a, b) in s.iter().zip(&y) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn impulse_center() {
        let spec = SavgolSpec::default();
        let s = spec.smooth_series(&[0.0, 0.0, 10.0, 0.0, 0.0]);
        assert!((s[2] - 34.0 / 7.0).abs() < 1e-12);
        // Boundary samples pass through.
        assert_eq!(&s[..2], &[0.0, 0.0]);
        assert_eq!(&s[3..], &[0.0, 0.0]);
    }

    #[test]
    fn short_series_passes_through() {
        let spec = SavgolSpec::default();
        assert_eq!(spec.smooth_series(&[1.0, 9.0, 2.0]), vec![1.0, 9.0, 2.0]);
    }

    #[test]
    fn sequence_smoothing_leaves_confidence() {
        let frames = (0..7)
            .map(|t| {
                let v = if t == 3 { 35.0 } else { 0.0 };
                SkeletalFrame::new(vec![Joint2D::with_confidence(v, -v, 0.25); 14])
            })
            .collect();
        let seq = GestureSequence {
            patient_id: 1,
            label: GestureId::from_index(0).unwrap(),
            correct: true,
            frames,
        };
        let out = savgol_smooth(&seq, &SavgolSpec::default());
        assert!((out.frames[3].joints[5].x - 17.0).abs() < 1e-12);
        assert!((out.frames[3].joints[5].y + 17.0).abs() < 1e-12);
        assert!((out.frames[2].joints[0].x - 12.0).abs() < 1e-12);
        assert!(out.frames.iter().all(|f| f.joints.iter().all(|j| j.confidence == 0.25)));
    }
}
