//! Central finite-difference check of the analytic gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{backward, output_dim, Architecture, Example, HeadKind, ModelParameters, NnError, Target};
use crate::matrix::Matrix;

/// Finite-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Denominator floor for the relative error. Central differences at
/// `FD_STEP` carry about 1e-11 of absolute rounding noise on O(1) losses, so
/// components smaller than this are judged on absolute error (`1e-5 * floor`
/// at the default tolerance) instead.
pub const REL_ERROR_FLOOR: f64 = 1e-5;

/// Frames and batch size of the random probe used by [`grad_check`].
const PROBE_STEPS: usize = 6;
const PROBE_BATCH: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub n_params: usize,
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub tolerance: f64,
    pub passed: bool,
}

/// `|a - n| / max(|a|, |n|, REL_ERROR_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Compares two gradients; passes iff the worst relative error is strictly
/// below `tolerance`.
pub fn compare_gradients(analytic: &[f64], numeric: &[f64], tolerance: f64) -> GradCheckReport {
    assert_eq!(analytic.len(), numeric.len());
    let (worst_index, max_rel_error) = analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| relative_error(*a, *n))
        .enumerate()
        .fold((0, 0.0), |best, (i, e)| if e > best.1 { (i, e) } else { best });
    GradCheckReport {
        n_params: analytic.len(),
        max_rel_error,
        worst_index,
        tolerance,
        passed: max_rel_error < tolerance,
    }
}

/// Central differences of the mean batch loss, one parameter at a time.
pub fn numeric_gradient(
    params: &ModelParameters,
    batch: &[Example],
    step: f64,
) -> Result<Vec<f64>, NnError> {
    let mut probe = params.clone();
    let mut grad = vec![0.0; params.values.len()];
    for (i, g) in grad.iter_mut().enumerate() {
        let orig = probe.values[i];
        probe.values[i] = orig + step;
        let plus = probe.batch_loss(batch)?;
        probe.values[i] = orig - step;
        let minus = probe.batch_loss(batch)?;
        probe.values[i] = orig;
        *g = (plus - minus) / (2.0 * step);
    }
    Ok(grad)
}

/// Checks [`backward`] against central differences on a randomly
/// initialized model and a random batch.
pub fn grad_check(
    arch: Architecture,
    head: HeadKind,
    seed: u64,
    tolerance: f64,
) -> Result<GradCheckReport, NnError> {
    let mut params = ModelParameters::zeros(arch, head)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in &mut params.values {
        *v = rng.random_range(-0.5..0.5);
    }
    let d = params.input_dim();
    let k = output_dim(&params.arch, head);
    let inputs: Vec<Matrix> = (0..PROBE_BATCH)
        .map(|_| {
            Matrix::from_vec(
                PROBE_STEPS,
                d,
                (0..PROBE_STEPS * d).map(|_| rng.random_range(-1.0..1.0)).collect(),
            )
        })
        .collect();
    let batch: Vec<Example> = inputs
        .iter()
        .map(|x| Example {
            input: x,
            target: match head {
                HeadKind::Softmax => Target::Class(rng.random_range(0..k)),
                HeadKind::Sigmoid => Target::Binary(rng.random_bool(0.5)),
            },
        })
        .collect();
    let analytic = backward(&params, &batch)?.grad;
    let numeric = numeric_gradient(&params, &batch, FD_STEP)?;
    Ok(compare_gradients(&analytic, &numeric, tolerance))
}
