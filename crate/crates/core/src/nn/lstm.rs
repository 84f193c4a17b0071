//! Single-layer LSTM classifier with backpropagation through time.
//!
//! Parameter layout (gate order input, forget, cell, output):
//!
//! | block   | shape      |
//! |---------|------------|
//! | `w_x`   | `4H x D`   |
//! | `w_h`   | `4H x H`   |
//! | `b`     | `4H`       |
//! | `w_out` | `O x H`    |
//! | `b_out` | `O`        |

use serde::{Deserialize, Serialize};

use super::{sigmoid, xavier_limit, Init, InitBlock, ModelParameters, NnError};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LstmSpec {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub n_classes: usize,
}

impl LstmSpec {
    pub fn validate(&self) -> Result<(), NnError> {
        if self.input_dim == 0 || self.hidden_dim == 0 || self.n_classes == 0 {
            return Err(NnError::InvalidSpec(format!(
                "LSTM dimensions must be >= 1: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn param_count(&self, out: usize) -> usize {
        let (d, h) = (self.input_dim, self.hidden_dim);
        4 * h * (d + h + 1) + out * (h + 1)
    }

    fn layout(&self, out: usize) -> Layout {
        let (d, h) = (self.input_dim, self.hidden_dim);
        let w_x = 0;
        let w_h = w_x + 4 * h * d;
        let b = w_h + 4 * h * h;
        let w_out = b + 4 * h;
        let b_out = w_out + out * h;
        Layout {
            d,
            h,
            w_x,
            w_h,
            b,
            w_out,
            b_out,
        }
    }

    pub(crate) fn init_blocks(&self, out: usize) -> Vec<InitBlock> {
        let l = self.layout(out);
        let (d, h) = (l.d, l.h);
        vec![
            InitBlock {
                range: l.w_x..l.w_h,
                init: Init::Uniform(xavier_limit(d, h)),
            },
            InitBlock {
                range: l.w_h..l.b,
                init: Init::Uniform(xavier_limit(h, h)),
            },
            InitBlock {
                range: l.b + h..l.b + 2 * h,
                init: Init::Constant(1.0),
            },
            InitBlock {
                range: l.w_out..l.b_out,
                init: Init::Uniform(xavier_limit(h, out)),
            },
        ]
    }
}

#[derive(Debug, Clone, Copy)]
struct Layout {
    d: usize,
    h: usize,
    w_x: usize,
    w_h: usize,
    b: usize,
    w_out: usize,
    b_out: usize,
}

/// Per-step activations kept for the backward pass.
pub(crate) struct LstmTrace {
    /// `T x 4H` post-activation gates.
    gates: Vec<f64>,
    /// `T x H` cell states.
    cells: Vec<f64>,
    /// `T x H` tanh of the cell states.
    cells_tanh: Vec<f64>,
    /// `T x H` hidden states.
    hidden: Vec<f64>,
    pub logits: Vec<f64>,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub(crate) fn forward(spec: &LstmSpec, out: usize, p: &[f64], x: &Matrix) -> LstmTrace {
    let l = spec.layout(out);
    let (d, h, steps) = (l.d, l.h, x.rows());
    let mut trace = LstmTrace {
        gates: vec![0.0; steps * 4 * h],
        cells: vec![0.0; steps * h],
        cells_tanh: vec![0.0; steps * h],
        hidden: vec![0.0; steps * h],
        logits: vec![0.0; out],
    };
    let zero = vec![0.0; h];
    for t in 0..steps {
        let xt = x.row(t);
        let (h_prev, c_prev) = if t == 0 {
            (&zero[..], &zero[..])
        } else {
            (
                &trace.hidden[(t - 1) * h..t * h],
                &trace.cells[(t - 1) * h..t * h],
            )
        };
        let mut z = p[l.b..l.b + 4 * h].to_vec();
        for (r, zr) in z.iter_mut().enumerate() {
            *zr += dot(&p[l.w_x + r * d..l.w_x + (r + 1) * d], xt)
                + dot(&p[l.w_h + r * h..l.w_h + (r + 1) * h], h_prev);
        }
        let mut c = vec![0.0; h];
        let mut ct = vec![0.0; h];
        let mut hn = vec![0.0; h];
        for k in 0..h {
            let i = sigmoid(z[k]);
            let f = sigmoid(z[h + k]);
            let g = z[2 * h + k].tanh();
            let o = sigmoid(z[3 * h + k]);
            z[k] = i;
            z[h + k] = f;
            z[2 * h + k] = g;
            z[3 * h + k] = o;
            c[k] = f * c_prev[k] + i * g;
            ct[k] = c[k].tanh();
            hn[k] = o * ct[k];
        }
        trace.gates[t * 4 * h..(t + 1) * 4 * h].copy_from_slice(&z);
        trace.cells[t * h..(t + 1) * h].copy_from_slice(&c);
        trace.cells_tanh[t * h..(t + 1) * h].copy_from_slice(&ct);
        trace.hidden[t * h..(t + 1) * h].copy_from_slice(&hn);
    }
    let h_last = &trace.hidden[(steps - 1) * h..steps * h];
    for (o, logit) in trace.logits.iter_mut().enumerate() {
        *logit = p[l.b_out + o] + dot(&p[l.w_out + o * h..l.w_out + (o + 1) * h], h_last);
    }
    trace
}

/// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(logits).
pub(crate) fn backward(
    spec: &LstmSpec,
    out: usize,
    p: &[f64],
    x: &Matrix,
    trace: &LstmTrace,
    dlogits: &[f64],
    grad: &mut [f64],
) {
    let l = spec.layout(out);
    let (d, h, steps) = (l.d, l.h, x.rows());

    let h_last = &trace.hidden[(steps - 1) * h..steps * h];
    let mut dh = vec![0.0; h];
    for (o, &dl) in dlogits.iter().enumerate() {
        grad[l.b_out + o] += dl;
        axpy(dl, h_last, &mut grad[l.w_out + o * h..l.w_out + (o + 1) * h]);
        axpy(dl, &p[l.w_out + o * h..l.w_out + (o + 1) * h], &mut dh);
    }

    let zero = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    let mut dz = vec![0.0; 4 * h];
    for t in (0..steps).rev() {
        let gates = &trace.gates[t * 4 * h..(t + 1) * 4 * h];
        let ct = &trace.cells_tanh[t * h..(t + 1) * h];
        let (h_prev, c_prev) = if t == 0 {
            (&zero[..], &zero[..])
        } else {
            (
                &trace.hidden[(t - 1) * h..t * h],
                &trace.cells[(t - 1) * h..t * h],
            )
        };
        for k in 0..h {
            let (i, f, g, o) = (gates[k], gates[h + k], gates[2 * h + k], gates[3 * h + k]);
            let dc = dc_next[k] + dh[k] * o * (1.0 - ct[k] * ct[k]);
            dz[k] = dc * g * i * (1.0 - i);
            dz[h + k] = dc * c_prev[k] * f * (1.0 - f);
            dz[2 * h + k] = dc * i * (1.0 - g * g);
            dz[3 * h + k] = dh[k] * ct[k] * o * (1.0 - o);
            dc_next[k] = dc * f;
        }
        let xt = x.row(t);
        dh.fill(0.0);
        for (r, &dzr) in dz.iter().enumerate() {
            if dzr == 0.0 {
                continue;
            }
            grad[l.b + r] += dzr;
            axpy(dzr, xt, &mut grad[l.w_x + r * d..l.w_x + (r + 1) * d]);
            axpy(dzr, h_prev, &mut grad[l.w_h + r * h..l.w_h + (r + 1) * h]);
            axpy(dzr, &p[l.w_h + r * h..l.w_h + (r + 1) * h], &mut dh);
        }
    }
}

/// Class probabilities of an LSTM model for one window.
pub fn lstm_forward(params: &ModelParameters, window: &Matrix) -> Result<Vec<f64>, NnError> {
    match params.arch {
        super::Architecture::Lstm(_) => params.predict(window),
        _ => Err(NnError::InvalidSpec("expected an LSTM model".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Architecture, HeadKind};

    fn spec() -> LstmSpec {
        LstmSpec {
            input_dim: 3,
            hidden_dim: 4,
            n_classes: 5,
        }
    }

    fn window(seed: f64) -> Matrix {
        Matrix::from_vec(6, 3, (0..18).map(|i| ((i as f64 + seed) * 0.731).sin()).collect())
    }

    #[test]
    fn zero_params_give_uniform_output() {
        let p = ModelParameters::zeros(Architecture::Lstm(spec()), HeadKind::Softmax).unwrap();
        let probs = lstm_forward(&p, &window(0.0)).unwrap();
        for v in probs {
            assert!((v - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_sums_to_one() {
        for seed in 0..20 {
            let p = ModelParameters::xavier(Architecture::Lstm(spec()), HeadKind::Softmax, seed)
                .unwrap();
            let probs = lstm_forward(&p, &window(seed as f64)).unwrap();
            assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(probs.iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn frame_order_matters() {
        let p = ModelParameters::xavier(Architecture::Lstm(spec()), HeadKind::Softmax, 3).unwrap();
        let w = window(1.0);
        let mut swapped = w.clone();
        swapped.row_mut(1).copy_from_slice(w.row(4));
        swapped.row_mut(4).copy_from_slice(w.row(1));
        let a = lstm_forward(&p, &w).unwrap();
        let b = lstm_forward(&p, &swapped).unwrap();
        assert!(a.iter().zip(&b).any(|(x, y)| (x - y).abs() > 1e-9));
    }

    #[test]
    fn sigmoid_head_is_a_probability() {
        let arch = Architecture::Lstm(spec());
        let p = ModelParameters::xavier(arch, HeadKind::Sigmoid, 2).unwrap();
        let probs = lstm_forward(&p, &window(2.0)).unwrap();
        assert_eq!(probs.len(), 1);
        assert!(probs[0] > 0.0 && probs[0] < 1.0);
    }
}
