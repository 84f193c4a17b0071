//! Temporal convolutional network: one dilated causal convolution per level,
//! ReLU, and a residual connection (1x1 projection when the channel count
//! changes). The head reads the last level at the last time step.
//!
//! Per-level parameter layout, `C_in` being `D` on level 0 and `C` above:
//! `conv_w[C][C_in][k]`, `conv_b[C]`, then `proj_w[C][C_in]`, `proj_b[C]`
//! only when `C_in != C`. The head `w_out[O][C]`, `b_out[O]` comes last.

use serde::{Deserialize, Serialize};

use super::{xavier_limit, Init, InitBlock, ModelParameters, NnError};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TcnSpec {
    pub input_dim: usize,
    pub channels: usize,
    pub kernel: usize,
    pub dilations: Vec<usize>,
    pub n_classes: usize,
}

impl TcnSpec {
    pub fn validate(&self) -> Result<(), NnError> {
        let bad = |m: String| Err(NnError::InvalidSpec(m));
        if self.input_dim == 0 || self.channels == 0 || self.n_classes == 0 {
            return bad(format!("TCN dimensions must be >= 1: {self:?}"));
        }
        if self.kernel == 0 {
            return bad("TCN kernel must be >= 1".into());
        }
        if self.dilations.is_empty() {
            return bad("TCN needs at least one level".into());
        }
        if !self.dilations.iter().all(|d| d.is_power_of_two()) {
            return bad(format!("dilations must be powers of two: {:?}", self.dilations));
        }
        if !self.dilations.windows(2).all(|w| w[0] < w[1]) {
            return bad(format!(
                "dilations must be strictly increasing: {:?}",
                self.dilations
            ));
        }
        Ok(())
    }

    /// Frames seen by the last time step's output.
    pub fn receptive_field(&self) -> usize {
        1 + (self.kernel - 1) * self.dilations.iter().sum::<usize>()
    }

    fn levels(&self) -> Vec<Level> {
        let (c, k) = (self.channels, self.kernel);
        let mut offset = 0;
        self.dilations
            .iter()
            .enumerate()
            .map(|(i, &dilation)| {
                let c_in = if i == 0 { self.input_dim } else { c };
                let conv_w = offset;
                let conv_b = conv_w + c * c_in * k;
                offset = conv_b + c;
                let proj = (c_in != c).then(|| {
                    let w = offset;
                    offset += c * c_in + c;
                    w
                });
                Level {
                    c_in,
                    dilation,
                    conv_w,
                    conv_b,
                    proj,
                }
            })
            .collect()
    }

    fn head_offset(&self) -> usize {
        let c = self.channels;
        self.levels()
            .last()
            .map(|l| l.conv_b + c + l.proj.map_or(0, |_| c * l.c_in + c))
            .unwrap_or(0)
    }

    pub fn param_count(&self, out: usize) -> usize {
        self.head_offset() + out * (self.channels + 1)
    }

    pub(crate) fn init_blocks(&self, out: usize) -> Vec<InitBlock> {
        let (c, k) = (self.channels, self.kernel);
        let mut blocks = Vec::new();
        for l in self.levels() {
            blocks.push(InitBlock {
                range: l.conv_w..l.conv_b,
                init: Init::Uniform(xavier_limit(l.c_in * k, c * k)),
            });
            if let Some(pw) = l.proj {
                blocks.push(InitBlock {
                    range: pw..pw + c * l.c_in,
                    init: Init::Uniform(xavier_limit(l.c_in, c)),
                });
            }
        }
        let head = self.head_offset();
        blocks.push(InitBlock {
            range: head..head + out * c,
            init: Init::Uniform(xavier_limit(c, out)),
        });
        blocks
    }
}

#[derive(Debug, Clone, Copy)]
struct Level {
    c_in: usize,
    dilation: usize,
    conv_w: usize,
    conv_b: usize,
    /// Offset of `proj_w`; `proj_b` follows it.
    proj: Option<usize>,
}

pub(crate) struct TcnTrace {
    /// Input of each level; `inputs[0]` is the window itself.
    inputs: Vec<Matrix>,
    /// Pre-activation convolution output of each level.
    pre: Vec<Matrix>,
    /// Output of each level.
    outputs: Vec<Matrix>,
    pub logits: Vec<f64>,
}

pub(crate) fn forward(spec: &TcnSpec, out: usize, p: &[f64], x: &Matrix) -> TcnTrace {
    let (c, k, steps) = (spec.channels, spec.kernel, x.rows());
    let levels = spec.levels();
    let mut trace = TcnTrace {
        inputs: Vec::with_capacity(levels.len()),
        pre: Vec::with_capacity(levels.len()),
        outputs: Vec::with_capacity(levels.len()),
        logits: vec![0.0; out],
    };
    let mut input = x.clone();
    for lv in &levels {
        let c_in = lv.c_in;
        let mut z = Matrix::zeros(steps, c);
        for t in 0..steps {
            let zt = z.row_mut(t);
            zt.copy_from_slice(&p[lv.conv_b..lv.conv_b + c]);
            for j in 0..k {
                let lag = (k - 1 - j) * lv.dilation;
                if lag > t {
                    continue;
                }
                let src = input.row(t - lag);
                for (co, zv) in zt.iter_mut().enumerate() {
                    let w = &p[lv.conv_w + co * c_in * k..lv.conv_w + (co + 1) * c_in * k];
                    *zv += (0..c_in).map(|ci| w[ci * k + j] * src[ci]).sum::<f64>();
                }
            }
        }
        let mut y = Matrix::zeros(steps, c);
        for t in 0..steps {
            let (zt, xt) = (z.row(t), input.row(t));
            let yt = y.row_mut(t);
            for co in 0..c {
                let residual = match lv.proj {
                    Some(pw) => {
                        p[pw + c * c_in + co]
                            + (0..c_in)
                                .map(|ci| p[pw + co * c_in + ci] * xt[ci])
                                .sum::<f64>()
                    }
                    None => xt[co],
                };
                yt[co] = zt[co].max(0.0) + residual;
            }
        }
        trace.inputs.push(input);
        trace.pre.push(z);
        input = y.clone();
        trace.outputs.push(y);
    }
    let head = spec.head_offset();
    let last = input.row(steps - 1);
    for (o, logit) in trace.logits.iter_mut().enumerate() {
        *logit = p[head + out * c + o]
            + (0..c).map(|ci| p[head + o * c + ci] * last[ci]).sum::<f64>();
    }
    trace
}

pub(crate) fn backward(
    spec: &TcnSpec,
    out: usize,
    p: &[f64],
    trace: &TcnTrace,
    dlogits: &[f64],
    grad: &mut [f64],
) {
    let (c, k) = (spec.channels, spec.kernel);
    let levels = spec.levels();
    let steps = trace.inputs[0].rows();
    let head = spec.head_offset();

    let last = trace.outputs.last().unwrap().row(steps - 1);
    let mut dy = Matrix::zeros(steps, c);
    for (o, &dl) in dlogits.iter().enumerate() {
        grad[head + out * c + o] += dl;
        for ci in 0..c {
            grad[head + o * c + ci] += dl * last[ci];
            dy.row_mut(steps - 1)[ci] += dl * p[head + o * c + ci];
        }
    }

    for (li, lv) in levels.iter().enumerate().rev() {
        let c_in = lv.c_in;
        let x = &trace.inputs[li];
        let z = &trace.pre[li];
        let mut dx = Matrix::zeros(steps, c_in);
        for t in 0..steps {
            let dyt = dy.row(t).to_vec();
            let zt = z.row(t);
            // Residual branch.
            match lv.proj {
                Some(pw) => {
                    let xt = x.row(t).to_vec();
                    let dxt = dx.row_mut(t);
                    for co in 0..c {
                        let g = dyt[co];
                        grad[pw + c * c_in + co] += g;
                        for ci in 0..c_in {
                            grad[pw + co * c_in + ci] += g * xt[ci];
                            dxt[ci] += g * p[pw + co * c_in + ci];
                        }
                    }
                }
                None => {
                    let dxt = dx.row_mut(t);
                    for co in 0..c {
                        dxt[co] += dyt[co];
                    }
                }
            }
            // Convolution branch.
            for co in 0..c {
                if zt[co] <= 0.0 {
                    continue;
                }
                let g = dyt[co];
                grad[lv.conv_b + co] += g;
                let wbase = lv.conv_w + co * c_in * k;
                for j in 0..k {
                    let lag = (k - 1 - j) * lv.dilation;
                    if lag > t {
                        continue;
                    }
                    let s = t - lag;
                    for ci in 0..c_in {
                        grad[wbase + ci * k + j] += g * x.get(s, ci);
                        let v = dx.get(s, ci) + g * p[wbase + ci * k + j];
                        dx.set(s, ci, v);
                    }
                }
            }
        }
        dy = dx;
    }
}

/// Class probabilities of a TCN model for one window.
pub fn tcn_forward(params: &ModelParameters, window: &Matrix) -> Result<Vec<f64>, NnError> {
    match params.arch {
        super::Architecture::Tcn(_) => params.predict(window),
        _ => Err(NnError::InvalidSpec("expected a TCN model".into())),
    }
}

/// Output of every level (`W x C` each), for inspecting causality.
pub fn tcn_activations(params: &ModelParameters, window: &Matrix) -> Result<Vec<Matrix>, NnError> {
    let spec = match &params.arch {
        super::Architecture::Tcn(s) => s,
        _ => return Err(NnError::InvalidSpec("expected a TCN model".into())),
    };
    params.check_input(window)?;
    Ok(forward(spec, params.output_dim(), &params.values, window).outputs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Architecture, HeadKind};

    fn spec(dilations: Vec<usize>) -> TcnSpec {
        TcnSpec {
            input_dim: 3,
            channels: 4,
            kernel: 3,
            dilations,
            n_classes: 2,
        }
    }

    fn window(steps: usize) -> Matrix {
        Matrix::from_vec(
            steps,
            3,
            (0..steps * 3).map(|i| ((i as f64) * 0.917).cos()).collect(),
        )
    }

    #[test]
    fn receptive_field_arithmetic() {
        assert_eq!(spec(vec![1, 2, 4, 8]).receptive_field(), 31);
        assert_eq!(spec(vec![1]).receptive_field(), 3);
    }

    #[test]
    fn dilation_rules() {
        assert!(spec(vec![1, 2, 4, 8]).validate().is_ok());
        assert!(spec(vec![1, 3]).validate().is_err());
        assert!(spec(vec![2, 1]).validate().is_err());
        assert!(spec(vec![2, 2]).validate().is_err());
        assert!(spec(vec![]).validate().is_err());
    }

    #[test]
    fn activations_are_causal() {
        let arch = Architecture::Tcn(spec(vec![1, 2, 4]));
        let p = ModelParameters::xavier(arch, HeadKind::Softmax, 11).unwrap();
        let w = window(16);
        let base = tcn_activations(&p, &w).unwrap();
        for t in 0..16 {
            let mut perturbed = w.clone();
            for v in perturbed.row_mut(t) {
                *v += 0.5;
            }
            let act = tcn_activations(&p, &perturbed).unwrap();
            for (a, b) in base.iter().zip(&act) {
                for tp in 0..t {
                    assert_eq!(a.row(tp), b.row(tp), "level output at {tp} saw input {t}");
                }
            }
        }
    }

    #[test]
    fn last_step_sees_exactly_the_receptive_field() {
        let s = TcnSpec {
            channels: 3,
            ..spec(vec![1, 2])
        };
        let rf = s.receptive_field();
        let p = ModelParameters::xavier(Architecture::Tcn(s), HeadKind::Softmax, 5).unwrap();
        let w = window(12);
        let base = tcn_activations(&p, &w).unwrap().pop().unwrap();
        let mut far = w.clone();
        for v in far.row_mut(12 - rf - 1) {
            *v += 1.0;
        }
        let moved = tcn_activations(&p, &far).unwrap().pop().unwrap();
        assert_eq!(base.row(11), moved.row(11));
    }

    #[test]
    fn softmax_normalized() {
        let p = ModelParameters::xavier(Architecture::Tcn(spec(vec![1, 2, 4, 8])), HeadKind::Softmax, 1)
            .unwrap();
        let probs = tcn_forward(&p, &window(32)).unwrap();
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
