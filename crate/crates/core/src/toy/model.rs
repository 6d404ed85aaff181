//! Single-layer tanh recurrent network with a softmax output for CTC.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ctc::{ctc_grad, LogProbSeq};
use crate::features::FeatureMatrix;
use crate::hash::checksum_f64;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub input: usize,
    pub hidden: usize,
    /// Alphabet size plus one blank.
    pub output: usize,
}

impl ModelDims {
    pub fn param_count(&self) -> usize {
        let ModelDims { input, hidden, output } = *self;
        hidden * input + hidden * hidden + hidden + output * hidden + output
    }

    // offsets of W_xh, W_hh, b_h, W_hy, b_y
    fn offsets(&self) -> [usize; 5] {
        let ModelDims { input, hidden, output } = *self;
        let whh = hidden * input;
        let bh = whh + hidden * hidden;
        let why = bh + hidden;
        let by = why + output * hidden;
        [0, whh, bh, why, by]
    }
}

/// Weights are kept flat: `W_xh | W_hh | b_h | W_hy | b_y`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyModel {
    pub dims: ModelDims,
    pub seed: u64,
    pub params: Vec<f64>,
}

/// Dropout on the recurrent-layer output; `None` in evaluation mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    Train { dropout: f64, seed: u64 },
    Eval,
}

/// Activations kept for backpropagation.
#[derive(Debug, Clone)]
pub struct Trace {
    hidden: Vec<f64>,
    masked: Vec<f64>,
    mask: Option<Vec<f64>>,
    pub log_probs: LogProbSeq,
}

impl ToyModel {
    /// Glorot-uniform weights, zero biases.
    pub fn new(dims: ModelDims, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = vec![0.0; dims.param_count()];
        let [wxh, whh, bh, why, _] = dims.offsets();
        let mut fill = |range: std::ops::Range<usize>, fan_in: usize, fan_out: usize| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in &mut params[range] {
                *p = rng.random_range(-limit..limit);
            }
        };
        fill(wxh..whh, dims.input, dims.hidden);
        fill(whh..bh, dims.hidden, dims.hidden);
        fill(why..why + dims.output * dims.hidden, dims.hidden, dims.output);
        Self { dims, seed, params }
    }

    pub fn zeros(dims: ModelDims) -> Self {
        Self {
            dims,
            seed: 0,
            params: vec![0.0; dims.param_count()],
        }
    }

    pub fn hash(&self) -> u64 {
        checksum_f64(&self.params)
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    pub fn forward(&self, x: &FeatureMatrix, mode: Mode) -> Result<Trace> {
        let ModelDims { input, hidden: h, output: k } = self.dims;
        if x.dim() != input {
            return Err(Error::Dimension {
                expected: input,
                got: x.dim(),
            });
        }
        let [o_wxh, o_whh, o_bh, o_why, o_by] = self.dims.offsets();
        let p = &self.params;
        let (wxh, whh, bh) = (&p[o_wxh..o_whh], &p[o_whh..o_bh], &p[o_bh..o_why]);
        let (why, by) = (&p[o_why..o_by], &p[o_by..]);
        let t_len = x.frames();
        let mut hidden = vec![0.0; t_len * h];
        let mut logits = vec![0.0; t_len * k];
        let mask = match mode {
            Mode::Train { dropout, seed } if dropout > 0.0 => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let keep = 1.0 / (1.0 - dropout);
                Some(
                    (0..t_len * h)
                        .map(|_| if rng.random::<f64>() < dropout { 0.0 } else { keep })
                        .collect::<Vec<_>>(),
                )
            }
            _ => None,
        };
        let mut masked = vec![0.0; t_len * h];
        for t in 0..t_len {
            let xt = x.row(t);
            let (before, rest) = hidden.split_at_mut(t * h);
            let prev = if t > 0 { Some(&before[(t - 1) * h..]) } else { None };
            let ht = &mut rest[..h];
            for i in 0..h {
                let mut a = bh[i] + dot(&wxh[i * input..(i + 1) * input], xt);
                if let Some(prev) = prev {
                    a += dot(&whh[i * h..(i + 1) * h], prev);
                }
                ht[i] = a.tanh();
            }
            let mt = &mut masked[t * h..(t + 1) * h];
            match &mask {
                Some(m) => {
                    for i in 0..h {
                        mt[i] = ht[i] * m[t * h + i];
                    }
                }
                None => mt.copy_from_slice(ht),
            }
            let zt = &mut logits[t * k..(t + 1) * k];
            for j in 0..k {
                zt[j] = by[j] + dot(&why[j * h..(j + 1) * h], mt);
            }
        }
        Ok(Trace {
            hidden,
            masked,
            mask,
            log_probs: LogProbSeq::from_logits(t_len, k, &logits)?,
        })
    }

    pub fn log_probs(&self, x: &FeatureMatrix) -> Result<LogProbSeq> {
        Ok(self.forward(x, Mode::Eval)?.log_probs)
    }

    /// Backpropagate `dz` (gradient w.r.t. the logits) through time, adding into `grad`.
    pub fn backward(&self, x: &FeatureMatrix, trace: &Trace, dz: &[f64], grad: &mut [f64]) {
        let ModelDims { input, hidden: h, output: k } = self.dims;
        let [_, o_whh, o_bh, o_why, o_by] = self.dims.offsets();
        let p = &self.params;
        let (whh, why) = (&p[o_whh..o_bh], &p[o_why..o_by]);
        let (g_wxh, rest) = grad.split_at_mut(o_whh);
        let (g_whh, rest) = rest.split_at_mut(o_bh - o_whh);
        let (g_bh, rest) = rest.split_at_mut(o_why - o_bh);
        let (g_why, g_by) = rest.split_at_mut(o_by - o_why);
        let t_len = x.frames();
        let mut dh_next = vec![0.0; h];
        let mut dh = vec![0.0; h];
        let mut da = vec![0.0; h];
        for t in (0..t_len).rev() {
            let dzt = &dz[t * k..(t + 1) * k];
            let mt = &trace.masked[t * h..(t + 1) * h];
            let ht = &trace.hidden[t * h..(t + 1) * h];
            dh.copy_from_slice(&dh_next);
            for j in 0..k {
                let g = dzt[j];
                g_by[j] += g;
                axpy(&mut g_why[j * h..(j + 1) * h], g, mt);
                if let Some(mask) = &trace.mask {
                    let m = &mask[t * h..(t + 1) * h];
                    let w = &why[j * h..(j + 1) * h];
                    for i in 0..h {
                        dh[i] += g * w[i] * m[i];
                    }
                } else {
                    axpy(&mut dh, g, &why[j * h..(j + 1) * h]);
                }
            }
            for i in 0..h {
                da[i] = dh[i] * (1.0 - ht[i] * ht[i]);
            }
            let xt = x.row(t);
            dh_next.iter_mut().for_each(|v| *v = 0.0);
            for i in 0..h {
                let a = da[i];
                g_bh[i] += a;
                axpy(&mut g_wxh[i * input..(i + 1) * input], a, xt);
                if t > 0 {
                    let prev = &trace.hidden[(t - 1) * h..t * h];
                    axpy(&mut g_whh[i * h..(i + 1) * h], a, prev);
                    axpy(&mut dh_next, a, &whh[i * h..(i + 1) * h]);
                }
            }
        }
    }

    /// CTC loss of one utterance and its gradient, accumulated into `grad`.
    pub fn loss_and_grad(&self, x: &FeatureMatrix, labels: &[usize], mode: Mode, grad: &mut [f64]) -> Result<f64> {
        let trace = self.forward(x, mode)?;
        let (nll, dz) = ctc_grad(&trace.log_probs, labels)?;
        self.backward(x, &trace, &dz, grad);
        Ok(nll)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}
