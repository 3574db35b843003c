//! Single-hidden-layer tanh network `M(x) = c + v . tanh(W x + b)` with
//! hand-derived reverse-mode gradients.
//!
//! Parameters are stored flat in the order hidden weights (row-major,
//! `n_hidden x n_inputs`), hidden biases, output weights, output bias. The
//! same layout is used for gradients and for the parameter file.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds;

pub const DEFAULT_HIDDEN: usize = 64;

const LOG2_E: f64 = std::f64::consts::LOG2_E;
const LN2_HI: f64 = 6.931_471_803_691_238e-1;
const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
/// Adding and subtracting 1.5 * 2^52 rounds to the nearest integer and
/// leaves that integer in the low mantissa bits.
const ROUND_MAGIC: f64 = 6_755_399_441_055_744.0;

/// Branch-free `exp` for the network's inner loops: Cody-Waite reduction to
/// `|r| <= ln2 / 2` and a degree-12 Taylor polynomial (truncation below
/// 2e-16 relative). Written without calls or branches so that loops over
/// slices vectorize. Inputs are clamped to `[-700, 700]`.
#[inline(always)]
pub fn exp(x: f64) -> f64 {
    let x = x.clamp(-700.0, 700.0);
    let t = x * LOG2_E + ROUND_MAGIC;
    let k = t - ROUND_MAGIC;
    let r = (x - k * LN2_HI) - k * LN2_LO;
    let mut p = 1.0 / 479_001_600.0;
    p = p * r + 1.0 / 39_916_800.0;
    p = p * r + 1.0 / 3_628_800.0;
    p = p * r + 1.0 / 362_880.0;
    p = p * r + 1.0 / 40_320.0;
    p = p * r + 1.0 / 5_040.0;
    p = p * r + 1.0 / 720.0;
    p = p * r + 1.0 / 120.0;
    p = p * r + 1.0 / 24.0;
    p = p * r + 1.0 / 6.0;
    p = p * r + 0.5;
    p = p * r + 1.0;
    p = p * r + 1.0;
    let scale = f64::from_bits(t.to_bits().wrapping_sub(ROUND_MAGIC.to_bits()).wrapping_add(1023) << 52);
    p * scale
}

/// `tanh` through one call of [`exp`]; accurate to about 1e-16 absolute.
#[inline(always)]
pub fn tanh(z: f64) -> f64 {
    1.0 - 2.0 / (exp(2.0 * z) + 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParameters {
    pub n_inputs: usize,
    pub n_hidden: usize,
    pub values: Vec<f64>,
}

impl ModelParameters {
    pub fn param_count(n_inputs: usize, n_hidden: usize) -> usize {
        n_hidden * n_inputs + 2 * n_hidden + 1
    }

    pub fn zeros(n_inputs: usize, n_hidden: usize) -> Self {
        Self { n_inputs, n_hidden, values: vec![0.0; Self::param_count(n_inputs, n_hidden)] }
    }

    pub fn from_values(n_inputs: usize, n_hidden: usize, values: Vec<f64>) -> Result<Self> {
        let expected = Self::param_count(n_inputs, n_hidden);
        if values.len() != expected {
            return Err(Error::DimensionMismatch { expected, got: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("model parameters must be finite".into()));
        }
        Ok(Self { n_inputs, n_hidden, values })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(n_inputs: usize, n_hidden: usize, seed: u64) -> Self {
        let mut p = Self::zeros(n_inputs, n_hidden);
        let mut rng = seeds::rng(seed);
        let hidden_limit = (6.0 / (n_inputs + n_hidden) as f64).sqrt();
        for w in p.hidden_weights_mut() {
            *w = hidden_limit * (2.0 * rng.random::<f64>() - 1.0);
        }
        let output_limit = (6.0 / (n_hidden + 1) as f64).sqrt();
        for w in p.output_weights_mut() {
            *w = output_limit * (2.0 * rng.random::<f64>() - 1.0);
        }
        p
    }

    fn split(&self) -> (usize, usize, usize) {
        let w = self.n_hidden * self.n_inputs;
        (w, w + self.n_hidden, w + 2 * self.n_hidden)
    }

    pub fn hidden_weights(&self) -> &[f64] {
        &self.values[..self.split().0]
    }

    pub fn hidden_weights_mut(&mut self) -> &mut [f64] {
        let (a, _, _) = self.split();
        &mut self.values[..a]
    }

    pub fn hidden_biases(&self) -> &[f64] {
        let (a, b, _) = self.split();
        &self.values[a..b]
    }

    pub fn hidden_biases_mut(&mut self) -> &mut [f64] {
        let (a, b, _) = self.split();
        &mut self.values[a..b]
    }

    pub fn output_weights(&self) -> &[f64] {
        let (_, b, c) = self.split();
        &self.values[b..c]
    }

    pub fn output_weights_mut(&mut self) -> &mut [f64] {
        let (_, b, c) = self.split();
        &mut self.values[b..c]
    }

    pub fn output_bias(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn set_output_bias(&mut self, value: f64) {
        let last = self.values.len() - 1;
        self.values[last] = value;
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_inputs {
            return Err(Error::DimensionMismatch { expected: self.n_inputs, got: x.len() });
        }
        Ok(())
    }

    fn hidden_activations(&self, x: &[f64]) -> Vec<f64> {
        let w = self.hidden_weights();
        self.hidden_biases()
            .iter()
            .enumerate()
            .map(|(h, b)| {
                let row = &w[h * self.n_inputs..(h + 1) * self.n_inputs];
                tanh(b + row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>())
            })
            .collect()
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let act = self.hidden_activations(x);
        Ok(self.output_bias() + self.output_weights().iter().zip(&act).map(|(v, a)| v * a).sum::<f64>())
    }

    /// Gradient of `upstream * M(x)` with respect to every parameter.
    pub fn backward(&self, x: &[f64], upstream: f64) -> Result<ModelParameters> {
        self.check_dim(x)?;
        let act = self.hidden_activations(x);
        let mut grad = Self::zeros(self.n_inputs, self.n_hidden);
        let n = self.n_inputs;
        let (wb, bb, vb) = self.split();
        for (h, a) in act.iter().enumerate() {
            let delta = upstream * self.output_weights()[h] * (1.0 - a * a);
            for (g, xd) in grad.values[h * n..(h + 1) * n].iter_mut().zip(x) {
                *g = delta * xd;
            }
            grad.values[wb + h] = delta;
            grad.values[bb + h] = upstream * a;
        }
        grad.values[vb] = upstream;
        Ok(grad)
    }

    /// Bound `|c| + sum |v_h|` on the output magnitude.
    pub fn output_bound(&self) -> f64 {
        self.output_bias().abs() + self.output_weights().iter().map(|v| v.abs()).sum::<f64>()
    }
}

/// Row-major matrix of input vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct InputMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl InputMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: r.len() });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { dim, data })
    }

    pub fn rows(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }
}

/// Reusable buffers for batched evaluation.
#[derive(Debug, Clone, Default)]
pub struct BatchState {
    transposed: Vec<f64>,
    hidden: Vec<f64>,
    pub outputs: Vec<f64>,
}

impl ModelParameters {
    /// Evaluates every row of `x`, keeping hidden activations for a later
    /// [`ModelParameters::accumulate_gradient`] call.
    pub fn forward_batch(&self, x: &InputMatrix, state: &mut BatchState) -> Result<()> {
        if x.dim() != self.n_inputs {
            return Err(Error::DimensionMismatch { expected: self.n_inputs, got: x.dim() });
        }
        let (n, hid) = (self.n_inputs, self.n_hidden);
        let rows = x.rows();
        // Transposed weights make the inner loop contiguous over hidden units.
        state.transposed.resize(n * hid, 0.0);
        let w = self.hidden_weights();
        for h in 0..hid {
            for d in 0..n {
                state.transposed[d * hid + h] = w[h * n + d];
            }
        }
        state.hidden.resize(rows * hid, 0.0);
        state.outputs.resize(rows, 0.0);
        let bias = self.hidden_biases();
        let out_w = self.output_weights();
        let out_b = self.output_bias();
        for k in 0..rows {
            let xk = x.row(k);
            let act = &mut state.hidden[k * hid..(k + 1) * hid];
            act.copy_from_slice(bias);
            for (d, xd) in xk.iter().enumerate() {
                let col = &state.transposed[d * hid..(d + 1) * hid];
                for (a, wv) in act.iter_mut().zip(col) {
                    *a += wv * xd;
                }
            }
            for a in act.iter_mut() {
                *a = tanh(*a);
            }
            let mut out = 0.0;
            for (a, v) in act.iter().zip(out_w) {
                out += v * a;
            }
            state.outputs[k] = out + out_b;
        }
        Ok(())
    }

    /// Adds `sum_k upstream[k] * dM(x_k)/da` to `grad`, using the activations
    /// left by the preceding `forward_batch` on the same `x`.
    pub fn accumulate_gradient(&self, x: &InputMatrix, state: &BatchState, upstream: &[f64], grad: &mut ModelParameters) {
        let (n, hid) = (self.n_inputs, self.n_hidden);
        let (wb, bb, vb) = self.split();
        let out_w = self.output_weights();
        let mut delta = vec![0.0; hid];
        let mut gw = vec![0.0; n * hid];
        let mut gb = vec![0.0; hid];
        let mut gv = vec![0.0; hid];
        let mut gc = 0.0;
        for (k, &g) in upstream.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let act = &state.hidden[k * hid..(k + 1) * hid];
            for h in 0..hid {
                let a = act[h];
                gv[h] += g * a;
                delta[h] = g * out_w[h] * (1.0 - a * a);
                gb[h] += delta[h];
            }
            for (d, xd) in x.row(k).iter().enumerate() {
                let col = &mut gw[d * hid..(d + 1) * hid];
                for (c, dl) in col.iter_mut().zip(&delta) {
                    *c += dl * xd;
                }
            }
            gc += g;
        }
        for h in 0..hid {
            for d in 0..n {
                grad.values[h * n + d] += gw[d * hid + h];
            }
            grad.values[wb + h] += gb[h];
            grad.values[bb + h] += gv[h];
        }
        grad.values[vb] += gc;
    }
}
