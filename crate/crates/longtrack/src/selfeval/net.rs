//! The self-evaluation network: per-map conv encoder (two 3x3 valid
//! convolutions with ReLU), a two-layer LSTM over the K encodings, and a
//! two-layer MLP ending in a logistic unit. Parameters live in one flat
//! `f64` vector addressed through [`Layout`]; the backward pass returns the
//! exact gradient of the binary cross entropy via reverse accumulation,
//! including backprop through time.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::numerics::Grid2;
use crate::{Error, Result};

/// Network dimensions. The default matches the tracker: 9x9 maps, K = 10,
/// 8/16 conv channels, hidden 32, MLP hidden 16.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Arch {
    pub k: usize,
    pub map_h: usize,
    pub map_w: usize,
    pub conv1_out: usize,
    pub conv2_out: usize,
    pub hidden: usize,
    pub mlp_hidden: usize,
}

impl Default for Arch {
    fn default() -> Self {
        Arch {
            k: 10,
            map_h: 9,
            map_w: 9,
            conv1_out: 8,
            conv2_out: 16,
            hidden: 32,
            mlp_hidden: 16,
        }
    }
}

impl Arch {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Invalid("sequence length K must be positive".into()));
        }
        if self.map_h < 5 || self.map_w < 5 {
            return Err(Error::Invalid(format!(
                "maps must be at least 5x5 for two valid 3x3 convolutions, got {}x{}",
                self.map_h, self.map_w
            )));
        }
        if self.conv1_out == 0 || self.conv2_out == 0 || self.hidden == 0 || self.mlp_hidden == 0 {
            return Err(Error::Invalid("layer widths must be positive".into()));
        }
        Ok(())
    }

    pub fn conv1_dims(&self) -> (usize, usize) {
        (self.map_h - 2, self.map_w - 2)
    }
    pub fn conv2_dims(&self) -> (usize, usize) {
        (self.map_h - 4, self.map_w - 4)
    }
    /// Flattened conv output length: the LSTM input size.
    pub fn encoding_len(&self) -> usize {
        let (h, w) = self.conv2_dims();
        h * w * self.conv2_out
    }
}

/// Gate order within the stacked 4H rows: input, forget, cell, output.
#[derive(Debug, Clone)]
pub struct LstmRanges {
    pub wx: Range<usize>,
    pub wh: Range<usize>,
    pub b: Range<usize>,
    pub input_len: usize,
}

#[derive(Debug, Clone)]
pub struct Layout {
    pub conv1_w: Range<usize>,
    pub conv1_b: Range<usize>,
    pub conv2_w: Range<usize>,
    pub conv2_b: Range<usize>,
    pub lstm1: LstmRanges,
    pub lstm2: LstmRanges,
    pub mlp_w1: Range<usize>,
    pub mlp_b1: Range<usize>,
    pub mlp_w2: Range<usize>,
    pub mlp_b2: Range<usize>,
    pub total: usize,
}

impl Layout {
    pub fn of(arch: &Arch) -> Layout {
        let mut cursor = 0usize;
        let mut take = |n: usize| {
            let r = cursor..cursor + n;
            cursor += n;
            r
        };
        let h = arch.hidden;
        let conv1_w = take(arch.conv1_out * 9);
        let conv1_b = take(arch.conv1_out);
        let conv2_w = take(arch.conv2_out * arch.conv1_out * 9);
        let conv2_b = take(arch.conv2_out);
        let enc = arch.encoding_len();
        let lstm1 = LstmRanges {
            wx: take(4 * h * enc),
            wh: take(4 * h * h),
            b: take(4 * h),
            input_len: enc,
        };
        let lstm2 = LstmRanges {
            wx: take(4 * h * h),
            wh: take(4 * h * h),
            b: take(4 * h),
            input_len: h,
        };
        let mlp_w1 = take(arch.mlp_hidden * h);
        let mlp_b1 = take(arch.mlp_hidden);
        let mlp_w2 = take(arch.mlp_hidden);
        let mlp_b2 = take(1);
        Layout {
            conv1_w,
            conv1_b,
            conv2_w,
            conv2_b,
            lstm1,
            lstm2,
            mlp_w1,
            mlp_b1,
            mlp_w2,
            mlp_b2,
            total: cursor,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfEvalNet {
    arch: Arch,
    params: Vec<f64>,
}

impl SelfEvalNet {
    /// Uniform init with per-block gains chosen so class-dependent signal
    /// survives the gated layers: a weaker init leaves the logit spread at
    /// ~1e-4 across inputs and plain SGD cannot escape the constant-output
    /// solution. Forget-gate biases start at 1.0; other biases at zero.
    pub fn new_random(arch: Arch, seed: u64) -> Result<Self> {
        arch.validate()?;
        let layout = Layout::of(&arch);
        let mut params = vec![0.0f64; layout.total];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |range: Range<usize>, fan_in: usize, gain: f64, params: &mut Vec<f64>| {
            let s = gain / (fan_in as f64).sqrt();
            for v in &mut params[range] {
                *v = rng.gen_range(-s..s);
            }
        };
        fill(layout.conv1_w.clone(), 9, 2.0, &mut params);
        fill(layout.conv2_w.clone(), 9 * arch.conv1_out, 2.0, &mut params);
        fill(layout.lstm1.wx.clone(), arch.encoding_len(), 4.0, &mut params);
        fill(layout.lstm1.wh.clone(), arch.hidden, 4.0, &mut params);
        fill(layout.lstm2.wx.clone(), arch.hidden, 4.0, &mut params);
        fill(layout.lstm2.wh.clone(), arch.hidden, 4.0, &mut params);
        fill(layout.mlp_w1.clone(), arch.hidden, 4.0, &mut params);
        fill(layout.mlp_w2.clone(), arch.mlp_hidden, 4.0, &mut params);
        let h = arch.hidden;
        for range in [&layout.lstm1.b, &layout.lstm2.b] {
            for v in &mut params[range.start + h..range.start + 2 * h] {
                *v = 1.0;
            }
        }
        Ok(SelfEvalNet { arch, params })
    }

    pub fn from_params(arch: Arch, params: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        let layout = Layout::of(&arch);
        if params.len() != layout.total {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                layout.total,
                params.len()
            )));
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network parameters".into()));
        }
        Ok(SelfEvalNet { arch, params })
    }

    pub fn arch(&self) -> &Arch {
        &self.arch
    }
    pub fn params(&self) -> &[f64] {
        &self.params
    }
    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }
    pub fn layout(&self) -> Layout {
        Layout::of(&self.arch)
    }

    /// Zeroes the final MLP layer so the output logit is exactly 0
    /// regardless of input (used by calibration tests).
    pub fn zero_final_layer(&mut self) {
        let layout = self.layout();
        for v in &mut self.params[layout.mlp_w2.start..layout.mlp_b2.end] {
            *v = 0.0;
        }
    }

    fn check_maps(&self, maps: &[Grid2]) -> Result<()> {
        if maps.len() != self.arch.k {
            return Err(Error::Shape(format!(
                "expected {} similarity maps, got {}",
                self.arch.k,
                maps.len()
            )));
        }
        for m in maps {
            if m.height() != self.arch.map_h || m.width() != self.arch.map_w {
                return Err(Error::Shape(format!(
                    "map is {}x{}, expected {}x{}",
                    m.height(),
                    m.width(),
                    self.arch.map_h,
                    self.arch.map_w
                )));
            }
        }
        Ok(())
    }

    /// Probability that the tracked prediction is correct, in (0, 1).
    pub fn forward(&self, maps: &[Grid2]) -> Result<f64> {
        self.check_maps(maps)?;
        Ok(self.forward_cached(maps).output)
    }

    pub(crate) fn forward_cached(&self, maps: &[Grid2]) -> ForwardCache {
        let arch = &self.arch;
        let layout = self.layout();
        let p = &self.params;

        let mut encodings = Vec::with_capacity(arch.k);
        for m in maps {
            encodings.push(self.conv_forward(m, &layout));
        }
        let enc_vecs: Vec<Vec<f64>> = encodings.iter().map(|c| c.flat.clone()).collect();

        let lstm1 = lstm_forward(p, &layout.lstm1, arch.hidden, &enc_vecs);
        let h1_seq: Vec<Vec<f64>> = lstm1.steps.iter().map(|s| s.h.clone()).collect();
        let lstm2 = lstm_forward(p, &layout.lstm2, arch.hidden, &h1_seq);

        let h_last = &lstm2.steps[arch.k - 1].h;
        let w1 = &p[layout.mlp_w1.clone()];
        let b1 = &p[layout.mlp_b1.clone()];
        let mut a1 = vec![0.0; arch.mlp_hidden];
        for (j, a) in a1.iter_mut().enumerate() {
            let row = &w1[j * arch.hidden..(j + 1) * arch.hidden];
            *a = b1[j] + dot(row, h_last);
        }
        let h_mlp: Vec<f64> = a1.iter().map(|&v| v.max(0.0)).collect();
        let w2 = &p[layout.mlp_w2.clone()];
        let logit = self.params[layout.mlp_b2.start] + dot(w2, &h_mlp);
        let output = 1.0 / (1.0 + (-logit).exp());

        ForwardCache {
            encodings,
            lstm1,
            lstm2,
            mlp_a1: a1,
            mlp_h: h_mlp,
            output,
        }
    }

    fn conv_forward(&self, map: &Grid2, layout: &Layout) -> ConvCache {
        let arch = &self.arch;
        let p = &self.params;
        let (h1, w1) = arch.conv1_dims();
        let (h2, w2) = arch.conv2_dims();
        let c1w = &p[layout.conv1_w.clone()];
        let c1b = &p[layout.conv1_b.clone()];
        let c2w = &p[layout.conv2_w.clone()];
        let c2b = &p[layout.conv2_b.clone()];

        // conv1: in 1 channel, out conv1_out, layout [o][y][x]
        let mut pre1 = vec![0.0; arch.conv1_out * h1 * w1];
        for o in 0..arch.conv1_out {
            let kw = &c1w[o * 9..(o + 1) * 9];
            for y in 0..h1 {
                for x in 0..w1 {
                    let mut acc = c1b[o];
                    for ky in 0..3 {
                        for kx in 0..3 {
                            acc += kw[ky * 3 + kx] * map.get(y + ky, x + kx);
                        }
                    }
                    pre1[(o * h1 + y) * w1 + x] = acc;
                }
            }
        }
        let act1: Vec<f64> = pre1.iter().map(|&v| v.max(0.0)).collect();

        // conv2: in conv1_out, out conv2_out
        let mut pre2 = vec![0.0; arch.conv2_out * h2 * w2];
        for o in 0..arch.conv2_out {
            for y in 0..h2 {
                for x in 0..w2 {
                    let mut acc = c2b[o];
                    for i in 0..arch.conv1_out {
                        let kw = &c2w[(o * arch.conv1_out + i) * 9..(o * arch.conv1_out + i + 1) * 9];
                        for ky in 0..3 {
                            for kx in 0..3 {
                                acc += kw[ky * 3 + kx] * act1[(i * h1 + y + ky) * w1 + x + kx];
                            }
                        }
                    }
                    pre2[(o * h2 + y) * w2 + x] = acc;
                }
            }
        }
        let flat: Vec<f64> = pre2.iter().map(|&v| v.max(0.0)).collect();
        ConvCache {
            pre1,
            act1,
            pre2,
            flat,
        }
    }

    /// Gradient of `scale * bce'(logit)` pushed back through the whole
    /// network for one sample; accumulates into `grad`.
    pub(crate) fn backward_into(
        &self,
        maps: &[Grid2],
        cache: &ForwardCache,
        d_logit: f64,
        grad: &mut [f64],
    ) {
        let arch = &self.arch;
        let layout = self.layout();
        let p = &self.params;

        // MLP head
        let w2 = &p[layout.mlp_w2.clone()];
        grad[layout.mlp_b2.start] += d_logit;
        let mut d_h_mlp = vec![0.0; arch.mlp_hidden];
        for j in 0..arch.mlp_hidden {
            grad[layout.mlp_w2.start + j] += d_logit * cache.mlp_h[j];
            d_h_mlp[j] = d_logit * w2[j];
        }
        let w1 = &p[layout.mlp_w1.clone()];
        let h_last = &cache.lstm2.steps[arch.k - 1].h;
        let mut d_h2_last = vec![0.0; arch.hidden];
        for j in 0..arch.mlp_hidden {
            if cache.mlp_a1[j] > 0.0 {
                let d = d_h_mlp[j];
                grad[layout.mlp_b1.start + j] += d;
                for t in 0..arch.hidden {
                    grad[layout.mlp_w1.start + j * arch.hidden + t] += d * h_last[t];
                    d_h2_last[t] += d * w1[j * arch.hidden + t];
                }
            }
        }

        // BPTT through layer 2: external dh only at the last step
        let mut d_ext2 = vec![vec![0.0; arch.hidden]; arch.k];
        d_ext2[arch.k - 1] = d_h2_last;
        let h1_seq: Vec<&[f64]> = cache.lstm1.steps.iter().map(|s| s.h.as_slice()).collect();
        let d_h1 = lstm_backward(p, &layout.lstm2, arch.hidden, &h1_seq, &cache.lstm2, &d_ext2, grad);

        // BPTT through layer 1 with per-step gradients from layer 2
        let enc_seq: Vec<&[f64]> = cache.encodings.iter().map(|c| c.flat.as_slice()).collect();
        let d_enc = lstm_backward(p, &layout.lstm1, arch.hidden, &enc_seq, &cache.lstm1, &d_h1, grad);

        // conv backward per time step
        for t in 0..arch.k {
            self.conv_backward(&maps[t], &cache.encodings[t], &d_enc[t], &layout, grad);
        }
    }

    fn conv_backward(
        &self,
        _map: &Grid2,
        cache: &ConvCache,
        d_flat: &[f64],
        layout: &Layout,
        grad: &mut [f64],
    ) {
        let arch = &self.arch;
        let p = &self.params;
        let (h1, w1) = arch.conv1_dims();
        let (h2, w2) = arch.conv2_dims();
        let c2w = &p[layout.conv2_w.clone()];

        // through conv2 relu
        let mut d_act1 = vec![0.0; arch.conv1_out * h1 * w1];
        for o in 0..arch.conv2_out {
            for y in 0..h2 {
                for x in 0..w2 {
                    let idx = (o * h2 + y) * w2 + x;
                    if cache.pre2[idx] <= 0.0 {
                        continue;
                    }
                    let d = d_flat[idx];
                    grad[layout.conv2_b.start + o] += d;
                    for i in 0..arch.conv1_out {
                        let base = (o * arch.conv1_out + i) * 9;
                        for ky in 0..3 {
                            for kx in 0..3 {
                                let in_idx = (i * h1 + y + ky) * w1 + x + kx;
                                grad[layout.conv2_w.start + base + ky * 3 + kx] +=
                                    d * cache.act1[in_idx];
                                d_act1[in_idx] += d * c2w[base + ky * 3 + kx];
                            }
                        }
                    }
                }
            }
        }

        // through conv1 relu; input is data, so no gradient below
        for o in 0..arch.conv1_out {
            for y in 0..h1 {
                for x in 0..w1 {
                    let idx = (o * h1 + y) * w1 + x;
                    if cache.pre1[idx] <= 0.0 {
                        continue;
                    }
                    let d = d_act1[idx];
                    grad[layout.conv1_b.start + o] += d;
                    for ky in 0..3 {
                        for kx in 0..3 {
                            grad[layout.conv1_w.start + o * 9 + ky * 3 + kx] +=
                                d * _map.get(y + ky, x + kx);
                        }
                    }
                }
            }
        }
    }
}

pub(crate) struct ConvCache {
    pre1: Vec<f64>,
    act1: Vec<f64>,
    pre2: Vec<f64>,
    pub(crate) flat: Vec<f64>,
}

pub(crate) struct LstmStep {
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    c: Vec<f64>,
    tanh_c: Vec<f64>,
    pub(crate) h: Vec<f64>,
}

pub(crate) struct LstmCache {
    pub(crate) steps: Vec<LstmStep>,
}

pub(crate) struct ForwardCache {
    pub(crate) encodings: Vec<ConvCache>,
    lstm1: LstmCache,
    lstm2: LstmCache,
    mlp_a1: Vec<f64>,
    mlp_h: Vec<f64>,
    pub(crate) output: f64,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn lstm_forward(params: &[f64], ranges: &LstmRanges, hidden: usize, inputs: &[Vec<f64>]) -> LstmCache {
    let wx = &params[ranges.wx.clone()];
    let wh = &params[ranges.wh.clone()];
    let b = &params[ranges.b.clone()];
    let in_len = ranges.input_len;
    let mut h_prev = vec![0.0; hidden];
    let mut c_prev = vec![0.0; hidden];
    let mut steps = Vec::with_capacity(inputs.len());
    for x in inputs {
        let mut gates = vec![0.0; 4 * hidden];
        for (r, gate) in gates.iter_mut().enumerate() {
            *gate = b[r] + dot(&wx[r * in_len..(r + 1) * in_len], x)
                + dot(&wh[r * hidden..(r + 1) * hidden], &h_prev);
        }
        let mut step = LstmStep {
            i: vec![0.0; hidden],
            f: vec![0.0; hidden],
            g: vec![0.0; hidden],
            o: vec![0.0; hidden],
            c: vec![0.0; hidden],
            tanh_c: vec![0.0; hidden],
            h: vec![0.0; hidden],
        };
        for u in 0..hidden {
            step.i[u] = sigmoid(gates[u]);
            step.f[u] = sigmoid(gates[hidden + u]);
            step.g[u] = gates[2 * hidden + u].tanh();
            step.o[u] = sigmoid(gates[3 * hidden + u]);
            step.c[u] = step.f[u] * c_prev[u] + step.i[u] * step.g[u];
            step.tanh_c[u] = step.c[u].tanh();
            step.h[u] = step.o[u] * step.tanh_c[u];
        }
        h_prev = step.h.clone();
        c_prev = step.c.clone();
        steps.push(step);
    }
    LstmCache { steps }
}

/// Reverse pass through one LSTM layer. `d_h_ext[t]` is the gradient flowing
/// into `h_t` from above; returns the gradient w.r.t. each input vector.
fn lstm_backward(
    params: &[f64],
    ranges: &LstmRanges,
    hidden: usize,
    inputs: &[&[f64]],
    cache: &LstmCache,
    d_h_ext: &[Vec<f64>],
    grad: &mut [f64],
) -> Vec<Vec<f64>> {
    let wx = &params[ranges.wx.clone()];
    let wh = &params[ranges.wh.clone()];
    let in_len = ranges.input_len;
    let k = inputs.len();
    let mut d_inputs = vec![vec![0.0; in_len]; k];
    let mut d_h_next = vec![0.0; hidden];
    let mut d_c_next = vec![0.0; hidden];
    let zero = vec![0.0; hidden];

    for t in (0..k).rev() {
        let step = &cache.steps[t];
        let c_prev = if t > 0 { &cache.steps[t - 1].c } else { &zero };
        let h_prev = if t > 0 { &cache.steps[t - 1].h } else { &zero };

        let mut d_gates = vec![0.0; 4 * hidden]; // pre-activation, order i f g o
        let mut d_h_prev = vec![0.0; hidden];
        let mut d_c_prev = vec![0.0; hidden];
        for u in 0..hidden {
            let dh = d_h_ext[t][u] + d_h_next[u];
            let d_o = dh * step.tanh_c[u];
            let mut dc = d_c_next[u] + dh * step.o[u] * (1.0 - step.tanh_c[u] * step.tanh_c[u]);
            let d_i = dc * step.g[u];
            let d_g = dc * step.i[u];
            let d_f = dc * c_prev[u];
            dc *= step.f[u];
            d_c_prev[u] = dc;
            d_gates[u] = d_i * step.i[u] * (1.0 - step.i[u]);
            d_gates[hidden + u] = d_f * step.f[u] * (1.0 - step.f[u]);
            d_gates[2 * hidden + u] = d_g * (1.0 - step.g[u] * step.g[u]);
            d_gates[3 * hidden + u] = d_o * step.o[u] * (1.0 - step.o[u]);
        }
        for r in 0..4 * hidden {
            let d = d_gates[r];
            if d == 0.0 {
                continue;
            }
            grad[ranges.b.start + r] += d;
            let x = inputs[t];
            let wrow = ranges.wx.start + r * in_len;
            for (j, xv) in x.iter().enumerate() {
                grad[wrow + j] += d * xv;
            }
            let hrow = ranges.wh.start + r * hidden;
            for j in 0..hidden {
                grad[hrow + j] += d * h_prev[j];
            }
            let wx_row = &wx[r * in_len..(r + 1) * in_len];
            for (j, w) in wx_row.iter().enumerate() {
                d_inputs[t][j] += d * w;
            }
            let wh_row = &wh[r * hidden..(r + 1) * hidden];
            for (j, w) in wh_row.iter().enumerate() {
                d_h_prev[j] += d * w;
            }
        }
        d_h_next = d_h_prev;
        d_c_next = d_c_prev;
    }
    d_inputs
}
