//! Layer kinds with explicit forward and backward passes.
//!
//! Parameters live in one flat vector owned by the model; each layer reads
//! its block at a fixed offset and accumulates gradients into a buffer of the
//! same layout.

use serde::{Deserialize, Serialize};

use crate::tensor::Tensor;
use crate::NnError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    /// `[L, in] -> [L - k + 1, out]`, weights `[out, k, in]`.
    Conv1d {
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
    },
    /// `[in, H, W] -> [out, H - k + 1, W - k + 1]`, weights `[out, in, k, k]`.
    Conv2d {
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
    },
    MaxPool1d {
        size: usize,
        stride: usize,
    },
    MaxPool2d {
        size: usize,
        stride: usize,
    },
    /// `[T, input] -> [hidden]`, the final hidden state. Gate order i, f, g, o.
    Lstm {
        input: usize,
        hidden: usize,
    },
    Dense {
        input: usize,
        output: usize,
    },
    Relu,
    Flatten,
    /// Joins the outputs of all branches; first layer of the head.
    Concat,
    /// Softmax probabilities; the loss is cross-entropy against the label.
    SoftmaxXent,
}

impl LayerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            LayerSpec::Conv1d { .. } => "conv1d",
            LayerSpec::Conv2d { .. } => "conv2d",
            LayerSpec::MaxPool1d { .. } => "maxpool1d",
            LayerSpec::MaxPool2d { .. } => "maxpool2d",
            LayerSpec::Lstm { .. } => "lstm",
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Relu => "relu",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Concat => "concat",
            LayerSpec::SoftmaxXent => "softmax_xent",
        }
    }

    pub fn n_params(&self) -> usize {
        match *self {
            LayerSpec::Conv1d { in_ch, out_ch, kernel } => out_ch * kernel * in_ch + out_ch,
            LayerSpec::Conv2d { in_ch, out_ch, kernel } => out_ch * in_ch * kernel * kernel + out_ch,
            LayerSpec::Lstm { input, hidden } => 4 * hidden * (input + hidden + 1),
            LayerSpec::Dense { input, output } => output * input + output,
            _ => 0,
        }
    }

    /// Output shape for a single-input layer.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>, NnError> {
        let bad = |msg: String| Err(NnError::Shape(format!("{}: {msg}", self.name())));
        match *self {
            LayerSpec::Conv1d { in_ch, out_ch, kernel } => match input {
                [l, c] if *c == in_ch && *l >= kernel && kernel > 0 => Ok(vec![l - kernel + 1, out_ch]),
                _ => bad(format!(
                    "input {input:?} incompatible with {in_ch} channels, kernel {kernel}"
                )),
            },
            LayerSpec::Conv2d { in_ch, out_ch, kernel } => match input {
                [c, h, w] if *c == in_ch && *h >= kernel && *w >= kernel && kernel > 0 => {
                    Ok(vec![out_ch, h - kernel + 1, w - kernel + 1])
                }
                _ => bad(format!(
                    "input {input:?} incompatible with {in_ch} channels, kernel {kernel}"
                )),
            },
            LayerSpec::MaxPool1d { size, stride } => match input {
                [l, c] if *l >= size && size > 0 && stride > 0 => Ok(vec![(l - size) / stride + 1, *c]),
                _ => bad(format!("input {input:?} shorter than pool {size}")),
            },
            LayerSpec::MaxPool2d { size, stride } => match input {
                [c, h, w] if *h >= size && *w >= size && size > 0 && stride > 0 => {
                    Ok(vec![*c, (h - size) / stride + 1, (w - size) / stride + 1])
                }
                _ => bad(format!("input {input:?} smaller than pool {size}")),
            },
            LayerSpec::Lstm { input: d, hidden } => match input {
                [t, c] if *c == d && *t >= 1 => Ok(vec![hidden]),
                _ => bad(format!("input {input:?} is not a [T, {d}] sequence")),
            },
            LayerSpec::Dense { input: d, output } => match input {
                [n] if *n == d => Ok(vec![output]),
                _ => bad(format!("input {input:?} is not a [{d}] vector")),
            },
            LayerSpec::Relu => Ok(input.to_vec()),
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
            LayerSpec::SoftmaxXent => match input {
                [n] if *n >= 1 => Ok(vec![*n]),
                _ => bad(format!("input {input:?} is not a vector")),
            },
            LayerSpec::Concat => bad("concat joins branches and has no single input".into()),
        }
    }

    /// `(fan_in, fan_out)` used by Glorot initialization.
    pub fn fans(&self) -> (usize, usize) {
        match *self {
            LayerSpec::Conv1d { in_ch, out_ch, kernel } => (in_ch * kernel, out_ch * kernel),
            LayerSpec::Conv2d { in_ch, out_ch, kernel } => (in_ch * kernel * kernel, out_ch * kernel * kernel),
            LayerSpec::Lstm { input, hidden } => (input, hidden),
            LayerSpec::Dense { input, output } => (input, output),
            _ => (0, 0),
        }
    }
}

/// State retained by a forward pass for the matching backward pass.
#[derive(Debug, Clone)]
pub enum Cache {
    None,
    Input(Tensor),
    /// Patch matrix `[positions, in * k * k]` and the input shape.
    Conv2d {
        patches: Vec<f64>,
        in_shape: Vec<usize>,
    },
    Pool {
        argmax: Vec<usize>,
        in_shape: Vec<usize>,
    },
    Lstm {
        x: Tensor,
        /// `[T, 4H]` gate activations.
        gates: Vec<f64>,
        /// `[T + 1, H]` cell and hidden states, row 0 is the zero state.
        c: Vec<f64>,
        h: Vec<f64>,
    },
    Shape(Vec<usize>),
    Probs(Vec<f64>),
}

impl Cache {
    /// Piecewise-linear branch decisions (ReLU signs, pooling winners).
    /// A change in this signature between two parameter settings means a
    /// finite difference straddles a kink.
    pub fn kink_signature(&self, spec: &LayerSpec, out: &mut Vec<u64>) {
        match (spec, self) {
            (LayerSpec::Relu, Cache::Input(x)) => {
                for chunk in x.data.chunks(64) {
                    let mut bits = 0u64;
                    for (i, v) in chunk.iter().enumerate() {
                        if *v > 0.0 {
                            bits |= 1 << i;
                        }
                    }
                    out.push(bits);
                }
            }
            (_, Cache::Pool { argmax, .. }) => out.extend(argmax.iter().map(|&a| a as u64)),
            _ => {}
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

// ---------------------------------------------------------------------------
// Convolution

pub fn conv1d_forward(x: &Tensor, w: &[f64], b: &[f64], out_ch: usize, kernel: usize) -> Tensor {
    let (l, c) = (x.shape[0], x.shape[1]);
    let lo = l - kernel + 1;
    let span = kernel * c;
    let mut out = vec![0.0; lo * out_ch];
    for t in 0..lo {
        let window = &x.data[t * c..t * c + span];
        for o in 0..out_ch {
            out[t * out_ch + o] = b[o] + dot(&w[o * span..(o + 1) * span], window);
        }
    }
    Tensor::new(vec![lo, out_ch], out)
}

fn conv1d_backward(x: &Tensor, w: &[f64], grad_out: &Tensor, gw: &mut [f64], kernel: usize, out_ch: usize) -> Tensor {
    let (l, c) = (x.shape[0], x.shape[1]);
    let lo = grad_out.shape[0];
    let span = kernel * c;
    let (gw, gb) = gw.split_at_mut(out_ch * span);
    let mut gx = vec![0.0; l * c];
    for t in 0..lo {
        let window = &x.data[t * c..t * c + span];
        for o in 0..out_ch {
            let g = grad_out.data[t * out_ch + o];
            if g == 0.0 {
                continue;
            }
            gb[o] += g;
            axpy(g, window, &mut gw[o * span..(o + 1) * span]);
            axpy(g, &w[o * span..(o + 1) * span], &mut gx[t * c..t * c + span]);
        }
    }
    Tensor::new(x.shape.clone(), gx)
}

fn im2col(x: &Tensor, kernel: usize) -> (Vec<f64>, usize, usize) {
    let (c, h, w) = (x.shape[0], x.shape[1], x.shape[2]);
    let (ho, wo) = (h - kernel + 1, w - kernel + 1);
    let cols = c * kernel * kernel;
    let mut p = vec![0.0; ho * wo * cols];
    for y in 0..ho {
        for xx in 0..wo {
            let row = &mut p[(y * wo + xx) * cols..(y * wo + xx + 1) * cols];
            let mut k = 0;
            for ch in 0..c {
                for dy in 0..kernel {
                    let src = ch * h * w + (y + dy) * w + xx;
                    row[k..k + kernel].copy_from_slice(&x.data[src..src + kernel]);
                    k += kernel;
                }
            }
        }
    }
    (p, ho, wo)
}

pub fn conv2d_forward(x: &Tensor, w: &[f64], b: &[f64], out_ch: usize, kernel: usize) -> (Tensor, Vec<f64>) {
    let (patches, ho, wo) = im2col(x, kernel);
    let cols = x.shape[0] * kernel * kernel;
    let npos = ho * wo;
    let mut out = vec![0.0; out_ch * npos];
    for o in 0..out_ch {
        let wr = &w[o * cols..(o + 1) * cols];
        for p in 0..npos {
            out[o * npos + p] = b[o] + dot(wr, &patches[p * cols..(p + 1) * cols]);
        }
    }
    (Tensor::new(vec![out_ch, ho, wo], out), patches)
}

fn conv2d_backward(
    patches: &[f64],
    in_shape: &[usize],
    w: &[f64],
    grad_out: &Tensor,
    gw: &mut [f64],
    kernel: usize,
) -> Tensor {
    let (c, h, wd) = (in_shape[0], in_shape[1], in_shape[2]);
    let out_ch = grad_out.shape[0];
    let (ho, wo) = (grad_out.shape[1], grad_out.shape[2]);
    let npos = ho * wo;
    let cols = c * kernel * kernel;
    let (gw, gb) = gw.split_at_mut(out_ch * cols);
    let mut gp = vec![0.0; npos * cols];
    for o in 0..out_ch {
        let wr = &w[o * cols..(o + 1) * cols];
        let gwr = &mut gw[o * cols..(o + 1) * cols];
        for p in 0..npos {
            let g = grad_out.data[o * npos + p];
            if g == 0.0 {
                continue;
            }
            gb[o] += g;
            axpy(g, &patches[p * cols..(p + 1) * cols], gwr);
            axpy(g, wr, &mut gp[p * cols..(p + 1) * cols]);
        }
    }
    let mut gx = vec![0.0; c * h * wd];
    for y in 0..ho {
        for xx in 0..wo {
            let row = &gp[(y * wo + xx) * cols..(y * wo + xx + 1) * cols];
            let mut k = 0;
            for ch in 0..c {
                for dy in 0..kernel {
                    let dst = ch * h * wd + (y + dy) * wd + xx;
                    for (g, r) in gx[dst..dst + kernel].iter_mut().zip(&row[k..k + kernel]) {
                        *g += r;
                    }
                    k += kernel;
                }
            }
        }
    }
    Tensor::new(in_shape.to_vec(), gx)
}

// ---------------------------------------------------------------------------
// Pooling

/// Windowed maximum over `[L, C]`; the first maximal position wins ties.
pub fn maxpool1d_forward(x: &Tensor, size: usize, stride: usize) -> (Tensor, Vec<usize>) {
    let (l, c) = (x.shape[0], x.shape[1]);
    let lo = (l - size) / stride + 1;
    let mut out = vec![0.0; lo * c];
    let mut arg = vec![0; lo * c];
    for t in 0..lo {
        for ch in 0..c {
            let mut best = t * stride * c + ch;
            for j in 1..size {
                let idx = (t * stride + j) * c + ch;
                if x.data[idx] > x.data[best] {
                    best = idx;
                }
            }
            out[t * c + ch] = x.data[best];
            arg[t * c + ch] = best;
        }
    }
    (Tensor::new(vec![lo, c], out), arg)
}

/// Windowed maximum over `[C, H, W]`, scanning rows then columns.
pub fn maxpool2d_forward(x: &Tensor, size: usize, stride: usize) -> (Tensor, Vec<usize>) {
    let (c, h, w) = (x.shape[0], x.shape[1], x.shape[2]);
    let (ho, wo) = ((h - size) / stride + 1, (w - size) / stride + 1);
    let mut out = vec![0.0; c * ho * wo];
    let mut arg = vec![0; c * ho * wo];
    for ch in 0..c {
        for y in 0..ho {
            for xx in 0..wo {
                let mut best = ch * h * w + y * stride * w + xx * stride;
                for dy in 0..size {
                    for dx in 0..size {
                        let idx = ch * h * w + (y * stride + dy) * w + xx * stride + dx;
                        if x.data[idx] > x.data[best] {
                            best = idx;
                        }
                    }
                }
                let o = (ch * ho + y) * wo + xx;
                out[o] = x.data[best];
                arg[o] = best;
            }
        }
    }
    (Tensor::new(vec![c, ho, wo], out), arg)
}

/// Routes each output gradient to its stored argmax position.
pub fn maxpool_backward(argmax: &[usize], in_shape: &[usize], grad_out: &Tensor) -> Tensor {
    let mut gx = Tensor::zeros(in_shape.to_vec());
    for (&a, g) in argmax.iter().zip(&grad_out.data) {
        gx.data[a] += g;
    }
    gx
}

// ---------------------------------------------------------------------------
// LSTM

pub struct LstmParams<'a> {
    /// `[4H, d]`
    pub w: &'a [f64],
    /// `[4H, H]`
    pub u: &'a [f64],
    /// `[4H]`
    pub b: &'a [f64],
}

impl<'a> LstmParams<'a> {
    pub fn split(p: &'a [f64], input: usize, hidden: usize) -> Self {
        let (w, rest) = p.split_at(4 * hidden * input);
        let (u, b) = rest.split_at(4 * hidden * hidden);
        Self { w, u, b }
    }
}

/// Returns `h_T` together with the gate activations and state history.
pub fn lstm_forward(x: &Tensor, p: &LstmParams, hidden: usize) -> (Tensor, Cache) {
    let (t_len, d) = (x.shape[0], x.shape[1]);
    let hs = hidden;
    let mut gates = vec![0.0; t_len * 4 * hs];
    let mut c = vec![0.0; (t_len + 1) * hs];
    let mut h = vec![0.0; (t_len + 1) * hs];
    let mut z = vec![0.0; 4 * hs];
    for t in 0..t_len {
        let xt = &x.data[t * d..(t + 1) * d];
        let hprev = &h[t * hs..(t + 1) * hs];
        for (r, zr) in z.iter_mut().enumerate() {
            *zr = p.b[r] + dot(&p.w[r * d..(r + 1) * d], xt) + dot(&p.u[r * hs..(r + 1) * hs], hprev);
        }
        let g = &mut gates[t * 4 * hs..(t + 1) * 4 * hs];
        for j in 0..hs {
            g[j] = sigmoid(z[j]);
            g[hs + j] = sigmoid(z[hs + j]);
            g[2 * hs + j] = z[2 * hs + j].tanh();
            g[3 * hs + j] = sigmoid(z[3 * hs + j]);
        }
        for j in 0..hs {
            let cn = g[hs + j] * c[t * hs + j] + g[j] * g[2 * hs + j];
            c[(t + 1) * hs + j] = cn;
            h[(t + 1) * hs + j] = g[3 * hs + j] * cn.tanh();
        }
    }
    let out = Tensor::vector(h[t_len * hs..].to_vec());
    (
        out,
        Cache::Lstm {
            x: x.clone(),
            gates,
            c,
            h,
        },
    )
}

fn lstm_backward(cache: &Cache, p: &LstmParams, grad_out: &Tensor, grads: &mut [f64], hidden: usize) -> Tensor {
    let Cache::Lstm { x, gates, c, h } = cache else {
        unreachable!("lstm cache")
    };
    let (t_len, d) = (x.shape[0], x.shape[1]);
    let hs = hidden;
    let (gw, rest) = grads.split_at_mut(4 * hs * d);
    let (gu, gb) = rest.split_at_mut(4 * hs * hs);
    let mut gx = vec![0.0; t_len * d];
    let mut dh = grad_out.data.clone();
    let mut dc = vec![0.0; hs];
    let mut dz = vec![0.0; 4 * hs];
    for t in (0..t_len).rev() {
        let g = &gates[t * 4 * hs..(t + 1) * 4 * hs];
        for j in 0..hs {
            let (i, f, gg, o) = (g[j], g[hs + j], g[2 * hs + j], g[3 * hs + j]);
            let tc = c[(t + 1) * hs + j].tanh();
            let d_o = dh[j] * tc;
            let dcj = dc[j] + dh[j] * o * (1.0 - tc * tc);
            dz[j] = dcj * gg * i * (1.0 - i);
            dz[hs + j] = dcj * c[t * hs + j] * f * (1.0 - f);
            dz[2 * hs + j] = dcj * i * (1.0 - gg * gg);
            dz[3 * hs + j] = d_o * o * (1.0 - o);
            dc[j] = dcj * f;
        }
        let xt = &x.data[t * d..(t + 1) * d];
        let hprev = &h[t * hs..(t + 1) * hs];
        let gxt = &mut gx[t * d..(t + 1) * d];
        dh.iter_mut().for_each(|v| *v = 0.0);
        for (r, &dzr) in dz.iter().enumerate() {
            if dzr == 0.0 {
                continue;
            }
            gb[r] += dzr;
            axpy(dzr, xt, &mut gw[r * d..(r + 1) * d]);
            axpy(dzr, hprev, &mut gu[r * hs..(r + 1) * hs]);
            axpy(dzr, &p.w[r * d..(r + 1) * d], gxt);
            axpy(dzr, &p.u[r * hs..(r + 1) * hs], &mut dh);
        }
    }
    Tensor::new(x.shape.clone(), gx)
}

// ---------------------------------------------------------------------------
// Dispatch

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

/// Single-input forward pass. `p` is the layer's parameter block.
pub fn forward(spec: &LayerSpec, p: &[f64], x: &Tensor) -> (Tensor, Cache) {
    match *spec {
        LayerSpec::Conv1d { in_ch, out_ch, kernel } => {
            let (w, b) = p.split_at(out_ch * kernel * in_ch);
            (conv1d_forward(x, w, b, out_ch, kernel), Cache::Input(x.clone()))
        }
        LayerSpec::Conv2d { in_ch, out_ch, kernel } => {
            let (w, b) = p.split_at(out_ch * in_ch * kernel * kernel);
            let (y, patches) = conv2d_forward(x, w, b, out_ch, kernel);
            (
                y,
                Cache::Conv2d {
                    patches,
                    in_shape: x.shape.clone(),
                },
            )
        }
        LayerSpec::MaxPool1d { size, stride } => {
            let (y, argmax) = maxpool1d_forward(x, size, stride);
            (
                y,
                Cache::Pool {
                    argmax,
                    in_shape: x.shape.clone(),
                },
            )
        }
        LayerSpec::MaxPool2d { size, stride } => {
            let (y, argmax) = maxpool2d_forward(x, size, stride);
            (
                y,
                Cache::Pool {
                    argmax,
                    in_shape: x.shape.clone(),
                },
            )
        }
        LayerSpec::Lstm { input, hidden } => lstm_forward(x, &LstmParams::split(p, input, hidden), hidden),
        LayerSpec::Dense { input, output } => {
            let (w, b) = p.split_at(output * input);
            let y = (0..output)
                .map(|o| b[o] + dot(&w[o * input..(o + 1) * input], &x.data))
                .collect();
            (Tensor::vector(y), Cache::Input(x.clone()))
        }
        LayerSpec::Relu => (
            Tensor::new(x.shape.clone(), x.data.iter().map(|v| v.max(0.0)).collect()),
            Cache::Input(x.clone()),
        ),
        LayerSpec::Flatten => (Tensor::vector(x.data.clone()), Cache::Shape(x.shape.clone())),
        LayerSpec::SoftmaxXent => {
            let probs = softmax(&x.data);
            (Tensor::vector(probs.clone()), Cache::Probs(probs))
        }
        LayerSpec::Concat => unreachable!("concat is handled by the model"),
    }
}

/// Backward pass; accumulates into `g` (the layer's gradient block) and
/// returns the gradient with respect to the layer input. For
/// [`LayerSpec::SoftmaxXent`] `grad_out` must already be the gradient with
/// respect to the logits.
pub fn backward(spec: &LayerSpec, p: &[f64], cache: &Cache, grad_out: &Tensor, g: &mut [f64]) -> Tensor {
    match (spec, cache) {
        (LayerSpec::Conv1d { out_ch, kernel, .. }, Cache::Input(x)) => {
            conv1d_backward(x, p, grad_out, g, *kernel, *out_ch)
        }
        (LayerSpec::Conv2d { kernel, .. }, Cache::Conv2d { patches, in_shape }) => {
            conv2d_backward(patches, in_shape, p, grad_out, g, *kernel)
        }
        (LayerSpec::MaxPool1d { .. } | LayerSpec::MaxPool2d { .. }, Cache::Pool { argmax, in_shape }) => {
            maxpool_backward(argmax, in_shape, grad_out)
        }
        (LayerSpec::Lstm { input, hidden }, c) => {
            lstm_backward(c, &LstmParams::split(p, *input, *hidden), grad_out, g, *hidden)
        }
        (LayerSpec::Dense { input, output }, Cache::Input(x)) => {
            let (gw, gb) = g.split_at_mut(output * input);
            let mut gx = vec![0.0; *input];
            for o in 0..*output {
                let go = grad_out.data[o];
                gb[o] += go;
                axpy(go, &x.data, &mut gw[o * input..(o + 1) * input]);
                axpy(go, &p[o * input..(o + 1) * input], &mut gx);
            }
            Tensor::vector(gx)
        }
        (LayerSpec::Relu, Cache::Input(x)) => Tensor::new(
            x.shape.clone(),
            x.data
                .iter()
                .zip(&grad_out.data)
                .map(|(v, g)| if *v > 0.0 { *g } else { 0.0 })
                .collect(),
        ),
        (LayerSpec::Flatten, Cache::Shape(s)) => Tensor::new(s.clone(), grad_out.data.clone()),
        (LayerSpec::SoftmaxXent, _) => grad_out.clone(),
        _ => unreachable!("cache does not match layer {}", spec.name()),
    }
}
