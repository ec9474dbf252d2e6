use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gemm::gemm;
use super::loss::softmax_rows;
use super::{NnError, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Serializable layer description; the architecture half of a checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    /// 3×3 stride-1 convolution with a one-pixel zero border.
    Conv3x3 { out_channels: usize },
    MaxPool2x2,
    Flatten,
    Dense { units: usize },
    Relu,
    Dropout { rate: f64 },
    Softmax,
}

impl LayerSpec {
    /// Output shape (without batch axis) for a given input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>, NnError> {
        match *self {
            LayerSpec::Conv3x3 { out_channels } => match input {
                [h, w, _] if out_channels > 0 => Ok(vec![*h, *w, out_channels]),
                _ => Err(NnError::Shape(format!("conv3x3 needs [h, w, c] input, got {input:?}"))),
            },
            LayerSpec::MaxPool2x2 => match input {
                [h, w, c] if h % 2 == 0 && w % 2 == 0 => Ok(vec![h / 2, w / 2, *c]),
                _ => Err(NnError::Shape(format!(
                    "maxpool2x2 needs [h, w, c] input with even h, w; got {input:?}"
                ))),
            },
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
            LayerSpec::Dense { units } => match input {
                [_] if units > 0 => Ok(vec![units]),
                _ => Err(NnError::Shape(format!("dense needs flat input, got {input:?}"))),
            },
            LayerSpec::Relu => Ok(input.to_vec()),
            LayerSpec::Dropout { rate } => {
                if (0.0..1.0).contains(&rate) {
                    Ok(input.to_vec())
                } else {
                    Err(NnError::Layer(format!("dropout rate {rate} outside [0, 1)")))
                }
            }
            LayerSpec::Softmax => match input {
                [_] => Ok(input.to_vec()),
                _ => Err(NnError::Shape(format!("softmax needs flat input, got {input:?}"))),
            },
        }
    }
}

/// A trainable array and its accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub shape: Vec<usize>,
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
}

impl Param {
    fn new(shape: Vec<usize>, value: Vec<f64>) -> Self {
        let grad = vec![0.0; value.len()];
        Param { shape, value, grad }
    }

    fn glorot(shape: Vec<usize>, fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let n = shape.iter().product();
        let value = (0..n).map(|_| rng.random_range(-limit..limit)).collect();
        Param::new(shape, value)
    }

    fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Param::new(shape, vec![0.0; n])
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

#[derive(Debug, Clone)]
pub struct Conv3x3 {
    pub in_channels: usize,
    pub out_channels: usize,
    /// `[3, 3, in, out]`
    pub kernel: Param,
    pub bias: Param,
    /// Input spatial dims and per-sample im2col matrices from the last forward.
    cache: Option<(usize, usize, Vec<Vec<f64>>)>,
}

fn im2col(x: &[f64], h: usize, w: usize, c: usize, cols: &mut [f64]) {
    let k = 9 * c;
    cols.fill(0.0);
    for y in 0..h {
        for xx in 0..w {
            let row = &mut cols[(y * w + xx) * k..(y * w + xx + 1) * k];
            for ky in 0..3 {
                let sy = y + ky;
                if sy == 0 || sy > h {
                    continue;
                }
                let sy = sy - 1;
                for kx in 0..3 {
                    let sx = xx + kx;
                    if sx == 0 || sx > w {
                        continue;
                    }
                    let sx = sx - 1;
                    let src = &x[(sy * w + sx) * c..(sy * w + sx + 1) * c];
                    row[(ky * 3 + kx) * c..(ky * 3 + kx + 1) * c].copy_from_slice(src);
                }
            }
        }
    }
}

fn col2im(cols: &[f64], h: usize, w: usize, c: usize, dx: &mut [f64]) {
    let k = 9 * c;
    for y in 0..h {
        for xx in 0..w {
            let row = &cols[(y * w + xx) * k..(y * w + xx + 1) * k];
            for ky in 0..3 {
                let sy = y + ky;
                if sy == 0 || sy > h {
                    continue;
                }
                let sy = sy - 1;
                for kx in 0..3 {
                    let sx = xx + kx;
                    if sx == 0 || sx > w {
                        continue;
                    }
                    let sx = sx - 1;
                    let dst = &mut dx[(sy * w + sx) * c..(sy * w + sx + 1) * c];
                    for (d, s) in dst.iter_mut().zip(&row[(ky * 3 + kx) * c..(ky * 3 + kx + 1) * c]) {
                        *d += s;
                    }
                }
            }
        }
    }
}

impl Conv3x3 {
    pub fn new(in_channels: usize, out_channels: usize, rng: &mut ChaCha8Rng) -> Self {
        Conv3x3 {
            in_channels,
            out_channels,
            kernel: Param::glorot(
                vec![3, 3, in_channels, out_channels],
                9 * in_channels,
                9 * out_channels,
                rng,
            ),
            bias: Param::zeros(vec![out_channels]),
            cache: None,
        }
    }

    pub fn forward(&mut self, input: &Tensor, mode: Mode) -> Result<Tensor, NnError> {
        let &[b, h, w, c] = input.shape() else {
            return Err(NnError::Shape(format!("conv input must be [b,h,w,c], got {:?}", input.shape())));
        };
        if c != self.in_channels {
            return Err(NnError::Shape(format!(
                "conv expects {} input channels, got {c}",
                self.in_channels
            )));
        }
        let (co, k, hw) = (self.out_channels, 9 * c, h * w);
        let kernel = &self.kernel.value;
        let bias = &self.bias.value;
        let mut out = vec![0.0; b * hw * co];
        let cols: Vec<Vec<f64>> = out
            .par_chunks_mut(hw * co)
            .enumerate()
            .map(|(i, o)| {
                let mut col = vec![0.0; hw * k];
                im2col(input.item(i), h, w, c, &mut col);
                gemm(hw, k, co, &col, false, kernel, false, o, false);
                for px in o.chunks_mut(co) {
                    for (v, bb) in px.iter_mut().zip(bias) {
                        *v += bb;
                    }
                }
                col
            })
            .collect();
        self.cache = (mode == Mode::Train).then_some((h, w, cols));
        Tensor::new(vec![b, h, w, co], out)
    }

    pub fn backward(&mut self, grad: &Tensor) -> Result<Tensor, NnError> {
        let (h, w, cols) = self
            .cache
            .take()
            .ok_or_else(|| NnError::Shape("conv backward without a training forward".into()))?;
        let b = cols.len();
        let (c, co, hw) = (self.in_channels, self.out_channels, h * w);
        let k = 9 * c;
        if grad.shape() != [b, h, w, co] {
            return Err(NnError::Shape(format!("conv grad shape {:?}", grad.shape())));
        }
        let kernel = &self.kernel.value;
        let per_sample: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = cols
            .par_iter()
            .enumerate()
            .map(|(i, col)| {
                let g = grad.item(i);
                let mut dk = vec![0.0; k * co];
                gemm(k, hw, co, col, true, g, false, &mut dk, false);
                let mut db = vec![0.0; co];
                for px in g.chunks(co) {
                    for (d, v) in db.iter_mut().zip(px) {
                        *d += v;
                    }
                }
                let mut dcol = vec![0.0; hw * k];
                gemm(hw, co, k, g, false, kernel, true, &mut dcol, false);
                let mut dx = vec![0.0; hw * c];
                col2im(&dcol, h, w, c, &mut dx);
                (dk, db, dx)
            })
            .collect();
        let mut dx_all = Vec::with_capacity(b * hw * c);
        for (dk, db, dx) in per_sample {
            for (a, v) in self.kernel.grad.iter_mut().zip(&dk) {
                *a += v;
            }
            for (a, v) in self.bias.grad.iter_mut().zip(&db) {
                *a += v;
            }
            dx_all.extend_from_slice(&dx);
        }
        Tensor::new(vec![b, h, w, c], dx_all)
    }
}

#[derive(Debug, Clone, Default)]
pub struct MaxPool2x2 {
    /// Input shape and, per output value, the flat input index it came from.
    cache: Option<(Vec<usize>, Vec<usize>)>,
}

impl MaxPool2x2 {
    /// Returns the pooled tensor and the argmax record (first index on ties).
    pub fn pool(input: &Tensor) -> Result<(Tensor, Vec<usize>), NnError> {
        let &[b, h, w, c] = input.shape() else {
            return Err(NnError::Shape(format!("pool input must be [b,h,w,c], got {:?}", input.shape())));
        };
        if h % 2 != 0 || w % 2 != 0 {
            return Err(NnError::Shape(format!("maxpool2x2 needs even dims, got {h}x{w}")));
        }
        let (oh, ow) = (h / 2, w / 2);
        let x = input.data();
        let mut out = Vec::with_capacity(b * oh * ow * c);
        let mut arg = Vec::with_capacity(b * oh * ow * c);
        for n in 0..b {
            for y in 0..oh {
                for xx in 0..ow {
                    for ch in 0..c {
                        let mut best = f64::NEG_INFINITY;
                        let mut best_i = 0;
                        for dy in 0..2 {
                            for dx in 0..2 {
                                let i = ((n * h + 2 * y + dy) * w + 2 * xx + dx) * c + ch;
                                if x[i] > best || (dy == 0 && dx == 0) {
                                    best = x[i];
                                    best_i = i;
                                }
                            }
                        }
                        out.push(best);
                        arg.push(best_i);
                    }
                }
            }
        }
        Ok((Tensor::new(vec![b, oh, ow, c], out)?, arg))
    }

    pub fn unpool(grad: &Tensor, input_shape: &[usize], argmax: &[usize]) -> Result<Tensor, NnError> {
        if grad.len() != argmax.len() {
            return Err(NnError::Shape("pool grad does not match argmax record".into()));
        }
        let mut dx = Tensor::zeros(input_shape.to_vec());
        let d = dx.data_mut();
        for (&i, &g) in argmax.iter().zip(grad.data()) {
            d[i] += g;
        }
        Ok(dx)
    }

    pub fn forward(&mut self, input: &Tensor, mode: Mode) -> Result<Tensor, NnError> {
        let (out, arg) = Self::pool(input)?;
        self.cache = (mode == Mode::Train).then(|| (input.shape().to_vec(), arg));
        Ok(out)
    }

    pub fn backward(&mut self, grad: &Tensor) -> Result<Tensor, NnError> {
        let (shape, arg) = self
            .cache
            .take()
            .ok_or_else(|| NnError::Shape("pool backward without a training forward".into()))?;
        Self::unpool(grad, &shape, &arg)
    }
}

#[derive(Debug, Clone)]
pub struct Dense {
    pub inputs: usize,
    pub units: usize,
    /// `[inputs, units]`
    pub weights: Param,
    pub bias: Param,
    cache: Option<Tensor>,
}

impl Dense {
    pub fn new(inputs: usize, units: usize, rng: &mut ChaCha8Rng) -> Self {
        Dense {
            inputs,
            units,
            weights: Param::glorot(vec![inputs, units], inputs, units, rng),
            bias: Param::zeros(vec![units]),
            cache: None,
        }
    }

    pub fn forward(&mut self, input: &Tensor, mode: Mode) -> Result<Tensor, NnError> {
        let &[b, f] = input.shape() else {
            return Err(NnError::Shape(format!("dense input must be [b, f], got {:?}", input.shape())));
        };
        if f != self.inputs {
            return Err(NnError::Shape(format!("dense expects {} inputs, got {f}", self.inputs)));
        }
        let mut out = vec![0.0; b * self.units];
        gemm(b, f, self.units, input.data(), false, &self.weights.value, false, &mut out, false);
        for row in out.chunks_mut(self.units) {
            for (v, bb) in row.iter_mut().zip(&self.bias.value) {
                *v += bb;
            }
        }
        self.cache = (mode == Mode::Train).then(|| input.clone());
        Tensor::new(vec![b, self.units], out)
    }

    pub fn backward(&mut self, grad: &Tensor) -> Result<Tensor, NnError> {
        let x = self
            .cache
            .take()
            .ok_or_else(|| NnError::Shape("dense backward without a training forward".into()))?;
        let b = x.batch();
        if grad.shape() != [b, self.units] {
            return Err(NnError::Shape(format!("dense grad shape {:?}", grad.shape())));
        }
        gemm(
            self.inputs,
            b,
            self.units,
            x.data(),
            true,
            grad.data(),
            false,
            &mut self.weights.grad,
            true,
        );
        for row in grad.data().chunks(self.units) {
            for (d, v) in self.bias.grad.iter_mut().zip(row) {
                *d += v;
            }
        }
        let mut dx = vec![0.0; b * self.inputs];
        gemm(b, self.units, self.inputs, grad.data(), false, &self.weights.value, true, &mut dx, false);
        Tensor::new(vec![b, self.inputs], dx)
    }
}

/// Inverted dropout: survivors are scaled by `1 / (1 − rate)` in training.
#[derive(Debug, Clone)]
pub struct Dropout {
    pub rate: f64,
    mask: Option<Vec<f64>>,
}

impl Dropout {
    pub fn new(rate: f64) -> Result<Self, NnError> {
        if !(0.0..1.0).contains(&rate) {
            return Err(NnError::Layer(format!("dropout rate {rate} outside [0, 1)")));
        }
        Ok(Dropout { rate, mask: None })
    }

    pub fn forward(&mut self, input: &Tensor, mode: Mode, rng: &mut ChaCha8Rng) -> Tensor {
        if mode == Mode::Eval || self.rate == 0.0 {
            self.mask = (mode == Mode::Train).then(|| vec![1.0; input.len()]);
            return input.clone();
        }
        let keep = 1.0 / (1.0 - self.rate);
        let mask: Vec<f64> = (0..input.len())
            .map(|_| if rng.random::<f64>() < self.rate { 0.0 } else { keep })
            .collect();
        let mut out = input.clone();
        for (v, m) in out.data_mut().iter_mut().zip(&mask) {
            *v *= m;
        }
        self.mask = Some(mask);
        out
    }

    /// Forward with a caller-supplied mask (already scaled).
    pub fn forward_with_mask(&mut self, input: &Tensor, mask: Vec<f64>) -> Tensor {
        let mut out = input.clone();
        for (v, m) in out.data_mut().iter_mut().zip(&mask) {
            *v *= m;
        }
        self.mask = Some(mask);
        out
    }

    pub fn backward(&mut self, grad: &Tensor) -> Result<Tensor, NnError> {
        let mask = self
            .mask
            .take()
            .ok_or_else(|| NnError::Shape("dropout backward without a training forward".into()))?;
        let mut dx = grad.clone();
        for (v, m) in dx.data_mut().iter_mut().zip(&mask) {
            *v *= m;
        }
        Ok(dx)
    }
}

#[derive(Debug, Clone)]
pub enum Layer {
    Conv(Conv3x3),
    Pool(MaxPool2x2),
    Flatten { input_shape: Option<Vec<usize>> },
    Dense(Dense),
    Relu { mask: Option<Vec<bool>> },
    Dropout(Dropout),
    Softmax { output: Option<Tensor> },
}

impl Layer {
    /// Instantiates a layer for an input of `input_shape` (no batch axis).
    pub fn build(spec: &LayerSpec, input_shape: &[usize], rng: &mut ChaCha8Rng) -> Result<Layer, NnError> {
        spec.output_shape(input_shape)?;
        Ok(match *spec {
            LayerSpec::Conv3x3 { out_channels } => Layer::Conv(Conv3x3::new(input_shape[2], out_channels, rng)),
            LayerSpec::MaxPool2x2 => Layer::Pool(MaxPool2x2::default()),
            LayerSpec::Flatten => Layer::Flatten { input_shape: None },
            LayerSpec::Dense { units } => Layer::Dense(Dense::new(input_shape[0], units, rng)),
            LayerSpec::Relu => Layer::Relu { mask: None },
            LayerSpec::Dropout { rate } => Layer::Dropout(Dropout::new(rate)?),
            LayerSpec::Softmax => Layer::Softmax { output: None },
        })
    }

    pub fn forward(&mut self, input: &Tensor, mode: Mode, rng: &mut ChaCha8Rng) -> Result<Tensor, NnError> {
        match self {
            Layer::Conv(l) => l.forward(input, mode),
            Layer::Pool(l) => l.forward(input, mode),
            Layer::Flatten { input_shape } => {
                *input_shape = Some(input.shape().to_vec());
                let b = input.batch();
                input.clone().reshape(vec![b, input.item_len()])
            }
            Layer::Dense(l) => l.forward(input, mode),
            Layer::Relu { mask } => {
                let mut out = input.clone();
                let mut m = Vec::with_capacity(input.len());
                for v in out.data_mut() {
                    let on = *v > 0.0;
                    if !on {
                        *v = 0.0;
                    }
                    m.push(on);
                }
                *mask = (mode == Mode::Train).then_some(m);
                Ok(out)
            }
            Layer::Dropout(l) => Ok(l.forward(input, mode, rng)),
            Layer::Softmax { output } => {
                let &[_, k] = input.shape() else {
                    return Err(NnError::Shape("softmax needs [b, k] input".into()));
                };
                let probs = Tensor::new(input.shape().to_vec(), softmax_rows(input.data(), k))?;
                *output = (mode == Mode::Train).then(|| probs.clone());
                Ok(probs)
            }
        }
    }

    pub fn backward(&mut self, grad: &Tensor) -> Result<Tensor, NnError> {
        match self {
            Layer::Conv(l) => l.backward(grad),
            Layer::Pool(l) => l.backward(grad),
            Layer::Flatten { input_shape } => {
                let shape = input_shape
                    .take()
                    .ok_or_else(|| NnError::Shape("flatten backward without forward".into()))?;
                grad.clone().reshape(shape)
            }
            Layer::Dense(l) => l.backward(grad),
            Layer::Relu { mask } => {
                let m = mask
                    .take()
                    .ok_or_else(|| NnError::Shape("relu backward without a training forward".into()))?;
                let mut dx = grad.clone();
                for (v, on) in dx.data_mut().iter_mut().zip(m) {
                    if !on {
                        *v = 0.0;
                    }
                }
                Ok(dx)
            }
            Layer::Dropout(l) => l.backward(grad),
            Layer::Softmax { output } => {
                let y = output
                    .take()
                    .ok_or_else(|| NnError::Shape("softmax backward without a training forward".into()))?;
                let k = y.item_len();
                let mut dx = grad.clone();
                for (g, p) in dx.data_mut().chunks_mut(k).zip(y.data().chunks(k)) {
                    let dot: f64 = g.iter().zip(p).map(|(a, b)| a * b).sum();
                    for (gv, pv) in g.iter_mut().zip(p) {
                        *gv = pv * (*gv - dot);
                    }
                }
                Ok(dx)
            }
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        match self {
            Layer::Conv(l) => vec![&mut l.kernel, &mut l.bias],
            Layer::Dense(l) => vec![&mut l.weights, &mut l.bias],
            _ => Vec::new(),
        }
    }

    pub fn params(&self) -> Vec<&Param> {
        match self {
            Layer::Conv(l) => vec![&l.kernel, &l.bias],
            Layer::Dense(l) => vec![&l.weights, &l.bias],
            _ => Vec::new(),
        }
    }
}
