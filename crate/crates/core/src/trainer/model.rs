//! Layer stack with hand-written forward and backward passes.
//!
//! Activations are `batch × features` matrices. Spatial activations are
//! flattened as `(row, column, channel)` with the channel fastest. Dense
//! weights are `inputs × outputs` so each column is one unit; convolutions
//! run as im2col followed by a product with the reshaped kernel, whose
//! columns are the filters.

use serde::{Deserialize, Serialize};

use super::init::{init_weight, Init};
use super::TrainError;
use crate::linalg::{frob_norm_sq, reshape_conv, ConvTensor, Matrix, PowerEstimate};
use crate::regularizers::{evaluate, srip_power, RegKind, RegOptions, RegOutput, SripMode};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape3 {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl Shape3 {
    pub fn flat(len: usize) -> Self {
        Self {
            height: 1,
            width: 1,
            channels: len,
        }
    }

    pub fn len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerSpec {
    Dense {
        inputs: usize,
        outputs: usize,
        #[serde(default)]
        init: Init,
    },
    Conv2d {
        /// Kernel extent along the image width.
        width: usize,
        /// Kernel extent along the image height.
        height: usize,
        in_channels: usize,
        out_channels: usize,
        #[serde(default = "one")]
        stride: usize,
        #[serde(default)]
        padding: usize,
        #[serde(default)]
        init: Init,
    },
    Relu,
    SoftmaxXent,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvGeometry {
    pub input: Shape3,
    pub output: Shape3,
    pub width: usize,
    pub height: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvGeometry {
    fn patch_len(&self) -> usize {
        self.width * self.height * self.input.channels
    }

    fn positions(&self) -> usize {
        self.output.height * self.output.width
    }

    /// Source pixel for output `(oy, ox)` and kernel offset `(kx, ky)`, or
    /// `None` inside the zero padding.
    #[inline]
    fn source(&self, oy: usize, ox: usize, kx: usize, ky: usize) -> Option<(usize, usize)> {
        let y = (oy * self.stride + ky).checked_sub(self.padding)?;
        let x = (ox * self.stride + kx).checked_sub(self.padding)?;
        (y < self.input.height && x < self.input.width).then_some((y, x))
    }

    /// `(batch · positions) × patch_len` patch matrix. Column order is
    /// `(kx·H + ky)·C + c`, matching the rows of the reshaped kernel.
    fn im2col(&self, x: &Matrix) -> Matrix {
        let batch = x.rows();
        let (h, c) = (self.height, self.input.channels);
        let mut out = Matrix::zeros(batch * self.positions(), self.patch_len());
        for b in 0..batch {
            let img = x.row(b);
            for oy in 0..self.output.height {
                for ox in 0..self.output.width {
                    let r = (b * self.output.height + oy) * self.output.width + ox;
                    for kx in 0..self.width {
                        for ky in 0..h {
                            if let Some((y, xx)) = self.source(oy, ox, kx, ky) {
                                let src = (y * self.input.width + xx) * c;
                                for ch in 0..c {
                                    out.set(r, (kx * h + ky) * c + ch, img[src + ch]);
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Adjoint of [`im2col`](Self::im2col): scatters patch gradients back
    /// onto the input.
    fn col2im(&self, patches: &Matrix, batch: usize) -> Matrix {
        let (h, c) = (self.height, self.input.channels);
        let mut out = Matrix::zeros(batch, self.input.len());
        for b in 0..batch {
            for oy in 0..self.output.height {
                for ox in 0..self.output.width {
                    let r = (b * self.output.height + oy) * self.output.width + ox;
                    for kx in 0..self.width {
                        for ky in 0..h {
                            if let Some((y, xx)) = self.source(oy, ox, kx, ky) {
                                let dst = (y * self.input.width + xx) * c;
                                for ch in 0..c {
                                    let v = out.get(b, dst + ch) + patches.get(r, (kx * h + ky) * c + ch);
                                    out.set(b, dst + ch, v);
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Dense {
        weight: Matrix,
        bias: Vec<f64>,
    },
    Conv {
        kernel: ConvTensor,
        bias: Vec<f64>,
        geometry: ConvGeometry,
    },
    Relu,
    SoftmaxXent,
}

impl Layer {
    /// Weight tensor as a matrix with one column per unit or filter.
    pub fn weight_matrix(&self) -> Option<Matrix> {
        match self {
            Layer::Dense { weight, .. } => Some(weight.clone()),
            Layer::Conv { kernel, .. } => Some(reshape_conv(kernel)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub layers: Vec<Layer>,
    pub input_shape: Shape3,
    pub num_outputs: usize,
}

/// Per-layer parameter gradients, aligned with [`Network::layers`].
/// Weight gradients of conv layers are kept in reshaped-kernel layout.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamGrad {
    Weighted { weight: Matrix, bias: Vec<f64> },
    Empty,
}

impl ParamGrad {
    /// Flat gradient buffers aligned with [`Network::params_mut`].
    pub fn buffers(grads: &[ParamGrad]) -> Vec<&[f64]> {
        grads
            .iter()
            .flat_map(|g| match g {
                ParamGrad::Weighted { weight, bias } => vec![weight.as_slice(), bias.as_slice()],
                ParamGrad::Empty => vec![],
            })
            .collect()
    }
}

/// Penalty settings for one optimization step.
#[derive(Debug, Clone)]
pub struct Objective {
    pub reg: RegKind,
    pub lambda: f64,
    pub weight_decay: f64,
    pub opts: RegOptions,
    pub include_classifier: bool,
    /// Start vectors for SRIP power iteration, one per regularized layer in
    /// layer order. Empty means draw from `opts.seed`.
    pub power_starts: Vec<Vec<f64>>,
}

impl Objective {
    /// Pure data term: no regularizer, no weight decay.
    pub fn data_only() -> Self {
        Self {
            reg: RegKind::None,
            lambda: 0.0,
            weight_decay: 0.0,
            opts: RegOptions::default(),
            include_classifier: true,
            power_starts: Vec::new(),
        }
    }
}

struct LayerCache {
    input: Matrix,
    patches: Option<Matrix>,
}

pub struct ForwardPass {
    pub loss: f64,
    pub data_loss: f64,
    pub weight_decay_loss: f64,
    pub reg_loss: f64,
    pub logits: Matrix,
    probs: Matrix,
    labels: Vec<usize>,
    caches: Vec<LayerCache>,
    /// Regularizer outputs keyed by layer index.
    reg_outputs: Vec<(usize, RegOutput)>,
    /// Final power-iteration state per regularized layer (SRIP power mode).
    pub power_estimates: Vec<(usize, PowerEstimate)>,
}

impl Network {
    pub fn build(input_shape: Shape3, specs: &[LayerSpec], seed: u64) -> Result<Network, TrainError> {
        let bad = |msg: String| Err(TrainError::InvalidConfig(msg));
        if specs.last() != Some(&LayerSpec::SoftmaxXent) {
            return bad("the last layer must be softmax_xent".into());
        }
        if input_shape.is_empty() {
            return bad("input shape must be non-empty".into());
        }
        let mut seeds = rng::stream(seed, 10);
        let mut shape = input_shape;
        let mut layers = Vec::with_capacity(specs.len());
        for (i, spec) in specs.iter().enumerate() {
            let layer_seed = rand::RngCore::next_u64(&mut seeds);
            match *spec {
                LayerSpec::Dense { inputs, outputs, init } => {
                    if inputs != shape.len() || outputs == 0 {
                        return Err(TrainError::ShapeMismatch(format!(
                            "layer {i}: dense expects {inputs} inputs, previous layer gives {}",
                            shape.len()
                        )));
                    }
                    layers.push(Layer::Dense {
                        weight: init_weight(init, inputs, outputs, layer_seed),
                        bias: vec![0.0; outputs],
                    });
                    shape = Shape3::flat(outputs);
                }
                LayerSpec::Conv2d {
                    width,
                    height,
                    in_channels,
                    out_channels,
                    stride,
                    padding,
                    init,
                } => {
                    if in_channels != shape.channels
                        || width == 0
                        || height == 0
                        || out_channels == 0
                        || stride == 0
                        || shape.height + 2 * padding < height
                        || shape.width + 2 * padding < width
                    {
                        return Err(TrainError::ShapeMismatch(format!(
                            "layer {i}: conv {width}x{height}x{in_channels}->{out_channels} \
                             incompatible with input {}x{}x{}",
                            shape.height, shape.width, shape.channels
                        )));
                    }
                    let output = Shape3 {
                        height: (shape.height + 2 * padding - height) / stride + 1,
                        width: (shape.width + 2 * padding - width) / stride + 1,
                        channels: out_channels,
                    };
                    let geometry = ConvGeometry {
                        input: shape,
                        output,
                        width,
                        height,
                        stride,
                        padding,
                    };
                    let w = init_weight(init, width * height * in_channels, out_channels, layer_seed);
                    let kernel = ConvTensor::from_matrix(width, height, in_channels, &w).expect("kernel shape matches");
                    layers.push(Layer::Conv {
                        kernel,
                        bias: vec![0.0; out_channels],
                        geometry,
                    });
                    shape = output;
                }
                LayerSpec::Relu => layers.push(Layer::Relu),
                LayerSpec::SoftmaxXent => {
                    if i + 1 != specs.len() {
                        return bad("softmax_xent may only appear last".into());
                    }
                    layers.push(Layer::SoftmaxXent);
                }
            }
        }
        if !layers.iter().any(|l| l.weight_matrix().is_some()) {
            return bad("model needs at least one dense or conv layer".into());
        }
        Ok(Network {
            layers,
            input_shape,
            num_outputs: shape.len(),
        })
    }

    /// Indices of layers carrying a weight tensor.
    pub fn weight_layers(&self) -> Vec<usize> {
        (0..self.layers.len())
            .filter(|&i| self.layers[i].weight_matrix().is_some())
            .collect()
    }

    /// Weight layers that receive the orthogonality penalty.
    pub fn regularized_layers(&self, include_classifier: bool) -> Vec<usize> {
        let mut idx = self.weight_layers();
        if !include_classifier {
            idx.pop();
        }
        idx
    }

    /// Flat mutable views of every parameter buffer: weight then bias per
    /// weight layer. Conv kernels are in [`ConvTensor`] order, which matches
    /// the reshaped-kernel gradient buffer.
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Dense { weight, bias } => {
                    out.push(weight.as_mut_slice());
                    out.push(bias.as_mut_slice());
                }
                Layer::Conv { kernel, bias, .. } => {
                    out.push(kernel.as_mut_slice());
                    out.push(bias.as_mut_slice());
                }
                _ => {}
            }
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| match l {
                Layer::Dense { weight, bias } => weight.as_slice().len() + bias.len(),
                Layer::Conv { kernel, bias, .. } => kernel.as_slice().len() + bias.len(),
                _ => 0,
            })
            .sum()
    }

    fn check_input(&self, x: &Matrix) -> Result<(), TrainError> {
        if x.cols() != self.input_shape.len() {
            return Err(TrainError::ShapeMismatch(format!(
                "batch has {} features, model expects {}",
                x.cols(),
                self.input_shape.len()
            )));
        }
        Ok(())
    }

    /// Logits for `x` (no loss).
    pub fn predict(&self, x: &Matrix) -> Result<Matrix, TrainError> {
        self.check_input(x)?;
        let mut h = x.clone();
        for layer in &self.layers {
            h = match layer {
                Layer::SoftmaxXent => h,
                _ => apply_layer(layer, &h).0,
            };
        }
        Ok(h)
    }

    pub fn forward(
        &self,
        obj: &Objective,
        x: &Matrix,
        labels: &[usize],
        pool: Option<&rayon::ThreadPool>,
    ) -> Result<ForwardPass, TrainError> {
        self.check_input(x)?;
        if labels.len() != x.rows() {
            return Err(TrainError::ShapeMismatch(format!(
                "{} labels for a batch of {}",
                labels.len(),
                x.rows()
            )));
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= self.num_outputs) {
            return Err(TrainError::ShapeMismatch(format!(
                "label {l} outside the model's {} outputs",
                self.num_outputs
            )));
        }
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        let mut probs = None;
        let mut data_loss = 0.0;
        for layer in &self.layers {
            if let Layer::SoftmaxXent = layer {
                let (loss, p) = softmax_xent(&h, labels);
                data_loss = loss;
                probs = Some(p);
                caches.push(LayerCache {
                    input: h.clone(),
                    patches: None,
                });
                continue;
            }
            let (out, patches) = apply_layer(layer, &h);
            caches.push(LayerCache { input: h, patches });
            h = out;
        }
        let logits = caches.last().expect("softmax layer").input.clone();

        let weight_decay_loss = obj.weight_decay
            * self
                .weight_layers()
                .iter()
                .map(|&i| frob_norm_sq(&self.layers[i].weight_matrix().unwrap()))
                .sum::<f64>();

        let (reg_outputs, power_estimates) = self.evaluate_regularizers(obj, pool)?;
        let reg_loss: f64 = reg_outputs.iter().map(|(_, o)| o.value).sum();

        Ok(ForwardPass {
            loss: data_loss + weight_decay_loss + reg_loss,
            data_loss,
            weight_decay_loss,
            reg_loss,
            logits,
            probs: probs.expect("softmax layer"),
            labels: labels.to_vec(),
            caches,
            reg_outputs,
            power_estimates,
        })
    }

    #[allow(clippy::type_complexity)]
    fn evaluate_regularizers(
        &self,
        obj: &Objective,
        pool: Option<&rayon::ThreadPool>,
    ) -> Result<(Vec<(usize, RegOutput)>, Vec<(usize, PowerEstimate)>), TrainError> {
        if obj.reg == RegKind::None {
            return Ok((Vec::new(), Vec::new()));
        }
        let targets = self.regularized_layers(obj.include_classifier);
        let eval_one = |(slot, &layer): (usize, &usize)| -> Result<(RegOutput, Option<PowerEstimate>), TrainError> {
            let w = self.layers[layer].weight_matrix().unwrap();
            if obj.reg == RegKind::Srip && obj.opts.srip_mode == SripMode::Power {
                let start = match obj.power_starts.get(slot) {
                    Some(s) if s.len() == w.cols() => s.clone(),
                    _ => crate::linalg::random_unit_vector(w.cols(), obj.opts.seed.wrapping_add(slot as u64)),
                };
                let (out, est) = srip_power(&w, obj.lambda, obj.opts.power_iters, &start)?;
                Ok((out, Some(est)))
            } else {
                Ok((evaluate(obj.reg, &w, obj.lambda, &obj.opts)?, None))
            }
        };
        let results: Vec<Result<_, TrainError>> = match pool {
            Some(pool) => {
                use rayon::prelude::*;
                pool.install(|| targets.par_iter().enumerate().map(eval_one).collect())
            }
            None => targets.iter().enumerate().map(eval_one).collect(),
        };
        let mut outputs = Vec::with_capacity(targets.len());
        let mut estimates = Vec::new();
        for (&layer, r) in targets.iter().zip(results) {
            let (out, est) = r?;
            outputs.push((layer, out));
            if let Some(est) = est {
                estimates.push((layer, est));
            }
        }
        Ok((outputs, estimates))
    }

    /// Gradients of `pass.loss` with respect to every parameter.
    pub fn backward(&self, obj: &Objective, pass: &ForwardPass) -> Vec<ParamGrad> {
        let batch = pass.labels.len() as f64;
        // d(mean xent)/d logits = (p − onehot) / batch
        let mut delta = pass.probs.clone();
        for (i, &l) in pass.labels.iter().enumerate() {
            delta.set(i, l, delta.get(i, l) - 1.0);
        }
        let mut delta = delta.scale(1.0 / batch);

        let mut grads = vec![ParamGrad::Empty; self.layers.len()];
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let cache = &pass.caches[idx];
            match layer {
                Layer::SoftmaxXent => {}
                Layer::Relu => {
                    let mask = cache.input.as_slice();
                    let data = delta
                        .as_slice()
                        .iter()
                        .zip(mask)
                        .map(|(&d, &x)| if x > 0.0 { d } else { 0.0 })
                        .collect();
                    delta = Matrix::from_parts(delta.rows(), delta.cols(), data);
                }
                Layer::Dense { weight, .. } => {
                    let dw = cache.input.transpose().matmul(&delta).unwrap();
                    let db = column_sums(&delta);
                    let next = delta.matmul(&weight.transpose()).unwrap();
                    grads[idx] = ParamGrad::Weighted { weight: dw, bias: db };
                    delta = next;
                }
                Layer::Conv { kernel, geometry, .. } => {
                    let rows = delta.rows() * geometry.positions();
                    let d_out = Matrix::from_parts(rows, geometry.output.channels, delta.as_slice().to_vec());
                    let patches = cache.patches.as_ref().expect("conv cache");
                    let dw = patches.transpose().matmul(&d_out).unwrap();
                    let db = column_sums(&d_out);
                    let d_patches = d_out.matmul(&reshape_conv(kernel).transpose()).unwrap();
                    let next = geometry.col2im(&d_patches, delta.rows());
                    grads[idx] = ParamGrad::Weighted { weight: dw, bias: db };
                    delta = next;
                }
            }
        }

        for &i in &self.weight_layers() {
            if let ParamGrad::Weighted { weight: dw, .. } = &mut grads[i] {
                if obj.weight_decay != 0.0 {
                    dw.axpy_assign(2.0 * obj.weight_decay, &self.layers[i].weight_matrix().unwrap());
                }
            }
        }
        for (i, out) in &pass.reg_outputs {
            if let ParamGrad::Weighted { weight: dw, .. } = &mut grads[*i] {
                let reg_grad = match &self.layers[*i] {
                    Layer::Conv { kernel, .. } => {
                        let (s, h, c, _) = kernel.dims();
                        let back = ConvTensor::from_matrix(s, h, c, &out.grad).expect("same shape");
                        Matrix::from_parts(dw.rows(), dw.cols(), back.as_slice().to_vec())
                    }
                    _ => out.grad.clone(),
                };
                dw.axpy_assign(1.0, &reg_grad);
            }
        }
        grads
    }
}

fn column_sums(m: &Matrix) -> Vec<f64> {
    let mut out = vec![0.0; m.cols()];
    for i in 0..m.rows() {
        for (o, x) in out.iter_mut().zip(m.row(i)) {
            *o += x;
        }
    }
    out
}

fn add_bias(mut m: Matrix, bias: &[f64]) -> Matrix {
    let cols = m.cols();
    for (k, x) in m.as_mut_slice().iter_mut().enumerate() {
        *x += bias[k % cols];
    }
    m
}

/// Output of one non-loss layer, plus the im2col patches for conv layers.
fn apply_layer(layer: &Layer, h: &Matrix) -> (Matrix, Option<Matrix>) {
    match layer {
        Layer::Dense { weight, bias } => (add_bias(h.matmul(weight).unwrap(), bias), None),
        Layer::Conv { kernel, bias, geometry } => {
            let patches = geometry.im2col(h);
            let out = add_bias(patches.matmul(&reshape_conv(kernel)).unwrap(), bias);
            let flat = Matrix::from_parts(h.rows(), geometry.output.len(), out.into_vec());
            (flat, Some(patches))
        }
        Layer::Relu => {
            let data = h.as_slice().iter().map(|&x| x.max(0.0)).collect();
            (Matrix::from_parts(h.rows(), h.cols(), data), None)
        }
        Layer::SoftmaxXent => (h.clone(), None),
    }
}

/// Mean cross-entropy of `softmax(logits)` against `labels`, and the
/// probabilities.
fn softmax_xent(logits: &Matrix, labels: &[usize]) -> (f64, Matrix) {
    let (n, k) = logits.shape();
    let mut probs = Matrix::zeros(n, k);
    let mut total = 0.0;
    for i in 0..n {
        let row = logits.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|z| (z - max).exp()).sum();
        let log_sum = max + sum.ln();
        for (j, z) in row.iter().enumerate() {
            probs.set(i, j, (z - log_sum).exp());
        }
        total += log_sum - row[labels[i]];
    }
    (total / n as f64, probs)
}

/// Index of the largest logit per row; ties go to the lowest index.
pub fn argmax_rows(logits: &Matrix) -> Vec<usize> {
    (0..logits.rows())
        .map(|i| {
            let row = logits.row(i);
            let mut best = 0;
            for (j, &z) in row.iter().enumerate() {
                if z > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}
