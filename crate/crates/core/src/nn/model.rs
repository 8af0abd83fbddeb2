//! A small classifier: optional valid 2-D convolution with global average
//! pooling, then a stack of affine layers. All gradients are analytic.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::SoftLabel;
use crate::error::{Error, Result};
use crate::nn::loss::LossKind;
use crate::nn::noise::NoiseMatrix;
use crate::nn::softmax;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation.
    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = pre.tanh();
                1.0 - t * t
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub filters: usize,
    pub kernel_rows: usize,
    pub kernel_cols: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_rows: usize,
    pub input_cols: usize,
    pub conv: Option<ConvSpec>,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub num_classes: usize,
}

impl Architecture {
    pub fn validate(&self) -> Result<()> {
        if self.input_rows == 0 || self.input_cols == 0 {
            return Err(Error::param("architecture", "input shape must be non-empty"));
        }
        if self.num_classes == 0 {
            return Err(Error::param("architecture", "num_classes must be positive"));
        }
        if let Some(conv) = &self.conv {
            if conv.filters == 0
                || conv.kernel_rows == 0
                || conv.kernel_cols == 0
                || conv.kernel_rows > self.input_rows
                || conv.kernel_cols > self.input_cols
            {
                return Err(Error::param(
                    "architecture",
                    format!(
                        "convolution {conv:?} does not fit a {}x{} input",
                        self.input_rows, self.input_cols
                    ),
                ));
            }
        }
        if self.hidden.contains(&0) {
            return Err(Error::param("architecture", "hidden layers must be non-empty"));
        }
        Ok(())
    }

    fn conv_output(&self) -> Option<(usize, usize)> {
        self.conv.map(|c| {
            (
                self.input_rows - c.kernel_rows + 1,
                self.input_cols - c.kernel_cols + 1,
            )
        })
    }

    /// Width of the vector fed to the first affine layer.
    pub fn feature_width(&self) -> usize {
        match self.conv {
            Some(c) => c.filters,
            None => self.input_rows * self.input_cols,
        }
    }

    /// `(fan_in, fan_out)` for every affine layer, input to output.
    pub fn dense_shapes(&self) -> Vec<(usize, usize)> {
        let mut widths = vec![self.feature_width()];
        widths.extend(&self.hidden);
        widths.push(self.num_classes);
        widths.windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// Lengths of every parameter tensor in storage order.
    pub fn parameter_lengths(&self) -> Vec<usize> {
        let mut lens = Vec::new();
        if let Some(c) = self.conv {
            lens.push(c.filters * c.kernel_rows * c.kernel_cols);
            lens.push(c.filters);
        }
        for (fan_in, fan_out) in self.dense_shapes() {
            lens.push(fan_in * fan_out);
            lens.push(fan_out);
        }
        lens
    }

    fn dense_offset(&self) -> usize {
        if self.conv.is_some() {
            2
        } else {
            0
        }
    }
}

/// Parameter, noise-matrix and input gradients of a mean batch loss.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub params: Vec<Vec<f64>>,
    pub noise: Option<Vec<f64>>,
    pub inputs: Vec<Array2<f64>>,
}

struct Trace {
    conv_pre: Vec<f64>,
    /// Input to each affine layer.
    dense_inputs: Vec<Vec<f64>>,
    /// Pre-activations of the hidden affine layers.
    hidden_pre: Vec<Vec<f64>>,
    logits: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    arch: Architecture,
    params: Vec<Vec<f64>>,
    noise: Option<NoiseMatrix>,
}

impl Classifier {
    /// Uniform fan-in scaled initialisation with zero biases.
    pub fn new(arch: Architecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::new();
        if let Some(c) = arch.conv {
            let fan_in = (c.kernel_rows * c.kernel_cols) as f64;
            let bound = (6.0 / fan_in).sqrt();
            params.push(
                (0..c.filters * c.kernel_rows * c.kernel_cols)
                    .map(|_| rng.gen_range(-bound..bound))
                    .collect(),
            );
            params.push(vec![0.0; c.filters]);
        }
        let shapes = arch.dense_shapes();
        let last = shapes.len() - 1;
        for (layer, (fan_in, fan_out)) in shapes.into_iter().enumerate() {
            let bound = if layer == last {
                (6.0 / (fan_in + fan_out) as f64).sqrt()
            } else {
                (6.0 / fan_in as f64).sqrt()
            };
            params.push(
                (0..fan_in * fan_out)
                    .map(|_| rng.gen_range(-bound..bound))
                    .collect(),
            );
            params.push(vec![0.0; fan_out]);
        }
        Ok(Classifier {
            arch,
            params,
            noise: None,
        })
    }

    pub fn zeros(arch: Architecture) -> Result<Self> {
        arch.validate()?;
        let params = arch.parameter_lengths().into_iter().map(|n| vec![0.0; n]).collect();
        Ok(Classifier {
            arch,
            params,
            noise: None,
        })
    }

    pub fn from_parts(
        arch: Architecture,
        params: Vec<Vec<f64>>,
        noise: Option<NoiseMatrix>,
    ) -> Result<Self> {
        arch.validate()?;
        let expected = arch.parameter_lengths();
        let got: Vec<usize> = params.iter().map(Vec::len).collect();
        if expected != got {
            return Err(Error::shape(format!("{expected:?}"), format!("{got:?}")));
        }
        if let Some(q) = &noise {
            if q.num_classes() != arch.num_classes {
                return Err(Error::shape(
                    format!("{0}x{0} noise matrix", arch.num_classes),
                    format!("{0}x{0}", q.num_classes()),
                ));
            }
        }
        Ok(Classifier {
            arch,
            params,
            noise,
        })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn num_classes(&self) -> usize {
        self.arch.num_classes
    }

    pub fn params(&self) -> &[Vec<f64>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.params
    }

    pub fn noise(&self) -> Option<&NoiseMatrix> {
        self.noise.as_ref()
    }

    pub fn noise_mut(&mut self) -> Option<&mut NoiseMatrix> {
        self.noise.as_mut()
    }

    pub fn set_noise(&mut self, noise: Option<NoiseMatrix>) {
        self.noise = noise;
    }

    fn check_input(&self, x: &Array2<f64>) -> Result<()> {
        let expected = (self.arch.input_rows, self.arch.input_cols);
        if x.dim() != expected {
            return Err(Error::shape(
                format!("{}x{} input", expected.0, expected.1),
                format!("{}x{}", x.nrows(), x.ncols()),
            ));
        }
        Ok(())
    }

    fn trace(&self, x: &Array2<f64>) -> Trace {
        let act = self.arch.activation;
        let mut conv_pre = Vec::new();
        let features: Vec<f64> = match (self.arch.conv, self.arch.conv_output()) {
            (Some(c), Some((oh, ow))) => {
                let (w, b) = (&self.params[0], &self.params[1]);
                conv_pre = vec![0.0; c.filters * oh * ow];
                let mut pooled = vec![0.0; c.filters];
                for f in 0..c.filters {
                    let kernel = &w[f * c.kernel_rows * c.kernel_cols..][..c.kernel_rows * c.kernel_cols];
                    let mut sum = 0.0;
                    for i in 0..oh {
                        for j in 0..ow {
                            let mut z = b[f];
                            for a in 0..c.kernel_rows {
                                for bb in 0..c.kernel_cols {
                                    z += kernel[a * c.kernel_cols + bb] * x[[i + a, j + bb]];
                                }
                            }
                            conv_pre[(f * oh + i) * ow + j] = z;
                            sum += act.apply(z);
                        }
                    }
                    pooled[f] = sum / (oh * ow) as f64;
                }
                pooled
            }
            _ => x.iter().copied().collect(),
        };

        let offset = self.arch.dense_offset();
        let shapes = self.arch.dense_shapes();
        let last = shapes.len() - 1;
        let mut dense_inputs = Vec::with_capacity(shapes.len());
        let mut hidden_pre = Vec::with_capacity(last);
        let mut current = features;
        for (layer, (fan_in, fan_out)) in shapes.into_iter().enumerate() {
            let w = &self.params[offset + 2 * layer];
            let b = &self.params[offset + 2 * layer + 1];
            let out: Vec<f64> = (0..fan_out)
                .map(|o| {
                    let row = &w[o * fan_in..(o + 1) * fan_in];
                    b[o] + row.iter().zip(&current).map(|(wi, xi)| wi * xi).sum::<f64>()
                })
                .collect();
            dense_inputs.push(current);
            if layer == last {
                current = out;
            } else {
                current = out.iter().map(|z| act.apply(*z)).collect();
                hidden_pre.push(out);
            }
        }
        Trace {
            conv_pre,
            dense_inputs,
            hidden_pre,
            logits: current,
        }
    }

    /// Logits for a single input block.
    pub fn logits(&self, x: &Array2<f64>) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.trace(x).logits)
    }

    /// Logits for a batch, shape `batch x K`.
    pub fn forward(&self, batch: &[Array2<f64>]) -> Result<Array2<f64>> {
        let k = self.arch.num_classes;
        let mut out = Array2::zeros((batch.len(), k));
        for (row, x) in batch.iter().enumerate() {
            let logits = self.logits(x)?;
            out.row_mut(row).assign(&ndarray::ArrayView1::from(&logits));
        }
        Ok(out)
    }

    /// Accumulates parameter gradients for one sample given `dL/dlogits`
    /// and returns `dL/dx`.
    fn backprop(
        &self,
        x: &Array2<f64>,
        trace: &Trace,
        dlogits: &[f64],
        grads: &mut [Vec<f64>],
    ) -> Array2<f64> {
        let act = self.arch.activation;
        let offset = self.arch.dense_offset();
        let shapes = self.arch.dense_shapes();
        let mut delta = dlogits.to_vec();
        for layer in (0..shapes.len()).rev() {
            let (fan_in, fan_out) = shapes[layer];
            let input = &trace.dense_inputs[layer];
            let w = &self.params[offset + 2 * layer];
            {
                let gw = &mut grads[offset + 2 * layer];
                for o in 0..fan_out {
                    for i in 0..fan_in {
                        gw[o * fan_in + i] += delta[o] * input[i];
                    }
                }
            }
            for (gb, d) in grads[offset + 2 * layer + 1].iter_mut().zip(&delta) {
                *gb += d;
            }
            let mut d_input = vec![0.0; fan_in];
            for o in 0..fan_out {
                for i in 0..fan_in {
                    d_input[i] += w[o * fan_in + i] * delta[o];
                }
            }
            if layer > 0 {
                let pre = &trace.hidden_pre[layer - 1];
                for (d, z) in d_input.iter_mut().zip(pre) {
                    *d *= act.derivative(*z);
                }
            }
            delta = d_input;
        }

        match (self.arch.conv, self.arch.conv_output()) {
            (Some(c), Some((oh, ow))) => {
                let w = &self.params[0];
                let scale = 1.0 / (oh * ow) as f64;
                let ksize = c.kernel_rows * c.kernel_cols;
                let mut dx = Array2::zeros(x.dim());
                for f in 0..c.filters {
                    let kernel = &w[f * ksize..(f + 1) * ksize];
                    let mut db = 0.0;
                    let mut dk = vec![0.0; ksize];
                    for i in 0..oh {
                        for j in 0..ow {
                            let z = trace.conv_pre[(f * oh + i) * ow + j];
                            let g = delta[f] * scale * act.derivative(z);
                            if g == 0.0 {
                                continue;
                            }
                            db += g;
                            for a in 0..c.kernel_rows {
                                for bb in 0..c.kernel_cols {
                                    dk[a * c.kernel_cols + bb] += g * x[[i + a, j + bb]];
                                    dx[[i + a, j + bb]] += g * kernel[a * c.kernel_cols + bb];
                                }
                            }
                        }
                    }
                    for (acc, v) in grads[0][f * ksize..(f + 1) * ksize].iter_mut().zip(dk) {
                        *acc += v;
                    }
                    grads[1][f] += db;
                }
                dx
            }
            _ => Array2::from_shape_vec(x.dim(), delta).expect("input-sized gradient"),
        }
    }

    fn zero_grads(&self) -> Vec<Vec<f64>> {
        self.params.iter().map(|p| vec![0.0; p.len()]).collect()
    }

    /// Parameter and input gradients of a scalar function of the logits of
    /// one block, given its gradient with respect to the logits.
    pub fn backward_from_logits(
        &self,
        x: &Array2<f64>,
        dlogits: &[f64],
    ) -> Result<(Vec<Vec<f64>>, Array2<f64>)> {
        self.check_input(x)?;
        if dlogits.len() != self.arch.num_classes {
            return Err(Error::shape(self.arch.num_classes, dlogits.len()));
        }
        let trace = self.trace(x);
        let mut grads = self.zero_grads();
        let dx = self.backprop(x, &trace, dlogits, &mut grads);
        Ok((grads, dx))
    }

    /// Mean loss over a batch and its exact gradients.
    ///
    /// The loss sees `softmax(logits)`, or `Q^T softmax(logits)` when a
    /// noise matrix is attached.
    pub fn loss_and_gradients(
        &self,
        inputs: &[Array2<f64>],
        targets: &[SoftLabel],
        loss: &LossKind,
    ) -> Result<(f64, Gradients)> {
        if inputs.len() != targets.len() {
            return Err(Error::shape(
                format!("{} targets", inputs.len()),
                format!("{} targets", targets.len()),
            ));
        }
        if inputs.is_empty() {
            return Err(Error::param("batch", "must not be empty"));
        }
        let k = self.arch.num_classes;
        let scale = 1.0 / inputs.len() as f64;
        let mut grads = self.zero_grads();
        let mut noise_grad = self.noise.as_ref().map(|_| vec![0.0; k * k]);
        let mut input_grads = Vec::with_capacity(inputs.len());
        let mut total = 0.0;

        for (x, target) in inputs.iter().zip(targets) {
            self.check_input(x)?;
            if target.num_classes() != k {
                return Err(Error::shape(format!("{k}-class target"), target.num_classes()));
            }
            let trace = self.trace(x);
            let probs = softmax::softmax_vec(&trace.logits, 1.0);
            let (value, dprobs) = match &self.noise {
                Some(q) => {
                    let noisy = q.apply_slice(&probs);
                    let (value, dnoisy) = loss.value_and_grad(&noisy, target);
                    let qd = q.as_slice();
                    let ng = noise_grad.as_mut().expect("noise gradient buffer");
                    for i in 0..k {
                        for j in 0..k {
                            ng[i * k + j] += scale * probs[i] * dnoisy[j];
                        }
                    }
                    let dprobs = (0..k)
                        .map(|i| (0..k).map(|j| qd[i * k + j] * dnoisy[j]).sum())
                        .collect::<Vec<f64>>();
                    (value, dprobs)
                }
                None => loss.value_and_grad(&probs, target),
            };
            total += value;
            let inner: f64 = probs.iter().zip(&dprobs).map(|(p, g)| p * g).sum();
            let dlogits: Vec<f64> = probs
                .iter()
                .zip(&dprobs)
                .map(|(p, g)| scale * p * (g - inner))
                .collect();
            input_grads.push(self.backprop(x, &trace, &dlogits, &mut grads));
        }
        Ok((
            total * scale,
            Gradients {
                params: grads,
                noise: noise_grad,
                inputs: input_grads,
            },
        ))
    }

    /// Mean loss over a batch without gradients.
    pub fn loss(&self, inputs: &[Array2<f64>], targets: &[SoftLabel], loss: &LossKind) -> Result<f64> {
        let mut total = 0.0;
        for (x, target) in inputs.iter().zip(targets) {
            let probs = softmax::softmax_vec(&self.logits(x)?, 1.0);
            let dist = match &self.noise {
                Some(q) => q.apply_slice(&probs),
                None => probs,
            };
            total += loss.value_and_grad(&dist, target).0;
        }
        Ok(total / inputs.len() as f64)
    }

    /// Class probabilities for one clip: the mean of per-block softmax
    /// outputs at temperature 1. The noise matrix is not applied.
    pub fn predict_clip(&self, blocks: &[Array2<f64>]) -> Result<SoftLabel> {
        let probs = blocks
            .iter()
            .map(|b| Ok(SoftLabel::from_simplex(softmax::softmax_vec(&self.logits(b)?, 1.0))))
            .collect::<Result<Vec<_>>>()?;
        softmax::mean_labels(&probs)
    }
}
