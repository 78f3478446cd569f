//! Small convolutional network trained from scratch with minibatch SGD.
//!
//! Architecture: edge-replicated padding on the input, two blocks of
//! (valid 3x3 convolution, ReLU, 2x2 max-pool), then one fully connected
//! layer onto the 8 class logits with softmax cross-entropy loss. Everything
//! is f64 and single-threaded; training is a pure function of
//! (data, config, seed).

use rand::Rng;

use crate::error::{Error, Result};
use crate::fault::{FaultLabel, NUM_CLASSES};
use crate::imaging::LabeledSample;
use crate::nb::argmax_label;
use crate::rng;

/// Dense row-major tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Tensor {
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Tensor> {
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::invalid(format!(
                "tensor shape {shape:?} does not match {} data values",
                data.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    fn dims3(&self) -> Result<(usize, usize, usize)> {
        match self.shape[..] {
            [c, h, w] => Ok((c, h, w)),
            _ => Err(Error::invalid(format!(
                "expected a (C,H,W) tensor, got shape {:?}",
                self.shape
            ))),
        }
    }

    fn dims4(&self) -> Result<(usize, usize, usize, usize)> {
        match self.shape[..] {
            [f, c, h, w] => Ok((f, c, h, w)),
            _ => Err(Error::invalid(format!(
                "expected a (F,C,Kh,Kw) tensor, got shape {:?}",
                self.shape
            ))),
        }
    }
}

/// Valid (no padding) cross-correlation of a (C,H,W) input with (F,C,k,k)
/// filters, stride 1.
pub fn conv2d_forward(input: &Tensor, weights: &Tensor, bias: &[f64]) -> Result<Tensor> {
    let (c_in, hi, wi) = input.dims3()?;
    let (f, c_w, kh, kw) = weights.dims4()?;
    if c_w != c_in || kh != kw {
        return Err(Error::invalid(format!(
            "filter shape {:?} incompatible with input channels {c_in}",
            weights.shape
        )));
    }
    let k = kh;
    if hi < k || wi < k {
        return Err(Error::invalid("input smaller than the kernel"));
    }
    if bias.len() != f {
        return Err(Error::invalid("bias length must equal filter count"));
    }
    let oh = hi - k + 1;
    let ow = wi - k + 1;
    let mut out = Tensor::zeros(&[f, oh, ow]);
    for fi in 0..f {
        let out_plane = &mut out.data[fi * oh * ow..(fi + 1) * oh * ow];
        out_plane.fill(bias[fi]);
        for c in 0..c_in {
            let in_plane = &input.data[c * hi * wi..(c + 1) * hi * wi];
            let w_base = (fi * c_in + c) * k * k;
            for ky in 0..k {
                for kx in 0..k {
                    let w = weights.data[w_base + ky * k + kx];
                    for y in 0..oh {
                        let in_row = &in_plane[(y + ky) * wi + kx..(y + ky) * wi + kx + ow];
                        let out_row = &mut out_plane[y * ow..y * ow + ow];
                        for (o, i) in out_row.iter_mut().zip(in_row) {
                            *o += w * i;
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Gradients of a conv layer. The input gradient is skipped for the first
/// layer, where nothing consumes it.
pub fn conv2d_backward(
    input: &Tensor,
    weights: &Tensor,
    grad_out: &Tensor,
    need_input_grad: bool,
) -> Result<(Option<Tensor>, Tensor, Vec<f64>)> {
    let (c_in, hi, wi) = input.dims3()?;
    let (f, _, k, _) = weights.dims4()?;
    let (fo, oh, ow) = grad_out.dims3()?;
    if fo != f || oh != hi - k + 1 || ow != wi - k + 1 {
        return Err(Error::invalid("gradient shape mismatch in conv backward"));
    }
    let mut grad_w = Tensor::zeros(&weights.shape);
    let mut grad_b = vec![0.0; f];
    let mut grad_in = if need_input_grad {
        Some(Tensor::zeros(&input.shape))
    } else {
        None
    };
    for fi in 0..f {
        let d_plane = &grad_out.data[fi * oh * ow..(fi + 1) * oh * ow];
        grad_b[fi] = d_plane.iter().sum();
        for c in 0..c_in {
            let in_plane = &input.data[c * hi * wi..(c + 1) * hi * wi];
            let w_base = (fi * c_in + c) * k * k;
            for ky in 0..k {
                for kx in 0..k {
                    let mut acc = 0.0;
                    for y in 0..oh {
                        let d_row = &d_plane[y * ow..y * ow + ow];
                        let in_row = &in_plane[(y + ky) * wi + kx..(y + ky) * wi + kx + ow];
                        for (d, i) in d_row.iter().zip(in_row) {
                            acc += d * i;
                        }
                    }
                    grad_w.data[w_base + ky * k + kx] = acc;
                }
            }
        }
    }
    if let Some(grad_in) = grad_in.as_mut() {
        for fi in 0..f {
            let d_plane = &grad_out.data[fi * oh * ow..(fi + 1) * oh * ow];
            for c in 0..c_in {
                let gi_plane = &mut grad_in.data[c * hi * wi..(c + 1) * hi * wi];
                let w_base = (fi * c_in + c) * k * k;
                for ky in 0..k {
                    for kx in 0..k {
                        let w = weights.data[w_base + ky * k + kx];
                        for y in 0..oh {
                            let d_row = &d_plane[y * ow..y * ow + ow];
                            let gi_row =
                                &mut gi_plane[(y + ky) * wi + kx..(y + ky) * wi + kx + ow];
                            for (g, d) in gi_row.iter_mut().zip(d_row) {
                                *g += w * d;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok((grad_in, grad_w, grad_b))
}

/// Elementwise max(0, x).
pub fn relu(t: &Tensor) -> Tensor {
    Tensor {
        shape: t.shape.clone(),
        data: t.data.iter().map(|&v| v.max(0.0)).collect(),
    }
}

/// Pass the upstream gradient where the pre-activation was strictly
/// positive; the subgradient at exactly 0 is 0.
pub fn relu_backward(pre_activation: &Tensor, upstream: &Tensor) -> Tensor {
    debug_assert_eq!(pre_activation.shape, upstream.shape);
    Tensor {
        shape: upstream.shape.clone(),
        data: pre_activation
            .data
            .iter()
            .zip(&upstream.data)
            .map(|(&x, &u)| if x > 0.0 { u } else { 0.0 })
            .collect(),
    }
}

/// Non-overlapping 2x2 max pooling, stride 2. The mask stores the flat input
/// index of each window's winner; ties go to the first element in row-major
/// window order.
pub fn maxpool2x2_forward(t: &Tensor) -> Result<(Tensor, Vec<u32>)> {
    let (c, h, w) = t.dims3()?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::invalid(format!(
            "max pooling requires even spatial dims, got {h}x{w}"
        )));
    }
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor::zeros(&[c, oh, ow]);
    let mut mask = vec![0u32; c * oh * ow];
    for ci in 0..c {
        let plane = &t.data[ci * h * w..(ci + 1) * h * w];
        for y in 0..oh {
            for x in 0..ow {
                let mut best_idx = (2 * y) * w + 2 * x;
                let mut best = plane[best_idx];
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = (2 * y + dy) * w + 2 * x + dx;
                    if plane[idx] > best {
                        best = plane[idx];
                        best_idx = idx;
                    }
                }
                out.data[(ci * oh + y) * ow + x] = best;
                mask[(ci * oh + y) * ow + x] = (ci * h * w + best_idx) as u32;
            }
        }
    }
    Ok((out, mask))
}

/// Route each upstream value to its window's winning input position.
pub fn maxpool2x2_backward(mask: &[u32], upstream: &Tensor, input_shape: &[usize]) -> Tensor {
    let mut out = Tensor::zeros(input_shape);
    for (&m, &u) in mask.iter().zip(&upstream.data) {
        out.data[m as usize] += u;
    }
    out
}

/// y = Wx + b with W of shape (out, in).
pub fn fc_forward(x: &[f64], w: &Tensor, b: &[f64]) -> Result<Vec<f64>> {
    let (m, n) = match w.shape[..] {
        [m, n] => (m, n),
        _ => return Err(Error::invalid("fc weights must be 2-D")),
    };
    if x.len() != n || b.len() != m {
        return Err(Error::invalid(format!(
            "fc shapes mismatch: x {} vs in {n}, b {} vs out {m}",
            x.len(),
            b.len()
        )));
    }
    let mut y = b.to_vec();
    for (row, yv) in y.iter_mut().enumerate() {
        let w_row = &w.data[row * n..(row + 1) * n];
        let mut acc = 0.0;
        for (wv, xv) in w_row.iter().zip(x) {
            acc += wv * xv;
        }
        *yv += acc;
    }
    Ok(y)
}

/// Standard dense-layer gradients: dW = u x^T, db = u, dx = W^T u.
pub fn fc_backward(x: &[f64], w: &Tensor, upstream: &[f64]) -> (Vec<f64>, Tensor, Vec<f64>) {
    let (m, n) = (w.shape[0], w.shape[1]);
    debug_assert_eq!(x.len(), n);
    debug_assert_eq!(upstream.len(), m);
    let mut grad_w = Tensor::zeros(&w.shape);
    let mut grad_x = vec![0.0; n];
    for row in 0..m {
        let u = upstream[row];
        let w_row = &w.data[row * n..(row + 1) * n];
        let gw_row = &mut grad_w.data[row * n..(row + 1) * n];
        for col in 0..n {
            gw_row[col] = u * x[col];
            grad_x[col] += u * w_row[col];
        }
    }
    (grad_x, grad_w, upstream.to_vec())
}

/// Numerically stable softmax cross-entropy; returns the loss and the
/// gradient on the logits (p - onehot).
pub fn softmax_xent(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    if logits.is_empty() {
        return Err(Error::invalid("softmax over an empty logit vector"));
    }
    if label >= logits.len() {
        return Err(Error::invalid(format!(
            "label {label} out of range for {} logits",
            logits.len()
        )));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let loss = sum.ln() + max - logits[label];
    let mut grad: Vec<f64> = exps.iter().map(|e| e / sum).collect();
    grad[label] -= 1.0;
    Ok((loss, grad))
}

/// Network hyperparameters and input geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnConfig {
    /// 1 for grayscale, 3 for RGB.
    pub in_channels: usize,
    pub in_height: usize,
    pub in_width: usize,
    pub conv1_filters: usize,
    pub conv2_filters: usize,
    pub kernel_size: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for CnnConfig {
    fn default() -> Self {
        CnnConfig {
            in_channels: 1,
            in_height: 64,
            in_width: 64,
            conv1_filters: 8,
            conv2_filters: 16,
            kernel_size: 3,
            batch_size: 32,
            learning_rate: 0.001,
            max_epochs: 100,
            seed: 0,
        }
    }
}

impl CnnConfig {
    fn pad(&self) -> usize {
        (self.kernel_size - 1) / 2
    }

    /// (pooled1 h/w, pooled2 h/w, flattened fc input size).
    fn geometry(&self) -> Result<((usize, usize), (usize, usize), usize)> {
        self.validate()?;
        let p1 = (self.in_height / 2, self.in_width / 2);
        let shrink = self.kernel_size - 1;
        let p2 = ((p1.0 - shrink) / 2, (p1.1 - shrink) / 2);
        Ok((p1, p2, self.conv2_filters * p2.0 * p2.1))
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels != 1 && self.in_channels != 3 {
            return Err(Error::invalid("in_channels must be 1 or 3"));
        }
        if self.kernel_size % 2 == 0 || self.kernel_size == 0 {
            return Err(Error::invalid("kernel_size must be odd"));
        }
        if self.conv1_filters == 0 || self.conv2_filters == 0 {
            return Err(Error::invalid("filter counts must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be positive"));
        }
        let shrink = self.kernel_size - 1;
        for (name, dim) in [("height", self.in_height), ("width", self.in_width)] {
            if dim % 2 != 0 {
                return Err(Error::invalid(format!("input {name} must be even")));
            }
            let after_pool1 = dim / 2;
            if after_pool1 <= shrink || (after_pool1 - shrink) % 2 != 0 {
                return Err(Error::invalid(format!(
                    "input {name} {dim} is incompatible with the two pool stages"
                )));
            }
        }
        Ok(())
    }
}

/// Trained network: weights, biases and the per-epoch mean training loss.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel {
    pub config: CnnConfig,
    pub conv1_w: Tensor,
    pub conv1_b: Vec<f64>,
    pub conv2_w: Tensor,
    pub conv2_b: Vec<f64>,
    pub fc_w: Tensor,
    pub fc_b: Vec<f64>,
    pub history: Vec<f64>,
}

fn he_uniform(rng: &mut rand_chacha::ChaCha8Rng, fan_in: usize, n: usize) -> Vec<f64> {
    let limit = (6.0 / fan_in as f64).sqrt();
    (0..n).map(|_| rng.random_range(-limit..limit)).collect()
}

impl CnnModel {
    /// Freshly initialized network: He-uniform weights, zero biases.
    pub fn init(config: &CnnConfig, seed: u64) -> Result<CnnModel> {
        let (_, _, fc_in) = config.geometry()?;
        let k = config.kernel_size;
        let mut rng = rng::stream_rng(seed, 0x1217);
        let c1_shape = [config.conv1_filters, config.in_channels, k, k];
        let c2_shape = [config.conv2_filters, config.conv1_filters, k, k];
        let fc_shape = [NUM_CLASSES, fc_in];
        let conv1_w = Tensor::new(
            &c1_shape,
            he_uniform(&mut rng, config.in_channels * k * k, c1_shape.iter().product()),
        )?;
        let conv2_w = Tensor::new(
            &c2_shape,
            he_uniform(&mut rng, config.conv1_filters * k * k, c2_shape.iter().product()),
        )?;
        let fc_w = Tensor::new(&fc_shape, he_uniform(&mut rng, fc_in, NUM_CLASSES * fc_in))?;
        Ok(CnnModel {
            config: config.clone(),
            conv1_b: vec![0.0; config.conv1_filters],
            conv2_b: vec![0.0; config.conv2_filters],
            fc_b: vec![0.0; NUM_CLASSES],
            conv1_w,
            conv2_w,
            fc_w,
            history: Vec::new(),
        })
    }

    /// Reshape a flattened [0,1] feature vector (row-major, RGB interleaved)
    /// into the planar (C,H,W) tensor the network consumes. The fixed input
    /// layer recenters pixels to [-0.5, 0.5]; without it the shared
    /// brightness component dominates every gradient and plain SGD at the
    /// configured rate spends its whole epoch budget fitting class priors.
    pub fn features_to_input(config: &CnnConfig, features: &[f64]) -> Result<Tensor> {
        let (c, h, w) = (config.in_channels, config.in_height, config.in_width);
        if features.len() != c * h * w {
            return Err(Error::invalid(format!(
                "feature length {} does not match {c}x{h}x{w}",
                features.len()
            )));
        }
        if c == 1 {
            return Tensor::new(&[1, h, w], features.iter().map(|v| v - 0.5).collect());
        }
        let mut data = vec![0.0; c * h * w];
        for px in 0..h * w {
            for ch in 0..c {
                data[ch * h * w + px] = features[px * c + ch] - 0.5;
            }
        }
        Tensor::new(&[c, h, w], data)
    }

    fn forward(&self, padded: &Tensor) -> Result<ForwardPass> {
        let conv1 = conv2d_forward(padded, &self.conv1_w, &self.conv1_b)?;
        let relu1 = relu(&conv1);
        let (pool1, mask1) = maxpool2x2_forward(&relu1)?;
        let conv2 = conv2d_forward(&pool1, &self.conv2_w, &self.conv2_b)?;
        let relu2 = relu(&conv2);
        let (pool2, mask2) = maxpool2x2_forward(&relu2)?;
        let logits = fc_forward(&pool2.data, &self.fc_w, &self.fc_b)?;
        Ok(ForwardPass {
            conv1,
            pool1,
            mask1,
            conv2,
            pool2,
            mask2,
            logits,
        })
    }

    /// Class logits for one unpadded (C,H,W) input.
    pub fn logits(&self, input: &Tensor) -> Result<Vec<f64>> {
        let (c, h, w) = input.dims3()?;
        if (c, h, w)
            != (
                self.config.in_channels,
                self.config.in_height,
                self.config.in_width,
            )
        {
            return Err(Error::invalid(format!(
                "input shape {:?} does not match the configured geometry",
                input.shape
            )));
        }
        let padded = pad_edge_replicate(input, self.config.pad());
        Ok(self.forward(&padded)?.logits)
    }

    /// Argmax over logits, ties to the lowest class code.
    pub fn predict(&self, input: &Tensor) -> Result<FaultLabel> {
        let logits = self.logits(input)?;
        let mut scores = [f64::NEG_INFINITY; NUM_CLASSES];
        scores.copy_from_slice(&logits);
        Ok(argmax_label(&scores))
    }
}

struct ForwardPass {
    conv1: Tensor,
    pool1: Tensor,
    mask1: Vec<u32>,
    conv2: Tensor,
    pool2: Tensor,
    mask2: Vec<u32>,
    logits: Vec<f64>,
}

/// Replicate the border pixels `pad` deep on both spatial axes.
fn pad_edge_replicate(t: &Tensor, pad: usize) -> Tensor {
    if pad == 0 {
        return t.clone();
    }
    let (c, h, w) = (t.shape[0], t.shape[1], t.shape[2]);
    let (hp, wp) = (h + 2 * pad, w + 2 * pad);
    let mut out = Tensor::zeros(&[c, hp, wp]);
    for ci in 0..c {
        for y in 0..hp {
            let sy = y.saturating_sub(pad).min(h - 1);
            for x in 0..wp {
                let sx = x.saturating_sub(pad).min(w - 1);
                out.data[(ci * hp + y) * wp + x] = t.data[(ci * h + sy) * w + sx];
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Sabotage {
    None,
    /// Test hook: break the ReLU backward pass by ignoring the gate.
    #[allow(dead_code)]
    ReluBackward,
}

struct Gradients {
    conv1_w: Tensor,
    conv1_b: Vec<f64>,
    conv2_w: Tensor,
    conv2_b: Vec<f64>,
    fc_w: Tensor,
    fc_b: Vec<f64>,
}

impl Gradients {
    fn zeros(model: &CnnModel) -> Gradients {
        Gradients {
            conv1_w: Tensor::zeros(&model.conv1_w.shape),
            conv1_b: vec![0.0; model.conv1_b.len()],
            conv2_w: Tensor::zeros(&model.conv2_w.shape),
            conv2_b: vec![0.0; model.conv2_b.len()],
            fc_w: Tensor::zeros(&model.fc_w.shape),
            fc_b: vec![0.0; model.fc_b.len()],
        }
    }
}

fn add_into(acc: &mut [f64], inc: &[f64]) {
    for (a, i) in acc.iter_mut().zip(inc) {
        *a += i;
    }
}

/// Forward + backward for one sample; accumulates parameter gradients and
/// returns the loss.
fn backprop(
    model: &CnnModel,
    padded: &Tensor,
    label: usize,
    grads: &mut Gradients,
    sabotage: Sabotage,
) -> Result<f64> {
    let pass = model.forward(padded)?;
    let (loss, dlogits) = softmax_xent(&pass.logits, label)?;
    let (dfc_x, dfc_w, dfc_b) = fc_backward(&pass.pool2.data, &model.fc_w, &dlogits);
    add_into(&mut grads.fc_w.data, &dfc_w.data);
    add_into(&mut grads.fc_b, &dfc_b);

    let dpool2 = Tensor {
        shape: pass.pool2.shape.clone(),
        data: dfc_x,
    };
    let drelu2 = maxpool2x2_backward(&pass.mask2, &dpool2, &pass.conv2.shape);
    let dconv2 = gated_relu_backward(&pass.conv2, &drelu2, sabotage);
    let (dpool1, dw2, db2) = conv2d_backward(&pass.pool1, &model.conv2_w, &dconv2, true)?;
    add_into(&mut grads.conv2_w.data, &dw2.data);
    add_into(&mut grads.conv2_b, &db2);

    let drelu1 = maxpool2x2_backward(&pass.mask1, &dpool1.unwrap(), &pass.conv1.shape);
    let dconv1 = gated_relu_backward(&pass.conv1, &drelu1, sabotage);
    let (_, dw1, db1) = conv2d_backward(padded, &model.conv1_w, &dconv1, false)?;
    add_into(&mut grads.conv1_w.data, &dw1.data);
    add_into(&mut grads.conv1_b, &db1);
    Ok(loss)
}

fn gated_relu_backward(pre: &Tensor, upstream: &Tensor, sabotage: Sabotage) -> Tensor {
    match sabotage {
        Sabotage::None => relu_backward(pre, upstream),
        Sabotage::ReluBackward => upstream.clone(),
    }
}

fn sgd_step(param: &mut [f64], grad: &[f64], scale: f64) {
    for (p, g) in param.iter_mut().zip(grad) {
        *p -= scale * g;
    }
}

/// Train a fresh network: per epoch, a seeded shuffle, minibatches of
/// `batch_size` (final partial batch included), mean-gradient SGD updates,
/// and the epoch's mean sample loss appended to the history.
pub fn cnn_train(samples: &[LabeledSample], config: &CnnConfig) -> Result<CnnModel> {
    if samples.is_empty() {
        return Err(Error::invalid("cannot train on an empty dataset"));
    }
    let mut model = CnnModel::init(config, config.seed)?;
    let pad = config.pad();
    let mut inputs = Vec::with_capacity(samples.len());
    for s in samples {
        let input = CnnModel::features_to_input(config, &s.features)?;
        inputs.push(pad_edge_replicate(&input, pad));
    }
    let labels: Vec<usize> = samples.iter().map(|s| s.label.code() as usize).collect();

    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut shuffle_rng = rng::stream_rng(config.seed, 0x50FF);
    for _ in 0..config.max_epochs {
        use rand::seq::SliceRandom;
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut grads = Gradients::zeros(&model);
            for &i in batch {
                loss_sum += backprop(&model, &inputs[i], labels[i], &mut grads, Sabotage::None)?;
            }
            let scale = config.learning_rate / batch.len() as f64;
            sgd_step(&mut model.conv1_w.data, &grads.conv1_w.data, scale);
            sgd_step(&mut model.conv1_b, &grads.conv1_b, scale);
            sgd_step(&mut model.conv2_w.data, &grads.conv2_w.data, scale);
            sgd_step(&mut model.conv2_b, &grads.conv2_b, scale);
            sgd_step(&mut model.fc_w.data, &grads.fc_w.data, scale);
            sgd_step(&mut model.fc_b, &grads.fc_b, scale);
        }
        model.history.push(loss_sum / samples.len() as f64);
    }
    Ok(model)
}

/// Maximum relative error between analytic and central-difference gradients
/// over at least 50 randomly chosen parameters of a seeded network on a
/// small random batch.
pub fn gradient_check(config: &CnnConfig, seed: u64) -> Result<f64> {
    run_gradient_check(config, seed, Sabotage::None)
}

pub(crate) fn run_gradient_check(
    config: &CnnConfig,
    seed: u64,
    sabotage: Sabotage,
) -> Result<f64> {
    const H: f64 = 1e-4;
    const CHECKS: usize = 50;
    let mut model = CnnModel::init(config, seed)?;
    let mut rng = rng::stream_rng(seed, 0x96AD);
    let n_inputs = 2;
    let volume = config.in_channels * config.in_height * config.in_width;
    let inputs: Vec<Tensor> = (0..n_inputs)
        .map(|_| {
            let features: Vec<f64> = (0..volume).map(|_| rng.random::<f64>()).collect();
            let raw = CnnModel::features_to_input(config, &features).unwrap();
            pad_edge_replicate(&raw, config.pad())
        })
        .collect();
    let labels: Vec<usize> = (0..n_inputs)
        .map(|_| rng.random_range(0..NUM_CLASSES))
        .collect();

    let mut grads = Gradients::zeros(&model);
    for (input, &label) in inputs.iter().zip(&labels) {
        backprop(&model, input, label, &mut grads, sabotage)?;
    }
    let batch_loss = |model: &CnnModel| -> f64 {
        inputs
            .iter()
            .zip(&labels)
            .map(|(input, &label)| {
                let pass = model.forward(input).unwrap();
                softmax_xent(&pass.logits, label).unwrap().0
            })
            .sum::<f64>()
            / n_inputs as f64
    };

    let tensor_sizes = [
        model.conv1_w.data.len(),
        model.conv1_b.len(),
        model.conv2_w.data.len(),
        model.conv2_b.len(),
        model.fc_w.data.len(),
        model.fc_b.len(),
    ];
    let mut max_rel = 0.0f64;
    for _ in 0..CHECKS {
        let tensor = rng.random_range(0..tensor_sizes.len());
        let index = rng.random_range(0..tensor_sizes[tensor]);
        let analytic = {
            let g = match tensor {
                0 => &grads.conv1_w.data,
                1 => &grads.conv1_b,
                2 => &grads.conv2_w.data,
                3 => &grads.conv2_b,
                4 => &grads.fc_w.data,
                _ => &grads.fc_b,
            };
            g[index] / n_inputs as f64
        };
        let original = {
            let slot = param_slot(&mut model, tensor, index);
            *slot
        };
        *param_slot(&mut model, tensor, index) = original + H;
        let plus = batch_loss(&model);
        *param_slot(&mut model, tensor, index) = original - H;
        let minus = batch_loss(&model);
        *param_slot(&mut model, tensor, index) = original;
        let numeric = (plus - minus) / (2.0 * H);
        let rel = (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8);
        max_rel = max_rel.max(rel);
    }
    Ok(max_rel)
}

fn param_slot(model: &mut CnnModel, tensor: usize, index: usize) -> &mut f64 {
    match tensor {
        0 => &mut model.conv1_w.data[index],
        1 => &mut model.conv1_b[index],
        2 => &mut model.conv2_w.data[index],
        3 => &mut model.conv2_b[index],
        4 => &mut model.fc_w.data[index],
        _ => &mut model.fc_b[index],
    }
}
