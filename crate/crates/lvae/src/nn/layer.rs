//! Layer kinds, forward evaluation, and hand-derived backward rules.
//!
//! The network graph is a fixed sequence of layers, so reverse-mode
//! differentiation is implemented per layer kind rather than through a
//! general tape. Convolutions use "same" zero padding; strided transposed
//! convolutions are exact adjoints of the matching strided convolutions.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
        }
    }

    /// Derivative expressed through input `x` and output `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
    },
    TransposedConv {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
    },
    Dense {
        in_dim: usize,
        out_dim: usize,
    },
    Activation {
        function: Activation,
    },
    Flatten,
    Reshape {
        shape: Vec<usize>,
    },
}

impl LayerSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LayerSpec::Conv { kernel, stride, .. }
            | LayerSpec::TransposedConv { kernel, stride, .. } => {
                if kernel % 2 == 0 {
                    return Err(Error::Validation(format!(
                        "kernel size must be odd, got {kernel}"
                    )));
                }
                if stride == 0 {
                    return Err(Error::Validation("stride must be positive".into()));
                }
            }
            LayerSpec::Dense { in_dim, out_dim } => {
                if in_dim == 0 || out_dim == 0 {
                    return Err(Error::Validation("dense dimensions must be positive".into()));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Output shape for a given input shape, or a validation error when the
    /// input does not fit this layer.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match self {
            LayerSpec::Conv {
                in_channels,
                out_channels,
                stride,
                ..
            } => {
                let (c, h, w) = expect_chw(input)?;
                if c != *in_channels {
                    return Err(Error::Validation(format!(
                        "conv expects {in_channels} input channels, got {c}"
                    )));
                }
                Ok(vec![*out_channels, div_ceil(h, *stride), div_ceil(w, *stride)])
            }
            LayerSpec::TransposedConv {
                in_channels,
                out_channels,
                stride,
                ..
            } => {
                let (c, h, w) = expect_chw(input)?;
                if c != *in_channels {
                    return Err(Error::Validation(format!(
                        "transposed conv expects {in_channels} input channels, got {c}"
                    )));
                }
                Ok(vec![*out_channels, h * stride, w * stride])
            }
            LayerSpec::Dense { in_dim, out_dim } => {
                if input != [*in_dim] {
                    return Err(Error::Validation(format!(
                        "dense expects input shape [{in_dim}], got {input:?}"
                    )));
                }
                Ok(vec![*out_dim])
            }
            LayerSpec::Activation { .. } => Ok(input.to_vec()),
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
            LayerSpec::Reshape { shape } => {
                let len: usize = input.iter().product();
                let want: usize = shape.iter().product();
                if len != want {
                    return Err(Error::Validation(format!(
                        "reshape target {shape:?} does not match {len} input elements"
                    )));
                }
                Ok(shape.clone())
            }
        }
    }

    /// Shapes of this layer's parameter tensors (weights then bias).
    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        match *self {
            LayerSpec::Conv {
                in_channels,
                out_channels,
                kernel,
                ..
            } => vec![
                vec![out_channels, in_channels, kernel, kernel],
                vec![out_channels],
            ],
            LayerSpec::TransposedConv {
                in_channels,
                out_channels,
                kernel,
                ..
            } => vec![
                vec![in_channels, out_channels, kernel, kernel],
                vec![out_channels],
            ],
            LayerSpec::Dense { in_dim, out_dim } => vec![vec![out_dim, in_dim], vec![out_dim]],
            _ => vec![],
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn init_params(&self, rng: &mut impl Rng) -> Vec<Tensor> {
        let (fan_in, fan_out) = match *self {
            LayerSpec::Conv {
                in_channels,
                out_channels,
                kernel,
                ..
            }
            | LayerSpec::TransposedConv {
                in_channels,
                out_channels,
                kernel,
                ..
            } => (in_channels * kernel * kernel, out_channels * kernel * kernel),
            LayerSpec::Dense { in_dim, out_dim } => (in_dim, out_dim),
            _ => return vec![],
        };
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        self.param_shapes()
            .into_iter()
            .enumerate()
            .map(|(i, shape)| {
                let len = shape.iter().product();
                let data = if i == 0 {
                    (0..len).map(|_| rng.random_range(-limit..limit)).collect()
                } else {
                    vec![0.0; len]
                };
                Tensor::new(shape, data).expect("shape matches generated data")
            })
            .collect()
    }
}

fn expect_chw(shape: &[usize]) -> Result<(usize, usize, usize)> {
    match shape {
        [c, h, w] => Ok((*c, *h, *w)),
        other => Err(Error::Validation(format!(
            "expected a [channels, height, width] input, got {other:?}"
        ))),
    }
}

fn div_ceil(a: usize, b: usize) -> usize {
    a.div_ceil(b)
}

/// Top/left zero padding of a "same" convolution producing `ceil(in/stride)`
/// outputs.
fn same_padding(in_len: usize, kernel: usize, stride: usize) -> usize {
    let out_len = div_ceil(in_len, stride);
    let total = ((out_len - 1) * stride + kernel).saturating_sub(in_len);
    total / 2
}

/// Per-layer parameter tensors; empty for layers without parameters.
pub type LayerParams = Vec<Vec<Tensor>>;

/// Forward pass record: the input seen by each layer plus the final output.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<Tensor>,
    output: Tensor,
}

impl ForwardCache {
    pub fn output(&self) -> &Tensor {
        &self.output
    }

    /// The input each layer saw during the forward pass.
    pub fn layer_inputs(&self) -> &[Tensor] {
        &self.inputs
    }

    fn layer_output<'c>(&'c self, index: usize) -> &'c Tensor {
        if index + 1 < self.inputs.len() {
            &self.inputs[index + 1]
        } else {
            &self.output
        }
    }
}

/// A layer sequence with its parameters.
#[derive(Debug, Clone)]
pub struct LayerStack {
    pub layers: Vec<LayerSpec>,
    pub params: LayerParams,
}

impl LayerStack {
    pub fn init(layers: Vec<LayerSpec>, rng: &mut impl Rng) -> Result<Self> {
        for layer in &layers {
            layer.validate()?;
        }
        let params = layers.iter().map(|l| l.init_params(rng)).collect();
        Ok(LayerStack { layers, params })
    }

    /// Output shape of the whole stack for a given input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let mut shape = input.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            shape = layer
                .output_shape(&shape)
                .map_err(|e| Error::Validation(format!("layer {i}: {e}")))?;
        }
        Ok(shape)
    }

    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, ForwardCache)> {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut current = input.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            layer
                .output_shape(current.shape())
                .map_err(|e| Error::Validation(format!("layer {i}: {e}")))?;
            let next = forward_layer(layer, &self.params[i], &current)?;
            inputs.push(current);
            current = next;
        }
        Ok((
            current.clone(),
            ForwardCache {
                inputs,
                output: current,
            },
        ))
    }

    /// Reverse pass. Returns per-layer parameter gradients (mirroring
    /// `self.params`) and the gradient with respect to the stack input.
    pub fn backward(&self, cache: &ForwardCache, upstream: &Tensor) -> Result<(LayerParams, Tensor)> {
        if upstream.shape() != cache.output.shape() {
            return Err(Error::Validation(format!(
                "upstream gradient shape {:?} does not match output shape {:?}",
                upstream.shape(),
                cache.output.shape()
            )));
        }
        let mut grads: LayerParams = self
            .params
            .iter()
            .map(|ts| ts.iter().map(Tensor::zeros_like).collect())
            .collect();
        let mut upstream = upstream.clone();
        for i in (0..self.layers.len()).rev() {
            upstream = backward_layer(
                &self.layers[i],
                &self.params[i],
                &cache.inputs[i],
                cache.layer_output(i),
                &upstream,
                &mut grads[i],
            )?;
        }
        Ok((grads, upstream))
    }

    /// Smallest |preactivation| entering any ReLU layer during the cached
    /// forward pass. Central differences are only trustworthy when the probe
    /// step cannot push a preactivation across the kink at zero, so
    /// finite-difference tests reject inputs with a thin margin.
    pub fn relu_margin(&self, cache: &ForwardCache) -> f64 {
        let mut margin = f64::INFINITY;
        for (layer, input) in self.layers.iter().zip(cache.layer_inputs()) {
            if matches!(
                layer,
                LayerSpec::Activation {
                    function: Activation::Relu
                }
            ) {
                for &x in input.data() {
                    margin = margin.min(x.abs());
                }
            }
        }
        margin
    }

    /// Parameter gradients shaped like `self.params`, all zero.
    pub fn zero_grads(&self) -> LayerParams {
        self.params
            .iter()
            .map(|ts| ts.iter().map(Tensor::zeros_like).collect())
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().flatten().map(Tensor::len).sum()
    }
}

fn forward_layer(layer: &LayerSpec, params: &[Tensor], input: &Tensor) -> Result<Tensor> {
    match layer {
        LayerSpec::Conv { stride, kernel, .. } => {
            Ok(conv_forward(input, &params[0], &params[1], *kernel, *stride))
        }
        LayerSpec::TransposedConv { stride, kernel, .. } => Ok(tconv_forward(
            input, &params[0], &params[1], *kernel, *stride,
        )),
        LayerSpec::Dense { .. } => Ok(dense_forward(input, &params[0], &params[1])),
        LayerSpec::Activation { function } => {
            let data = input.data().iter().map(|&x| function.apply(x)).collect();
            Tensor::new(input.shape().to_vec(), data)
        }
        LayerSpec::Flatten => {
            let len = input.len();
            input.clone().reshaped(vec![len])
        }
        LayerSpec::Reshape { shape } => input.clone().reshaped(shape.clone()),
    }
}

fn backward_layer(
    layer: &LayerSpec,
    params: &[Tensor],
    input: &Tensor,
    output: &Tensor,
    upstream: &Tensor,
    grads: &mut [Tensor],
) -> Result<Tensor> {
    match layer {
        LayerSpec::Conv { stride, kernel, .. } => {
            let (dw, db, dx) = conv_backward(input, &params[0], upstream, *kernel, *stride);
            grads[0].add_assign(&dw);
            grads[1].add_assign(&db);
            Ok(dx)
        }
        LayerSpec::TransposedConv { stride, kernel, .. } => {
            let (dw, db, dx) = tconv_backward(input, &params[0], upstream, *kernel, *stride);
            grads[0].add_assign(&dw);
            grads[1].add_assign(&db);
            Ok(dx)
        }
        LayerSpec::Dense { .. } => {
            let (dw, db, dx) = dense_backward(input, &params[0], upstream);
            grads[0].add_assign(&dw);
            grads[1].add_assign(&db);
            Ok(dx)
        }
        LayerSpec::Activation { function } => {
            let data = input
                .data()
                .iter()
                .zip(output.data())
                .zip(upstream.data())
                .map(|((&x, &y), &g)| g * function.derivative(x, y))
                .collect();
            Tensor::new(input.shape().to_vec(), data)
        }
        LayerSpec::Flatten | LayerSpec::Reshape { .. } => {
            upstream.clone().reshaped(input.shape().to_vec())
        }
    }
}

fn dense_forward(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Tensor {
    let in_dim = input.len();
    let out_dim = bias.len();
    let w = weights.data();
    let x = input.data();
    let mut out = vec![0.0; out_dim];
    for (o, out_v) in out.iter_mut().enumerate() {
        let row = &w[o * in_dim..(o + 1) * in_dim];
        let mut acc = bias.data()[o];
        for (wv, xv) in row.iter().zip(x) {
            acc += wv * xv;
        }
        *out_v = acc;
    }
    Tensor::new(vec![out_dim], out).expect("dense output shape")
}

fn dense_backward(input: &Tensor, weights: &Tensor, upstream: &Tensor) -> (Tensor, Tensor, Tensor) {
    let in_dim = input.len();
    let out_dim = upstream.len();
    let x = input.data();
    let g = upstream.data();
    let w = weights.data();
    let mut dw = vec![0.0; out_dim * in_dim];
    let mut dx = vec![0.0; in_dim];
    for o in 0..out_dim {
        let go = g[o];
        let row = &w[o * in_dim..(o + 1) * in_dim];
        let drow = &mut dw[o * in_dim..(o + 1) * in_dim];
        for i in 0..in_dim {
            drow[i] = go * x[i];
            dx[i] += go * row[i];
        }
    }
    (
        Tensor::new(vec![out_dim, in_dim], dw).expect("dense weight grad shape"),
        Tensor::new(vec![out_dim], g.to_vec()).expect("dense bias grad shape"),
        Tensor::new(vec![in_dim], dx).expect("dense input grad shape"),
    )
}

fn conv_forward(input: &Tensor, weights: &Tensor, bias: &Tensor, k: usize, s: usize) -> Tensor {
    let (c_in, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let f_out = bias.len();
    let (ho, wo) = (div_ceil(h, s), div_ceil(w, s));
    let (pt, pl) = (same_padding(h, k, s), same_padding(w, k, s));
    let x = input.data();
    let kw_data = weights.data();
    let mut out = vec![0.0; f_out * ho * wo];
    for f in 0..f_out {
        for oh in 0..ho {
            for ow in 0..wo {
                let mut acc = bias.data()[f];
                for c in 0..c_in {
                    for kh in 0..k {
                        let ih = (oh * s + kh) as isize - pt as isize;
                        if ih < 0 || ih >= h as isize {
                            continue;
                        }
                        let x_row = &x[c * h * w + ih as usize * w..];
                        let w_row = &kw_data[((f * c_in + c) * k + kh) * k..];
                        for kk in 0..k {
                            let iw = (ow * s + kk) as isize - pl as isize;
                            if iw >= 0 && iw < w as isize {
                                acc += x_row[iw as usize] * w_row[kk];
                            }
                        }
                    }
                }
                out[(f * ho + oh) * wo + ow] = acc;
            }
        }
    }
    Tensor::new(vec![f_out, ho, wo], out).expect("conv output shape")
}

fn conv_backward(
    input: &Tensor,
    weights: &Tensor,
    upstream: &Tensor,
    k: usize,
    s: usize,
) -> (Tensor, Tensor, Tensor) {
    let (c_in, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let (f_out, ho, wo) = (
        upstream.shape()[0],
        upstream.shape()[1],
        upstream.shape()[2],
    );
    let (pt, pl) = (same_padding(h, k, s), same_padding(w, k, s));
    let x = input.data();
    let g = upstream.data();
    let kw_data = weights.data();
    let mut dw = vec![0.0; f_out * c_in * k * k];
    let mut db = vec![0.0; f_out];
    let mut dx = vec![0.0; c_in * h * w];
    for f in 0..f_out {
        for oh in 0..ho {
            for ow in 0..wo {
                let go = g[(f * ho + oh) * wo + ow];
                db[f] += go;
                for c in 0..c_in {
                    for kh in 0..k {
                        let ih = (oh * s + kh) as isize - pt as isize;
                        if ih < 0 || ih >= h as isize {
                            continue;
                        }
                        let x_base = c * h * w + ih as usize * w;
                        let w_base = ((f * c_in + c) * k + kh) * k;
                        for kk in 0..k {
                            let iw = (ow * s + kk) as isize - pl as isize;
                            if iw >= 0 && iw < w as isize {
                                dw[w_base + kk] += go * x[x_base + iw as usize];
                                dx[x_base + iw as usize] += go * kw_data[w_base + kk];
                            }
                        }
                    }
                }
            }
        }
    }
    (
        Tensor::new(vec![f_out, c_in, k, k], dw).expect("conv weight grad shape"),
        Tensor::new(vec![f_out], db).expect("conv bias grad shape"),
        Tensor::new(vec![c_in, h, w], dx).expect("conv input grad shape"),
    )
}

/// Strided transposed convolution: the adjoint of `conv_forward` from the
/// `[f, h*s, w*s]` side. Weight layout is `[in_channels, out_channels, k, k]`.
fn tconv_forward(input: &Tensor, weights: &Tensor, bias: &Tensor, k: usize, s: usize) -> Tensor {
    let (c_in, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let f_out = bias.len();
    let (ho, wo) = (h * s, w * s);
    // Padding of the mirror convolution [f, ho, wo] -> [c, h, w].
    let (pt, pl) = (same_padding(ho, k, s), same_padding(wo, k, s));
    let x = input.data();
    let kw_data = weights.data();
    let mut out = vec![0.0; f_out * ho * wo];
    for (f, &b) in bias.data().iter().enumerate() {
        for v in &mut out[f * ho * wo..(f + 1) * ho * wo] {
            *v = b;
        }
    }
    for c in 0..c_in {
        for i in 0..h {
            for j in 0..w {
                let v = x[(c * h + i) * w + j];
                if v == 0.0 {
                    continue;
                }
                for f in 0..f_out {
                    let w_base = (c * f_out + f) * k * k;
                    for kh in 0..k {
                        let y = (i * s + kh) as isize - pt as isize;
                        if y < 0 || y >= ho as isize {
                            continue;
                        }
                        let o_base = (f * ho + y as usize) * wo;
                        for kk in 0..k {
                            let xx = (j * s + kk) as isize - pl as isize;
                            if xx >= 0 && xx < wo as isize {
                                out[o_base + xx as usize] += v * kw_data[w_base + kh * k + kk];
                            }
                        }
                    }
                }
            }
        }
    }
    Tensor::new(vec![f_out, ho, wo], out).expect("transposed conv output shape")
}

fn tconv_backward(
    input: &Tensor,
    weights: &Tensor,
    upstream: &Tensor,
    k: usize,
    s: usize,
) -> (Tensor, Tensor, Tensor) {
    let (c_in, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let (f_out, ho, wo) = (
        upstream.shape()[0],
        upstream.shape()[1],
        upstream.shape()[2],
    );
    let (pt, pl) = (same_padding(ho, k, s), same_padding(wo, k, s));
    let x = input.data();
    let g = upstream.data();
    let kw_data = weights.data();
    let mut dw = vec![0.0; c_in * f_out * k * k];
    let mut db = vec![0.0; f_out];
    let mut dx = vec![0.0; c_in * h * w];
    for f in 0..f_out {
        for v in &g[f * ho * wo..(f + 1) * ho * wo] {
            db[f] += v;
        }
    }
    for c in 0..c_in {
        for i in 0..h {
            for j in 0..w {
                let xv = x[(c * h + i) * w + j];
                let mut acc = 0.0;
                for f in 0..f_out {
                    let w_base = (c * f_out + f) * k * k;
                    for kh in 0..k {
                        let y = (i * s + kh) as isize - pt as isize;
                        if y < 0 || y >= ho as isize {
                            continue;
                        }
                        let g_base = (f * ho + y as usize) * wo;
                        for kk in 0..k {
                            let xx = (j * s + kk) as isize - pl as isize;
                            if xx >= 0 && xx < wo as isize {
                                let gv = g[g_base + xx as usize];
                                acc += gv * kw_data[w_base + kh * k + kk];
                                dw[w_base + kh * k + kk] += gv * xv;
                            }
                        }
                    }
                }
                dx[(c * h + i) * w + j] = acc;
            }
        }
    }
    (
        Tensor::new(vec![c_in, f_out, k, k], dw).expect("transposed conv weight grad shape"),
        Tensor::new(vec![f_out], db).expect("transposed conv bias grad shape"),
        Tensor::new(vec![c_in, h, w], dx).expect("transposed conv input grad shape"),
    )
}

/// Gradient of a convolution with respect to its input, exposed for the
/// adjointness property: for bias-free kernels,
/// `<conv(x), y> == <x, conv_input_gradient(y)>`.
pub fn conv_input_gradient(
    input_shape: &[usize],
    weights: &Tensor,
    upstream: &Tensor,
    kernel: usize,
    stride: usize,
) -> Result<Tensor> {
    let input = Tensor::zeros(input_shape.to_vec());
    let (_, _, dx) = conv_backward(&input, weights, upstream, kernel, stride);
    Ok(dx)
}
