use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand::Rng;

use super::conv::{matmul, matmul_at, matmul_bt, Geometry};
use super::{Real, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerKind {
    Conv,
    TransposedConv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Identity,
}

/// One layer of a plain convolutional stack. All layers use SAME padding;
/// a stride-`s` conv divides the spatial size by `s`, a stride-`s`
/// transposed conv multiplies it by `s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub kernel: usize,
    pub stride: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn weight_count(&self) -> usize {
        self.kernel * self.kernel * self.in_channels * self.out_channels
    }

    pub fn param_count(&self) -> usize {
        self.weight_count() + self.out_channels
    }

    pub fn output_dims(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        match self.kind {
            LayerKind::Conv => {
                if !h.is_multiple_of(self.stride) || !w.is_multiple_of(self.stride) {
                    return Err(Error::validation(format!(
                        "{h}x{w} input is not divisible by stride {}",
                        self.stride
                    )));
                }
                Ok((h / self.stride, w / self.stride))
            }
            LayerKind::TransposedConv => Ok((h * self.stride, w * self.stride)),
        }
    }

    fn fan_in(&self) -> usize {
        match self.kind {
            LayerKind::Conv => self.in_channels * self.kernel * self.kernel,
            // each output sample sees about k²/s² input taps per channel
            LayerKind::TransposedConv => {
                (self.in_channels * self.kernel * self.kernel / (self.stride * self.stride)).max(1)
            }
        }
    }

    fn geometry(&self, in_h: usize, in_w: usize) -> Geometry {
        match self.kind {
            LayerKind::Conv => Geometry::new(self.in_channels, in_h, in_w, self.kernel, self.stride),
            LayerKind::TransposedConv => Geometry::new(
                self.out_channels,
                in_h * self.stride,
                in_w * self.stride,
                self.kernel,
                self.stride,
            ),
        }
    }
}

/// An ordered layer list describing one network.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NetworkSpec {
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    pub fn new(layers: Vec<LayerSpec>) -> Result<Self> {
        let spec = NetworkSpec { layers };
        spec.validate()?;
        Ok(spec)
    }

    /// Checks channel chaining and that exactly the last layer is linear.
    pub fn validate(&self) -> Result<()> {
        let Some(last) = self.layers.last() else {
            return Err(Error::validation("network has no layers"));
        };
        for (i, pair) in self.layers.windows(2).enumerate() {
            if pair[0].out_channels != pair[1].in_channels {
                return Err(Error::validation(format!(
                    "layer {} emits {} channels but layer {} expects {}",
                    i + 1,
                    pair[0].out_channels,
                    i + 2,
                    pair[1].in_channels
                )));
            }
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.kernel == 0 || l.stride == 0 || l.in_channels == 0 || l.out_channels == 0 {
                return Err(Error::validation(format!("layer {} has a zero extent", i + 1)));
            }
            let is_last = i + 1 == self.layers.len();
            if is_last != (l.activation == Activation::Identity) {
                return Err(Error::validation(
                    "exactly the last layer must be linear, all others ReLU",
                ));
            }
        }
        let _ = last;
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(LayerSpec::param_count).sum()
    }

    pub fn in_channels(&self) -> usize {
        self.layers[0].in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.layers[self.layers.len() - 1].out_channels
    }

    /// Spatial size produced for an `h × w` input, or a validation error if
    /// some strided layer would not divide evenly.
    pub fn output_dims(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        self.layers
            .iter()
            .try_fold((h, w), |(h, w), l| l.output_dims(h, w))
    }
}

/// Trainable parameters of one layer. Conv weights are laid out
/// `[out][in][k][k]`; transposed-conv weights `[in][out][k][k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<T> {
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

/// Gradients shaped like a network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads<T> {
    pub layers: Vec<LayerParams<T>>,
}

impl<T: Real> Grads<T> {
    pub fn zeros_like(spec: &NetworkSpec) -> Self {
        Grads {
            layers: spec
                .layers
                .iter()
                .map(|l| LayerParams {
                    weight: vec![T::zero(); l.weight_count()],
                    bias: vec![T::zero(); l.out_channels],
                })
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Grads<T>) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight.iter_mut().zip(&b.weight).for_each(|(x, &y)| *x += y);
            a.bias.iter_mut().zip(&b.bias).for_each(|(x, &y)| *x += y);
        }
    }

    pub fn scale(&mut self, s: T) {
        for l in &mut self.layers {
            l.weight.iter_mut().chain(l.bias.iter_mut()).for_each(|x| *x = *x * s);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.layers.iter().flat_map(|l| l.weight.iter().chain(l.bias.iter()))
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
}

/// Activations recorded by a forward pass: the input followed by each
/// layer's (post-activation) output.
#[derive(Debug, Clone)]
pub struct Tape<T> {
    pub activations: Vec<Tensor<T>>,
}

impl<T> Tape<T> {
    pub fn output(&self) -> &Tensor<T> {
        self.activations.last().expect("tape holds at least the input")
    }
}

/// A network spec together with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    spec: NetworkSpec,
    params: Vec<LayerParams<T>>,
}

/// Subtracts each output channel's mean weight.
fn center_filters(l: &LayerSpec, w: &mut [f64]) {
    let kk = l.kernel * l.kernel;
    let index = |o: usize, i: usize, t: usize| match l.kind {
        LayerKind::Conv => (o * l.in_channels + i) * kk + t,
        LayerKind::TransposedConv => (i * l.out_channels + o) * kk + t,
    };
    let per_out = (l.in_channels * kk) as f64;
    for o in 0..l.out_channels {
        let mut sum = 0.0;
        for i in 0..l.in_channels {
            for t in 0..kk {
                sum += w[index(o, i, t)];
            }
        }
        let mean = sum / per_out;
        for i in 0..l.in_channels {
            for t in 0..kk {
                w[index(o, i, t)] -= mean;
            }
        }
    }
}

impl<T: Real> Network<T> {
    /// Fan-in scaled uniform initialization (He for ReLU layers, LeCun for
    /// the linear head); biases start at zero.
    ///
    /// Filters of every layer after the first are shifted to zero mean per
    /// output channel. Their inputs are non-negative ReLU maps, so a filter
    /// with a negative weight sum would otherwise start out dead.
    pub fn init<R: Rng + ?Sized>(spec: NetworkSpec, rng: &mut R) -> Self {
        let params = spec
            .layers
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let gain = if l.activation == Activation::Relu { 6.0 } else { 3.0 };
                let bound = Float::sqrt(gain / l.fan_in() as f64);
                let mut w: Vec<f64> = (0..l.weight_count()).map(|_| rng.gen_range(-bound..bound)).collect();
                if i > 0 {
                    center_filters(l, &mut w);
                }
                LayerParams {
                    weight: w.into_iter().map(|v| T::from(v).unwrap_or_else(T::zero)).collect(),
                    bias: vec![T::zero(); l.out_channels],
                }
            })
            .collect();
        Network { spec, params }
    }

    pub fn from_parts(spec: NetworkSpec, params: Vec<LayerParams<T>>) -> Result<Self> {
        spec.validate()?;
        if params.len() != spec.layers.len() {
            return Err(Error::validation("parameter layer count does not match spec"));
        }
        for (l, p) in spec.layers.iter().zip(&params) {
            if p.weight.len() != l.weight_count() || p.bias.len() != l.out_channels {
                return Err(Error::validation("parameter shape does not match spec"));
            }
        }
        Ok(Network { spec, params })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn params(&self) -> &[LayerParams<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [LayerParams<T>] {
        &mut self.params
    }

    pub fn param_iter(&self) -> impl Iterator<Item = &T> {
        self.params.iter().flat_map(|l| l.weight.iter().chain(l.bias.iter()))
    }

    /// Converts every parameter to another scalar type.
    pub fn cast<U: Real>(&self) -> Network<U> {
        let conv = |v: &[T]| v.iter().map(|x| U::from(*x).unwrap_or_else(U::zero)).collect();
        Network {
            spec: self.spec.clone(),
            params: self
                .params
                .iter()
                .map(|p| LayerParams {
                    weight: conv(&p.weight),
                    bias: conv(&p.bias),
                })
                .collect(),
        }
    }

    /// FNV-1a over the bit patterns of every parameter.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in self.param_iter() {
            let bits = v.to_f64().unwrap_or(f64::NAN).to_bits();
            for b in bits.to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }

    fn check_input(&self, input: &Tensor<T>) -> Result<()> {
        if input.channels != self.spec.in_channels() {
            return Err(Error::validation(format!(
                "network expects {} input channels, got {}",
                self.spec.in_channels(),
                input.channels
            )));
        }
        self.spec.output_dims(input.height, input.width).map(|_| ())
    }

    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(input)?;
        let mut x = input.clone();
        for (l, p) in self.spec.layers.iter().zip(&self.params) {
            x = layer_forward(l, p, &x);
        }
        Ok(x)
    }

    pub fn forward_tape(&self, input: &Tensor<T>) -> Result<Tape<T>> {
        self.check_input(input)?;
        let mut activations = Vec::with_capacity(self.spec.layers.len() + 1);
        activations.push(input.clone());
        for (l, p) in self.spec.layers.iter().zip(&self.params) {
            let next = layer_forward(l, p, activations.last().expect("nonempty"));
            activations.push(next);
        }
        Ok(Tape { activations })
    }

    /// Reverse pass. `grad_out` is dLoss/d(output). Returns parameter
    /// gradients when `want_params`, and dLoss/d(input) when `want_input`.
    pub fn backward(
        &self,
        tape: &Tape<T>,
        grad_out: Tensor<T>,
        want_params: bool,
        want_input: bool,
    ) -> (Option<Grads<T>>, Option<Tensor<T>>) {
        let n = self.spec.layers.len();
        assert_eq!(tape.activations.len(), n + 1);
        let mut grads = want_params.then(|| Grads::zeros_like(&self.spec));
        let mut g = grad_out;
        for i in (0..n).rev() {
            let l = &self.spec.layers[i];
            if l.activation == Activation::Relu {
                let out = &tape.activations[i + 1];
                g.data
                    .iter_mut()
                    .zip(&out.data)
                    .for_each(|(gv, &o)| {
                        if o <= T::zero() {
                            *gv = T::zero();
                        }
                    });
            }
            let need_dx = i > 0 || want_input;
            let lg = grads.as_mut().map(|gr| &mut gr.layers[i]);
            let dx = layer_backward(l, &self.params[i], &tape.activations[i], &g, lg, need_dx);
            match dx {
                Some(dx) => g = dx,
                None => return (grads, None),
            }
        }
        (grads, want_input.then_some(g))
    }
}

fn layer_forward<T: Real>(l: &LayerSpec, p: &LayerParams<T>, x: &Tensor<T>) -> Tensor<T> {
    let geo = l.geometry(x.height, x.width);
    let (oh, ow) = l.output_dims(x.height, x.width).expect("checked by caller");
    let mut y = Tensor::zeros(l.out_channels, oh, ow);
    match l.kind {
        LayerKind::Conv => {
            let cols = geo.im2col(&x.data);
            matmul(l.out_channels, geo.rows(), geo.cols(), &p.weight, &cols, &mut y.data, false);
        }
        LayerKind::TransposedConv => {
            let mut cols = vec![T::zero(); geo.rows() * geo.cols()];
            matmul_at(geo.rows(), l.in_channels, geo.cols(), &p.weight, &x.data, &mut cols, false);
            geo.col2im(&cols, &mut y.data);
        }
    }
    let plane = oh * ow;
    for (c, &b) in p.bias.iter().enumerate() {
        let ch = &mut y.data[c * plane..(c + 1) * plane];
        match l.activation {
            Activation::Relu => ch.iter_mut().for_each(|v| *v = (*v + b).max(T::zero())),
            Activation::Identity => ch.iter_mut().for_each(|v| *v += b),
        }
    }
    y
}

/// `g` is the gradient at the layer's pre-activation output.
fn layer_backward<T: Real>(
    l: &LayerSpec,
    p: &LayerParams<T>,
    x: &Tensor<T>,
    g: &Tensor<T>,
    grads: Option<&mut LayerParams<T>>,
    need_dx: bool,
) -> Option<Tensor<T>> {
    let geo = l.geometry(x.height, x.width);
    let plane = g.height * g.width;
    match l.kind {
        LayerKind::Conv => {
            let cols = geo.im2col(&x.data);
            if let Some(gr) = grads {
                matmul_bt(l.out_channels, geo.cols(), geo.rows(), &g.data, &cols, &mut gr.weight, true);
                accumulate_bias(&mut gr.bias, &g.data, plane);
            }
            need_dx.then(|| {
                let mut dcols = cols;
                matmul_at(geo.rows(), l.out_channels, geo.cols(), &p.weight, &g.data, &mut dcols, false);
                let mut dx = Tensor::zeros(x.channels, x.height, x.width);
                geo.col2im(&dcols, &mut dx.data);
                dx
            })
        }
        LayerKind::TransposedConv => {
            let gcols = geo.im2col(&g.data);
            if let Some(gr) = grads {
                matmul_bt(l.in_channels, geo.cols(), geo.rows(), &x.data, &gcols, &mut gr.weight, true);
                accumulate_bias(&mut gr.bias, &g.data, plane);
            }
            need_dx.then(|| {
                let mut dx = Tensor::zeros(x.channels, x.height, x.width);
                matmul(l.in_channels, geo.rows(), geo.cols(), &p.weight, &gcols, &mut dx.data, false);
                dx
            })
        }
    }
}

fn accumulate_bias<T: Real>(bias: &mut [T], g: &[T], plane: usize) {
    for (c, b) in bias.iter_mut().enumerate() {
        *b += g[c * plane..(c + 1) * plane].iter().copied().sum::<T>();
    }
}
