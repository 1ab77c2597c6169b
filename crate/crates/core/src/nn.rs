//! Dense layers and feed-forward stacks with hand-written backward passes.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use rand::Rng;

use crate::math;

pub const LEAKY_SLOPE: f64 = 0.01;

/// Access to the raw parameter buffers of a module, in a fixed order.
///
/// Gradient containers are values of the same type, so zipping
/// `params.tensors_mut()` with `grads.tensors()` lines buffers up.
pub trait ParamTensors {
    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    fn zero(&mut self) {
        for t in self.tensors_mut() {
            t.fill(0.0);
        }
    }

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    /// Adds `scale * other` element-wise.
    fn add_scaled(&mut self, other: &Self, scale: f64)
    where
        Self: Sized,
    {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Activation {
    Identity,
    Relu,
    LeakyRelu,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::LeakyRelu => {
                if x > 0.0 {
                    x
                } else {
                    LEAKY_SLOPE * x
                }
            }
        }
    }

    /// Derivative evaluated at the pre-activation `x`.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu => {
                if x > 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
        }
    }
}

/// Fully connected layer, `y = W x + b` with `W` stored row-major (`n_out x n_in`).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Dense {
    pub n_in: usize,
    pub n_out: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    /// Uniform initialisation in `±1/sqrt(n_in)` for weights and bias.
    pub fn new<R: Rng + ?Sized>(n_in: usize, n_out: usize, rng: &mut R) -> Self {
        let bound = 1.0 / math::sqrt(n_in.max(1) as f64);
        let weight = (0..n_in * n_out)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        let bias = (0..n_out).map(|_| rng.random_range(-bound..bound)).collect();
        Dense {
            n_in,
            n_out,
            weight,
            bias,
        }
    }

    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Dense {
            n_in,
            n_out,
            weight: vec![0.0; n_in * n_out],
            bias: vec![0.0; n_out],
        }
    }

    pub fn zeros_like(&self) -> Self {
        Dense::zeros(self.n_in, self.n_out)
    }

    #[inline]
    pub fn row(&self, o: usize) -> &[f64] {
        &self.weight[o * self.n_in..(o + 1) * self.n_in]
    }

    pub fn forward(&self, x: &[f64], out: &mut [f64]) {
        self.forward_rows(x, 0..self.n_out, out);
    }

    /// Computes only the outputs in `rows`; `out` has `rows.len()` entries.
    pub fn forward_rows(&self, x: &[f64], rows: Range<usize>, out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_in);
        debug_assert_eq!(out.len(), rows.len());
        for (slot, o) in out.iter_mut().zip(rows) {
            let w = self.row(o);
            let mut acc = self.bias[o];
            for (wi, xi) in w.iter().zip(x) {
                acc += wi * xi;
            }
            *slot = acc;
        }
    }

    pub fn backward(&self, x: &[f64], grad_out: &[f64], grad: &mut Dense, grad_in: Option<&mut [f64]>) {
        self.backward_rows(x, 0..self.n_out, grad_out, grad, grad_in);
    }

    /// Accumulates parameter gradients for the outputs in `rows` and, when
    /// requested, adds the input gradient into `grad_in`.
    pub fn backward_rows(
        &self,
        x: &[f64],
        rows: Range<usize>,
        grad_out: &[f64],
        grad: &mut Dense,
        mut grad_in: Option<&mut [f64]>,
    ) {
        let n_in = self.n_in;
        for (&g, o) in grad_out.iter().zip(rows) {
            if g == 0.0 {
                continue;
            }
            grad.bias[o] += g;
            let gw = &mut grad.weight[o * n_in..(o + 1) * n_in];
            for (gwi, xi) in gw.iter_mut().zip(x) {
                *gwi += g * xi;
            }
            if let Some(gi) = grad_in.as_deref_mut() {
                for (gii, wi) in gi.iter_mut().zip(self.row(o)) {
                    *gii += g * wi;
                }
            }
        }
    }
}

impl ParamTensors for Dense {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![&self.weight, &self.bias]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Feed-forward stack. Every layer but the last uses `hidden`; the last uses `output`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Mlp {
    pub layers: Vec<Dense>,
    pub hidden: Activation,
    pub output: Activation,
}

/// Activations recorded by [`Mlp::forward_cached`].
#[derive(Debug, Clone, Default)]
pub struct MlpCache {
    /// `inputs[l]` is the input of layer `l`; the final entry is the network output.
    pub inputs: Vec<Vec<f64>>,
    pub pre: Vec<Vec<f64>>,
}

impl MlpCache {
    pub fn output(&self) -> &[f64] {
        self.inputs.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl Mlp {
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], hidden: Activation, output: Activation, rng: &mut R) -> Self {
        let layers = sizes.windows(2).map(|w| Dense::new(w[0], w[1], rng)).collect();
        Mlp {
            layers,
            hidden,
            output,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Mlp {
            layers: self.layers.iter().map(Dense::zeros_like).collect(),
            hidden: self.hidden,
            output: self.output,
        }
    }

    pub fn n_in(&self) -> usize {
        self.layers.first().map_or(0, |l| l.n_in)
    }

    pub fn n_out(&self) -> usize {
        self.layers.last().map_or(0, |l| l.n_out)
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers.len() {
            self.output
        } else {
            self.hidden
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut cur = x.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let act = self.activation(l);
            let mut next = vec![0.0; layer.n_out];
            layer.forward(&cur, &mut next);
            for v in next.iter_mut() {
                *v = act.apply(*v);
            }
            cur = next;
        }
        cur
    }

    pub fn forward_cached(&self, x: &[f64]) -> MlpCache {
        let mut cache = MlpCache {
            inputs: Vec::with_capacity(self.layers.len() + 1),
            pre: Vec::with_capacity(self.layers.len()),
        };
        cache.inputs.push(x.to_vec());
        for (l, layer) in self.layers.iter().enumerate() {
            let act = self.activation(l);
            let mut pre = vec![0.0; layer.n_out];
            layer.forward(&cache.inputs[l], &mut pre);
            let post = pre.iter().map(|&v| act.apply(v)).collect();
            cache.pre.push(pre);
            cache.inputs.push(post);
        }
        cache
    }

    /// Backpropagates `grad_out` (gradient w.r.t. the network output) through
    /// the recorded activations, accumulating into `grads`.
    pub fn backward(&self, cache: &MlpCache, grad_out: &[f64], grads: &mut Mlp, grad_in: Option<&mut [f64]>) {
        let mut g: Vec<f64> = grad_out.to_vec();
        let n = self.layers.len();
        let mut grad_in = grad_in;
        for l in (0..n).rev() {
            let act = self.activation(l);
            for (gi, &p) in g.iter_mut().zip(&cache.pre[l]) {
                *gi *= act.derivative(p);
            }
            let layer = &self.layers[l];
            if l == 0 {
                layer.backward(&cache.inputs[0], &g, &mut grads.layers[0], grad_in.take());
            } else {
                let mut below = vec![0.0; layer.n_in];
                layer.backward(&cache.inputs[l], &g, &mut grads.layers[l], Some(&mut below));
                g = below;
            }
        }
    }
}

impl ParamTensors for Mlp {
    fn tensors(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| l.tensors()).collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers.iter_mut().flat_map(|l| l.tensors_mut()).collect()
    }
}
