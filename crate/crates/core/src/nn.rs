//! Minimal dense-network machinery shared by the self-model and the
//! blendshape decoder.
//!
//! Hand-rolled on purpose: training must be bit-for-bit reproducible
//! across runs, the models are desk-scale (widths ≤ a few hundred), and
//! both forward and reverse passes need to be simple enough to verify
//! against central finite differences. Parameters are initialized
//! uniformly in `±1/sqrt(fan_in)` from the seeded PRNG, layer by layer,
//! weights (row-major) before biases — the draw order is part of the
//! reproducibility contract.

use crate::error::{Error, Result};
use crate::prng::Pcg32;
use crate::scalar::Real;

/// Elementwise nonlinearity applied after each hidden layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    /// Smooth saturating default.
    Tanh,
    /// No-op; makes a bias-only or purely linear network.
    Identity,
}

impl Activation {
    /// Applies the activation.
    pub fn apply<R: Real>(self, z: R) -> R {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed in terms of the activation *output* `a`.
    pub fn derivative_from_output<R: Real>(self, a: R) -> R {
        match self {
            Activation::Tanh => R::one() - a * a,
            Activation::Identity => R::one(),
        }
    }

    /// Stable byte tag for file formats.
    pub fn to_tag(self) -> u8 {
        match self {
            Activation::Tanh => 0,
            Activation::Identity => 1,
        }
    }

    /// Inverse of [`Activation::to_tag`].
    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Activation::Tanh),
            1 => Ok(Activation::Identity),
            other => Err(Error::format(format!("unknown activation tag {other}"))),
        }
    }
}

/// One dense layer: `y = W x + b`, `W` stored row-major (`out × in`).
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<R> {
    /// Weight matrix, row-major `out_dim × in_dim`.
    pub w: Vec<R>,
    /// Bias vector, length `out_dim`.
    pub b: Vec<R>,
    /// Input width.
    pub in_dim: usize,
    /// Output width.
    pub out_dim: usize,
}

impl<R: Real> Dense<R> {
    /// Fresh layer with `±1/sqrt(in_dim)` uniform init; draws all
    /// weights row-major, then all biases.
    pub fn init(in_dim: usize, out_dim: usize, rng: &mut Pcg32) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        let w = (0..in_dim * out_dim)
            .map(|_| R::of(rng.uniform(-bound, bound)))
            .collect();
        let b = (0..out_dim)
            .map(|_| R::of(rng.uniform(-bound, bound)))
            .collect();
        Dense {
            w,
            b,
            in_dim,
            out_dim,
        }
    }

    /// `y = W x + b`.
    pub fn forward(&self, x: &[R]) -> Vec<R> {
        debug_assert_eq!(x.len(), self.in_dim);
        let mut y = self.b.clone();
        for (j, yj) in y.iter_mut().enumerate() {
            let row = &self.w[j * self.in_dim..(j + 1) * self.in_dim];
            let mut acc = *yj;
            for (wk, xk) in row.iter().zip(x) {
                acc += *wk * *xk;
            }
            *yj = acc;
        }
        y
    }

    /// Accumulates parameter gradients for one sample and returns the
    /// gradient w.r.t. the layer input.
    ///
    /// `g` is the gradient w.r.t. the layer *output* (post-bias,
    /// pre-activation of the next stage).
    pub fn backward(&self, x: &[R], g: &[R], grads: &mut DenseGrads<R>) -> Vec<R> {
        debug_assert_eq!(g.len(), self.out_dim);
        let mut gx = vec![R::zero(); self.in_dim];
        for (j, &gj) in g.iter().enumerate() {
            grads.b[j] += gj;
            let row = &self.w[j * self.in_dim..(j + 1) * self.in_dim];
            let grow = &mut grads.w[j * self.in_dim..(j + 1) * self.in_dim];
            for k in 0..self.in_dim {
                grow[k] += gj * x[k];
                gx[k] += row[k] * gj;
            }
        }
        gx
    }

    /// Zeroed gradient buffers matching this layer.
    pub fn zero_grads(&self) -> DenseGrads<R> {
        DenseGrads {
            w: vec![R::zero(); self.w.len()],
            b: vec![R::zero(); self.b.len()],
        }
    }

    /// Number of parameters.
    pub fn param_count(&self) -> usize {
        self.w.len() + self.b.len()
    }
}

/// Gradient (or optimizer-state) buffers for one [`Dense`] layer.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads<R> {
    /// Weight gradients, same layout as [`Dense::w`].
    pub w: Vec<R>,
    /// Bias gradients.
    pub b: Vec<R>,
}

impl<R: Real> DenseGrads<R> {
    /// Resets buffers to zero.
    pub fn zero(&mut self) {
        self.w.iter_mut().for_each(|g| *g = R::zero());
        self.b.iter_mut().for_each(|g| *g = R::zero());
    }

    /// Scales both buffers by `s`.
    pub fn scale(&mut self, s: R) {
        self.w.iter_mut().for_each(|g| *g *= s);
        self.b.iter_mut().for_each(|g| *g *= s);
    }
}

/// Multilayer perceptron: hidden layers share one activation, the
/// output layer is linear.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<R> {
    /// Layers, input side first.
    pub layers: Vec<Dense<R>>,
    /// Hidden-layer activation.
    pub activation: Activation,
}

/// Forward-pass cache for [`Mlp::backward`]: post-activation values of
/// every stage, `acts[0]` = network input, `acts.last()` = output.
#[derive(Debug, Clone)]
pub struct MlpCache<R> {
    /// Stage activations, input first.
    pub acts: Vec<Vec<R>>,
}

/// Gradient buffers mirroring an [`Mlp`]'s layers.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads<R> {
    /// Per-layer buffers.
    pub layers: Vec<DenseGrads<R>>,
}

impl<R: Real> MlpGrads<R> {
    /// Resets all buffers to zero.
    pub fn zero(&mut self) {
        self.layers.iter_mut().for_each(DenseGrads::zero);
    }

    /// Scales all buffers by `s`.
    pub fn scale(&mut self, s: R) {
        self.layers.iter_mut().for_each(|l| l.scale(s));
    }

    /// Visits every gradient in canonical order (layer, weights
    /// row-major, then biases).
    pub fn visit<F: FnMut(R)>(&self, mut f: F) {
        for l in &self.layers {
            l.w.iter().for_each(|&g| f(g));
            l.b.iter().for_each(|&g| f(g));
        }
    }
}

impl<R: Real> Mlp<R> {
    /// Builds an MLP with the given hidden widths.
    ///
    /// `dims` = input width, hidden widths..., output width. All draws
    /// come from `rng` in layer order.
    pub fn init(dims: &[usize], activation: Activation, rng: &mut Pcg32) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::config(
                "MLP needs at least input and output dims".to_string(),
            ));
        }
        if dims.contains(&0) {
            return Err(Error::config(
                "MLP layer width must be positive".to_string(),
            ));
        }
        let layers = dims
            .windows(2)
            .map(|w| Dense::init(w[0], w[1], rng))
            .collect();
        Ok(Mlp { layers, activation })
    }

    /// Plain forward pass.
    pub fn forward(&self, x: &[R]) -> Vec<R> {
        let last = self.layers.len() - 1;
        let mut a = x.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = layer.forward(&a);
            if l < last {
                z.iter_mut().for_each(|v| *v = self.activation.apply(*v));
            }
            a = z;
        }
        a
    }

    /// Forward pass retaining the activations needed by
    /// [`Mlp::backward`].
    pub fn forward_cached(&self, x: &[R]) -> MlpCache<R> {
        let last = self.layers.len() - 1;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = layer.forward(acts.last().unwrap());
            if l < last {
                z.iter_mut().for_each(|v| *v = self.activation.apply(*v));
            }
            acts.push(z);
        }
        MlpCache { acts }
    }

    /// Network output from a cache.
    pub fn output<'a>(&self, cache: &'a MlpCache<R>) -> &'a [R] {
        cache.acts.last().unwrap()
    }

    /// Reverse pass: accumulates parameter gradients into `grads` and
    /// returns the gradient w.r.t. the network input.
    ///
    /// `grad_out` is the loss gradient w.r.t. the network output.
    pub fn backward(&self, cache: &MlpCache<R>, grad_out: &[R], grads: &mut MlpGrads<R>) -> Vec<R> {
        let last = self.layers.len() - 1;
        let mut g = grad_out.to_vec();
        for l in (0..self.layers.len()).rev() {
            if l < last {
                // Hidden stage: fold in the activation derivative.
                for (gv, &a) in g.iter_mut().zip(&cache.acts[l + 1]) {
                    *gv *= self.activation.derivative_from_output(a);
                }
            }
            g = self.layers[l].backward(&cache.acts[l], &g, &mut grads.layers[l]);
        }
        g
    }

    /// Zeroed gradient buffers matching this network.
    pub fn zero_grads(&self) -> MlpGrads<R> {
        MlpGrads {
            layers: self.layers.iter().map(Dense::zero_grads).collect(),
        }
    }

    /// Total parameter count.
    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Dense::param_count).sum()
    }

    /// Visits every parameter in canonical order.
    pub fn visit_params<F: FnMut(R)>(&self, mut f: F) {
        for l in &self.layers {
            l.w.iter().for_each(|&p| f(p));
            l.b.iter().for_each(|&p| f(p));
        }
    }

    /// Mutable visit over every parameter in canonical order.
    pub fn visit_params_mut<F: FnMut(&mut R)>(&mut self, mut f: F) {
        for l in &mut self.layers {
            l.w.iter_mut().for_each(&mut f);
            l.b.iter_mut().for_each(&mut f);
        }
    }

    /// SGD-with-momentum update: `v ← μv − lr·g`, `p ← p + v`.
    pub fn sgd_step(&mut self, vel: &mut MlpGrads<R>, grads: &MlpGrads<R>, lr: R, momentum: R) {
        for (l, layer) in self.layers.iter_mut().enumerate() {
            let (v, g) = (&mut vel.layers[l], &grads.layers[l]);
            for ((p, vw), &gw) in layer.w.iter_mut().zip(v.w.iter_mut()).zip(g.w.iter()) {
                *vw = momentum * *vw - lr * gw;
                *p += *vw;
            }
            for ((p, vb), &gb) in layer.b.iter_mut().zip(v.b.iter_mut()).zip(g.b.iter()) {
                *vb = momentum * *vb - lr * gb;
                *p += *vb;
            }
        }
    }
}

/// Adam optimizer state over a flat parameter vector.
///
/// Standard bias-corrected Adam (`β1 = 0.9`, `β2 = 0.999`,
/// `ε = 1e-8`); deterministic given a deterministic gradient stream.
#[derive(Debug, Clone)]
pub struct Adam<R> {
    m: Vec<R>,
    v: Vec<R>,
    t: u32,
    lr: R,
    beta1: R,
    beta2: R,
    eps: R,
}

impl<R: Real> Adam<R> {
    /// Fresh optimizer for `n` parameters.
    pub fn new(n: usize, lr: f64) -> Self {
        Adam {
            m: vec![R::zero(); n],
            v: vec![R::zero(); n],
            t: 0,
            lr: R::of(lr),
            beta1: R::of(0.9),
            beta2: R::of(0.999),
            eps: R::of(1e-8),
        }
    }

    /// One update step over flat `params` given flat `grads`.
    pub fn step(&mut self, params: &mut [R], grads: &[R]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let b1t = R::one() - self.beta1.powi(self.t as i32);
        let b2t = R::one() - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (R::one() - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (R::one() - self.beta2) * grads[i] * grads[i];
            let mhat = self.m[i] / b1t;
            let vhat = self.v[i] / b2t;
            params[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
        }
    }
}

/// Numerically stable softmax over a slice, in place.
pub fn softmax_inplace<R: Real>(xs: &mut [R]) {
    let max = xs.iter().cloned().fold(R::neg_infinity(), R::max);
    let mut sum = R::zero();
    for x in xs.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in xs.iter_mut() {
        *x /= sum;
    }
}

/// Logistic sigmoid.
pub fn sigmoid<R: Real>(x: R) -> R {
    R::one() / (R::one() + (-x).exp())
}
