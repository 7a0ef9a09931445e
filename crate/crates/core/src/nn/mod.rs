//! Dense networks with analytic gradients, Adam, policy heads and checkpoints.
//!
//! Inputs are batched row-wise (`batch × features`); weights are stored
//! `in × out` so a layer is `x·W + b`.

pub mod heads;

use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MecError, Result};

pub const LEAKY_SLOPE: f64 = 0.01;
const SELU_LAMBDA: f64 = 1.050_700_987_355_480_5;
const SELU_ALPHA: f64 = 1.673_263_242_354_377_3;

static NEXT_VERSION: AtomicU64 = AtomicU64::new(1);

// Globally unique, so a cache never matches a different parameter set.
fn fresh_version() -> u64 {
    NEXT_VERSION.fetch_add(1, Ordering::Relaxed)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    LeakyRelu,
    Relu,
    Tanh,
    Sigmoid,
    Selu,
    Identity,
}

impl Activation {
    pub const ALL: [Activation; 6] = [
        Activation::LeakyRelu,
        Activation::Relu,
        Activation::Tanh,
        Activation::Sigmoid,
        Activation::Selu,
        Activation::Identity,
    ];

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::LeakyRelu => if x > 0.0 { x } else { LEAKY_SLOPE * x },
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::Selu => {
                if x > 0.0 {
                    SELU_LAMBDA * x
                } else {
                    SELU_LAMBDA * SELU_ALPHA * x.exp_m1()
                }
            }
            Activation::Identity => x,
        }
    }

    /// Derivative at pre-activation `x` with output `y`. At a kink (x = 0)
    /// the negative-side slope is used.
    pub fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::LeakyRelu => if x > 0.0 { 1.0 } else { LEAKY_SLOPE },
            Activation::Relu => if x > 0.0 { 1.0 } else { 0.0 },
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Selu => if x > 0.0 { SELU_LAMBDA } else { y + SELU_LAMBDA * SELU_ALPHA },
            Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::LeakyRelu => "leaky_relu",
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
            Activation::Selu => "selu",
            Activation::Identity => "identity",
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = MecError;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace(['-', '_'], "");
        Activation::ALL
            .into_iter()
            .find(|a| a.name().replace('_', "") == norm)
            .ok_or_else(|| MecError::InvalidArgument(format!("unknown activation `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub act: Activation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseNet {
    layers: Vec<Dense>,
    version: u64,
}

/// Intermediate values of one forward pass, needed by [`DenseNet::backward`].
#[derive(Clone, Debug)]
pub struct Cache {
    version: u64,
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
    post: Vec<Array2<f64>>,
}

impl Cache {
    pub fn output(&self) -> &Array2<f64> {
        self.post.last().expect("network has at least one layer")
    }
}

/// Parameter-shaped gradients (or moments).
#[derive(Clone, Debug, PartialEq)]
pub struct Grads {
    pub layers: Vec<(Array2<f64>, Array1<f64>)>,
}

impl Grads {
    pub fn zeros_like(net: &DenseNet) -> Self {
        Grads { layers: net.layers.iter().map(|l| (Array2::zeros(l.w.raw_dim()), Array1::zeros(l.b.len()))).collect() }
    }

    pub fn add_assign(&mut self, other: &Grads) {
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            *w += ow;
            *b += ob;
        }
    }

    pub fn scale(&mut self, k: f64) {
        for (w, b) in &mut self.layers {
            *w *= k;
            *b *= k;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|(w, b)| w.iter().chain(b.iter()).all(|x| x.is_finite()))
    }

    pub fn flat(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|(w, b)| w.iter().chain(b.iter()).copied().collect::<Vec<_>>()).collect()
    }
}

impl DenseNet {
    /// Xavier-uniform weights, zero biases. `sizes` lists every layer width
    /// including input and output; hidden layers use `hidden`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], hidden: Activation, output: Activation, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "a network needs an input and an output size");
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|l| {
                let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let w = Array2::from_shape_fn((fan_in, fan_out), |_| rng.random_range(-bound..bound));
                Dense { w, b: Array1::zeros(fan_out), act: if l + 1 == n { output } else { hidden } }
            })
            .collect();
        DenseNet { layers, version: fresh_version() }
    }

    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(MecError::InvalidArgument("network without layers".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].w.ncols() != pair[1].w.nrows() {
                return Err(MecError::Dimension { what: "layer sizes", expected: pair[0].w.ncols(), got: pair[1].w.nrows() });
            }
        }
        for l in &layers {
            if l.b.len() != l.w.ncols() {
                return Err(MecError::Dimension { what: "bias length", expected: l.w.ncols(), got: l.b.len() });
            }
        }
        Ok(DenseNet { layers, version: fresh_version() })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().w.ncols()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Changes whenever parameters change; caches from older versions are stale.
    pub fn version(&self) -> u64 {
        self.version
    }

    /// Mutable access to the layers. Invalidates outstanding caches.
    pub fn layers_mut(&mut self) -> &mut [Dense] {
        self.version = fresh_version();
        &mut self.layers
    }

    pub fn forward(&self, x: &Array2<f64>) -> Result<(Array2<f64>, Cache)> {
        if x.ncols() != self.input_dim() {
            return Err(MecError::Dimension { what: "network input", expected: self.input_dim(), got: x.ncols() });
        }
        let mut cache = Cache { version: self.version, inputs: Vec::new(), pre: Vec::new(), post: Vec::new() };
        let mut h = x.clone();
        for l in &self.layers {
            let z = h.dot(&l.w) + &l.b;
            let a = z.mapv(|v| l.act.apply(v));
            cache.inputs.push(h);
            cache.pre.push(z);
            h = a.clone();
            cache.post.push(a);
        }
        Ok((h, cache))
    }

    pub fn forward_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        let input = Array2::from_shape_vec((1, x.len()), x.to_vec()).expect("row vector");
        Ok(self.predict(&input)?.row(0).to_vec())
    }

    /// Forward pass without keeping a cache.
    pub fn predict(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(MecError::Dimension { what: "network input", expected: self.input_dim(), got: x.ncols() });
        }
        let mut h = x.dot(&self.layers[0].w) + &self.layers[0].b;
        h.mapv_inplace(|v| self.layers[0].act.apply(v));
        for l in &self.layers[1..] {
            h = h.dot(&l.w) + &l.b;
            h.mapv_inplace(|v| l.act.apply(v));
        }
        Ok(h)
    }

    /// Gradients of a scalar loss given `d loss / d output`, plus the gradient
    /// with respect to the input. Losses summed over the batch sum gradients.
    pub fn backward(&self, cache: &Cache, grad_out: &Array2<f64>) -> Result<(Grads, Array2<f64>)> {
        if cache.version != self.version || cache.pre.len() != self.layers.len() {
            return Err(MecError::StaleCache(format!(
                "cache from version {} used with version {}",
                cache.version, self.version
            )));
        }
        if grad_out.dim() != cache.output().dim() {
            return Err(MecError::Dimension { what: "output gradient", expected: cache.output().ncols(), got: grad_out.ncols() });
        }
        let mut g = grad_out.clone();
        let mut layers = Vec::with_capacity(self.layers.len());
        for (idx, l) in self.layers.iter().enumerate().rev() {
            let pre = &cache.pre[idx];
            let post = &cache.post[idx];
            ndarray::Zip::from(&mut g).and(pre).and(post).for_each(|g, &x, &y| *g *= l.act.derivative(x, y));
            let dw = cache.inputs[idx].t().dot(&g);
            let db = g.sum_axis(Axis(0));
            g = g.dot(&l.w.t());
            layers.push((dw, db));
        }
        layers.reverse();
        Ok((Grads { layers }, g))
    }

    /// `self ← ρ·self + (1 − ρ)·main`.
    pub fn blend_from(&mut self, main: &DenseNet, rho: f64) -> Result<()> {
        self.check_same_shape(main)?;
        for (t, m) in self.layers_mut().iter_mut().zip(&main.layers) {
            t.w.zip_mut_with(&m.w, |t, &m| *t = rho * *t + (1.0 - rho) * m);
            t.b.zip_mut_with(&m.b, |t, &m| *t = rho * *t + (1.0 - rho) * m);
        }
        Ok(())
    }

    pub fn check_same_shape(&self, other: &DenseNet) -> Result<()> {
        if self.layers.len() != other.layers.len() {
            return Err(MecError::Dimension { what: "layer count", expected: self.layers.len(), got: other.layers.len() });
        }
        for (a, b) in self.layers.iter().zip(&other.layers) {
            if a.w.dim() != b.w.dim() {
                return Err(MecError::Dimension { what: "layer shape", expected: a.w.len(), got: b.w.len() });
            }
        }
        Ok(())
    }

    pub fn params_flat(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.w.iter().chain(l.b.iter()).copied().collect::<Vec<_>>()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.w.iter().chain(l.b.iter()).all(|x| x.is_finite()))
    }
}

/// Adam with bias correction. Minimizes: parameters move against the gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    m: Grads,
    v: Grads,
}

impl Adam {
    pub fn new(net: &DenseNet, lr: f64) -> Self {
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: Grads::zeros_like(net), v: Grads::zeros_like(net) }
    }

    pub fn step(&mut self, net: &mut DenseNet, grads: &Grads) -> Result<()> {
        if grads.layers.len() != self.m.layers.len() {
            return Err(MecError::Dimension { what: "gradient layers", expected: self.m.layers.len(), got: grads.layers.len() });
        }
        for ((gw, _), (mw, _)) in grads.layers.iter().zip(&self.m.layers) {
            if gw.dim() != mw.dim() {
                return Err(MecError::Dimension { what: "gradient shape", expected: mw.len(), got: gw.len() });
            }
        }
        self.t += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let c1 = 1.0 - b1.powi(self.t as i32);
        let c2 = 1.0 - b2.powi(self.t as i32);
        let lr = self.lr;
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        };
        let layers = net.layers_mut();
        for (l, (((gw, gb), (mw, mb)), (vw, vb))) in
            layers.iter_mut().zip(grads.layers.iter().zip(self.m.layers.iter_mut()).zip(self.v.layers.iter_mut()))
        {
            ndarray::Zip::from(&mut l.w).and(gw).and(mw).and(vw).for_each(|p, &g, m, v| update(p, g, m, v));
            ndarray::Zip::from(&mut l.b).and(gb).and(mb).and(vb).for_each(|p, &g, m, v| update(p, g, m, v));
        }
        Ok(())
    }
}

/// On-disk form of one network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetCheckpoint {
    pub layers: Vec<LayerCheckpoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerCheckpoint {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
    /// Row-major `inputs × outputs`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl NetCheckpoint {
    pub fn from_net(net: &DenseNet) -> Self {
        NetCheckpoint {
            layers: net
                .layers
                .iter()
                .map(|l| LayerCheckpoint {
                    inputs: l.w.nrows(),
                    outputs: l.w.ncols(),
                    activation: l.act,
                    weights: l.w.iter().copied().collect(),
                    bias: l.b.to_vec(),
                })
                .collect(),
        }
    }

    pub fn into_net(self) -> Result<DenseNet> {
        let mut layers = Vec::with_capacity(self.layers.len());
        for (idx, l) in self.layers.into_iter().enumerate() {
            let expected = l.inputs.checked_mul(l.outputs).ok_or_else(|| MecError::Checkpoint(format!("layer {idx} too large")))?;
            if l.weights.len() != expected || l.bias.len() != l.outputs || l.inputs == 0 || l.outputs == 0 {
                return Err(MecError::Checkpoint(format!("layer {idx} has inconsistent sizes")));
            }
            if !l.weights.iter().chain(&l.bias).all(|x| x.is_finite()) {
                return Err(MecError::Checkpoint(format!("layer {idx} has non-finite parameters")));
            }
            let w = Array2::from_shape_vec((l.inputs, l.outputs), l.weights).expect("length checked");
            layers.push(Dense { w, b: Array1::from(l.bias), act: l.activation });
        }
        DenseNet::from_layers(layers).map_err(|e| MecError::Checkpoint(e.to_string()))
    }
}

pub fn net_to_json(net: &DenseNet) -> String {
    serde_json::to_string(&NetCheckpoint::from_net(net)).expect("checkpoint serialises")
}

pub fn net_from_json(text: &str) -> Result<DenseNet> {
    let ck: NetCheckpoint = serde_json::from_str(text).map_err(|e| MecError::Checkpoint(e.to_string()))?;
    ck.into_net()
}
