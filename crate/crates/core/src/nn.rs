//! Fully-connected networks with reverse-mode gradients, and optimizers.
//!
//! Inputs are row batches: a forward pass over `B × in` produces `B × out`.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, z: &mut Array2<f64>) {
        match self {
            Activation::Relu => z.mapv_inplace(|v| v.max(0.0)),
            Activation::Tanh => z.mapv_inplace(f64::tanh),
            Activation::Identity => {}
        }
    }

    /// Multiplies `grad` by the derivative, given the activation's output.
    fn backprop(self, grad: &mut Array2<f64>, out: &Array2<f64>) {
        match self {
            Activation::Relu => grad.zip_mut_with(out, |g, &a| {
                if a <= 0.0 {
                    *g = 0.0
                }
            }),
            Activation::Tanh => grad.zip_mut_with(out, |g, &a| *g *= 1.0 - a * a),
            Activation::Identity => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Cache {
    /// Input of every layer, then the final output.
    activations: Vec<Array2<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    sizes: Vec<usize>,
    /// `out × in` per layer.
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
    hidden: Activation,
    output: Activation,
    cache: Option<Cache>,
}

impl DenseNet {
    /// Uniform `±1/sqrt(fan_in)` hidden weights; output layer `±3e-3`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], hidden: Activation, output: Activation, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(sizes, hidden, output)?;
        let last = net.weights.len() - 1;
        for (l, (w, b)) in net.weights.iter_mut().zip(net.biases.iter_mut()).enumerate() {
            let bound = if l == last { 3e-3 } else { 1.0 / (sizes[l] as f64).sqrt() };
            w.mapv_inplace(|_| rng.random_range(-bound..bound));
            b.mapv_inplace(|_| rng.random_range(-bound..bound));
        }
        Ok(net)
    }

    pub fn zeros(sizes: &[usize], hidden: Activation, output: Activation) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::invalid(format!("layer sizes must be >= 2 positive entries, got {sizes:?}")));
        }
        let weights = sizes.windows(2).map(|p| Array2::zeros((p[1], p[0]))).collect();
        let biases = sizes[1..].iter().map(|&n| Array1::zeros(n)).collect();
        Ok(Self { sizes: sizes.to_vec(), weights, biases, hidden, output, cache: None })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        self.sizes[self.sizes.len() - 1]
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self, layer: usize) -> &Array2<f64> {
        &self.weights[layer]
    }

    pub fn weights_mut(&mut self, layer: usize) -> &mut Array2<f64> {
        &mut self.weights[layer]
    }

    pub fn bias_mut(&mut self, layer: usize) -> &mut Array1<f64> {
        &mut self.biases[layer]
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    /// Layer by layer: weights row-major, then biases.
    pub fn params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.num_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            v.extend(w.iter());
            v.extend(b.iter());
        }
        v
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        ensure_dim(self.num_params(), p.len())?;
        let mut it = p.iter();
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            w.iter_mut().chain(b.iter_mut()).for_each(|x| *x = *it.next().expect("length checked"));
        }
        self.cache = None;
        Ok(())
    }

    /// Applies `f(param, grad)` to every parameter in flat order.
    pub fn update_with(&mut self, grad: &[f64], mut f: impl FnMut(usize, &mut f64, f64)) -> Result<()> {
        ensure_dim(self.num_params(), grad.len())?;
        let mut i = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            for p in w.iter_mut().chain(b.iter_mut()) {
                f(i, p, grad[i]);
                i += 1;
            }
        }
        self.cache = None;
        Ok(())
    }

    /// `θ ← β θ_src + (1 − β) θ`.
    pub fn blend_from(&mut self, src: &DenseNet, beta: f64) -> Result<()> {
        if self.sizes != src.sizes {
            return Err(Error::invalid("cannot blend networks of different shapes"));
        }
        for (a, b) in self.weights.iter_mut().zip(&src.weights) {
            a.zip_mut_with(b, |t, &p| *t = beta * p + (1.0 - beta) * *t);
        }
        for (a, b) in self.biases.iter_mut().zip(&src.biases) {
            a.zip_mut_with(b, |t, &p| *t = beta * p + (1.0 - beta) * *t);
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    fn run(&self, x: ArrayView2<'_, f64>, keep: bool) -> Result<(Array2<f64>, Vec<Array2<f64>>)> {
        ensure_dim(self.input_dim(), x.ncols())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network input".into()));
        }
        let mut acts = Vec::new();
        let mut h = x.to_owned();
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = h.dot(&w.t()) + b;
            let act = if l == last { self.output } else { self.hidden };
            act.apply(&mut z);
            if keep {
                acts.push(std::mem::replace(&mut h, z));
            } else {
                h = z;
            }
        }
        Ok((h, acts))
    }

    /// Forward pass that remembers activations for [`DenseNet::backward`].
    pub fn forward(&mut self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let (out, mut acts) = self.run(x, true)?;
        acts.push(out.clone());
        self.cache = Some(Cache { activations: acts });
        Ok(out)
    }

    /// Forward pass without caching.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        Ok(self.run(x, false)?.0)
    }

    pub fn predict_one(&self, x: &[f64]) -> Result<Vec<f64>> {
        let view = ArrayView2::from_shape((1, x.len()), x).map_err(|e| Error::invalid(e.to_string()))?;
        Ok(self.predict(view)?.into_raw_vec_and_offset().0)
    }

    /// Reverse pass for the cached forward batch. `upstream` is `dL/d(output)`
    /// per row; parameter gradients are summed over rows.
    pub fn backward(&self, upstream: ArrayView2<'_, f64>) -> Result<(Vec<f64>, Array2<f64>)> {
        let cache = self.cache.as_ref().ok_or(Error::NoForwardCache)?;
        let rows = cache.activations[0].nrows();
        ensure_dim(rows, upstream.nrows())?;
        ensure_dim(self.output_dim(), upstream.ncols())?;
        let layers = self.weights.len();
        let mut grads_w: Vec<Array2<f64>> = Vec::with_capacity(layers);
        let mut grads_b: Vec<Array1<f64>> = Vec::with_capacity(layers);
        let mut delta = upstream.to_owned();
        for l in (0..layers).rev() {
            let act = if l == layers - 1 { self.output } else { self.hidden };
            act.backprop(&mut delta, &cache.activations[l + 1]);
            grads_w.push(delta.t().dot(&cache.activations[l]));
            grads_b.push(delta.sum_axis(Axis(0)));
            delta = delta.dot(&self.weights[l]);
        }
        let mut flat = Vec::with_capacity(self.num_params());
        for (gw, gb) in grads_w.iter().rev().zip(grads_b.iter().rev()) {
            flat.extend(gw.iter());
            flat.extend(gb.iter());
        }
        Ok((flat, delta))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OptimizerKind {
    Sgd { momentum: f64 },
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Gradient-descent state for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, num_params: usize) -> Self {
        let v = match kind {
            OptimizerKind::Adam { .. } => vec![0.0; num_params],
            OptimizerKind::Sgd { .. } => Vec::new(),
        };
        Self { kind, lr, m: vec![0.0; num_params], v, t: 0 }
    }

    /// One descent step along `grad`.
    pub fn step(&mut self, net: &mut DenseNet, grad: &[f64]) -> Result<()> {
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged("non-finite gradient".into()));
        }
        ensure_dim(self.m.len(), grad.len())?;
        if self.lr == 0.0 {
            return Ok(());
        }
        let lr = self.lr;
        match self.kind {
            OptimizerKind::Sgd { momentum } => {
                let m = &mut self.m;
                net.update_with(grad, |i, p, g| {
                    m[i] = momentum * m[i] + g;
                    *p -= lr * m[i];
                })
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                self.t = self.t.saturating_add(1);
                let c1 = 1.0 - beta1.powi(self.t);
                let c2 = 1.0 - beta2.powi(self.t);
                let (m, v) = (&mut self.m, &mut self.v);
                net.update_with(grad, |i, p, g| {
                    m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                    v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                    *p -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
                })
            }
        }
    }
}
