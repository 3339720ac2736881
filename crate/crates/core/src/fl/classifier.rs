//! Softmax classifiers with analytic gradients: multinomial logistic
//! regression and a one-hidden-layer tanh network.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::data::Dataset;
use super::ModelParams;
use crate::error::{ensure_dim, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelKind {
    LogisticRegression,
    DenseNet { hidden: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub input_dim: usize,
    pub num_classes: usize,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, input_dim: usize, num_classes: usize) -> Self {
        Self { kind, input_dim, num_classes }
    }

    pub fn num_params(&self) -> usize {
        let (d, k) = (self.input_dim, self.num_classes);
        match self.kind {
            ModelKind::LogisticRegression => k * d + k,
            ModelKind::DenseNet { hidden: h } => h * d + h + k * h + k,
        }
    }

    /// Logistic weights start at zero; the dense net needs symmetry breaking.
    pub fn init<R: Rng + ?Sized>(&self, rng: &mut R) -> ModelParams {
        match self.kind {
            ModelKind::LogisticRegression => ModelParams::zeros(self.num_params()),
            ModelKind::DenseNet { hidden } => {
                let d = self.input_dim;
                let k = self.num_classes;
                let mut v = Vec::with_capacity(self.num_params());
                let a1 = (1.0 / d as f64).sqrt();
                v.extend((0..hidden * d).map(|_| rng.random_range(-a1..a1)));
                v.extend(std::iter::repeat_n(0.0, hidden));
                let a2 = (1.0 / hidden as f64).sqrt();
                v.extend((0..k * hidden).map(|_| rng.random_range(-a2..a2)));
                v.extend(std::iter::repeat_n(0.0, k));
                ModelParams::new(v)
            }
        }
    }

    fn check(&self, params: &ModelParams, x: &ArrayView2<f64>) -> Result<()> {
        ensure_dim(self.num_params(), params.len())?;
        ensure_dim(self.input_dim, x.ncols())
    }

    pub fn logits(&self, params: &ModelParams, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check(params, &x)?;
        Ok(self.forward(params, x).0)
    }

    /// Returns logits and, for the dense net, the hidden activations.
    fn forward(&self, params: &ModelParams, x: ArrayView2<f64>) -> (Array2<f64>, Option<Array2<f64>>) {
        let (d, k) = (self.input_dim, self.num_classes);
        let p = params.values();
        match self.kind {
            ModelKind::LogisticRegression => {
                let w = ArrayView2::from_shape((k, d), &p[..k * d]).expect("layout");
                let b = ArrayView1::from(&p[k * d..]);
                (x.dot(&w.t()) + &b, None)
            }
            ModelKind::DenseNet { hidden: h } => {
                let (w1, b1, w2, b2) = dense_views(p, d, h, k);
                let hid = (x.dot(&w1.t()) + &b1).mapv(f64::tanh);
                (hid.dot(&w2.t()) + &b2, Some(hid))
            }
        }
    }

    /// Mean cross-entropy over the dataset (no regularizer).
    pub fn loss(&self, params: &ModelParams, data: &Dataset) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        self.check(params, &data.features.view())?;
        let (z, _) = self.forward(params, data.features.view());
        Ok(softmax_xent(&z, &data.labels).0)
    }

    /// Mean cross-entropy plus `l2/2 ||w||^2`, and its gradient.
    pub fn loss_and_grad(&self, params: &ModelParams, data: &Dataset, l2: f64) -> Result<(f64, Vec<f64>)> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let x = data.features.view();
        self.check(params, &x)?;
        let (d, k) = (self.input_dim, self.num_classes);
        let (z, hid) = self.forward(params, x);
        let (ce, dz) = softmax_xent(&z, &data.labels);
        let mut grad = Vec::with_capacity(self.num_params());
        match self.kind {
            ModelKind::LogisticRegression => {
                grad.extend(dz.t().dot(&x).iter());
                grad.extend(dz.sum_axis(Axis(0)).iter());
            }
            ModelKind::DenseNet { hidden: h } => {
                let hid = hid.expect("dense forward keeps activations");
                let (_, _, w2, _) = dense_views(params.values(), d, h, k);
                let dh = dz.dot(&w2);
                let da = dh * hid.mapv(|a| 1.0 - a * a);
                grad.extend(da.t().dot(&x).iter());
                grad.extend(da.sum_axis(Axis(0)).iter());
                grad.extend(dz.t().dot(&hid).iter());
                grad.extend(dz.sum_axis(Axis(0)).iter());
            }
        }
        let p = params.values();
        let reg: f64 = 0.5 * l2 * p.iter().map(|v| v * v).sum::<f64>();
        for (g, w) in grad.iter_mut().zip(p) {
            *g += l2 * w;
        }
        Ok((ce + reg, grad))
    }

    /// Fraction of samples whose arg-max logit equals the label.
    pub fn accuracy(&self, params: &ModelParams, data: &Dataset) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let z = self.logits(params, data.features.view())?;
        let hits = z
            .rows()
            .into_iter()
            .zip(&data.labels)
            .filter(|(row, &y)| {
                let best = row
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
                best.0 == y
            })
            .count();
        Ok(hits as f64 / data.len() as f64)
    }
}

fn dense_views(
    p: &[f64],
    d: usize,
    h: usize,
    k: usize,
) -> (ArrayView2<'_, f64>, ArrayView1<'_, f64>, ArrayView2<'_, f64>, ArrayView1<'_, f64>) {
    let (o1, o2, o3) = (h * d, h * d + h, h * d + h + k * h);
    (
        ArrayView2::from_shape((h, d), &p[..o1]).expect("layout"),
        ArrayView1::from(&p[o1..o2]),
        ArrayView2::from_shape((k, h), &p[o2..o3]).expect("layout"),
        ArrayView1::from(&p[o3..]),
    )
}

/// Mean softmax cross-entropy and its gradient with respect to the logits.
fn softmax_xent(z: &Array2<f64>, labels: &[usize]) -> (f64, Array2<f64>) {
    let n = z.nrows() as f64;
    let mut grad = z.clone();
    let mut total = 0.0;
    for (mut row, &y) in grad.rows_mut().into_iter().zip(labels) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum: f64 = row.sum();
        total += sum.ln() - row[y].ln();
        row.mapv_inplace(|v| v / sum / n);
        row[y] -= 1.0 / n;
    }
    (total / n, grad)
}
