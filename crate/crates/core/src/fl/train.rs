//! Local training on a single twin's data.

use rand::seq::SliceRandom;

use super::classifier::ModelSpec;
use super::data::Dataset;
use super::ModelParams;
use crate::error::{ensure_dim, Error, Result};
use crate::rng::{stream_rng, streams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingTask {
    pub model: ModelSpec,
    pub learning_rate: f64,
    /// Ridge coefficient of the training objective.
    pub l2: f64,
    pub local_iters: usize,
    /// Seed of the mini-batch sampler.
    pub seed: u64,
}

impl TrainingTask {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::invalid(format!("learning rate must be >= 0, got {}", self.learning_rate)));
        }
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            return Err(Error::invalid(format!("l2 must be >= 0, got {}", self.l2)));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GradientDiag {
    pub grad_norm_ratio: f64,
    pub lipschitz_estimate: f64,
}

/// Mean per-sample cross-entropy.
pub fn local_loss(model: &ModelSpec, w: &ModelParams, data: &Dataset) -> Result<f64> {
    let loss = model.loss(w, data)?;
    if !loss.is_finite() {
        return Err(Error::NonFinite("local loss".into()));
    }
    Ok(loss)
}

/// Runs `task.local_iters` mini-batch gradient steps of `ceil(b * D)` samples.
///
/// Batches are drawn without replacement from a seeded permutation that is
/// reshuffled once exhausted. The diagnostic ratio compares the full-objective
/// gradient norm at the returned parameters with the one at `w0`; the
/// smoothness estimate is taken along the visited iterates.
pub fn local_train(
    data: &Dataset,
    w0: &ModelParams,
    task: &TrainingTask,
    b: f64,
) -> Result<(ModelParams, GradientDiag)> {
    task.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(b > 0.0 && b <= 1.0) {
        return Err(Error::invalid(format!("batch fraction must be in (0, 1], got {b}")));
    }
    ensure_dim(task.model.num_params(), w0.len())?;
    let n = data.len();
    let batch = ((b * n as f64).ceil() as usize).clamp(1, n);
    let mut rng = stream_rng(task.seed, streams::LOCAL_TRAINING);
    let mut order: Vec<usize> = (0..n).collect();
    let mut cursor = n;

    let full = |w: &ModelParams| -> Result<(f64, Vec<f64>)> {
        let (loss, g) = task.model.loss_and_grad(w, data, task.l2)?;
        if !loss.is_finite() {
            return Err(Error::Diverged(format!("training loss became {loss}")));
        }
        Ok((loss, g))
    };

    let mut w = w0.clone();
    let mut trajectory = Vec::with_capacity(task.local_iters + 1);
    for _ in 0..task.local_iters {
        let (_, g_full) = full(&w)?;
        let g_step = if batch == n {
            g_full.clone()
        } else {
            if cursor + batch > n {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            let mb = data.select(&order[cursor..cursor + batch]);
            cursor += batch;
            task.model.loss_and_grad(&w, &mb, task.l2)?.1
        };
        trajectory.push((w.clone(), g_full));
        for (wi, gi) in w.values_mut().iter_mut().zip(&g_step) {
            *wi -= task.learning_rate * gi;
        }
        if !w.is_finite() {
            return Err(Error::Diverged("parameters became non-finite".into()));
        }
    }
    let (_, g_end) = full(&w)?;
    trajectory.push((w.clone(), g_end));

    let g0 = norm(&trajectory[0].1);
    let g1 = norm(&trajectory[trajectory.len() - 1].1);
    let ratio = if g0 > 0.0 { g1 / g0 } else { 0.0 };
    let lipschitz = match estimate_smoothness(&trajectory) {
        Ok(d) => d.lipschitz_estimate,
        Err(_) => 0.0,
    };
    Ok((w, GradientDiag { grad_norm_ratio: ratio, lipschitz_estimate: lipschitz }))
}

/// Largest gradient-difference quotient along a trajectory of `(w_t, grad_t)`
/// pairs; the ratio is taken from the last non-degenerate pair.
pub fn estimate_smoothness(trajectory: &[(ModelParams, Vec<f64>)]) -> Result<GradientDiag> {
    if trajectory.len() < 2 {
        return Err(Error::invalid("smoothness estimate needs at least two points"));
    }
    let mut best: Option<f64> = None;
    let mut ratio = 0.0;
    for pair in trajectory.windows(2) {
        let (w0, g0) = &pair[0];
        let (w1, g1) = &pair[1];
        ensure_dim(w0.len(), w1.len())?;
        ensure_dim(g0.len(), g1.len())?;
        let dw = w0.distance(w1);
        if dw == 0.0 {
            continue;
        }
        let dg = g0.iter().zip(g1).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        best = Some(best.map_or(dg / dw, |b: f64| b.max(dg / dw)));
        let n0 = norm(g0);
        ratio = if n0 > 0.0 { norm(g1) / n0 } else { 0.0 };
    }
    let lipschitz = best.ok_or_else(|| Error::invalid("all consecutive trajectory points coincide"))?;
    Ok(GradientDiag { grad_norm_ratio: ratio, lipschitz_estimate: lipschitz })
}

fn norm(g: &[f64]) -> f64 {
    g.iter().map(|v| v * v).sum::<f64>().sqrt()
}
