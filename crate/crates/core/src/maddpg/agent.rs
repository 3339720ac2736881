//! One base station's actor, centralized critic and their target copies.

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::noise::OuNoise;
use super::replay::Batch;
use crate::error::{ensure_dim, Error, Result};
use crate::nn::{Activation, DenseNet, Optimizer, OptimizerKind};
use crate::rng::{mix_seed, stream_rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaddpgConfig {
    /// Hidden layer widths shared by actors and critics.
    pub hidden: Vec<usize>,
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// Soft target-update rate β.
    pub soft_update: f64,
    pub gamma: f64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    /// Stored transitions required before the first update.
    pub warmup: usize,
    pub ou_theta: f64,
    pub ou_sigma: f64,
    pub ou_dt: f64,
    pub optimizer: OptimizerKind,
}

impl Default for MaddpgConfig {
    fn default() -> Self {
        Self {
            hidden: vec![128, 128],
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            soft_update: 0.01,
            gamma: 0.9,
            replay_capacity: 100_000,
            batch_size: 64,
            warmup: 64,
            ou_theta: 0.15,
            ou_sigma: 0.2,
            ou_dt: 1.0,
            optimizer: OptimizerKind::default(),
        }
    }
}

impl MaddpgConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::config(m));
        if self.hidden.contains(&0) {
            return bad("hidden layer widths must be positive".into());
        }
        if !(self.actor_lr >= 0.0 && self.critic_lr >= 0.0 && self.actor_lr.is_finite() && self.critic_lr.is_finite()) {
            return bad("learning rates must be finite and non-negative".into());
        }
        if !(self.soft_update > 0.0 && self.soft_update <= 1.0) {
            return bad(format!("soft update rate must lie in (0, 1], got {}", self.soft_update));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad(format!("discount must lie in [0, 1], got {}", self.gamma));
        }
        if self.batch_size == 0 || self.replay_capacity < self.batch_size {
            return bad("need 0 < batch_size <= replay_capacity".into());
        }
        if !(self.ou_theta >= 0.0 && self.ou_sigma >= 0.0 && self.ou_dt > 0.0) {
            return bad("OU parameters must be non-negative with positive dt".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Agent {
    pub id: usize,
    pub actor: DenseNet,
    pub critic: DenseNet,
    pub target_actor: DenseNet,
    pub target_critic: DenseNet,
    pub actor_opt: Optimizer,
    pub critic_opt: Optimizer,
    pub noise: OuNoise,
    pub gamma: f64,
}

fn layers(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut v = vec![input];
    v.extend_from_slice(hidden);
    v.push(output);
    v
}

/// `[states | joint actions]` rows.
pub fn critic_input(states: ArrayView2<'_, f64>, actions: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    ensure_dim(states.nrows(), actions.nrows())?;
    concatenate(Axis(1), &[states, actions]).map_err(|e| Error::invalid(e.to_string()))
}

impl Agent {
    /// Tanh actor over the state; linear critic over state and joint action.
    pub fn new(id: usize, state_dim: usize, action_dim: usize, joint_action_dim: usize, cfg: &MaddpgConfig, seed: u64) -> Result<Self> {
        let mut rng = stream_rng(seed, crate::rng::streams::AGENT_BASE + id as u64);
        let actor = DenseNet::new(&layers(state_dim, &cfg.hidden, action_dim), Activation::Relu, Activation::Tanh, &mut rng)?;
        let critic = DenseNet::new(
            &layers(state_dim + joint_action_dim, &cfg.hidden, 1),
            Activation::Relu,
            Activation::Identity,
            &mut rng,
        )?;
        Self::from_nets(id, actor, critic, cfg, seed)
    }

    /// Wraps existing networks; targets start as exact copies.
    pub fn from_nets(id: usize, actor: DenseNet, critic: DenseNet, cfg: &MaddpgConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if critic.output_dim() != 1 {
            return Err(Error::invalid("critic must have a scalar output"));
        }
        let noise = OuNoise::new(actor.output_dim(), 0.0, cfg.ou_theta, cfg.ou_sigma, cfg.ou_dt, mix_seed(seed, 1000 + id as u64))?;
        Ok(Self {
            id,
            actor_opt: Optimizer::new(cfg.optimizer, cfg.actor_lr, actor.num_params()),
            critic_opt: Optimizer::new(cfg.optimizer, cfg.critic_lr, critic.num_params()),
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
            noise,
            gamma: cfg.gamma,
        })
    }

    pub fn action_dim(&self) -> usize {
        self.actor.output_dim()
    }

    /// Actor output, plus an OU sample when exploring.
    pub fn select_action(&mut self, state: &[f64], explore: bool) -> Result<Vec<f64>> {
        let mut a = self.actor.predict_one(state)?;
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("actor {} output", self.id)));
        }
        if explore {
            for (v, n) in a.iter_mut().zip(self.noise.sample()) {
                *v += n;
            }
        }
        Ok(a)
    }

    /// `y = r_i + γ Q^T(s', a')`, with `y = r_i` on terminal rows.
    pub fn critic_target(&self, batch: &Batch, next_joint: &Array2<f64>) -> Result<Vec<f64>> {
        ensure_dim(batch.len(), next_joint.nrows())?;
        let rewards = batch.rewards.column(self.id);
        if self.gamma == 0.0 {
            return Ok(rewards.to_vec());
        }
        let q = self.target_critic.predict(critic_input(batch.next_states.view(), next_joint.view())?.view())?;
        Ok((0..batch.len())
            .map(|k| if batch.done[k] { rewards[k] } else { rewards[k] + self.gamma * q[[k, 0]] })
            .collect())
    }

    /// One step on the mean squared error `mean (Q(s, a) − y)²`; returns the
    /// loss before the step.
    pub fn update_critic(&mut self, states: ArrayView2<'_, f64>, actions: ArrayView2<'_, f64>, y: &[f64]) -> Result<f64> {
        let n = states.nrows();
        if n == 0 {
            return Err(Error::invalid("empty batch"));
        }
        ensure_dim(n, y.len())?;
        let q = self.critic.forward(critic_input(states, actions)?.view())?;
        let diff = Array2::from_shape_fn((n, 1), |(k, _)| q[[k, 0]] - y[k]);
        let loss = diff.iter().map(|d| d * d).sum::<f64>() / n as f64;
        if !loss.is_finite() {
            return Err(Error::Diverged(format!("critic {} loss is {loss}", self.id)));
        }
        let (grad, _) = self.critic.backward((diff * (2.0 / n as f64)).view())?;
        self.critic_opt.step(&mut self.critic, &grad)?;
        Ok(loss)
    }

    /// Policy-gradient step through this agent's critic. Other agents'
    /// actions come from `joint_actions`; this agent's block, starting at
    /// `offset`, is replaced by the current actor output. Returns mean Q
    /// before the step.
    pub fn update_actor(&mut self, states: ArrayView2<'_, f64>, joint_actions: ArrayView2<'_, f64>, offset: usize) -> Result<f64> {
        let (critic, s_dim) = (&mut self.critic, states.ncols());
        let width = self.actor.output_dim();
        let mut joint = joint_actions.to_owned();
        let col = s_dim + offset;
        actor_step(&mut self.actor, &mut self.actor_opt, states, |own| {
            joint.slice_mut(s![.., offset..offset + width]).assign(own);
            let q = critic.forward(critic_input(states, joint.view())?.view())?;
            let (_, gx) = critic.backward(Array2::ones((own.nrows(), 1)).view())?;
            Ok((q.column(0).to_vec(), gx.slice(s![.., col..col + width]).to_owned()))
        })
    }

    /// Policy-gradient step against an arbitrary differentiable objective
    /// `q(a)`, given as values and `dq/da` per row.
    pub fn update_actor_with<F>(&mut self, states: ArrayView2<'_, f64>, objective: F) -> Result<f64>
    where
        F: FnMut(&Array2<f64>) -> Result<(Vec<f64>, Array2<f64>)>,
    {
        actor_step(&mut self.actor, &mut self.actor_opt, states, objective)
    }

    /// `θ^T ← βθ + (1 − β)θ^T` for actor and critic.
    pub fn soft_update(&mut self, beta: f64) -> Result<()> {
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::invalid(format!("soft update rate must lie in (0, 1], got {beta}")));
        }
        self.target_actor.blend_from(&self.actor, beta)?;
        self.target_critic.blend_from(&self.critic, beta)
    }
}

fn actor_step<F>(actor: &mut DenseNet, opt: &mut Optimizer, states: ArrayView2<'_, f64>, mut objective: F) -> Result<f64>
where
    F: FnMut(&Array2<f64>) -> Result<(Vec<f64>, Array2<f64>)>,
{
    let n = states.nrows();
    if n == 0 {
        return Err(Error::invalid("empty batch"));
    }
    let a = actor.forward(states)?;
    let (q, dq) = objective(&a)?;
    ensure_dim(n, q.len())?;
    ensure_dim(a.ncols(), dq.ncols())?;
    let mean_q = q.iter().sum::<f64>() / n as f64;
    if !mean_q.is_finite() || dq.iter().any(|v| !v.is_finite()) {
        return Err(Error::Diverged("non-finite actor objective".into()));
    }
    // descend on −mean Q
    let (grad, _) = actor.backward((dq * (-1.0 / n as f64)).view())?;
    opt.step(actor, &grad)?;
    Ok(mean_q)
}
