//! Joint training loop and episode rollouts.

use std::time::Instant;

use ndarray::{s, Array2};

use super::agent::{Agent, MaddpgConfig};
use super::replay::{Batch, ReplayMemory, Transition};
use crate::env::{DtwnEnv, JointAction, StepOutcome};
use crate::error::{Error, Result};
use crate::rng::{mix_seed, stream_rng, SimRng};

/// Loss statistics of one joint update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub actor_q: f64,
}

/// All agents plus the shared replay and sampling stream.
#[derive(Debug, Clone)]
pub struct Maddpg {
    pub cfg: MaddpgConfig,
    pub agents: Vec<Agent>,
    replay: ReplayMemory,
    sampler: SimRng,
    state_dim: usize,
    action_dim: usize,
    updates: u64,
}

impl Maddpg {
    pub fn new(num_agents: usize, state_dim: usize, action_dim: usize, cfg: MaddpgConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if num_agents == 0 {
            return Err(Error::invalid("need at least one agent"));
        }
        let joint = num_agents * action_dim;
        let agents = (0..num_agents)
            .map(|i| Agent::new(i, state_dim, action_dim, joint, &cfg, seed))
            .collect::<Result<_>>()?;
        Ok(Self {
            replay: ReplayMemory::new(cfg.replay_capacity)?,
            sampler: stream_rng(seed, crate::rng::streams::AGENT_BASE - 1),
            cfg,
            agents,
            state_dim,
            action_dim,
            updates: 0,
        })
    }

    pub fn for_env(env: &DtwnEnv, cfg: MaddpgConfig, seed: u64) -> Result<Self> {
        Self::new(env.num_agents(), env.state_dim(), env.action_dim(), cfg, seed)
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn replay(&self) -> &ReplayMemory {
        &self.replay
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn reset_noise(&mut self) {
        self.agents.iter_mut().for_each(|a| a.noise.reset());
    }

    /// Per-agent policy outputs; exploratory outputs are clipped to `[-1, 1]`.
    pub fn act(&mut self, state: &[f64], explore: bool) -> Result<Vec<Vec<f64>>> {
        self.agents
            .iter_mut()
            .map(|a| {
                let mut out = a.select_action(state, explore)?;
                out.iter_mut().for_each(|v| *v = v.clamp(-1.0, 1.0));
                Ok(out)
            })
            .collect()
    }

    pub fn remember(&mut self, t: Transition) {
        self.replay.push(t);
    }

    /// Critic then actor step for every agent in id order on one shared
    /// batch, followed by soft target updates. `None` during warm-up.
    pub fn update(&mut self) -> Result<Option<UpdateStats>> {
        if self.replay.len() < self.cfg.batch_size.max(self.cfg.warmup) {
            return Ok(None);
        }
        let batch = self.replay.sample(self.cfg.batch_size, &mut self.sampler)?;
        let next_joint = self.target_actions(&batch)?;
        let m = self.agents.len() as f64;
        let mut stats = UpdateStats { critic_loss: 0.0, actor_q: 0.0 };
        for i in 0..self.agents.len() {
            let agent = &mut self.agents[i];
            let y = agent.critic_target(&batch, &next_joint)?;
            let loss = agent.update_critic(batch.states.view(), batch.actions.view(), &y)?;
            let q = agent.update_actor(batch.states.view(), batch.actions.view(), i * self.action_dim)?;
            stats.critic_loss += loss / m;
            stats.actor_q += q / m;
        }
        let beta = self.cfg.soft_update;
        for a in &mut self.agents {
            a.soft_update(beta)?;
        }
        self.updates += 1;
        Ok(Some(stats))
    }

    /// `[π_1^T(s') | … | π_M^T(s')]`.
    fn target_actions(&self, batch: &Batch) -> Result<Array2<f64>> {
        let mut joint = Array2::zeros((batch.len(), self.action_dim * self.agents.len()));
        for (i, a) in self.agents.iter().enumerate() {
            let out = a.target_actor.predict(batch.next_states.view())?;
            joint.slice_mut(s![.., i * self.action_dim..(i + 1) * self.action_dim]).assign(&out);
        }
        Ok(joint)
    }
}

/// Anything that chooses joint actions for the environment.
pub trait Controller {
    fn begin_episode(&mut self) {}
    fn act(&mut self, env: &DtwnEnv, features: &[f64]) -> Result<JointAction>;
    /// Called after each step with the features the action was chosen on.
    fn observe(&mut self, _features: &[f64], _outcome: &StepOutcome) -> Result<()> {
        Ok(())
    }
}

/// Per-episode record.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpisodeStats {
    pub episode: usize,
    /// Summed over the episode, one entry per agent.
    pub agent_rewards: Vec<f64>,
    /// Iteration time `T` of each step.
    pub latencies: Vec<f64>,
    pub objectives: Vec<f64>,
    pub global_losses: Vec<f64>,
    pub critic_loss: Option<f64>,
    pub actor_q: Option<f64>,
    pub step_wallclock: Vec<f64>,
}

impl EpisodeStats {
    pub fn steps(&self) -> usize {
        self.latencies.len()
    }

    /// Reward summed over agents and steps.
    pub fn total_reward(&self) -> f64 {
        self.agent_rewards.iter().sum()
    }

    pub fn mean_latency(&self) -> f64 {
        if self.latencies.is_empty() {
            return f64::NAN;
        }
        self.latencies.iter().sum::<f64>() / self.latencies.len() as f64
    }

    pub fn final_loss(&self) -> f64 {
        self.global_losses.last().copied().unwrap_or(f64::NAN)
    }

    pub fn wallclock(&self) -> f64 {
        self.step_wallclock.iter().sum()
    }
}

/// Runs one episode from `reset(episode_seed)` until the horizon.
pub fn rollout<C: Controller + ?Sized>(env: &mut DtwnEnv, episode: usize, episode_seed: u64, ctrl: &mut C) -> Result<EpisodeStats> {
    let mut features = env.reset(episode_seed)?.features();
    ctrl.begin_episode();
    let mut st = EpisodeStats { episode, agent_rewards: vec![0.0; env.num_agents()], ..Default::default() };
    loop {
        let start = Instant::now();
        let action = ctrl.act(env, &features)?;
        let out = env.step(&action)?;
        ctrl.observe(&features, &out)?;
        st.step_wallclock.push(start.elapsed().as_secs_f64());
        st.agent_rewards.iter_mut().zip(&out.rewards).for_each(|(a, r)| *a += r);
        st.latencies.push(out.breakdown.t_iteration);
        st.objectives.push(out.breakdown.objective);
        st.global_losses.push(out.global_loss);
        features = out.next_state.features();
        if out.done {
            return Ok(st);
        }
    }
}

/// The learner as a controller: noisy actions, replay storage and one joint
/// update per step when `learn` is set; greedy actions otherwise.
pub struct Learner<'a> {
    pub maddpg: &'a mut Maddpg,
    pub learn: bool,
    last: Vec<Vec<f64>>,
    losses: Vec<UpdateStats>,
}

impl<'a> Learner<'a> {
    pub fn new(maddpg: &'a mut Maddpg, learn: bool) -> Self {
        Self { maddpg, learn, last: Vec::new(), losses: Vec::new() }
    }

    fn take_stats(&mut self) -> (Option<f64>, Option<f64>) {
        if self.losses.is_empty() {
            return (None, None);
        }
        let n = self.losses.len() as f64;
        let c = self.losses.iter().map(|u| u.critic_loss).sum::<f64>() / n;
        let q = self.losses.iter().map(|u| u.actor_q).sum::<f64>() / n;
        self.losses.clear();
        (Some(c), Some(q))
    }
}

impl Controller for Learner<'_> {
    fn begin_episode(&mut self) {
        self.maddpg.reset_noise();
    }

    fn act(&mut self, env: &DtwnEnv, features: &[f64]) -> Result<JointAction> {
        self.last = self.maddpg.act(features, self.learn)?;
        env.decode(&self.last)
    }

    fn observe(&mut self, features: &[f64], out: &StepOutcome) -> Result<()> {
        if !self.learn {
            return Ok(());
        }
        self.maddpg.remember(Transition {
            state: features.to_vec(),
            action: self.last.concat(),
            rewards: out.rewards.clone(),
            next_state: out.next_state.features(),
            done: out.done,
        });
        if let Some(u) = self.maddpg.update()? {
            self.losses.push(u);
        }
        Ok(())
    }
}

pub fn episode_seed(seed: u64, episode: usize) -> u64 {
    mix_seed(seed, episode as u64)
}

/// Seeds for evaluation episodes, disjoint from training ones.
pub fn eval_seed(seed: u64, episode: usize) -> u64 {
    mix_seed(seed ^ 0x5EED_E7A1, episode as u64)
}

/// Trains for `episodes` episodes; `on_episode` sees each record as it completes.
pub fn train<F>(env: &mut DtwnEnv, maddpg: &mut Maddpg, episodes: usize, seed: u64, mut on_episode: F) -> Result<Vec<EpisodeStats>>
where
    F: FnMut(&EpisodeStats) -> Result<()>,
{
    let mut history = Vec::with_capacity(episodes);
    let mut learner = Learner::new(maddpg, true);
    for e in 0..episodes {
        let mut st = rollout(env, e, episode_seed(seed, e), &mut learner).map_err(|err| match err {
            Error::Diverged(msg) => Error::Diverged(format!("episode {e}: {msg}")),
            other => other,
        })?;
        (st.critic_loss, st.actor_q) = learner.take_stats();
        on_episode(&st)?;
        history.push(st);
    }
    Ok(history)
}

/// Greedy-policy episodes on evaluation seeds.
pub fn evaluate(env: &mut DtwnEnv, maddpg: &mut Maddpg, episodes: usize, seed: u64) -> Result<Vec<EpisodeStats>> {
    let mut learner = Learner::new(maddpg, false);
    (0..episodes).map(|e| rollout(env, e, eval_seed(seed, e), &mut learner)).collect()
}
