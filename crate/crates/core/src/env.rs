//! Markov decision process over federated rounds: observations, feasible
//! action projection, the environment step and rewards.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{BandwidthAllocation, ChannelState, FadingModel, InterferenceMode, RateFormula};
use crate::error::{ensure_dim, Error, Result};
use crate::fl::{FederatedSystem, FlConfig, ModelParams};
use crate::latency::{iteration_time, local_iterations, AccuracyTargets, LatencyBreakdown, SystemSnapshot};
use crate::ledger::crypto::sha256;
use crate::ledger::{block_interval_policy, Ledger, LedgerConfig, TxKind, ValidationContext, VerificationContext};
use crate::model::{Association, BsId, NetworkModel};
use crate::rng::{mix_seed, stream_rng, streams, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardMode {
    /// Every agent receives `-T`.
    #[default]
    Shared,
    /// Agent `i` receives `-T_i`.
    PerAgent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    /// Steps per episode.
    pub horizon: usize,
    pub batch_min: f64,
    pub batch_max: f64,
    /// Smallest pre-normalization subchannel share a policy output decodes to.
    pub share_floor: f64,
    pub reward_mode: RewardMode,
    pub fading: FadingModel,
    /// Keep the first channel draw for the whole episode.
    pub hold_channel: bool,
    pub interference: InterferenceMode,
    pub rate_formula: RateFormula,
    pub s_ini: f64,
    pub reward_coins: f64,
    pub verification_threshold: f64,
    /// Block interval in local training periods.
    pub block_interval_multiplier: u32,
    pub fl: FlConfig,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            horizon: 20,
            batch_min: 0.1,
            batch_max: 1.0,
            share_floor: 0.01,
            reward_mode: RewardMode::Shared,
            fading: FadingModel::Rayleigh,
            hold_channel: false,
            interference: InterferenceMode::Orthogonal,
            rate_formula: RateFormula::Corrected,
            s_ini: 100.0,
            reward_coins: 1.0,
            verification_threshold: 1.05,
            block_interval_multiplier: 1,
            fl: FlConfig::default(),
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::config("horizon must be >= 1"));
        }
        if !(self.batch_min > 0.0 && self.batch_min <= self.batch_max && self.batch_max <= 1.0) {
            return Err(Error::config(format!(
                "batch range must satisfy 0 < b_min <= b_max <= 1, got [{}, {}]",
                self.batch_min, self.batch_max
            )));
        }
        if !(self.share_floor > 0.0 && self.share_floor <= 1.0) {
            return Err(Error::config("share_floor must lie in (0, 1]"));
        }
        if self.block_interval_multiplier == 0 {
            return Err(Error::config("block_interval_multiplier must be >= 1"));
        }
        Ok(())
    }
}

/// `s(t) = (f^C, K, D, h)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub cpu_hz: Vec<f64>,
    pub twin_counts: Vec<usize>,
    pub data_sizes: Vec<u64>,
    /// Uplink gains, BS × subchannel.
    pub gains: Vec<Vec<f64>>,
}

impl EnvState {
    pub fn feature_dim(num_bs: usize, num_twins: usize, num_subchannels: usize) -> usize {
        2 * num_bs + num_twins + num_bs * num_subchannels
    }

    /// Scaled network input: `f / max f`, `K / N`, `D / max D`, `ln(1 + h)`.
    pub fn features(&self) -> Vec<f64> {
        let fmax = self.cpu_hz.iter().copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let n = self.data_sizes.len().max(1) as f64;
        let dmax = self.data_sizes.iter().copied().max().unwrap_or(1).max(1) as f64;
        let mut v = Vec::with_capacity(Self::feature_dim(self.cpu_hz.len(), self.data_sizes.len(), self.gains.first().map_or(0, Vec::len)));
        v.extend(self.cpu_hz.iter().map(|f| f / fmax));
        v.extend(self.twin_counts.iter().map(|&k| k as f64 / n));
        v.extend(self.data_sizes.iter().map(|&d| d as f64 / dmax));
        v.extend(self.gains.iter().flatten().map(|h| h.ln_1p()));
        v
    }

    pub fn is_valid(&self) -> bool {
        self.cpu_hz.iter().all(|f| f.is_finite() && *f >= 0.0)
            && self.gains.iter().flatten().all(|h| h.is_finite() && *h >= 0.0)
    }
}

/// One BS's raw decision `a_i = (assoc scores, b, τ_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentAction {
    /// Preference of this BS for hosting each twin.
    pub assoc_scores: Vec<f64>,
    /// Batch fraction this BS would use for each twin it hosts.
    pub batch_fracs: Vec<f64>,
    pub bandwidth_shares: Vec<f64>,
}

impl AgentAction {
    pub fn dim(num_twins: usize, num_subchannels: usize) -> usize {
        2 * num_twins + num_subchannels
    }

    /// Decodes a policy output in `[-1, 1]^dim`: scores pass through, batch
    /// fractions and shares are mapped affinely onto their ranges.
    pub fn decode(out: &[f64], num_twins: usize, num_subchannels: usize, cfg: &EnvConfig) -> Result<Self> {
        ensure_dim(Self::dim(num_twins, num_subchannels), out.len())?;
        let unit = |a: f64| (a.clamp(-1.0, 1.0) + 1.0) / 2.0;
        Ok(Self {
            assoc_scores: out[..num_twins].to_vec(),
            batch_fracs: out[num_twins..2 * num_twins]
                .iter()
                .map(|&a| cfg.batch_min + unit(a) * (cfg.batch_max - cfg.batch_min))
                .collect(),
            bandwidth_shares: out[2 * num_twins..]
                .iter()
                .map(|&a| cfg.share_floor + unit(a) * (1.0 - cfg.share_floor))
                .collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointAction {
    pub agents: Vec<AgentAction>,
}

impl JointAction {
    pub fn is_finite(&self) -> bool {
        self.agents.iter().all(|a| {
            a.assoc_scores
                .iter()
                .chain(&a.batch_fracs)
                .chain(&a.bandwidth_shares)
                .all(|v| v.is_finite())
        })
    }

    /// Every twin goes to BS `twin mod M`, midpoint batch fraction, equal shares.
    pub fn average(num_bs: usize, num_twins: usize, num_subchannels: usize, cfg: &EnvConfig) -> Self {
        let b = 0.5 * (cfg.batch_min + cfg.batch_max);
        let agents = (0..num_bs)
            .map(|bs| AgentAction {
                assoc_scores: (0..num_twins).map(|j| if j % num_bs == bs { 1.0 } else { 0.0 }).collect(),
                batch_fracs: vec![b; num_twins],
                bandwidth_shares: vec![1.0 / num_bs as f64; num_subchannels],
            })
            .collect();
        Self { agents }
    }

    /// Uniform policy outputs in `[-1, 1]`, decoded.
    pub fn random<R: Rng + ?Sized>(
        num_bs: usize,
        num_twins: usize,
        num_subchannels: usize,
        cfg: &EnvConfig,
        rng: &mut R,
    ) -> Self {
        let dim = AgentAction::dim(num_twins, num_subchannels);
        let agents = (0..num_bs)
            .map(|_| {
                let out: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
                AgentAction::decode(&out, num_twins, num_subchannels, cfg).expect("dimension fixed above")
            })
            .collect();
        Self { agents }
    }
}

/// A joint action mapped onto the feasible set.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleAction {
    pub assignment: Vec<BsId>,
    /// Batch fraction of each twin, taken from its hosting BS.
    pub batch_fracs: Vec<f64>,
    pub alloc: BandwidthAllocation,
    /// Projected action in raw form: one-hot scores, clamped fractions, normalized shares.
    pub joint: JointAction,
}

/// Arg-max association (ties to the lower BS id), clamped batch fractions and
/// per-subchannel normalized shares. Non-positive share columns fall back to
/// an even split.
pub fn project_action(raw: &JointAction, num_twins: usize, num_subchannels: usize, b_range: [f64; 2]) -> Result<FeasibleAction> {
    let m = raw.agents.len();
    if m == 0 {
        return Err(Error::invalid("joint action has no agents"));
    }
    if !raw.is_finite() {
        return Err(Error::NonFinite("raw joint action".into()));
    }
    for a in &raw.agents {
        ensure_dim(num_twins, a.assoc_scores.len())?;
        ensure_dim(num_twins, a.batch_fracs.len())?;
        ensure_dim(num_subchannels, a.bandwidth_shares.len())?;
    }
    let [lo, hi] = b_range;
    let assignment: Vec<BsId> = (0..num_twins)
        .map(|j| {
            let mut best = 0;
            for bs in 1..m {
                if raw.agents[bs].assoc_scores[j] > raw.agents[best].assoc_scores[j] {
                    best = bs;
                }
            }
            best
        })
        .collect();
    let mut shares = vec![vec![0.0; num_subchannels]; m];
    for c in 0..num_subchannels {
        let col: Vec<f64> = raw.agents.iter().map(|a| a.bandwidth_shares[c].max(0.0)).collect();
        let total: f64 = col.iter().sum();
        for bs in 0..m {
            shares[bs][c] = if total > 0.0 { col[bs] / total } else { 1.0 / m as f64 };
        }
    }
    let agents: Vec<AgentAction> = (0..m)
        .map(|bs| AgentAction {
            assoc_scores: assignment.iter().map(|&a| if a == bs { 1.0 } else { 0.0 }).collect(),
            batch_fracs: raw.agents[bs].batch_fracs.iter().map(|b| b.clamp(lo, hi)).collect(),
            bandwidth_shares: shares[bs].clone(),
        })
        .collect();
    let batch_fracs = assignment.iter().enumerate().map(|(j, &bs)| agents[bs].batch_fracs[j]).collect();
    Ok(FeasibleAction { assignment, batch_fracs, alloc: BandwidthAllocation::new(shares), joint: JointAction { agents } })
}

/// Checks the association, batch-range and subchannel constraints.
pub fn check_feasible(a: &FeasibleAction, num_bs: usize, b_range: [f64; 2], tol: f64) -> Result<()> {
    if let Some(&bad) = a.assignment.iter().find(|&&bs| bs >= num_bs) {
        return Err(Error::UnknownBs(bad));
    }
    if let Some(b) = a.batch_fracs.iter().find(|b| !(b_range[0]..=b_range[1]).contains(*b)) {
        return Err(Error::invalid(format!("batch fraction {b} outside [{}, {}]", b_range[0], b_range[1])));
    }
    let c = a.alloc.shares.first().map_or(0, Vec::len);
    a.alloc.validate(num_bs, c, tol)
}

/// Rewards for one step.
pub fn reward(breakdown: &LatencyBreakdown, mode: RewardMode, num_agents: usize) -> Vec<f64> {
    match mode {
        RewardMode::Shared => vec![-breakdown.t_iteration; num_agents],
        RewardMode::PerAgent => (0..num_agents).map(|i| -breakdown.bs_time(i)).collect(),
    }
}

/// `sum_t γ^t r_t`.
pub fn discounted_return(rewards: &[f64], gamma: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::invalid(format!("discount must lie in [0, 1], got {gamma}")));
    }
    let mut total = 0.0;
    let mut w = 1.0;
    for r in rewards {
        total += w * r;
        w *= gamma;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next_state: EnvState,
    pub rewards: Vec<f64>,
    pub breakdown: LatencyBreakdown,
    pub done: bool,
    pub applied: FeasibleAction,
    /// Global training loss after this round.
    pub global_loss: f64,
    /// Training models that passed verification and entered aggregation.
    pub verified_models: usize,
    pub block_producer: BsId,
    pub block_bits: u64,
}

/// Simulator of one episode at a time.
#[derive(Debug, Clone)]
pub struct DtwnEnv {
    net: NetworkModel,
    cfg: EnvConfig,
    targets: AccuracyTargets,
    fl: FederatedSystem,
    ledger: Ledger,
    assoc: Association,
    channel: ChannelState,
    channel_rng: SimRng,
    seed: u64,
    episode_seed: u64,
    step: usize,
    clock_ns: u64,
}

impl DtwnEnv {
    /// Builds the learning task and the ledger; twin datasets are drawn from `seed`.
    pub fn new(net: NetworkModel, cfg: EnvConfig, targets: AccuracyTargets, seed: u64) -> Result<Self> {
        net.validate()?;
        cfg.validate()?;
        targets.validate()?;
        let local_iters = local_iterations(targets.theta_l, std::f64::consts::E)?;
        let fl = FederatedSystem::synthetic(&cfg.fl, &net.data_sizes(), local_iters, seed)?;
        let assoc = Association::round_robin(net.data_sizes(), net.num_bs());
        let ledger = Self::fresh_ledger(&net, &cfg, &assoc, seed)?;
        let channel = ChannelState::unit(&net);
        let mut env = Self {
            channel_rng: stream_rng(seed, streams::CHANNEL),
            net,
            cfg,
            targets,
            fl,
            ledger,
            assoc,
            channel,
            seed,
            episode_seed: seed,
            step: 0,
            clock_ns: 0,
        };
        env.reset(seed)?;
        Ok(env)
    }

    fn fresh_ledger(net: &NetworkModel, cfg: &EnvConfig, assoc: &Association, seed: u64) -> Result<Ledger> {
        let lc = LedgerConfig {
            s_ini: cfg.s_ini,
            reward_coins: cfg.reward_coins,
            num_producers: net.num_producers,
            header_bits: net.block_header_bits.round() as u64,
            verification_threshold: cfg.verification_threshold,
        };
        Ledger::genesis(lc, assoc, None, mix_seed(seed, streams::KEYS))
    }

    /// Starts a new episode: initial model, round-robin association, new
    /// ledger genesis and a channel stream derived from `episode_seed`.
    pub fn reset(&mut self, episode_seed: u64) -> Result<EnvState> {
        self.episode_seed = episode_seed;
        self.step = 0;
        self.clock_ns = 0;
        self.fl.reset_model();
        self.assoc = Association::round_robin(self.net.data_sizes(), self.net.num_bs());
        self.ledger = Self::fresh_ledger(&self.net, &self.cfg, &self.assoc, self.seed)?;
        self.channel_rng = stream_rng(episode_seed, streams::CHANNEL);
        self.redraw_channel();
        Ok(self.observe())
    }

    fn redraw_channel(&mut self) {
        self.channel = ChannelState::draw(
            &self.net,
            self.cfg.fading,
            self.cfg.interference,
            self.cfg.rate_formula,
            &mut self.channel_rng,
        );
    }

    pub fn observe(&self) -> EnvState {
        EnvState {
            cpu_hz: self.net.cpu_hz(),
            twin_counts: self.assoc.counts(),
            data_sizes: self.net.data_sizes(),
            gains: self.channel.uplink_gain.clone(),
        }
    }

    pub fn network(&self) -> &NetworkModel {
        &self.net
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn targets(&self) -> &AccuracyTargets {
        &self.targets
    }

    pub fn federated(&self) -> &FederatedSystem {
        &self.fl
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn association(&self) -> &Association {
        &self.assoc
    }

    pub fn channel(&self) -> &ChannelState {
        &self.channel
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn num_agents(&self) -> usize {
        self.net.num_bs()
    }

    pub fn num_twins(&self) -> usize {
        self.net.num_users()
    }

    pub fn state_dim(&self) -> usize {
        EnvState::feature_dim(self.net.num_bs(), self.net.num_users(), self.net.num_subchannels)
    }

    pub fn action_dim(&self) -> usize {
        AgentAction::dim(self.net.num_users(), self.net.num_subchannels)
    }

    pub fn b_range(&self) -> [f64; 2] {
        [self.cfg.batch_min, self.cfg.batch_max]
    }

    /// Decodes one policy output per agent.
    pub fn decode(&self, outputs: &[Vec<f64>]) -> Result<JointAction> {
        ensure_dim(self.num_agents(), outputs.len())?;
        let agents = outputs
            .iter()
            .map(|o| AgentAction::decode(o, self.num_twins(), self.net.num_subchannels, &self.cfg))
            .collect::<Result<_>>()?;
        Ok(JointAction { agents })
    }

    pub fn project(&self, raw: &JointAction) -> Result<FeasibleAction> {
        project_action(raw, self.num_twins(), self.net.num_subchannels, self.b_range())
    }

    /// Latency of applying `action` to the current channel with the given block.
    pub fn price(&self, action: &FeasibleAction, producer: BsId, block_bits: f64) -> Result<LatencyBreakdown> {
        let assoc = Association::from_assignment(self.net.data_sizes(), self.net.num_bs(), &action.assignment)?;
        iteration_time(&SystemSnapshot {
            net: &self.net,
            assoc: &assoc,
            batch_fracs: &action.batch_fracs,
            alloc: &action.alloc,
            channel: &self.channel,
            producer,
            validators: self.ledger.producers(),
            block_bits,
            theta_g: self.targets.theta_g,
        })
    }

    /// Applies the projected action, runs one federated round through the
    /// ledger, prices it and advances the channel.
    pub fn step(&mut self, raw: &JointAction) -> Result<StepOutcome> {
        let action = self.project(raw)?;
        debug_assert!(check_feasible(&action, self.num_agents(), self.b_range(), 1e-9).is_ok());
        self.assoc = Association::from_assignment(self.net.data_sizes(), self.net.num_bs(), &action.assignment)?;

        let round_seed = mix_seed(self.episode_seed, self.step as u64);
        let phase = self.fl.local_phase(&self.assoc, &action.batch_fracs, round_seed)?;

        let cmp: Vec<f64> = (0..self.num_agents())
            .map(|bs| crate::latency::local_training_time(bs, &self.assoc, &action.batch_fracs, &self.net))
            .collect::<Result<_>>()?;
        let period = cmp.iter().copied().fold(0.0, f64::max);
        let interval = block_interval_policy(period, self.cfg.block_interval_multiplier)?;
        let state_digest = state_digest(&self.observe());
        let model_bits = self.net.model_bits.round().max(1.0) as u64;
        for (bs, agent) in action.joint.agents.iter().enumerate() {
            let at = self.clock_ns + secs_to_ns(cmp[bs]);
            if let Some((w, _)) = &phase.bs_models[bs] {
                let tx = self.ledger.sign(TxKind::TrainingModel, bs, w.to_bytes(), model_bits, at)?;
                self.ledger.submit(tx)?;
            }
            let digest = sha256(&[&state_digest, &action_bytes(agent), &(self.step as u64).to_le_bytes()]);
            let tx = self.ledger.sign(TxKind::TwinData, bs, digest.to_vec(), 256, self.clock_ns)?;
            self.ledger.submit(tx)?;
        }

        let cutoff = self.clock_ns + secs_to_ns(interval);
        let global = self.fl.global_model().clone();
        let spec = *self.fl.model_spec();
        let verification = VerificationContext::new(&spec, self.fl.holdout(), &global, self.cfg.verification_threshold)?;
        let ctx = ValidationContext { model: Some(verification), faulty: &[] };
        let (block, validation) = self.ledger.run_slot(cutoff, &ctx)?;
        let verified = Ledger::verified_models(&block, &validation)?;
        let weights: Vec<(ModelParams, f64)> = verified
            .into_iter()
            .map(|(bs, w)| (w, phase.bs_models[bs].as_ref().map_or(0.0, |(_, d)| *d)))
            .collect();
        let verified_models = weights.len();
        let global_loss = self.fl.apply_global(&weights)?;

        let breakdown = self.price(&action, block.producer, block.bits as f64)?;
        if !breakdown.t_iteration.is_finite() {
            return Err(Error::NonFinite("iteration time; a BS hosting twins has no uplink bandwidth".into()));
        }
        let rewards = reward(&breakdown, self.cfg.reward_mode, self.num_agents());

        self.clock_ns += secs_to_ns(breakdown.t_iteration);
        self.step += 1;
        if !self.cfg.hold_channel {
            self.redraw_channel();
        }
        Ok(StepOutcome {
            next_state: self.observe(),
            rewards,
            breakdown,
            done: self.step >= self.cfg.horizon,
            applied: action,
            global_loss,
            verified_models,
            block_producer: block.producer,
            block_bits: block.bits,
        })
    }
}

fn secs_to_ns(s: f64) -> u64 {
    (s * 1e9).round().clamp(0.0, u64::MAX as f64) as u64
}

fn state_digest(s: &EnvState) -> [u8; 32] {
    let bytes: Vec<u8> = s.features().iter().flat_map(|v| v.to_le_bytes()).collect();
    sha256(&[&bytes])
}

fn action_bytes(a: &AgentAction) -> Vec<u8> {
    a.assoc_scores
        .iter()
        .chain(&a.batch_fracs)
        .chain(&a.bandwidth_shares)
        .flat_map(|v| v.to_le_bytes())
        .collect()
}

/// Per-step trajectory rows as CSV.
pub struct TrajectoryWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> TrajectoryWriter<W> {
    pub fn new(w: W) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(w);
        inner.write_record([
            "episode",
            "step",
            "reward",
            "t_iteration",
            "t_local_training",
            "t_param_tx",
            "t_block_validation",
            "objective",
            "global_loss",
            "twin_counts",
            "assignment",
            "batch_fracs",
        ])?;
        Ok(Self { inner })
    }

    pub fn record(&mut self, episode: usize, step: usize, out: &StepOutcome) -> Result<()> {
        let join = |v: Vec<String>| v.join(" ");
        let b = &out.breakdown;
        self.inner.write_record([
            episode.to_string(),
            step.to_string(),
            format!("{:?}", out.rewards.iter().sum::<f64>() / out.rewards.len().max(1) as f64),
            format!("{:?}", b.t_iteration),
            format!("{:?}", b.t_local_training),
            format!("{:?}", b.t_param_tx),
            format!("{:?}", b.t_block_validation),
            format!("{:?}", b.objective),
            format!("{:?}", out.global_loss),
            join(out.next_state.twin_counts.iter().map(|k| k.to_string()).collect()),
            join(out.applied.assignment.iter().map(|k| k.to_string()).collect()),
            join(out.applied.batch_fracs.iter().map(|b| format!("{b:?}")).collect()),
        ])?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush()?;
        self.inner.into_inner().map_err(|e| Error::Io(e.into_error()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fl::SyntheticTask;
    use crate::model::build_network;
    use crate::testutil::reference_config;
    use proptest::prelude::*;

    fn small_env(fading: FadingModel) -> DtwnEnv {
        let mut c = reference_config();
        c.num_users = 8;
        c.twin_samples = [40, 60];
        let net = build_network(&c).unwrap();
        let cfg = EnvConfig {
            fading,
            horizon: 3,
            fl: FlConfig { data: SyntheticTask { input_dim: 4, ..Default::default() }, holdout_samples: 50, ..Default::default() },
            ..Default::default()
        };
        DtwnEnv::new(net, cfg, AccuracyTargets::default(), 7).unwrap()
    }

    fn raw(scores: &[&[f64]], b: &[&[f64]], tau: &[&[f64]]) -> JointAction {
        JointAction {
            agents: scores
                .iter()
                .zip(b)
                .zip(tau)
                .map(|((s, b), t)| AgentAction { assoc_scores: s.to_vec(), batch_fracs: b.to_vec(), bandwidth_shares: t.to_vec() })
                .collect(),
        }
    }

    #[test]
    fn initial_round_robin_counts() {
        let mut c = reference_config();
        c.num_users = 4;
        c.bs_positions.truncate(2);
        c.bs_cpu_ghz.truncate(2);
        c.num_producers = 1;
        c.twin_samples = [20, 30];
        let net = build_network(&c).unwrap();
        let cfg = EnvConfig { fl: FlConfig { holdout_samples: 20, ..Default::default() }, ..Default::default() };
        let env = DtwnEnv::new(net, cfg, AccuracyTargets::default(), 1).unwrap();
        assert_eq!(env.observe().twin_counts, vec![2, 2]);
    }

    #[test]
    fn constant_channel_is_all_ones() {
        let env = small_env(FadingModel::Constant);
        assert!(env.observe().gains.iter().flatten().all(|&h| h == 1.0));
    }

    #[test]
    fn reassociation_moves_one_count() {
        let mut env = small_env(FadingModel::Constant);
        let before = env.observe().twin_counts;
        let m = env.num_agents();
        let mut a = JointAction::average(m, env.num_twins(), 5, env.config());
        // twin 0 starts on BS 0; hand it to BS 1
        a.agents[0].assoc_scores[0] = 0.0;
        a.agents[1].assoc_scores[0] = 1.0;
        let out = env.step(&a).unwrap();
        let after = out.next_state.twin_counts;
        assert_eq!(after[0] + 1, before[0]);
        assert_eq!(after[1], before[1] + 1);
    }

    #[test]
    fn projection_examples() {
        let a = raw(&[&[0.5], &[0.5]], &[&[7.3], &[-2.0]], &[&[0.4], &[0.4]]);
        let p = project_action(&a, 1, 1, [0.1, 1.0]).unwrap();
        assert_eq!(p.assignment, vec![0]);
        assert_eq!(p.batch_fracs, vec![1.0]);
        assert_eq!(p.joint.agents[1].batch_fracs, vec![0.1]);
        let a = raw(&[&[0.0], &[0.0], &[0.0]], &[&[0.5], &[0.5], &[0.5]], &[&[0.4], &[0.4], &[0.4]]);
        let p = project_action(&a, 1, 1, [0.1, 1.0]).unwrap();
        for bs in 0..3 {
            assert!((p.alloc.shares[bs][0] - 1.0 / 3.0).abs() < 1e-15);
        }
        let nan = raw(&[&[f64::NAN]], &[&[0.5]], &[&[1.0]]);
        assert!(matches!(project_action(&nan, 1, 1, [0.1, 1.0]), Err(Error::NonFinite(_))));
        let dead = raw(&[&[1.0], &[0.0]], &[&[0.5], &[0.5]], &[&[-1.0], &[0.0]]);
        let p = project_action(&dead, 1, 1, [0.1, 1.0]).unwrap();
        assert_eq!(p.alloc.shares, vec![vec![0.5], vec![0.5]]);
    }

    #[test]
    fn reward_definitions() {
        let mut b = LatencyBreakdown::default();
        assert_eq!(reward(&b, RewardMode::Shared, 3), vec![0.0; 3]);
        b.t_iteration = 2.5;
        assert_eq!(reward(&b, RewardMode::Shared, 2), vec![-2.5, -2.5]);
        b.per_bs = vec![
            crate::latency::BsLatency { local_training: 0.25, local_agg: 9.0, param_tx: 0.5 },
            crate::latency::BsLatency { local_training: 2.0, local_agg: 9.0, param_tx: 0.75 },
        ];
        b.t_block_validation = 0.25;
        assert_eq!(reward(&b, RewardMode::PerAgent, 2), vec![-1.0, -3.0]);
    }

    #[test]
    fn discounting() {
        assert_eq!(discounted_return(&[-1.0, -5.0], 0.0).unwrap(), -1.0);
        assert_eq!(discounted_return(&[-1.0; 3], 1.0).unwrap(), -3.0);
        assert!((discounted_return(&[-1.0, -2.0], 0.9).unwrap() + 2.8).abs() < 1e-15);
        assert!(discounted_return(&[1.0], 1.5).is_err());
    }

    #[test]
    fn steps_are_deterministic_and_end_at_horizon() {
        let mut a = small_env(FadingModel::Rayleigh);
        let mut b = small_env(FadingModel::Rayleigh);
        let mut rng = stream_rng(3, 3);
        let mut done = false;
        for t in 0..3 {
            let act = JointAction::random(5, 8, 5, a.config(), &mut rng);
            let oa = a.step(&act).unwrap();
            let ob = b.step(&act).unwrap();
            assert_eq!(oa, ob);
            assert_eq!(oa.rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max), oa.rewards[0]);
            assert_eq!(oa.rewards.iter().copied().fold(f64::INFINITY, f64::min), oa.rewards[0]);
            assert_eq!(oa.done, t == 2);
            done = oa.done;
        }
        assert!(done);
        assert_eq!(a.ledger().height(), 3);
    }

    #[test]
    fn reward_matches_independent_pricing() {
        let mut env = small_env(FadingModel::Rayleigh);
        let act = JointAction::average(5, 8, 5, env.config());
        let feasible = env.project(&act).unwrap();
        let producer = env.ledger().scheduled_producer();
        let channel = env.channel().clone();
        let out = env.step(&act).unwrap();
        let assoc = Association::from_assignment(env.network().data_sizes(), 5, &feasible.assignment).unwrap();
        let expected = iteration_time(&SystemSnapshot {
            net: env.network(),
            assoc: &assoc,
            batch_fracs: &feasible.batch_fracs,
            alloc: &feasible.alloc,
            channel: &channel,
            producer,
            validators: env.ledger().producers(),
            block_bits: out.block_bits as f64,
            theta_g: 0.9,
        })
        .unwrap();
        assert!((out.rewards[0] + expected.t_iteration).abs() <= 1e-9 * expected.t_iteration);
        assert_eq!(out.verified_models, 5);
    }

    #[test]
    fn starving_a_bs_costs_latency() {
        let env = small_env(FadingModel::Constant);
        let balanced = env.project(&JointAction::average(5, 8, 5, env.config())).unwrap();
        let mut starved_raw = JointAction::average(5, 8, 5, env.config());
        starved_raw.agents[2].bandwidth_shares = vec![1e-4; 5];
        let starved = env.project(&starved_raw).unwrap();
        let pb = env.price(&balanced, 0, 1e6).unwrap();
        let ps = env.price(&starved, 0, 1e6).unwrap();
        assert!(ps.per_bs[2].param_tx > pb.per_bs[2].param_tx);
        assert_eq!(ps.t_param_tx, ps.per_bs[2].param_tx);
        assert!(ps.t_iteration > pb.t_iteration);
    }

    #[test]
    fn fastest_bs_versus_balanced_agrees_with_oracle() {
        let env = small_env(FadingModel::Constant);
        let net = env.network();
        let fastest = (0..5).max_by(|&a, &b| net.base_stations[a].cpu_hz.total_cmp(&net.base_stations[b].cpu_hz)).unwrap();
        let mut all = JointAction::average(5, 8, 5, env.config());
        for (bs, a) in all.agents.iter_mut().enumerate() {
            a.assoc_scores = vec![if bs == fastest { 1.0 } else { 0.0 }; 8];
        }
        let bal = JointAction::average(5, 8, 5, env.config());
        for act in [all, bal] {
            let f = env.project(&act).unwrap();
            let got = env.price(&f, 0, 2e6).unwrap().t_iteration;
            // straight-line recomputation
            let d = net.data_sizes();
            let mut cmp = 0.0f64;
            let mut pt = 0.0f64;
            for bs in 0..5 {
                let twins: Vec<usize> = (0..8).filter(|&j| f.assignment[j] == bs).collect();
                let samples: f64 = twins.iter().map(|&j| f.batch_fracs[j] * d[j] as f64).sum();
                cmp = cmp.max(samples * net.cycles_per_sample / net.base_stations[bs].cpu_hz);
                let r = net.base_stations[bs].mbs_distance;
                let snr = net.bs_tx_power_w * r.powf(-net.path_loss_exponent) / net.noise_w;
                let rate: f64 = (0..5).map(|c| f.alloc.shares[bs][c] * net.uplink_bandwidth_hz * (1.0 + snr).log2()).sum();
                if !twins.is_empty() {
                    pt = pt.max(5f64.log2() * twins.len() as f64 * net.model_bits / rate);
                }
            }
            let prod_snr = net.mbs_tx_power_w * net.base_stations[0].mbs_distance.powf(-net.path_loss_exponent) / net.noise_w;
            let down: f64 = 5.0 * net.downlink_bandwidth_hz * (1.0 + prod_snr).log2();
            let validators = env.ledger().producers();
            let verify = validators
                .iter()
                .map(|&v| 2e6 * net.cycles_per_validation_unit / net.base_stations[v].validation_hz)
                .fold(0.0, f64::max);
            let expected = cmp + pt + (validators.len() as f64).log2() * 2e6 / down + verify;
            assert!((got - expected).abs() <= 1e-9 * expected, "{got} vs {expected}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn projection_is_total_and_idempotent(
            vals in proptest::collection::vec(-1e3..1e3f64, 3 * (2 * 4 + 2)),
        ) {
            let agents = vals
                .chunks(10)
                .map(|c| AgentAction { assoc_scores: c[..4].to_vec(), batch_fracs: c[4..8].to_vec(), bandwidth_shares: c[8..].to_vec() })
                .collect();
            let raw = JointAction { agents };
            let p = project_action(&raw, 4, 2, [0.1, 1.0]).unwrap();
            check_feasible(&p, 3, [0.1, 1.0], 1e-9).unwrap();
            for c in 0..2 {
                prop_assert!((p.alloc.column_sum(c) - 1.0).abs() <= 1e-12);
            }
            let again = project_action(&p.joint, 4, 2, [0.1, 1.0]).unwrap();
            prop_assert_eq!(&again.assignment, &p.assignment);
            prop_assert_eq!(&again.batch_fracs, &p.batch_fracs);
            for (ra, rb) in again.alloc.shares.iter().zip(&p.alloc.shares) {
                for (x, y) in ra.iter().zip(rb) {
                    prop_assert!((x - y).abs() <= 1e-15);
                }
            }
        }
    }
}
