//! Per-round latency model: local training, BS-level aggregation, model
//! broadcast, block broadcast and validation, and the accuracy-scaled objective.

use serde::{Deserialize, Serialize};

use crate::channel::{downlink_rate, uplink_rate, BandwidthAllocation, ChannelState};
use crate::error::{ensure_dim, Error, Result};
use crate::model::{Association, BsId, NetworkModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccuracyTargets {
    /// Local accuracy θ_L.
    pub theta_l: f64,
    /// Global accuracy θ_G.
    pub theta_g: f64,
    /// Minimum acceptable global accuracy θ_th.
    pub theta_th: f64,
    /// Smoothness constant L of the training loss.
    #[serde(default = "default_smoothness")]
    pub smoothness: f64,
}

fn default_smoothness() -> f64 {
    1.0
}

impl Default for AccuracyTargets {
    fn default() -> Self {
        Self { theta_l: 0.5, theta_g: 0.9, theta_th: 0.8, smoothness: 1.0 }
    }
}

impl AccuracyTargets {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("theta_l", self.theta_l), ("theta_g", self.theta_g), ("theta_th", self.theta_th)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::config(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        if self.theta_g < self.theta_th {
            return Err(Error::AccuracyConstraint { theta_g: self.theta_g, theta_th: self.theta_th });
        }
        if !(self.smoothness > 0.0) {
            return Err(Error::config("smoothness must be positive"));
        }
        Ok(())
    }
}

/// Latency terms of one BS.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BsLatency {
    pub local_training: f64,
    pub local_agg: f64,
    pub param_tx: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LatencyBreakdown {
    /// max_i T_i^cmp.
    pub t_local_training: f64,
    /// max_i T_i^la. Reported, not part of `t_iteration`.
    pub t_local_agg: f64,
    /// max_i T_i^pt.
    pub t_param_tx: f64,
    /// Block broadcast plus validation, T_bp^bv.
    pub t_block_validation: f64,
    /// Broadcast share of `t_block_validation`.
    pub t_block_broadcast: f64,
    /// Validation share of `t_block_validation`.
    pub t_block_verify: f64,
    pub t_iteration: f64,
    /// `t_iteration / (1 - θ_G)`.
    pub objective: f64,
    pub per_bs: Vec<BsLatency>,
}

impl LatencyBreakdown {
    /// Latency attributed to one BS: its own compute and transmission plus the shared block term.
    pub fn bs_time(&self, bs: BsId) -> f64 {
        let b = &self.per_bs[bs];
        b.local_training + b.param_tx + self.t_block_validation
    }
}

fn check_bs(assoc: &Association, net: &NetworkModel, bs: BsId) -> Result<()> {
    if bs >= net.num_bs() {
        return Err(Error::UnknownBs(bs));
    }
    ensure_dim(net.num_bs(), assoc.num_bs())
}

/// `T_i^cmp = (sum_{j in twins(i)} b_j D_j) f^C / f_i^C`.
pub fn local_training_time(
    bs: BsId,
    assoc: &Association,
    batch_fracs: &[f64],
    net: &NetworkModel,
) -> Result<f64> {
    check_bs(assoc, net, bs)?;
    ensure_dim(assoc.num_twins(), batch_fracs.len())?;
    let samples: f64 = assoc
        .twins_of(bs)
        .map(|j| batch_fracs[j] * assoc.data_sizes()[j] as f64)
        .sum();
    Ok(samples * net.cycles_per_sample / net.base_stations[bs].cpu_hz)
}

/// `T_i^la = K_i |w_g| f_b^C / f_i^C`.
pub fn local_aggregation_time(bs: BsId, assoc: &Association, net: &NetworkModel) -> Result<f64> {
    check_bs(assoc, net, bs)?;
    let k = assoc.twins_of(bs).count() as f64;
    Ok(k * net.model_bits * net.cycles_per_agg_unit / net.base_stations[bs].cpu_hz)
}

/// `T_i^pt = ξ log2(M) K_i |w_g| / R_i^U`.
///
/// A single BS has nobody to broadcast to and sends `K_i |w_g|` straight to
/// the MBS. A starved uplink with models to send takes infinitely long.
pub fn model_broadcast_time(
    twin_count: usize,
    uplink_rate: f64,
    num_bs: usize,
    tx_factor: f64,
    model_bits: f64,
) -> Result<f64> {
    if num_bs == 0 {
        return Err(Error::invalid("num_bs must be >= 1"));
    }
    if !(uplink_rate >= 0.0) {
        return Err(Error::invalid(format!("uplink rate must be >= 0, got {uplink_rate}")));
    }
    if twin_count == 0 {
        return Ok(0.0);
    }
    let bits = twin_count as f64 * model_bits;
    if uplink_rate == 0.0 {
        return Ok(f64::INFINITY);
    }
    if num_bs == 1 {
        return Ok(bits / uplink_rate);
    }
    Ok(tx_factor * (num_bs as f64).log2() * bits / uplink_rate)
}

/// Block broadcast and validation components of `T_bp^bv`.
///
/// `validator_hz` lists the validation frequency of every producer; its
/// length is `M_p`. The broadcast term uses the producing BS's rate.
pub fn block_validation_components(
    validator_hz: &[f64],
    block_bits: f64,
    producer_rate: f64,
    cycles_per_validation_unit: f64,
    tx_factor: f64,
) -> Result<(f64, f64)> {
    if validator_hz.is_empty() {
        return Err(Error::invalid("producer set must not be empty"));
    }
    if !(block_bits > 0.0) {
        return Err(Error::invalid(format!("block size must be positive, got {block_bits}")));
    }
    let mp = validator_hz.len() as f64;
    let broadcast = if validator_hz.len() == 1 {
        0.0
    } else if producer_rate > 0.0 {
        tx_factor * mp.log2() * block_bits / producer_rate
    } else {
        f64::INFINITY
    };
    let verify = validator_hz
        .iter()
        .map(|f| block_bits * cycles_per_validation_unit / f)
        .fold(0.0, f64::max);
    Ok((broadcast, verify))
}

/// `T_bp^bv = ξ log2(M_p) S_B / R^D + max_i S_B f^v / f_i^s`.
pub fn block_validation_time(
    validator_hz: &[f64],
    block_bits: f64,
    producer_rate: f64,
    cycles_per_validation_unit: f64,
    tx_factor: f64,
) -> Result<f64> {
    let (b, v) = block_validation_components(
        validator_hz,
        block_bits,
        producer_rate,
        cycles_per_validation_unit,
        tx_factor,
    )?;
    Ok(b + v)
}

/// Everything needed to price one federated round.
#[derive(Debug, Clone, Copy)]
pub struct SystemSnapshot<'a> {
    pub net: &'a NetworkModel,
    pub assoc: &'a Association,
    /// Batch fraction of every twin.
    pub batch_fracs: &'a [f64],
    pub alloc: &'a BandwidthAllocation,
    pub channel: &'a ChannelState,
    /// BS producing this round's block.
    pub producer: BsId,
    /// Block producers that validate the block.
    pub validators: &'a [BsId],
    pub block_bits: f64,
    pub theta_g: f64,
}

/// Per-round latency; the local-aggregation term is reported but not summed.
pub fn iteration_time(s: &SystemSnapshot<'_>) -> Result<LatencyBreakdown> {
    let net = s.net;
    let m = net.num_bs();
    ensure_dim(m, s.assoc.num_bs())?;
    if s.producer >= m {
        return Err(Error::UnknownBs(s.producer));
    }
    let counts = s.assoc.counts();
    let mut per_bs = Vec::with_capacity(m);
    for bs in 0..m {
        let rate = uplink_rate(bs, s.channel, s.alloc, net)?;
        per_bs.push(BsLatency {
            local_training: local_training_time(bs, s.assoc, s.batch_fracs, net)?,
            local_agg: local_aggregation_time(bs, s.assoc, net)?,
            param_tx: model_broadcast_time(counts[bs], rate, m, net.tx_factor, net.model_bits)?,
        });
    }
    let mut validator_hz = Vec::with_capacity(s.validators.len());
    for &v in s.validators {
        validator_hz.push(net.bs(v)?.validation_hz);
    }
    let producer_rate = downlink_rate(s.producer, s.channel, net)?;
    let (broadcast, verify) = block_validation_components(
        &validator_hz,
        s.block_bits,
        producer_rate,
        net.cycles_per_validation_unit,
        net.tx_factor,
    )?;

    let max_of = |f: fn(&BsLatency) -> f64| per_bs.iter().map(f).fold(0.0, f64::max);
    let t_local_training = max_of(|b| b.local_training);
    let t_local_agg = max_of(|b| b.local_agg);
    let t_param_tx = max_of(|b| b.param_tx);
    let t_block_validation = broadcast + verify;
    let t_iteration = t_local_training + t_param_tx + broadcast + verify;
    Ok(LatencyBreakdown {
        t_local_training,
        t_local_agg,
        t_param_tx,
        t_block_validation,
        t_block_broadcast: broadcast,
        t_block_verify: verify,
        t_iteration,
        objective: t_iteration / (1.0 - s.theta_g),
        per_bs,
    })
}

/// Round budget `ceil(1 / (1 - θ_G))`.
pub fn global_iteration_bound(theta_g: f64) -> Result<u64> {
    if !(0.0..1.0).contains(&theta_g) {
        return Err(Error::invalid(format!("theta_G must lie in [0, 1), got {theta_g}")));
    }
    let bound = 1.0 / (1.0 - theta_g);
    // 1 / (1 - 0.9) evaluates to 10.000000000000002; treat sub-ulp overshoot as exact
    let nearest = bound.round();
    if (bound - nearest).abs() <= 1e-9 * nearest {
        Ok(nearest as u64)
    } else {
        Ok(bound.ceil() as u64)
    }
}

/// Accuracy-scaled objective `T / (1 - θ_G)`, subject to θ_G ≥ θ_th.
pub fn total_objective(theta_g: f64, theta_th: f64, iteration_time: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&theta_g) {
        return Err(Error::invalid(format!("theta_G must lie in [0, 1), got {theta_g}")));
    }
    if theta_g < theta_th {
        return Err(Error::AccuracyConstraint { theta_g, theta_th });
    }
    Ok(iteration_time / (1.0 - theta_g))
}

/// Local iterations per global round, `ceil(log_base(1 / θ_L))`.
pub fn local_iterations(theta_l: f64, log_base: f64) -> Result<usize> {
    if !(theta_l > 0.0 && theta_l <= 1.0) {
        return Err(Error::invalid(format!("theta_L must lie in (0, 1], got {theta_l}")));
    }
    if !(log_base > 1.0) {
        return Err(Error::invalid("log base must exceed 1"));
    }
    let iters = (1.0 / theta_l).ln() / log_base.ln();
    Ok((iters - 1e-12).ceil().max(0.0) as usize)
}
