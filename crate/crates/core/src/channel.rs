//! OFDMA uplink/downlink achievable rates between the BSs and the MBS.
//!
//! Two rate formulas are supported. [`RateFormula::Corrected`] (default)
//! attenuates every interferer by its own distance to the MBS and applies path
//! loss to the downlink signal term. [`RateFormula::Literal`] reproduces the
//! textbook expressions verbatim: interference is attenuated by the victim's
//! distance, and the downlink signal carries no path loss.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::model::{BsId, NetworkModel};

/// `P_W = 10^((dBm - 30) / 10)`.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateFormula {
    #[default]
    Corrected,
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FadingModel {
    /// Unit-mean exponential power gains, redrawn every step.
    #[default]
    Rayleigh,
    /// All gains fixed at 1.
    Constant,
}

/// Which BSs share a subchannel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterferenceMode {
    /// Time-shared subchannels are orthogonal: no co-channel interference.
    #[default]
    Orthogonal,
    /// Every BS interferes with every other BS on every subchannel.
    CoChannel,
}

/// Path-loss factor `r^(-alpha)`.
pub fn path_loss(r: f64, alpha: f64) -> Result<f64> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::invalid(format!("distance must be positive, got {r}")));
    }
    Ok(r.powf(-alpha))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    /// `h^U[i][c]`.
    pub uplink_gain: Vec<Vec<f64>>,
    /// `h^D[i][c]`.
    pub downlink_gain: Vec<Vec<f64>>,
    /// BS-to-MBS distance `r_{i,m}`.
    pub distance: Vec<f64>,
    /// BSs sharing each uplink subchannel (N').
    pub uplink_sharing: Vec<Vec<BsId>>,
    /// BSs sharing each downlink subchannel (N'').
    pub downlink_sharing: Vec<Vec<BsId>>,
    pub formula: RateFormula,
}

impl ChannelState {
    /// Unit gains, no interference.
    pub fn unit(net: &NetworkModel) -> Self {
        let m = net.num_bs();
        let c = net.num_subchannels;
        Self {
            uplink_gain: vec![vec![1.0; c]; m],
            downlink_gain: vec![vec![1.0; c]; m],
            distance: net.base_stations.iter().map(|b| b.mbs_distance).collect(),
            uplink_sharing: vec![Vec::new(); c],
            downlink_sharing: vec![Vec::new(); c],
            formula: RateFormula::Corrected,
        }
    }

    pub fn draw<R: Rng + ?Sized>(
        net: &NetworkModel,
        fading: FadingModel,
        interference: InterferenceMode,
        formula: RateFormula,
        rng: &mut R,
    ) -> Self {
        let mut ch = Self::unit(net);
        ch.formula = formula;
        if fading == FadingModel::Rayleigh {
            for row in ch.uplink_gain.iter_mut().chain(ch.downlink_gain.iter_mut()) {
                for g in row.iter_mut() {
                    *g = Exp1.sample(rng);
                }
            }
        }
        if interference == InterferenceMode::CoChannel {
            let all: Vec<BsId> = (0..net.num_bs()).collect();
            ch.uplink_sharing = vec![all.clone(); net.num_subchannels];
            ch.downlink_sharing = vec![all; net.num_subchannels];
        }
        ch
    }

    pub fn num_bs(&self) -> usize {
        self.distance.len()
    }

    pub fn num_subchannels(&self) -> usize {
        self.uplink_gain.first().map_or(0, Vec::len)
    }

    /// Flattened BS-major uplink gains, as observed by the agents.
    pub fn flat_uplink_gains(&self) -> Vec<f64> {
        self.uplink_gain.iter().flatten().copied().collect()
    }

    fn check(&self, net: &NetworkModel) -> Result<()> {
        ensure_dim(net.num_bs(), self.distance.len())?;
        ensure_dim(net.num_bs(), self.uplink_gain.len())?;
        ensure_dim(net.num_bs(), self.downlink_gain.len())?;
        ensure_dim(net.num_subchannels, self.uplink_sharing.len())?;
        ensure_dim(net.num_subchannels, self.downlink_sharing.len())?;
        for row in self.uplink_gain.iter().chain(&self.downlink_gain) {
            ensure_dim(net.num_subchannels, row.len())?;
            if row.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
                return Err(Error::invalid("channel gains must be finite and >= 0"));
            }
        }
        for set in self.uplink_sharing.iter().chain(&self.downlink_sharing) {
            if let Some(&j) = set.iter().find(|&&j| j >= net.num_bs()) {
                return Err(Error::UnknownBs(j));
            }
        }
        Ok(())
    }
}

/// Time fractions `tau[i][c]` of each subchannel given to each BS.
#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthAllocation {
    pub shares: Vec<Vec<f64>>,
}

impl BandwidthAllocation {
    pub fn new(shares: Vec<Vec<f64>>) -> Self {
        Self { shares }
    }

    /// Every subchannel split evenly across `num_bs` stations.
    pub fn uniform(num_bs: usize, num_subchannels: usize) -> Self {
        Self { shares: vec![vec![1.0 / num_bs as f64; num_subchannels]; num_bs] }
    }

    pub fn column_sum(&self, c: usize) -> f64 {
        self.shares.iter().map(|row| row[c]).sum()
    }

    /// Entries in `[0, 1]`, every column summing to at most `1 + tol`.
    pub fn validate(&self, num_bs: usize, num_subchannels: usize, tol: f64) -> Result<()> {
        ensure_dim(num_bs, self.shares.len())?;
        for row in &self.shares {
            ensure_dim(num_subchannels, row.len())?;
            if row.iter().any(|t| !(t.is_finite() && (0.0..=1.0).contains(t))) {
                return Err(Error::invalid("time fractions must lie in [0, 1]"));
            }
        }
        for c in 0..num_subchannels {
            let s = self.column_sum(c);
            if s > 1.0 + tol {
                return Err(Error::invalid(format!("subchannel {c} over-allocated: {s}")));
            }
        }
        Ok(())
    }
}

fn spectral_efficiency(signal: f64, interference: f64, noise: f64) -> f64 {
    if signal <= 0.0 {
        return 0.0;
    }
    (1.0 + signal / (interference + noise)).log2()
}

/// Uplink rate of BS `bs` on a single subchannel, ignoring the time fraction.
pub fn uplink_efficiency(bs: BsId, c: usize, ch: &ChannelState, net: &NetworkModel) -> Result<f64> {
    let alpha = net.path_loss_exponent;
    let p = net.bs_tx_power_w;
    let own_pl = path_loss(ch.distance[bs], alpha)?;
    let mut interference = 0.0;
    for &j in ch.uplink_sharing[c].iter().filter(|&&j| j != bs) {
        let pl = match ch.formula {
            RateFormula::Corrected => path_loss(ch.distance[j], alpha)?,
            RateFormula::Literal => own_pl,
        };
        interference += p * ch.uplink_gain[j][c] * pl;
    }
    let signal = p * ch.uplink_gain[bs][c] * own_pl;
    Ok(spectral_efficiency(signal, interference, net.noise_w))
}

/// `R_i^U = sum_c tau_{i,c} W^U log2(1 + SINR_{i,c})`.
pub fn uplink_rate(
    bs: BsId,
    ch: &ChannelState,
    alloc: &BandwidthAllocation,
    net: &NetworkModel,
) -> Result<f64> {
    ch.check(net)?;
    if bs >= net.num_bs() {
        return Err(Error::UnknownBs(bs));
    }
    ensure_dim(net.num_bs(), alloc.shares.len())?;
    ensure_dim(net.num_subchannels, alloc.shares[bs].len())?;
    let mut rate = 0.0;
    for c in 0..net.num_subchannels {
        let tau = alloc.shares[bs][c];
        if tau == 0.0 {
            continue;
        }
        rate += tau * net.uplink_bandwidth_hz * uplink_efficiency(bs, c, ch, net)?;
    }
    Ok(rate)
}

/// `R_i^D = sum_c W^D log2(1 + SINR^D_{i,c})`.
pub fn downlink_rate(bs: BsId, ch: &ChannelState, net: &NetworkModel) -> Result<f64> {
    ch.check(net)?;
    if bs >= net.num_bs() {
        return Err(Error::UnknownBs(bs));
    }
    let alpha = net.path_loss_exponent;
    let p = net.mbs_tx_power_w;
    let own_pl = path_loss(ch.distance[bs], alpha)?;
    let mut rate = 0.0;
    for c in 0..net.num_subchannels {
        let mut interference = 0.0;
        for &j in ch.downlink_sharing[c].iter().filter(|&&j| j != bs) {
            let pl = match ch.formula {
                RateFormula::Corrected => path_loss(ch.distance[j], alpha)?,
                RateFormula::Literal => own_pl,
            };
            interference += p * ch.downlink_gain[j][c] * pl;
        }
        let signal = match ch.formula {
            RateFormula::Corrected => p * ch.downlink_gain[bs][c] * own_pl,
            RateFormula::Literal => p * ch.downlink_gain[bs][c],
        };
        rate += net.downlink_bandwidth_hz * spectral_efficiency(signal, interference, net.noise_w);
    }
    Ok(rate)
}
