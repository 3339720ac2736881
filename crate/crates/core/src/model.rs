//! Static network topology, digital twins and the edge-association mapping.
//!
//! Positions are in meters, frequencies in hertz and powers in watts once a
//! [`NetworkConfig`] has been turned into a [`NetworkModel`]. The config file
//! itself uses the customary radio units (GHz, MHz, dBm).

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::dbm_to_watts;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, streams};

pub type TwinId = usize;
pub type BsId = usize;

/// On-disk description of a network. See `configs/desk_network.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub num_users: usize,
    /// Seed for user placement and per-twin dataset sizes.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mbs_position: [f64; 2],
    pub bs_positions: Vec<[f64; 2]>,
    pub bs_cpu_ghz: Vec<f64>,
    /// Block-validation CPU frequency per BS; defaults to `bs_cpu_ghz`.
    #[serde(default)]
    pub bs_validation_ghz: Option<Vec<f64>>,
    pub bs_tx_power_dbm: f64,
    pub mbs_tx_power_dbm: f64,
    pub num_subchannels: usize,
    pub uplink_bandwidth_mhz: f64,
    pub downlink_bandwidth_mhz: f64,
    pub noise_dbm: f64,
    pub path_loss_exponent: f64,
    pub cell_radius_m: f64,
    /// Inclusive range of samples held by each twin.
    pub twin_samples: [u64; 2],
    pub sample_bytes: u64,
    pub cycles_per_sample: f64,
    pub cycles_per_agg_unit: f64,
    pub cycles_per_validation_unit: f64,
    pub tx_factor: f64,
    pub model_bits: f64,
    pub block_header_bits: f64,
    pub num_producers: usize,
}

impl NetworkConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        Ok(toml::from_str(s)?)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaseStation {
    pub id: BsId,
    pub position: Position,
    pub cpu_hz: f64,
    pub validation_hz: f64,
    /// Distance to the macro base station.
    pub mbs_distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct User {
    pub id: usize,
    pub position: Position,
    /// BS whose coverage disc the user was placed in.
    pub home_bs: BsId,
    /// Samples held by the user's digital twin.
    pub samples: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    pub users: Vec<User>,
    pub base_stations: Vec<BaseStation>,
    pub mbs_position: Position,
    pub bs_tx_power_w: f64,
    pub mbs_tx_power_w: f64,
    pub num_subchannels: usize,
    pub uplink_bandwidth_hz: f64,
    pub downlink_bandwidth_hz: f64,
    pub noise_w: f64,
    pub path_loss_exponent: f64,
    pub sample_bytes: u64,
    pub cycles_per_sample: f64,
    pub cycles_per_agg_unit: f64,
    pub cycles_per_validation_unit: f64,
    pub tx_factor: f64,
    pub model_bits: f64,
    pub block_header_bits: f64,
    pub num_producers: usize,
}

impl NetworkModel {
    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_bs(&self) -> usize {
        self.base_stations.len()
    }

    pub fn data_sizes(&self) -> Vec<u64> {
        self.users.iter().map(|u| u.samples).collect()
    }

    pub fn total_samples(&self) -> u64 {
        self.users.iter().map(|u| u.samples).sum()
    }

    pub fn cpu_hz(&self) -> Vec<f64> {
        self.base_stations.iter().map(|b| b.cpu_hz).collect()
    }

    pub fn bs(&self, id: BsId) -> Result<&BaseStation> {
        self.base_stations.get(id).ok_or(Error::UnknownBs(id))
    }

    /// Checks every structural and physical invariant.
    pub fn validate(&self) -> Result<()> {
        let m = self.num_bs();
        if self.users.is_empty() {
            return Err(Error::config("at least one user is required"));
        }
        if m == 0 {
            return Err(Error::config("at least one base station is required"));
        }
        if self.num_subchannels == 0 {
            return Err(Error::config("at least one subchannel is required"));
        }
        if self.num_producers == 0 || self.num_producers > m {
            return Err(Error::config(format!(
                "num_producers must be in 1..={m}, got {}",
                self.num_producers
            )));
        }
        let positive = [
            ("bs_tx_power", self.bs_tx_power_w),
            ("mbs_tx_power", self.mbs_tx_power_w),
            ("uplink_bandwidth", self.uplink_bandwidth_hz),
            ("downlink_bandwidth", self.downlink_bandwidth_hz),
            ("noise", self.noise_w),
            ("cycles_per_sample", self.cycles_per_sample),
            ("cycles_per_agg_unit", self.cycles_per_agg_unit),
            ("cycles_per_validation_unit", self.cycles_per_validation_unit),
            ("tx_factor", self.tx_factor),
            ("model_bits", self.model_bits),
            ("block_header_bits", self.block_header_bits),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.sample_bytes == 0 {
            return Err(Error::config("sample_bytes must be positive"));
        }
        if !(self.path_loss_exponent.is_finite() && self.path_loss_exponent >= 0.0) {
            return Err(Error::config("path_loss_exponent must be >= 0"));
        }
        for bs in &self.base_stations {
            if !(bs.cpu_hz.is_finite() && bs.cpu_hz > 0.0) {
                return Err(Error::config(format!("BS {} cpu frequency must be positive", bs.id)));
            }
            if !(bs.validation_hz.is_finite() && bs.validation_hz > 0.0) {
                return Err(Error::config(format!(
                    "BS {} validation frequency must be positive",
                    bs.id
                )));
            }
            if !(bs.mbs_distance > 0.0) {
                return Err(Error::config(format!(
                    "BS {} is co-located with the MBS; distance must be positive",
                    bs.id
                )));
            }
        }
        Ok(())
    }
}

/// Builds a validated network. User placement (uniform in the home BS disc)
/// and per-twin dataset sizes are drawn from `config.seed`.
pub fn build_network(config: &NetworkConfig) -> Result<NetworkModel> {
    let m = config.bs_positions.len();
    if config.bs_cpu_ghz.len() != m {
        return Err(Error::config(format!(
            "bs_cpu_ghz has {} entries for {m} base stations",
            config.bs_cpu_ghz.len()
        )));
    }
    let validation_ghz = match &config.bs_validation_ghz {
        Some(v) if v.len() != m => {
            return Err(Error::config(format!(
                "bs_validation_ghz has {} entries for {m} base stations",
                v.len()
            )))
        }
        Some(v) => v.clone(),
        None => config.bs_cpu_ghz.clone(),
    };
    if config.num_producers > m {
        return Err(Error::config(format!(
            "num_producers ({}) exceeds the number of base stations ({m})",
            config.num_producers
        )));
    }
    let [lo, hi] = config.twin_samples;
    if lo > hi {
        return Err(Error::config("twin_samples must be [min, max] with min <= max"));
    }
    if !(config.cell_radius_m.is_finite() && config.cell_radius_m >= 0.0) {
        return Err(Error::config("cell_radius_m must be >= 0"));
    }

    let mbs = Position::new(config.mbs_position[0], config.mbs_position[1]);
    let base_stations: Vec<BaseStation> = (0..m)
        .map(|id| {
            let p = Position::new(config.bs_positions[id][0], config.bs_positions[id][1]);
            BaseStation {
                id,
                position: p,
                cpu_hz: config.bs_cpu_ghz[id] * 1e9,
                validation_hz: validation_ghz[id] * 1e9,
                mbs_distance: p.distance(&mbs),
            }
        })
        .collect();

    let mut place_rng = stream_rng(config.seed, streams::PLACEMENT);
    let mut size_rng = stream_rng(config.seed, streams::DATASET_SIZES);
    let users = (0..config.num_users)
        .map(|id| {
            let home_bs = if m == 0 { 0 } else { id % m };
            let centre = base_stations.get(home_bs).map(|b| b.position).unwrap_or(mbs);
            // sqrt keeps the density uniform over the disc
            let r = config.cell_radius_m * place_rng.random::<f64>().sqrt();
            let phi = place_rng.random::<f64>() * std::f64::consts::TAU;
            let samples = size_rng.random_range(lo..=hi);
            User {
                id,
                position: Position::new(centre.x + r * phi.cos(), centre.y + r * phi.sin()),
                home_bs,
                samples,
            }
        })
        .collect();

    let net = NetworkModel {
        users,
        base_stations,
        mbs_position: mbs,
        bs_tx_power_w: dbm_to_watts(config.bs_tx_power_dbm),
        mbs_tx_power_w: dbm_to_watts(config.mbs_tx_power_dbm),
        num_subchannels: config.num_subchannels,
        uplink_bandwidth_hz: config.uplink_bandwidth_mhz * 1e6,
        downlink_bandwidth_hz: config.downlink_bandwidth_mhz * 1e6,
        noise_w: dbm_to_watts(config.noise_dbm),
        path_loss_exponent: config.path_loss_exponent,
        sample_bytes: config.sample_bytes,
        cycles_per_sample: config.cycles_per_sample,
        cycles_per_agg_unit: config.cycles_per_agg_unit,
        cycles_per_validation_unit: config.cycles_per_validation_unit,
        tx_factor: config.tx_factor,
        model_bits: config.model_bits,
        block_header_bits: config.block_header_bits,
        num_producers: config.num_producers,
    };
    net.validate()?;
    Ok(net)
}

/// Time-stamped opaque state vector of a digital twin.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DynamicState {
    pub values: Vec<f64>,
    pub timestamp: u64,
}

/// Server-side replica of a user: behavior model, dataset summary and dynamic state.
#[derive(Debug, Clone, PartialEq)]
pub struct DigitalTwin {
    pub id: TwinId,
    pub owner_user: usize,
    pub samples: u64,
    pub sample_bytes: u64,
    pub behavior_model: Vec<f64>,
    pub dynamic_state: DynamicState,
}

impl DigitalTwin {
    pub fn for_user(user: &User, sample_bytes: u64, model_dim: usize) -> Self {
        Self {
            id: user.id,
            owner_user: user.id,
            samples: user.samples,
            sample_bytes,
            behavior_model: vec![0.0; model_dim],
            dynamic_state: DynamicState::default(),
        }
    }

    pub fn data_bytes(&self) -> u64 {
        self.samples * self.sample_bytes
    }
}

/// Edge association Φ. Row `i` holds `D_i` in the column of the BS hosting
/// twin `i` and zero elsewhere; unassigned rows are all zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Association {
    data_sizes: Vec<u64>,
    assigned: Vec<Option<BsId>>,
    num_bs: usize,
}

impl Association {
    /// All-zero matrix.
    pub fn empty(data_sizes: Vec<u64>, num_bs: usize) -> Self {
        let n = data_sizes.len();
        Self { data_sizes, assigned: vec![None; n], num_bs }
    }

    pub fn from_assignment(data_sizes: Vec<u64>, num_bs: usize, bs_of: &[BsId]) -> Result<Self> {
        crate::error::ensure_dim(data_sizes.len(), bs_of.len())?;
        let mut a = Self::empty(data_sizes, num_bs);
        for (twin, &bs) in bs_of.iter().enumerate() {
            a.assign(twin, bs)?;
        }
        Ok(a)
    }

    /// Twin `i` goes to BS `i mod M`.
    pub fn round_robin(data_sizes: Vec<u64>, num_bs: usize) -> Self {
        let n = data_sizes.len();
        let mut a = Self::empty(data_sizes, num_bs);
        for twin in 0..n {
            a.assigned[twin] = Some(twin % num_bs);
        }
        a
    }

    pub fn num_twins(&self) -> usize {
        self.assigned.len()
    }

    pub fn num_bs(&self) -> usize {
        self.num_bs
    }

    pub fn data_sizes(&self) -> &[u64] {
        &self.data_sizes
    }

    pub fn assign(&mut self, twin: TwinId, bs: BsId) -> Result<()> {
        if twin >= self.assigned.len() {
            return Err(Error::UnknownTwin(twin));
        }
        if bs >= self.num_bs {
            return Err(Error::UnknownBs(bs));
        }
        self.assigned[twin] = Some(bs);
        Ok(())
    }

    pub fn bs_of(&self, twin: TwinId) -> Option<BsId> {
        self.assigned.get(twin).copied().flatten()
    }

    /// Φ(i, j).
    pub fn phi(&self, twin: TwinId, bs: BsId) -> u64 {
        match self.bs_of(twin) {
            Some(b) if b == bs => self.data_sizes[twin],
            _ => 0,
        }
    }

    pub fn matrix(&self) -> Vec<Vec<u64>> {
        (0..self.num_twins())
            .map(|i| (0..self.num_bs).map(|j| self.phi(i, j)).collect())
            .collect()
    }

    pub fn twins_of(&self, bs: BsId) -> impl Iterator<Item = TwinId> + '_ {
        self.assigned
            .iter()
            .enumerate()
            .filter(move |(_, b)| **b == Some(bs))
            .map(|(i, _)| i)
    }

    /// Twin counts `K_i` for every BS.
    pub fn counts(&self) -> Vec<usize> {
        let mut k = vec![0; self.num_bs];
        for b in self.assigned.iter().flatten() {
            k[*b] += 1;
        }
        k
    }

    /// Samples hosted by each BS.
    pub fn bs_data(&self) -> Vec<u64> {
        let mut d = vec![0; self.num_bs];
        for (twin, b) in self.assigned.iter().enumerate() {
            if let Some(b) = b {
                d[*b] += self.data_sizes[twin];
            }
        }
        d
    }

    /// Every twin is hosted by exactly one BS.
    pub fn is_complete(&self) -> bool {
        self.assigned.iter().all(Option::is_some)
    }

    pub fn assignment(&self) -> Vec<Option<BsId>> {
        self.assigned.clone()
    }
}

/// Returns `assoc` with twin `twin` moved to `bs`; other rows are untouched.
pub fn associate(twin: TwinId, bs: BsId, mut assoc: Association) -> Result<Association> {
    assoc.assign(twin, bs)?;
    Ok(assoc)
}

/// Number of twins hosted by `bs` (`K_i`).
pub fn twin_count(assoc: &Association, bs: BsId) -> usize {
    assoc.twins_of(bs).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::reference_config;
    use proptest::prelude::*;

    #[test]
    fn builds_full_scale_network() {
        let net = build_network(&reference_config()).unwrap();
        assert_eq!(net.num_bs(), 5);
        assert_eq!(net.num_users(), 100);
        let ghz: Vec<f64> = net.cpu_hz().iter().map(|f| f / 1e9).collect();
        assert_eq!(ghz, vec![2.6, 1.8, 3.6, 2.4, 2.4]);
        assert_eq!(net.uplink_bandwidth_hz, 30e6);
        assert!((net.noise_w - 1e-3 * 10f64.powf(-17.4)).abs() < 1e-33);
        assert!((net.bs_tx_power_w - 10f64.powf(0.4)).abs() < 1e-12);
        assert!((net.mbs_tx_power_w - 10f64.powf(1.2)).abs() < 1e-12);
        for u in &net.users {
            let home = &net.base_stations[u.home_bs];
            assert!(u.position.distance(&home.position) <= 150.0 + 1e-9);
            assert!((400..=600).contains(&u.samples));
        }
    }

    #[test]
    fn minimal_topology_is_valid() {
        let mut c = reference_config();
        c.num_users = 1;
        c.bs_positions = vec![[100.0, 0.0]];
        c.bs_cpu_ghz = vec![1.0];
        c.num_subchannels = 1;
        c.num_producers = 1;
        let net = build_network(&c).unwrap();
        assert_eq!((net.num_users(), net.num_bs(), net.num_subchannels), (1, 1, 1));
    }

    #[test]
    fn rejects_too_many_producers() {
        let mut c = reference_config();
        c.num_producers = 6;
        assert!(matches!(build_network(&c), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_non_positive_constants() {
        let mut c = reference_config();
        c.cycles_per_sample = 0.0;
        assert!(build_network(&c).is_err());
        let mut c = reference_config();
        c.bs_cpu_ghz[2] = -1.0;
        assert!(build_network(&c).is_err());
        let mut c = reference_config();
        c.bs_positions[0] = [0.0, 0.0];
        assert!(build_network(&c).is_err());
    }

    #[test]
    fn malformed_config_is_an_error() {
        assert!(NetworkConfig::from_toml_str("num_users = \"many\"").is_err());
        assert!(NetworkConfig::from_toml_str("bogus_key = 1").is_err());
    }

    #[test]
    fn build_is_deterministic() {
        let a = build_network(&reference_config()).unwrap();
        let b = build_network(&reference_config()).unwrap();
        assert_eq!(a, b);
        let mut c = reference_config();
        c.seed = 4;
        assert_ne!(a.users, build_network(&c).unwrap().users);
    }

    #[test]
    fn associate_sets_single_column() {
        let a = Association::empty(vec![100], 3);
        let a = associate(0, 2, a).unwrap();
        assert_eq!(a.matrix(), vec![vec![0, 0, 100]]);
        let a = associate(0, 1, a).unwrap();
        assert_eq!(a.matrix(), vec![vec![0, 100, 0]]);
    }

    #[test]
    fn associate_rejects_unknown_ids() {
        let a = Association::empty(vec![1, 2], 2);
        assert!(matches!(associate(5, 0, a.clone()), Err(Error::UnknownTwin(5))));
        assert!(matches!(associate(0, 2, a), Err(Error::UnknownBs(2))));
    }

    #[test]
    fn twin_counts() {
        let empty = Association::empty(vec![10; 4], 2);
        assert_eq!(twin_count(&empty, 0), 0);

        let mut a = Association::empty(vec![10; 4], 2);
        for twin in 0..4 {
            a = associate(twin, twin % 2, a).unwrap();
        }
        assert_eq!((twin_count(&a, 0), twin_count(&a, 1)), (2, 2));

        let all = Association::from_assignment(vec![1; 7], 3, &[0; 7]).unwrap();
        assert_eq!(twin_count(&all, 0), 7);
    }

    proptest! {
        #[test]
        fn row_exclusivity_and_conservation(
            sizes in proptest::collection::vec(1u64..1000, 1..12),
            moves in proptest::collection::vec((0usize..12, 0usize..4), 0..40),
        ) {
            let n = sizes.len();
            let mut a = Association::round_robin(sizes.clone(), 4);
            for (t, b) in moves {
                a = associate(t % n, b, a).unwrap();
            }
            for (i, row) in a.matrix().iter().enumerate() {
                let nonzero: Vec<_> = row.iter().filter(|v| **v != 0).collect();
                prop_assert_eq!(nonzero.len(), 1);
                prop_assert_eq!(*nonzero[0], sizes[i]);
            }
            let counts: usize = (0..4).map(|b| twin_count(&a, b)).sum();
            prop_assert_eq!(counts, n);
            let total: u64 = a.matrix().iter().flatten().sum();
            prop_assert_eq!(total, sizes.iter().sum::<u64>());
        }
    }
}
