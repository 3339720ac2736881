//! Experiment configuration files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::env::{DtwnEnv, EnvConfig};
use crate::error::{Error, Result};
use crate::latency::AccuracyTargets;
use crate::ledger::crypto::{sha256, Digest};
use crate::maddpg::MaddpgConfig;
use crate::model::{build_network, NetworkConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    #[default]
    Learned,
    Random,
    Average,
}

impl Pipeline {
    pub fn name(self) -> &'static str {
        match self {
            Pipeline::Learned => "learned",
            Pipeline::Random => "random",
            Pipeline::Average => "average",
        }
    }
}

fn default_eval_episodes() -> usize {
    50
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Top-level TOML document. `network` is resolved relative to the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub network: PathBuf,
    #[serde(default)]
    pub seed: u64,
    pub episodes: usize,
    #[serde(default = "default_eval_episodes")]
    pub eval_episodes: usize,
    #[serde(default)]
    pub pipeline: Pipeline,
    #[serde(default)]
    pub gamma_sweep: Vec<f64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub targets: AccuracyTargets,
    #[serde(default)]
    pub env: EnvConfig,
    #[serde(default)]
    pub maddpg: MaddpgConfig,
}

/// A configuration with its network loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub network: NetworkConfig,
}

impl Experiment {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        let config: ExperimentConfig = toml::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let net_path = base.join(&config.network);
        let network = NetworkConfig::from_file(&net_path).map_err(|e| Error::config(format!("{}: {e}", net_path.display())))?;
        let exp = Self { config, network };
        exp.validate()?;
        Ok(exp)
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.config;
        c.env.validate()?;
        c.targets.validate()?;
        c.maddpg.validate()?;
        if let Some(g) = c.gamma_sweep.iter().find(|g| !(0.0..=1.0).contains(*g)) {
            return Err(Error::config(format!("sweep discount {g} outside [0, 1]")));
        }
        build_network(&self.network)?.validate()
    }

    /// Fresh environment for this experiment.
    pub fn build_env(&self) -> Result<DtwnEnv> {
        let net = build_network(&self.network)?;
        DtwnEnv::new(net, self.config.env, self.config.targets, self.config.seed)
    }

    /// Hash of everything that shapes training, excluding output paths and
    /// episode counts.
    pub fn digest(&self) -> Result<Digest> {
        let net = toml::to_string(&self.network).map_err(|e| Error::config(e.to_string()))?;
        let env = toml::to_string(&self.config.env).map_err(|e| Error::config(e.to_string()))?;
        let agents = toml::to_string(&self.config.maddpg).map_err(|e| Error::config(e.to_string()))?;
        let targets = toml::to_string(&self.config.targets).map_err(|e| Error::config(e.to_string()))?;
        Ok(sha256(&[net.as_bytes(), env.as_bytes(), agents.as_bytes(), targets.as_bytes(), &self.config.seed.to_le_bytes()]))
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) const NET: &str = r#"
num_users = 6
seed = 1
bs_positions = [[300.0, 0.0], [0.0, 450.0], [-600.0, 0.0]]
bs_cpu_ghz = [2.6, 1.8, 3.6]
bs_tx_power_dbm = 34.0
mbs_tx_power_dbm = 42.0
num_subchannels = 2
uplink_bandwidth_mhz = 30.0
downlink_bandwidth_mhz = 30.0
noise_dbm = -174.0
path_loss_exponent = 3.0
cell_radius_m = 150.0
twin_samples = [200, 300]
sample_bytes = 3072
cycles_per_sample = 1e6
cycles_per_agg_unit = 1.0
cycles_per_validation_unit = 0.05
tx_factor = 1.0
model_bits = 5e7
block_header_bits = 1000.0
num_producers = 3
"#;

    #[test]
    fn loads_relative_network_and_defaults() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("net.toml"), NET).unwrap();
        std::fs::write(dir.path().join("exp.toml"), "network = \"net.toml\"\nepisodes = 3\n[env]\nhorizon = 5\n").unwrap();
        let exp = Experiment::load(dir.path().join("exp.toml")).unwrap();
        assert_eq!(exp.config.episodes, 3);
        assert_eq!(exp.config.eval_episodes, 50);
        assert_eq!(exp.config.env.horizon, 5);
        assert_eq!(exp.config.pipeline, Pipeline::Learned);
        assert_eq!(exp.network.num_users, 6);
        assert_eq!(exp.digest().unwrap(), exp.digest().unwrap());
        assert!(exp.build_env().is_ok());
    }

    #[test]
    fn rejects_bad_files() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("net.toml"), NET).unwrap();
        let p = dir.path().join("exp.toml");
        std::fs::write(&p, "network = \"missing.toml\"\nepisodes = 1\n").unwrap();
        assert!(matches!(Experiment::load(&p), Err(Error::Config(_))));
        std::fs::write(&p, "network = \"net.toml\"\nepisodes = 1\nbogus = 2\n").unwrap();
        assert!(Experiment::load(&p).is_err());
        std::fs::write(&p, "network = \"net.toml\"\nepisodes = 1\ngamma_sweep = [1.5]\n").unwrap();
        assert!(Experiment::load(&p).is_err());
        std::fs::write(&p, "network = \"net.toml\"\nepisodes = -1\n").unwrap();
        assert!(Experiment::load(&p).is_err());
    }
}
