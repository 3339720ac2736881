//! Hierarchical federated learning over digital twins.

pub mod aggregate;
pub mod classifier;
pub mod data;
pub mod round;
pub mod train;

pub use aggregate::{bs_aggregate, global_aggregate, AggregationMode};
pub use classifier::{ModelKind, ModelSpec};
pub use data::{iid_partition, ClusterSource, Dataset, SyntheticTask};
pub use round::{federated_round, FederatedSystem, FlConfig, LocalPhase, RoundOutcome};
pub use train::{estimate_smoothness, local_loss, local_train, GradientDiag, TrainingTask};

use crate::error::{Error, Result};

/// Flat parameter vector shared by every twin, BS and the MBS.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelParams {
    w: Vec<f64>,
}

impl ModelParams {
    pub fn new(w: Vec<f64>) -> Self {
        Self { w }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { w: vec![0.0; dim] }
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.w
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.w
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.w
    }

    pub fn is_finite(&self) -> bool {
        self.w.iter().all(|v| v.is_finite())
    }

    pub fn norm(&self) -> f64 {
        self.w.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn distance(&self, other: &ModelParams) -> f64 {
        self.w
            .iter()
            .zip(&other.w)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Serialized size in bits (64 per parameter).
    pub fn size_bits(&self) -> u64 {
        64 * self.w.len() as u64
    }

    /// Little-endian `f64` encoding.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.w.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() % 8 != 0 {
            return Err(Error::invalid(format!(
                "parameter payload of {} bytes is not a whole number of f64 values",
                bytes.len()
            )));
        }
        let w = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Ok(Self { w })
    }
}
