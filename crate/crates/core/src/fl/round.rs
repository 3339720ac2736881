//! One global iteration: distribute, train locally, aggregate per BS, then at the MBS.

use serde::{Deserialize, Serialize};

use super::aggregate::{bs_aggregate, global_aggregate, AggregationMode};
use super::classifier::{ModelKind, ModelSpec};
use super::data::{iid_partition, ClusterSource, Dataset, SyntheticTask};
use super::train::{local_loss, local_train, GradientDiag, TrainingTask};
use super::ModelParams;
use crate::error::{ensure_dim, Error, Result};
use crate::model::{Association, BsId, TwinId};
use crate::rng::{mix_seed, stream_rng, streams};

/// Learning task used by experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlConfig {
    pub model: ModelKind,
    pub data: SyntheticTask,
    pub learning_rate: f64,
    pub l2: f64,
    /// Samples kept back at the MBS for model verification.
    pub holdout_samples: usize,
    pub aggregation: AggregationMode,
}

impl Default for FlConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::LogisticRegression,
            data: SyntheticTask::default(),
            learning_rate: 0.5,
            l2: 1e-3,
            holdout_samples: 400,
            aggregation: AggregationMode::Normalized,
        }
    }
}

/// Twin datasets, holdout set and the current global model.
#[derive(Debug, Clone)]
pub struct FederatedSystem {
    task: TrainingTask,
    aggregation: AggregationMode,
    datasets: Vec<Dataset>,
    holdout: Dataset,
    global: ModelParams,
    init_seed: u64,
}

/// Models produced by the twins and the BSs in one round, before the MBS step.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalPhase {
    pub twin_models: Vec<Option<ModelParams>>,
    /// `(G_m, samples hosted by m)` for every BS that hosts at least one non-empty twin.
    pub bs_models: Vec<Option<(ModelParams, f64)>>,
    /// Worst ratio and largest smoothness estimate over the twins.
    pub diag: GradientDiag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    pub model: ModelParams,
    pub loss: f64,
    pub diag: GradientDiag,
}

impl FederatedSystem {
    /// Draws a synthetic IID task and splits it into twins of the given sizes.
    pub fn synthetic(cfg: &FlConfig, data_sizes: &[u64], local_iters: usize, seed: u64) -> Result<Self> {
        let mut rng = stream_rng(seed, streams::DATA);
        let source = ClusterSource::new(&cfg.data, &mut rng)?;
        let total: u64 = data_sizes.iter().sum();
        let pool = source.sample(total as usize, &mut rng);
        let datasets = iid_partition(&pool, data_sizes, &mut rng)?;
        let holdout = source.sample(cfg.holdout_samples, &mut rng);
        let model = ModelSpec::new(cfg.model, cfg.data.input_dim, cfg.data.num_classes);
        let task = TrainingTask { model, learning_rate: cfg.learning_rate, l2: cfg.l2, local_iters, seed };
        Self::from_parts(task, cfg.aggregation, datasets, holdout, seed)
    }

    pub fn from_parts(
        task: TrainingTask,
        aggregation: AggregationMode,
        datasets: Vec<Dataset>,
        holdout: Dataset,
        init_seed: u64,
    ) -> Result<Self> {
        task.validate()?;
        for d in datasets.iter().chain(std::iter::once(&holdout)) {
            if !d.is_empty() {
                ensure_dim(task.model.input_dim, d.dim())?;
            }
        }
        if datasets.iter().all(Dataset::is_empty) {
            return Err(Error::EmptyDataset);
        }
        let global = task.model.init(&mut stream_rng(init_seed, streams::MODEL_INIT));
        Ok(Self { task, aggregation, datasets, holdout, global, init_seed })
    }

    pub fn task(&self) -> &TrainingTask {
        &self.task
    }

    pub fn model_spec(&self) -> &ModelSpec {
        &self.task.model
    }

    pub fn aggregation(&self) -> AggregationMode {
        self.aggregation
    }

    pub fn num_twins(&self) -> usize {
        self.datasets.len()
    }

    pub fn dataset(&self, twin: TwinId) -> Result<&Dataset> {
        self.datasets.get(twin).ok_or(Error::UnknownTwin(twin))
    }

    pub fn holdout(&self) -> &Dataset {
        &self.holdout
    }

    pub fn data_sizes(&self) -> Vec<u64> {
        self.datasets.iter().map(|d| d.len() as u64).collect()
    }

    pub fn global_model(&self) -> &ModelParams {
        &self.global
    }

    pub fn set_global_model(&mut self, w: ModelParams) -> Result<()> {
        ensure_dim(self.task.model.num_params(), w.len())?;
        self.global = w;
        Ok(())
    }

    /// Restores the initial global model.
    pub fn reset_model(&mut self) {
        self.global = self.task.model.init(&mut stream_rng(self.init_seed, streams::MODEL_INIT));
    }

    /// Global objective: mean over non-empty twins of each twin's mean sample loss.
    pub fn global_loss(&self, w: &ModelParams) -> Result<f64> {
        let mut sum = 0.0;
        let mut count = 0usize;
        for d in self.datasets.iter().filter(|d| !d.is_empty()) {
            sum += local_loss(&self.task.model, w, d)?;
            count += 1;
        }
        Ok(sum / count as f64)
    }

    pub fn holdout_loss(&self, w: &ModelParams) -> Result<f64> {
        local_loss(&self.task.model, w, &self.holdout)
    }

    /// Local training of every assigned twin and aggregation at every BS.
    pub fn local_phase(&self, assoc: &Association, batch_fracs: &[f64], round_seed: u64) -> Result<LocalPhase> {
        let n = self.num_twins();
        ensure_dim(n, assoc.num_twins())?;
        ensure_dim(n, batch_fracs.len())?;
        let mut twin_models = vec![None; n];
        let mut diag = GradientDiag::default();
        let mut groups: Vec<Vec<(ModelParams, f64)>> = vec![Vec::new(); assoc.num_bs()];
        for twin in 0..n {
            let (Some(bs), data) = (assoc.bs_of(twin), &self.datasets[twin]) else { continue };
            if data.is_empty() {
                continue;
            }
            let task = self.task.with_seed(mix_seed(round_seed, twin as u64));
            let (w, d) = local_train(data, &self.global, &task, batch_fracs[twin])?;
            diag.grad_norm_ratio = diag.grad_norm_ratio.max(d.grad_norm_ratio);
            diag.lipschitz_estimate = diag.lipschitz_estimate.max(d.lipschitz_estimate);
            groups[bs].push((w.clone(), data.len() as f64));
            twin_models[twin] = Some(w);
        }
        let bs_models = groups
            .into_iter()
            .map(|g| {
                if g.is_empty() {
                    return Ok(None);
                }
                let weight = g.iter().map(|(_, d)| d).sum();
                Ok(Some((bs_aggregate(&g, self.aggregation)?, weight)))
            })
            .collect::<Result<_>>()?;
        Ok(LocalPhase { twin_models, bs_models, diag })
    }

    /// MBS aggregation of the given BS models; the global model is replaced and
    /// the new global loss returned. An empty input leaves the model unchanged.
    pub fn apply_global(&mut self, bs_models: &[(ModelParams, f64)]) -> Result<f64> {
        if !bs_models.is_empty() {
            let w = global_aggregate(bs_models, self.aggregation)?;
            if !w.is_finite() {
                return Err(Error::Diverged("global model became non-finite".into()));
            }
            self.global = w;
        }
        self.global_loss(&self.global)
    }

    /// Uses every BS model of `phase`, in BS order.
    pub fn finish_round(&mut self, phase: &LocalPhase) -> Result<RoundOutcome> {
        let accepted: Vec<_> = phase.bs_models.iter().flatten().cloned().collect();
        let loss = self.apply_global(&accepted)?;
        Ok(RoundOutcome { model: self.global.clone(), loss, diag: phase.diag })
    }

    pub fn bs_model(phase: &LocalPhase, bs: BsId) -> Option<&ModelParams> {
        phase.bs_models.get(bs).and_then(|m| m.as_ref()).map(|(w, _)| w)
    }
}

/// Runs a complete round without ledger involvement.
pub fn federated_round(
    system: &mut FederatedSystem,
    assoc: &Association,
    batch_fracs: &[f64],
    round_seed: u64,
) -> Result<RoundOutcome> {
    let phase = system.local_phase(assoc, batch_fracs, round_seed)?;
    system.finish_round(&phase)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> FlConfig {
        FlConfig {
            data: SyntheticTask { input_dim: 5, num_classes: 2, separation: 2.0, noise_std: 1.0 },
            learning_rate: 1.0,
            ..FlConfig::default()
        }
    }

    #[test]
    fn single_twin_round_is_local_training() {
        let mut sys = FederatedSystem::synthetic(&cfg(), &[80], 3, 11).unwrap();
        let assoc = Association::round_robin(vec![80], 1);
        let w0 = sys.global_model().clone();
        let task = sys.task().with_seed(mix_seed(5, 0));
        let (expected, _) = local_train(sys.dataset(0).unwrap(), &w0, &task, 0.5).unwrap();
        let out = federated_round(&mut sys, &assoc, &[0.5], 5).unwrap();
        assert_eq!(out.model, expected);
        assert_eq!(out.loss, sys.global_loss(&expected).unwrap());
    }

    #[test]
    fn twenty_twins_ten_rounds_reduce_loss() {
        let sizes: Vec<u64> = (0..20).map(|i| 30 + 5 * i).collect();
        let mut sys = FederatedSystem::synthetic(&cfg(), &sizes, 1, 12).unwrap();
        let assoc = Association::round_robin(sizes.clone(), 5);
        let initial = sys.global_loss(sys.global_model()).unwrap();
        let mut last = initial;
        for r in 0..10 {
            last = federated_round(&mut sys, &assoc, &vec![1.0; 20], r).unwrap().loss;
        }
        assert!(last < initial, "{last} >= {initial}");
    }

    #[test]
    fn zero_local_iterations_leave_model_unchanged() {
        let sizes = vec![40, 50, 60];
        let mut sys = FederatedSystem::synthetic(&cfg(), &sizes, 0, 13).unwrap();
        let assoc = Association::round_robin(sizes, 2);
        let w0 = sys.global_model().clone();
        let l0 = sys.global_loss(&w0).unwrap();
        let out = federated_round(&mut sys, &assoc, &[1.0; 3], 0).unwrap();
        for (a, b) in out.model.values().iter().zip(w0.values()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((out.loss - l0).abs() < 1e-15);
    }

    #[test]
    fn rounds_are_deterministic() {
        let sizes = vec![30, 45, 60, 25];
        let run = || {
            let mut sys = FederatedSystem::synthetic(&cfg(), &sizes, 2, 14).unwrap();
            let assoc = Association::from_assignment(sizes.clone(), 2, &[0, 1, 1, 0]).unwrap();
            (0..3).map(|r| federated_round(&mut sys, &assoc, &[0.3, 0.6, 1.0, 0.5], r).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn unassigned_and_empty_twins_are_skipped() {
        let sizes = vec![30, 0, 40];
        let sys = FederatedSystem::synthetic(&cfg(), &sizes, 1, 15).unwrap();
        let mut assoc = Association::empty(sizes, 2);
        assoc.assign(1, 0).unwrap();
        assoc.assign(2, 1).unwrap();
        let phase = sys.local_phase(&assoc, &[1.0; 3], 0).unwrap();
        assert!(phase.twin_models[0].is_none() && phase.twin_models[1].is_none());
        assert!(phase.bs_models[0].is_none());
        assert_eq!(phase.bs_models[1].as_ref().unwrap().1, 40.0);
    }
}
