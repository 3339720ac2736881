//! Model verification against a holdout set and block-interval policy.

use super::tx::{TransactionRecord, TxKind};
use super::LedgerError;
use crate::error::{Error, Result};
use crate::fl::{local_loss, Dataset, ModelParams, ModelSpec};

/// Holdout set and the current global model, as seen by every validator.
#[derive(Debug, Clone)]
pub struct VerificationContext<'a> {
    pub model: &'a ModelSpec,
    pub holdout: &'a Dataset,
    pub threshold: f64,
    baseline_loss: f64,
}

impl<'a> VerificationContext<'a> {
    pub fn new(model: &'a ModelSpec, holdout: &'a Dataset, global: &ModelParams, threshold: f64) -> Result<Self> {
        if !(threshold.is_finite() && threshold > 0.0) {
            return Err(Error::invalid(format!("verification threshold must be positive, got {threshold}")));
        }
        let baseline_loss = local_loss(model, global, holdout)?;
        Ok(Self { model, holdout, threshold, baseline_loss })
    }

    /// Holdout loss of the current global model.
    pub fn baseline_loss(&self) -> f64 {
        self.baseline_loss
    }
}

/// True iff the submitted model's holdout loss is within `threshold` times
/// that of the current global model.
pub fn verify_local_model(tx: &TransactionRecord, ctx: &VerificationContext<'_>) -> Result<bool> {
    if tx.kind != TxKind::TrainingModel {
        return Err(Error::invalid(format!("{} records carry no model", tx.kind.name())));
    }
    let w = ModelParams::from_bytes(&tx.payload)?;
    crate::error::ensure_dim(ctx.model.num_params(), w.len())?;
    if !w.is_finite() {
        return Err(Error::NonFinite("submitted model parameters".into()));
    }
    let loss = local_loss(ctx.model, &w, ctx.holdout)?;
    Ok(loss <= ctx.threshold * ctx.baseline_loss)
}

/// Block interval as `k` local training periods.
pub fn block_interval_policy(local_training_period: f64, k: u32) -> Result<f64> {
    if k < 1 {
        return Err(LedgerError::InvalidInterval("multiplier must be at least 1".into()).into());
    }
    if !(local_training_period.is_finite() && local_training_period >= 0.0) {
        return Err(LedgerError::InvalidInterval(format!("period {local_training_period} is not a duration")).into());
    }
    Ok(k as f64 * local_training_period)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fl::{ClusterSource, ModelKind, SyntheticTask, TrainingTask};
    use crate::ledger::crypto::KeyRing;
    use crate::rng::stream_rng;
    use rand::Rng;

    fn model_tx(w: &ModelParams, keys: &KeyRing) -> TransactionRecord {
        TransactionRecord::signed(TxKind::TrainingModel, 0, w.to_bytes(), w.size_bits(), 0, keys).unwrap()
    }

    fn trained() -> (ModelSpec, Dataset, ModelParams) {
        let task = SyntheticTask { input_dim: 6, num_classes: 2, separation: 2.5, noise_std: 1.0 };
        let src = ClusterSource::new(&task, &mut stream_rng(5, 1)).unwrap();
        let train = src.sample(200, &mut stream_rng(5, 2));
        let holdout = src.sample(200, &mut stream_rng(5, 3));
        let spec = ModelSpec::new(ModelKind::LogisticRegression, 6, 2);
        let t = TrainingTask { model: spec, learning_rate: 0.5, l2: 1e-3, local_iters: 100, seed: 1 };
        let (w, _) = crate::fl::local_train(&train, &ModelParams::zeros(spec.num_params()), &t, 1.0).unwrap();
        (spec, holdout, w)
    }

    #[test]
    fn global_model_resubmission_passes() {
        let (spec, holdout, w) = trained();
        let keys = KeyRing::derive(0, 1);
        let ctx = VerificationContext::new(&spec, &holdout, &w, 1.0).unwrap();
        assert!(verify_local_model(&model_tx(&w, &keys), &ctx).unwrap());
    }

    #[test]
    fn noise_model_fails_on_trained_context() {
        let (spec, holdout, w) = trained();
        let keys = KeyRing::derive(0, 1);
        let ctx = VerificationContext::new(&spec, &holdout, &w, 1.05).unwrap();
        let mut rng = stream_rng(9, 9);
        let noise = ModelParams::new((0..w.len()).map(|_| rng.random_range(-3.0..3.0)).collect());
        assert!(!verify_local_model(&model_tx(&noise, &keys), &ctx).unwrap());
    }

    #[test]
    fn malformed_payloads_are_errors() {
        let (spec, holdout, w) = trained();
        let keys = KeyRing::derive(0, 1);
        let ctx = VerificationContext::new(&spec, &holdout, &w, 1.05).unwrap();
        let mut nan = w.clone();
        nan.values_mut()[0] = f64::NAN;
        assert!(matches!(verify_local_model(&model_tx(&nan, &keys), &ctx), Err(Error::NonFinite(_))));
        let short = ModelParams::zeros(3);
        assert!(matches!(
            verify_local_model(&model_tx(&short, &keys), &ctx),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn interval_policy() {
        assert_eq!(block_interval_policy(0.7, 1).unwrap(), 0.7);
        assert!((block_interval_policy(0.4, 5).unwrap() - 2.0).abs() < 1e-15);
        assert!(block_interval_policy(0.4, 0).is_err());
    }
}
