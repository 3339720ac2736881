//! BS-level and MBS-level model aggregation.

use serde::{Deserialize, Serialize};

use super::ModelParams;
use crate::error::{ensure_dim, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AggregationMode {
    /// Data-size weighted average (federated averaging).
    #[default]
    Normalized,
    /// `(1/K) * sum(D_j w_j)` at the BS and `(1/M) * sum(G_m)` at the MBS.
    Unnormalized,
}

fn weighted_sum(models: &[(ModelParams, f64)]) -> Result<Vec<f64>> {
    let (first, _) = models.first().ok_or_else(|| Error::invalid("aggregation needs at least one model"))?;
    let mut acc = vec![0.0; first.len()];
    for (m, weight) in models {
        ensure_dim(first.len(), m.len())?;
        if !(weight.is_finite() && *weight >= 0.0) {
            return Err(Error::invalid(format!("aggregation weight must be >= 0, got {weight}")));
        }
        for (a, v) in acc.iter_mut().zip(m.values()) {
            *a += weight * v;
        }
    }
    Ok(acc)
}

fn total_weight(models: &[(ModelParams, f64)]) -> Result<f64> {
    let total: f64 = models.iter().map(|(_, d)| d).sum();
    if total <= 0.0 {
        return Err(Error::invalid("normalized aggregation needs a positive total data size"));
    }
    Ok(total)
}

/// Aggregates `(w_j, D_j)` pairs of the twins hosted by one BS.
pub fn bs_aggregate(models: &[(ModelParams, f64)], mode: AggregationMode) -> Result<ModelParams> {
    let sum = weighted_sum(models)?;
    if mode == AggregationMode::Normalized && models.len() == 1 {
        total_weight(models)?;
        return Ok(models[0].0.clone());
    }
    let scale = match mode {
        AggregationMode::Normalized => 1.0 / total_weight(models)?,
        AggregationMode::Unnormalized => 1.0 / models.len() as f64,
    };
    Ok(ModelParams::new(sum.into_iter().map(|v| v * scale).collect()))
}

/// Aggregates `(G_m, D_m)` pairs of the BSs, where `D_m` is the data hosted by
/// BS `m`. Literal mode ignores the weights.
pub fn global_aggregate(bs_models: &[(ModelParams, f64)], mode: AggregationMode) -> Result<ModelParams> {
    match mode {
        AggregationMode::Normalized => bs_aggregate(bs_models, mode),
        AggregationMode::Unnormalized => {
            let unit: Vec<(ModelParams, f64)> = bs_models.iter().map(|(m, _)| (m.clone(), 1.0)).collect();
            bs_aggregate(&unit, AggregationMode::Unnormalized)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(v: &[f64]) -> ModelParams {
        ModelParams::new(v.to_vec())
    }

    #[test]
    fn single_model_is_unchanged() {
        let m = p(&[1.0, -2.0, 3.5]);
        assert_eq!(bs_aggregate(&[(m.clone(), 7.0)], AggregationMode::Normalized).unwrap(), m);
    }

    #[test]
    fn symmetric_pair_averages() {
        let out = bs_aggregate(&[(p(&[0.0]), 5.0), (p(&[2.0]), 5.0)], AggregationMode::Normalized).unwrap();
        assert_eq!(out.values(), &[1.0]);
    }

    #[test]
    fn literal_bs_formula() {
        let out = bs_aggregate(&[(p(&[1.0]), 2.0), (p(&[1.0]), 4.0)], AggregationMode::Unnormalized).unwrap();
        assert_eq!(out.values(), &[3.0]);
    }

    #[test]
    fn literal_global_formula() {
        let out = global_aggregate(&[(p(&[0.0]), 10.0), (p(&[4.0]), 30.0)], AggregationMode::Unnormalized).unwrap();
        assert_eq!(out.values(), &[2.0]);
    }

    #[test]
    fn identical_inputs_are_fixed_points() {
        let m = p(&[0.25, -1.0]);
        for mode in [AggregationMode::Normalized, AggregationMode::Unnormalized] {
            let out = global_aggregate(&[(m.clone(), 3.0), (m.clone(), 9.0), (m.clone(), 1.0)], mode).unwrap();
            assert_eq!(out, m);
        }
    }

    #[test]
    fn errors() {
        assert!(bs_aggregate(&[], AggregationMode::Normalized).is_err());
        assert!(matches!(
            bs_aggregate(&[(p(&[1.0]), 1.0), (p(&[1.0, 2.0]), 1.0)], AggregationMode::Normalized),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(bs_aggregate(&[(p(&[1.0]), 0.0), (p(&[2.0]), 0.0)], AggregationMode::Normalized).is_err());
        assert!(bs_aggregate(&[(p(&[1.0]), 0.0)], AggregationMode::Unnormalized).is_ok());
    }

    fn models_strategy() -> impl Strategy<Value = Vec<(Vec<f64>, f64)>> {
        proptest::collection::vec((proptest::collection::vec(-10.0..10.0f64, 3), 1.0..500.0f64), 1..10)
    }

    proptest! {
        #[test]
        fn hierarchical_equals_flat(
            twins in proptest::collection::vec((proptest::collection::vec(-5.0..5.0f64, 4), 1u32..1000), 10),
            bs_of in proptest::collection::vec(0usize..3, 10),
        ) {
            let total: f64 = twins.iter().map(|(_, d)| *d as f64).sum();
            let flat: Vec<f64> = (0..4)
                .map(|k| twins.iter().map(|(w, d)| *d as f64 * w[k]).sum::<f64>() / total)
                .collect();
            let mut level1 = Vec::new();
            for bs in 0..3 {
                let group: Vec<_> = twins
                    .iter()
                    .zip(&bs_of)
                    .filter(|(_, b)| **b == bs)
                    .map(|((w, d), _)| (ModelParams::new(w.clone()), *d as f64))
                    .collect();
                if group.is_empty() {
                    continue;
                }
                let weight: f64 = group.iter().map(|(_, d)| d).sum();
                level1.push((bs_aggregate(&group, AggregationMode::Normalized).unwrap(), weight));
            }
            let two_level = global_aggregate(&level1, AggregationMode::Normalized).unwrap();
            for (a, b) in two_level.values().iter().zip(&flat) {
                prop_assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
            }
        }

        #[test]
        fn order_invariant_and_homogeneous(models in models_strategy(), c in -3.0..3.0f64) {
            let input: Vec<_> = models.iter().map(|(w, d)| (ModelParams::new(w.clone()), *d)).collect();
            let mut reversed = input.clone();
            reversed.reverse();
            for mode in [AggregationMode::Normalized, AggregationMode::Unnormalized] {
                let a = bs_aggregate(&input, mode).unwrap();
                let b = bs_aggregate(&reversed, mode).unwrap();
                let scaled: Vec<_> = input
                    .iter()
                    .map(|(m, d)| (ModelParams::new(m.values().iter().map(|v| c * v).collect()), *d))
                    .collect();
                let s = bs_aggregate(&scaled, mode).unwrap();
                for ((x, y), z) in a.values().iter().zip(b.values()).zip(s.values()) {
                    let tol = 1e-12 * (1.0 + x.abs() * 1e3);
                    prop_assert!((x - y).abs() <= tol);
                    prop_assert!((c * x - z).abs() <= tol * (1.0 + c.abs()));
                }
            }
        }
    }
}
