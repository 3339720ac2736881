//! Classification datasets: synthetic Gaussian clusters, IID partitioning,
//! and import/export.
//!
//! Both file layouts store one sample per row with the integer class label in
//! the last column. The binary layout is little-endian: `u64 rows`, `u64 cols`
//! (features + 1), then `rows * cols` `f64` values in row-major order.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl Dataset {
    pub fn new(features: Array2<f64>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        crate::error::ensure_dim(features.nrows(), labels.len())?;
        if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::invalid(format!("label {bad} out of range for {num_classes} classes")));
        }
        Ok(Self { features, labels, num_classes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn select(&self, idx: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
        }
    }

    /// Concatenation of several datasets with equal dimension.
    pub fn concat(parts: &[&Dataset]) -> Result<Dataset> {
        let first = parts.first().ok_or(Error::EmptyDataset)?;
        let views: Vec<_> = parts.iter().map(|d| d.features.view()).collect();
        let features = ndarray::concatenate(Axis(0), &views)
            .map_err(|e| Error::invalid(format!("cannot concatenate datasets: {e}")))?;
        let labels = parts.iter().flat_map(|d| d.labels.iter().copied()).collect();
        Dataset::new(features, labels, first.num_classes)
    }

    pub fn max_feature_norm(&self) -> f64 {
        self.features
            .rows()
            .into_iter()
            .map(|r| r.dot(&r).sqrt())
            .fold(0.0, f64::max)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
        for (row, &y) in self.features.rows().into_iter().zip(&self.labels) {
            let mut rec: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            rec.push(y.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>, num_classes: usize) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
        let mut values = Vec::new();
        let mut labels = Vec::new();
        let mut cols = None;
        for rec in r.records() {
            let rec = rec?;
            if rec.len() < 2 {
                return Err(Error::invalid("dataset rows need at least one feature and a label"));
            }
            match cols {
                None => cols = Some(rec.len()),
                Some(c) if c != rec.len() => {
                    return Err(Error::DimensionMismatch { expected: c, actual: rec.len() })
                }
                _ => {}
            }
            for field in rec.iter().take(rec.len() - 1) {
                values.push(field.trim().parse::<f64>().map_err(|e| Error::invalid(e.to_string()))?);
            }
            let label = rec[rec.len() - 1].trim();
            labels.push(label.parse::<usize>().map_err(|e| Error::invalid(format!("label {label:?}: {e}")))?);
        }
        let dim = cols.map_or(0, |c| c - 1);
        let features = Array2::from_shape_vec((labels.len(), dim), values)
            .map_err(|e| Error::invalid(e.to_string()))?;
        Dataset::new(features, labels, num_classes)
    }

    pub fn write_binary(&self, mut w: impl Write) -> Result<()> {
        let cols = self.dim() + 1;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        w.write_all(&(cols as u64).to_le_bytes())?;
        for (row, &y) in self.features.rows().into_iter().zip(&self.labels) {
            for v in row {
                w.write_all(&v.to_le_bytes())?;
            }
            w.write_all(&(y as f64).to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(mut r: impl Read, num_classes: usize) -> Result<Self> {
        let mut word = [0u8; 8];
        r.read_exact(&mut word)?;
        let rows = u64::from_le_bytes(word) as usize;
        r.read_exact(&mut word)?;
        let cols = u64::from_le_bytes(word) as usize;
        if cols < 2 {
            return Err(Error::invalid("binary dataset needs at least one feature column"));
        }
        let mut values = Vec::with_capacity(rows * (cols - 1));
        let mut labels = Vec::with_capacity(rows);
        for _ in 0..rows {
            for c in 0..cols {
                r.read_exact(&mut word)?;
                let v = f64::from_le_bytes(word);
                if c + 1 == cols {
                    if v < 0.0 || v.fract() != 0.0 {
                        return Err(Error::invalid(format!("label {v} is not a class index")));
                    }
                    labels.push(v as usize);
                } else {
                    values.push(v);
                }
            }
        }
        let features = Array2::from_shape_vec((rows, cols - 1), values)
            .map_err(|e| Error::invalid(e.to_string()))?;
        Dataset::new(features, labels, num_classes)
    }
}

/// Gaussian-cluster classification task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticTask {
    pub input_dim: usize,
    pub num_classes: usize,
    /// Norm of every class mean.
    pub separation: f64,
    pub noise_std: f64,
}

impl Default for SyntheticTask {
    fn default() -> Self {
        Self { input_dim: 8, num_classes: 2, separation: 1.5, noise_std: 1.0 }
    }
}

/// Sampler for a fixed draw of class means.
#[derive(Debug, Clone)]
pub struct ClusterSource {
    means: Vec<Vec<f64>>,
    noise_std: f64,
    num_classes: usize,
}

impl ClusterSource {
    pub fn new<R: Rng + ?Sized>(task: &SyntheticTask, rng: &mut R) -> Result<Self> {
        if task.input_dim == 0 || task.num_classes < 2 {
            return Err(Error::config("synthetic task needs input_dim >= 1 and num_classes >= 2"));
        }
        let means = (0..task.num_classes)
            .map(|_| {
                let v: Vec<f64> = (0..task.input_dim).map(|_| StandardNormal.sample(rng)).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
                v.into_iter().map(|x| x * task.separation / norm).collect()
            })
            .collect();
        Ok(Self { means, noise_std: task.noise_std, num_classes: task.num_classes })
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Dataset {
        let dim = self.means[0].len();
        let mut features = Array2::zeros((n, dim));
        let mut labels = Vec::with_capacity(n);
        for (i, mut row) in features.rows_mut().into_iter().enumerate() {
            let y = i % self.num_classes;
            for (x, mu) in row.iter_mut().zip(&self.means[y]) {
                let z: f64 = StandardNormal.sample(rng);
                *x = mu + self.noise_std * z;
            }
            labels.push(y);
        }
        Dataset { features, labels, num_classes: self.num_classes }
    }
}

/// Shuffles `pool` and cuts it into consecutive parts of the given sizes.
pub fn iid_partition<R: Rng + ?Sized>(pool: &Dataset, sizes: &[u64], rng: &mut R) -> Result<Vec<Dataset>> {
    let total: u64 = sizes.iter().sum();
    if total as usize > pool.len() {
        return Err(Error::invalid(format!(
            "partition needs {total} samples, pool holds {}",
            pool.len()
        )));
    }
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.shuffle(rng);
    let mut start = 0;
    Ok(sizes
        .iter()
        .map(|&s| {
            let part = pool.select(&order[start..start + s as usize]);
            start += s as usize;
            part
        })
        .collect())
}
