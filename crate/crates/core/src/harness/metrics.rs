//! Series statistics and CSV emission.

use std::path::Path;

use crate::error::{Error, Result};
use crate::maddpg::EpisodeStats;

/// `R_n = Σ_{t≤n} Σ_i R_{i,t} / (n·M)` for each prefix of `history`, where
/// each entry holds one episode's per-agent rewards.
pub fn cumulative_average_reward(history: &[Vec<f64>]) -> Result<Vec<f64>> {
    let m = history.first().map(Vec::len).ok_or_else(|| Error::invalid("empty reward history"))?;
    if m == 0 || history.iter().any(|h| h.len() != m) {
        return Err(Error::invalid("every episode needs one reward per agent"));
    }
    let mut total = 0.0;
    Ok(history
        .iter()
        .enumerate()
        .map(|(n, h)| {
            total += h.iter().sum::<f64>();
            total / ((n + 1) * m) as f64
        })
        .collect())
}

/// Median of a non-empty slice; NaN when empty.
pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population variance.
pub fn variance(xs: &[f64]) -> f64 {
    let mu = mean(xs);
    xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / xs.len() as f64
}

/// First and last `frac` of a series, at least one element each.
pub fn deciles(xs: &[f64], frac: f64) -> (&[f64], &[f64]) {
    let k = ((xs.len() as f64 * frac).round() as usize).clamp(1, xs.len().max(1));
    let k = k.min(xs.len());
    (&xs[..k], &xs[xs.len() - k..])
}

pub(crate) fn fmt(v: f64) -> String {
    format!("{v:?}")
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

/// A header and rows, written in one shot.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self { header: header.iter().map(|s| s.as_ref().to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }
}

/// Writes through a temporary sibling and renames into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path.file_name().ok_or_else(|| Error::invalid(format!("{} is not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// The per-episode, per-round and cumulative tables of one run.
pub struct RunTables {
    pub metrics: Table,
    pub latency_rounds: Table,
    pub loss_rounds: Table,
    pub cumulative_cost: Table,
    pub wallclock: Table,
}

impl RunTables {
    pub fn from_history(history: &[EpisodeStats]) -> Result<Self> {
        let mut metrics = Table::new(&[
            "episode",
            "steps",
            "episode_reward",
            "cumulative_average_reward",
            "mean_iteration_time",
            "median_iteration_time",
            "final_global_loss",
            "critic_loss",
            "actor_q",
        ]);
        let mut latency_rounds = Table::new(&["episode", "step", "round", "t_iteration", "objective"]);
        let mut loss_rounds = Table::new(&["episode", "step", "round", "global_loss"]);
        let mut cumulative_cost = Table::new(&["episode", "cumulative_average_reward", "cumulative_average_cost"]);
        let mut wallclock = Table::new(&["episode", "step", "seconds"]);
        let rn = if history.is_empty() {
            Vec::new()
        } else {
            cumulative_average_reward(&history.iter().map(|e| e.agent_rewards.clone()).collect::<Vec<_>>())?
        };
        let mut round = 0usize;
        for (e, r) in history.iter().zip(&rn) {
            metrics.push(vec![
                e.episode.to_string(),
                e.steps().to_string(),
                fmt(e.total_reward()),
                fmt(*r),
                fmt(e.mean_latency()),
                fmt(median(&e.latencies)),
                fmt(e.final_loss()),
                opt(e.critic_loss),
                opt(e.actor_q),
            ]);
            cumulative_cost.push(vec![e.episode.to_string(), fmt(*r), fmt(-*r)]);
            for (t, ((lat, obj), loss)) in e.latencies.iter().zip(&e.objectives).zip(&e.global_losses).enumerate() {
                latency_rounds.push(vec![e.episode.to_string(), t.to_string(), round.to_string(), fmt(*lat), fmt(*obj)]);
                loss_rounds.push(vec![e.episode.to_string(), t.to_string(), round.to_string(), fmt(*loss)]);
                round += 1;
            }
            for (t, s) in e.step_wallclock.iter().enumerate() {
                wallclock.push(vec![e.episode.to_string(), t.to_string(), fmt(*s)]);
            }
        }
        Ok(Self { metrics, latency_rounds, loss_rounds, cumulative_cost, wallclock })
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        self.metrics.write(&dir.join("metrics.csv"))?;
        self.latency_rounds.write(&dir.join("latency_rounds.csv"))?;
        self.loss_rounds.write(&dir.join("loss_rounds.csv"))?;
        self.cumulative_cost.write(&dir.join("cumulative_cost.csv"))?;
        self.wallclock.write(&dir.join("wallclock.csv"))
    }
}
