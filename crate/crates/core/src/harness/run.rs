//! Experiment pipelines: training, baselines, sweeps and checkpoint replay.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::baseline::{AverageBaseline, RandomBaseline};
use super::config::{Experiment, Pipeline};
use super::metrics::{cumulative_average_reward, deciles, fmt, mean, median, variance, write_atomic, RunTables, Table};
use crate::env::DtwnEnv;
use crate::error::{Error, Result};
use crate::ledger::crypto::hex;
use crate::maddpg::{checkpoint, episode_seed, eval_seed, evaluate, rollout, train, Controller, EpisodeStats, Maddpg};

/// Everything a run produced, besides the files.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub pipeline: Pipeline,
    pub history: Vec<EpisodeStats>,
    /// Evaluation episodes per policy name.
    pub eval: Vec<(String, Vec<EpisodeStats>)>,
    pub summary: String,
}

impl RunReport {
    /// Median per-step iteration time over all evaluation steps of `policy`.
    pub fn eval_median(&self, policy: &str) -> Option<f64> {
        let (_, eps) = self.eval.iter().find(|(p, _)| p == policy)?;
        let all: Vec<f64> = eps.iter().flat_map(|e| e.latencies.iter().copied()).collect();
        Some(median(&all))
    }

    /// Cumulative average cost `−R_n` per episode.
    pub fn cumulative_cost(&self) -> Result<Vec<f64>> {
        if self.history.is_empty() {
            return Ok(Vec::new());
        }
        let h: Vec<Vec<f64>> = self.history.iter().map(|e| e.agent_rewards.clone()).collect();
        Ok(cumulative_average_reward(&h)?.into_iter().map(|r| -r).collect())
    }
}

fn progress(quiet: bool, total: usize) -> impl FnMut(&EpisodeStats) -> Result<()> {
    let every = (total / 10).max(1);
    move |e: &EpisodeStats| {
        if !quiet && (e.episode + 1) % every == 0 {
            eprintln!(
                "episode {:>5}/{total}: mean T {:.4} s, reward {:.4}",
                e.episode + 1,
                e.mean_latency(),
                e.total_reward()
            );
        }
        Ok(())
    }
}

fn run_controller<C: Controller>(env: &mut DtwnEnv, ctrl: &mut C, episodes: usize, seed: u64, quiet: bool) -> Result<Vec<EpisodeStats>> {
    let mut log = progress(quiet, episodes);
    (0..episodes)
        .map(|e| {
            let st = rollout(env, e, episode_seed(seed, e), ctrl)?;
            log(&st)?;
            Ok(st)
        })
        .collect()
}

fn eval_controller<C: Controller>(env: &mut DtwnEnv, ctrl: &mut C, episodes: usize, seed: u64) -> Result<Vec<EpisodeStats>> {
    (0..episodes).map(|e| rollout(env, e, eval_seed(seed, e), ctrl)).collect()
}

fn baseline_evals(env: &mut DtwnEnv, exp: &Experiment) -> Result<Vec<(String, Vec<EpisodeStats>)>> {
    let (n, seed) = (exp.config.eval_episodes, exp.config.seed);
    Ok(vec![
        ("random".into(), eval_controller(env, &mut RandomBaseline::new(eval_seed(seed, usize::MAX)), n, seed)?),
        ("average".into(), eval_controller(env, &mut AverageBaseline, n, seed)?),
    ])
}

fn eval_table(eval: &[(String, Vec<EpisodeStats>)]) -> Table {
    let mut t = Table::new(&["policy", "episode", "step", "t_iteration", "objective", "global_loss"]);
    for (name, eps) in eval {
        for e in eps {
            for (s, (lat, (obj, loss))) in e.latencies.iter().zip(e.objectives.iter().zip(&e.global_losses)).enumerate() {
                t.push(vec![name.clone(), e.episode.to_string(), s.to_string(), fmt(*lat), fmt(*obj), fmt(*loss)]);
            }
        }
    }
    t
}

fn summarize(exp: &Experiment, report: &RunReport) -> Result<String> {
    let c = &exp.config;
    let mut s = String::new();
    let _ = writeln!(s, "pipeline: {}", report.pipeline.name());
    let _ = writeln!(s, "seed: {}", c.seed);
    let _ = writeln!(s, "episodes: {} x {} steps", report.history.len(), c.env.horizon);
    let _ = writeln!(s, "config digest: {}", hex(&exp.digest()?));
    let cost = report.cumulative_cost()?;
    if !cost.is_empty() {
        let (first, last) = deciles(&cost, 0.1);
        let _ = writeln!(s, "cumulative average cost: first decile mean {:.6} var {:.6e}", mean(first), variance(first));
        let _ = writeln!(s, "cumulative average cost: last decile mean {:.6} var {:.6e}", mean(last), variance(last));
        let lat: Vec<f64> = report.history.iter().map(EpisodeStats::mean_latency).collect();
        let (first, last) = deciles(&lat, 0.1);
        let _ = writeln!(s, "mean iteration time: first decile {:.6} s, last decile {:.6} s", mean(first), mean(last));
    }
    for (name, _) in &report.eval {
        let m = report.eval_median(name).unwrap_or(f64::NAN);
        let _ = writeln!(s, "eval median iteration time [{name}]: {m:.6} s");
    }
    if let (Some(l), Some(r), Some(a)) = (report.eval_median("learned"), report.eval_median("random"), report.eval_median("average")) {
        let _ = writeln!(s, "learned / random: {:.4}", l / r);
        let _ = writeln!(s, "learned / average: {:.4}", l / a);
    }
    Ok(s)
}

/// Runs the configured pipeline and writes every output under `out`.
pub fn run_experiment(exp: &Experiment, out: &Path, quiet: bool) -> Result<RunReport> {
    exp.validate()?;
    std::fs::create_dir_all(out)?;
    let c = &exp.config;
    let mut env = exp.build_env()?;
    let (history, mut eval) = match c.pipeline {
        Pipeline::Learned => {
            let mut m = Maddpg::for_env(&env, c.maddpg.clone(), c.seed)?;
            let history = train(&mut env, &mut m, c.episodes, c.seed, progress(quiet, c.episodes))?;
            write_atomic(&out.join("checkpoint.bin"), &checkpoint::encode(&m, &exp.digest()?))?;
            let eval = if c.episodes > 0 {
                vec![("learned".to_string(), evaluate(&mut env, &mut m, c.eval_episodes, c.seed)?)]
            } else {
                Vec::new()
            };
            (history, eval)
        }
        Pipeline::Random => (run_controller(&mut env, &mut RandomBaseline::new(c.seed), c.episodes, c.seed, quiet)?, Vec::new()),
        Pipeline::Average => (run_controller(&mut env, &mut AverageBaseline, c.episodes, c.seed, quiet)?, Vec::new()),
    };
    if c.episodes > 0 {
        eval.extend(baseline_evals(&mut env, exp)?);
    }
    RunTables::from_history(&history)?.write(out)?;
    eval_table(&eval).write(&out.join("eval.csv"))?;
    let mut report = RunReport { pipeline: c.pipeline, history, eval, summary: String::new() };
    report.summary = summarize(exp, &report)?;
    write_atomic(&out.join("summary.txt"), report.summary.as_bytes())?;
    Ok(report)
}

/// Trains once per discount factor in `gammas` under `out/gamma-<γ>` and
/// writes the cost and wall-clock series side by side.
pub fn gamma_sweep(exp: &Experiment, gammas: &[f64], out: &Path, quiet: bool) -> Result<Vec<(f64, RunReport)>> {
    if gammas.is_empty() {
        return Err(Error::config("sweep needs at least one discount factor"));
    }
    std::fs::create_dir_all(out)?;
    let mut runs = Vec::with_capacity(gammas.len());
    for &g in gammas {
        let mut e = exp.clone();
        e.config.maddpg.gamma = g;
        e.config.pipeline = Pipeline::Learned;
        if !quiet {
            eprintln!("sweep: gamma = {g}");
        }
        let report = run_experiment(&e, &member_dir(out, g), quiet)?;
        runs.push((g, report));
    }
    let names: Vec<String> = gammas.iter().map(|g| format!("gamma_{g}")).collect();
    let mut cost = Table::new(&std::iter::once("episode".to_string()).chain(names.iter().cloned()).collect::<Vec<_>>());
    let series: Vec<Vec<f64>> = runs.iter().map(|(_, r)| r.cumulative_cost()).collect::<Result<_>>()?;
    for e in 0..exp.config.episodes {
        cost.push(std::iter::once(e.to_string()).chain(series.iter().map(|s| fmt(s[e]))).collect());
    }
    cost.write(&out.join("sweep_cost.csv"))?;
    let mut clock = Table::new(&std::iter::once("round".to_string()).chain(names).collect::<Vec<_>>());
    let clocks: Vec<Vec<f64>> = runs.iter().map(|(_, r)| r.history.iter().flat_map(|e| e.step_wallclock.clone()).collect()).collect();
    for k in 0..clocks.iter().map(Vec::len).min().unwrap_or(0) {
        clock.push(std::iter::once(k.to_string()).chain(clocks.iter().map(|s| fmt(s[k]))).collect());
    }
    clock.write(&out.join("sweep_wallclock.csv"))?;
    Ok(runs)
}

pub fn member_dir(out: &Path, gamma: f64) -> PathBuf {
    out.join(format!("gamma-{gamma}"))
}

/// Loads trained agents and runs greedy evaluation episodes.
pub fn replay_checkpoint(exp: &Experiment, ckpt: &Path, out: &Path) -> Result<RunReport> {
    exp.validate()?;
    std::fs::create_dir_all(out)?;
    let c = &exp.config;
    let mut env = exp.build_env()?;
    let mut m = Maddpg::for_env(&env, c.maddpg.clone(), c.seed)?;
    let bytes = std::fs::read(ckpt)?;
    checkpoint::decode_into(&bytes, &mut m, Some(&exp.digest()?))?;
    let mut eval = vec![("learned".to_string(), evaluate(&mut env, &mut m, c.eval_episodes, c.seed)?)];
    eval.extend(baseline_evals(&mut env, exp)?);
    eval_table(&eval).write(&out.join("eval.csv"))?;
    let mut report = RunReport { pipeline: Pipeline::Learned, history: Vec::new(), eval, summary: String::new() };
    report.summary = summarize(exp, &report)?;
    write_atomic(&out.join("summary.txt"), report.summary.as_bytes())?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::ExperimentConfig;
    use crate::maddpg::MaddpgConfig;
    use crate::model::NetworkConfig;

    fn tiny(episodes: usize, pipeline: Pipeline) -> Experiment {
        let network: NetworkConfig = toml::from_str(crate::harness::config::tests::NET).unwrap();
        let mut config: ExperimentConfig = toml::from_str("network = \"unused\"\nepisodes = 0\n").unwrap();
        config.episodes = episodes;
        config.eval_episodes = 2;
        config.pipeline = pipeline;
        config.env.horizon = 3;
        config.maddpg = MaddpgConfig { hidden: vec![8], batch_size: 4, warmup: 4, replay_capacity: 50, ..Default::default() };
        Experiment { config, network }
    }

    const DETERMINISTIC: [&str; 6] = ["metrics.csv", "latency_rounds.csv", "loss_rounds.csv", "cumulative_cost.csv", "eval.csv", "checkpoint.bin"];

    #[test]
    fn zero_episodes_write_header_only_files() {
        let dir = tempfile::tempdir().unwrap();
        let r = run_experiment(&tiny(0, Pipeline::Learned), dir.path(), true).unwrap();
        assert!(r.history.is_empty());
        for f in ["metrics.csv", "latency_rounds.csv", "loss_rounds.csv", "cumulative_cost.csv", "wallclock.csv", "eval.csv"] {
            let text = std::fs::read_to_string(dir.path().join(f)).unwrap();
            assert_eq!(text.lines().count(), 1, "{f}");
        }
        assert!(dir.path().join("summary.txt").exists());
    }

    #[test]
    fn reruns_are_byte_identical() {
        for p in [Pipeline::Learned, Pipeline::Random, Pipeline::Average] {
            let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
            run_experiment(&tiny(3, p), a.path(), true).unwrap();
            run_experiment(&tiny(3, p), b.path(), true).unwrap();
            for f in DETERMINISTIC {
                if p != Pipeline::Learned && f == "checkpoint.bin" {
                    continue;
                }
                assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
            }
        }
    }

    #[test]
    fn golden_schema() {
        let dir = tempfile::tempdir().unwrap();
        let r = run_experiment(&tiny(2, Pipeline::Learned), dir.path(), true).unwrap();
        let head = |f: &str| std::fs::read_to_string(dir.path().join(f)).unwrap().lines().next().unwrap().to_string();
        assert_eq!(
            head("metrics.csv"),
            "episode,steps,episode_reward,cumulative_average_reward,mean_iteration_time,median_iteration_time,final_global_loss,critic_loss,actor_q"
        );
        assert_eq!(head("latency_rounds.csv"), "episode,step,round,t_iteration,objective");
        assert_eq!(head("loss_rounds.csv"), "episode,step,round,global_loss");
        assert_eq!(head("cumulative_cost.csv"), "episode,cumulative_average_reward,cumulative_average_cost");
        assert_eq!(head("wallclock.csv"), "episode,step,seconds");
        assert_eq!(head("eval.csv"), "policy,episode,step,t_iteration,objective,global_loss");
        let rows = std::fs::read_to_string(dir.path().join("latency_rounds.csv")).unwrap().lines().count();
        assert_eq!(rows, 1 + 2 * 3);
        assert_eq!(r.eval.len(), 3);
        assert!(r.summary.contains("learned / random"));

        // the metrics series can be recomputed from the emitted rewards
        let mut rdr = csv::Reader::from_path(dir.path().join("metrics.csv")).unwrap();
        let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
        let totals: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
        let m = 3.0;
        for (n, row) in rows.iter().enumerate() {
            let rn: f64 = row[3].parse().unwrap();
            let brute = totals[..=n].iter().sum::<f64>() / ((n + 1) as f64 * m);
            assert!((rn - brute).abs() <= 1e-12 * brute.abs());
        }
    }

    #[test]
    fn checkpoint_replay_matches_training_eval() {
        let dir = tempfile::tempdir().unwrap();
        let exp = tiny(2, Pipeline::Learned);
        let r = run_experiment(&exp, dir.path(), true).unwrap();
        let out = dir.path().join("replay");
        let rep = replay_checkpoint(&exp, &dir.path().join("checkpoint.bin"), &out).unwrap();
        assert_eq!(rep.eval_median("learned"), r.eval_median("learned"));
        let mut other = exp.clone();
        other.config.seed += 1;
        assert!(replay_checkpoint(&other, &dir.path().join("checkpoint.bin"), &out).is_err());
    }

    #[test]
    fn single_gamma_sweep_equals_one_run() {
        let dir = tempfile::tempdir().unwrap();
        let exp = tiny(2, Pipeline::Learned);
        let runs = gamma_sweep(&exp, &[0.9], &dir.path().join("sweep"), true).unwrap();
        run_experiment(&exp, &dir.path().join("single"), true).unwrap();
        for f in DETERMINISTIC {
            assert_eq!(
                std::fs::read(member_dir(&dir.path().join("sweep"), 0.9).join(f)).unwrap(),
                std::fs::read(dir.path().join("single").join(f)).unwrap()
            );
        }
        assert_eq!(runs.len(), 1);
        let text = std::fs::read_to_string(dir.path().join("sweep/sweep_cost.csv")).unwrap();
        assert_eq!(text.lines().next().unwrap(), "episode,gamma_0.9");
        assert!(gamma_sweep(&exp, &[], dir.path(), true).is_err());
    }
}
