use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dtwn::harness::{gamma_sweep, replay_checkpoint, run_experiment, Experiment, Pipeline};
use dtwn::Result;

#[derive(Parser)]
#[command(name = "dtwn", version, about = "Edge association, federated learning and ledger simulator for digital twin networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the number of episodes.
    #[arg(long)]
    episodes: Option<usize>,
    /// Suppresses progress output.
    #[arg(long)]
    quiet: bool,
}

impl Common {
    fn load(&self) -> Result<(Experiment, PathBuf)> {
        let mut exp = Experiment::load(&self.config)?;
        if let Some(s) = self.seed {
            exp.config.seed = s;
        }
        if let Some(e) = self.episodes {
            exp.config.episodes = e;
        }
        let out = self.out.clone().unwrap_or_else(|| exp.config.output_dir.clone());
        Ok((exp, out))
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Random,
    Average,
}

#[derive(Subcommand)]
enum Command {
    /// Train the agents, then evaluate against both baselines.
    Train(Common),
    /// Run a fixed association policy.
    Baseline {
        #[arg(long, value_enum)]
        kind: Kind,
        #[command(flatten)]
        common: Common,
    },
    /// Train once per discount factor.
    Sweep {
        #[arg(long, num_args = 1.., value_delimiter = ',')]
        gamma: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Parse and check a configuration without running it.
    ValidateConfig(Common),
    /// Evaluate a saved checkpoint.
    Replay {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(c) => {
            let (mut exp, out) = c.load()?;
            exp.config.pipeline = Pipeline::Learned;
            let r = run_experiment(&exp, &out, c.quiet)?;
            if !c.quiet {
                print!("{}", r.summary);
            }
        }
        Command::Baseline { kind, common: c } => {
            let (mut exp, out) = c.load()?;
            exp.config.pipeline = match kind {
                Kind::Random => Pipeline::Random,
                Kind::Average => Pipeline::Average,
            };
            let r = run_experiment(&exp, &out, c.quiet)?;
            if !c.quiet {
                print!("{}", r.summary);
            }
        }
        Command::Sweep { gamma, common: c } => {
            let (exp, out) = c.load()?;
            let gammas = if gamma.is_empty() { exp.config.gamma_sweep.clone() } else { gamma };
            let runs = gamma_sweep(&exp, &gammas, &out, c.quiet)?;
            if !c.quiet {
                for (g, r) in runs {
                    println!("gamma {g}: final cumulative cost {:?}", r.cumulative_cost()?.last());
                }
            }
        }
        Command::ValidateConfig(c) => {
            let (exp, _) = c.load()?;
            let env = exp.build_env()?;
            if !c.quiet {
                println!(
                    "ok: {} base stations, {} twins, {} subchannels, state dim {}, action dim {}",
                    env.num_agents(),
                    env.num_twins(),
                    env.network().num_subchannels,
                    env.state_dim(),
                    env.action_dim()
                );
            }
        }
        Command::Replay { checkpoint, common: c } => {
            let (exp, out) = c.load()?;
            let r = replay_checkpoint(&exp, &checkpoint, &out)?;
            if !c.quiet {
                print!("{}", r.summary);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
