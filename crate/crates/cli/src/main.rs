//! Command-line front end: tradeoff bounds, key-rate sweeps, protocol
//! simulation and decoy-state estimates.

mod cache;
mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{BoundArgs, DecoyArgs, Global, SimulateArgs};
use config::{EpsConfig, ProtocolSource, SweepConfig};
use error::{config_error, CliResult, RuntimeContext};

#[derive(Parser, Debug)]
#[command(name = "pmqkd", version, about = "Finite-size key rates for prepare-and-measure QKD")]
struct Cli {
    /// Seed for every random choice made by the command.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Iteration cap for each convex solve.
    #[arg(long, global = true)]
    budget: Option<usize>,
    /// Directory for cached tradeoff functions.
    #[arg(long, global = true, env = "PMQKD_CACHE_DIR")]
    cache_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct ProtocolFlags {
    /// Built-in protocol: b92 or bb84.
    #[arg(long)]
    preset: Option<String>,
    /// JSON protocol description.
    #[arg(long, value_name = "FILE")]
    spec: Option<PathBuf>,
}

impl ProtocolFlags {
    fn source(&self) -> CliResult<ProtocolSource> {
        ProtocolSource::from_flags(self.preset.as_deref(), self.spec.as_deref())
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute an affine tradeoff function with a certified offset.
    Bound {
        #[command(flatten)]
        protocol: ProtocolFlags,
        /// Testing probability for presets.
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        /// Depolarizing strength of the honest channel used as the target.
        #[arg(long, default_value_t = 0.0, conflicts_with = "stats")]
        p: f64,
        /// Target statistics as a JSON {labels, probs} document.
        #[arg(long, value_name = "FILE")]
        stats: Option<PathBuf>,
        /// Largest acceptable duality gap.
        #[arg(long, default_value_t = 1e-3)]
        gap_tol: f64,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        /// Solver report path (defaults to <out>.report.json).
        #[arg(long, value_name = "FILE")]
        report: Option<PathBuf>,
    },
    /// Sweep key rates over (p, n, s) and write CSV.
    Keyrate {
        /// JSON sweep configuration; flags override its fields.
        #[arg(long, value_name = "FILE")]
        config: Option<PathBuf>,
        #[command(flatten)]
        protocol: ProtocolFlags,
        #[arg(long, value_delimiter = ',')]
        p: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        n: Vec<u64>,
        #[arg(long, value_delimiter = ',')]
        s: Vec<u64>,
        /// Skip the asymptotic row for each p.
        #[arg(long)]
        no_asymptotic: bool,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Run the protocol end to end and measure the abort rate.
    Simulate {
        #[command(flatten)]
        protocol: ProtocolFlags,
        #[arg(long, default_value_t = 0.02)]
        p: f64,
        #[arg(long, default_value_t = 100_000)]
        n: u64,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        /// Override the planned final key length.
        #[arg(long)]
        key_length: Option<u64>,
        /// Corrupt each error-correction symbol with this probability.
        #[arg(long)]
        flip_rate: Option<f64>,
        /// JSON error budgets (defaults to the B92 reference values).
        #[arg(long, value_name = "FILE")]
        eps: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Decoy-state bounds from observed gains.
    Decoy {
        /// CSV with columns basis,intensity,t,f.
        #[arg(long, value_name = "FILE")]
        gains: PathBuf,
        /// JSON decoy settings {mu, p_mu, q_x}.
        #[arg(long, value_name = "FILE", conflicts_with_all = ["mu", "p_mu"])]
        settings: Option<PathBuf>,
        /// Three intensities, signal first.
        #[arg(long, value_delimiter = ',')]
        mu: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        p_mu: Option<Vec<f64>>,
        /// Probability of the X basis.
        #[arg(long, default_value_t = 0.5)]
        q_x: f64,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(config_error("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global().runtime("thread pool")?;
    }
    let global = Global { seed: cli.seed, budget: cli.budget, cache_dir: cli.cache_dir };
    match cli.command {
        Command::Bound { protocol, gamma, p, stats, gap_tol, out, report } => {
            let args = BoundArgs { source: protocol.source()?, gamma, p, stats, out, report, gap_tol };
            commands::cmd_bound(&args, &global).map(|_| ())
        }
        Command::Keyrate { config, protocol, p, n, s, no_asymptotic, out } => {
            let mut sweep = match &config {
                Some(path) => SweepConfig::from_file(path)?,
                None => SweepConfig::default(),
            };
            if protocol.preset.is_some() || protocol.spec.is_some() {
                sweep.preset = protocol.preset;
                sweep.spec_file = protocol.spec;
            }
            if !p.is_empty() {
                sweep.p = p;
            }
            if !n.is_empty() {
                sweep.n = n;
            }
            if !s.is_empty() {
                sweep.s = s;
            }
            if no_asymptotic {
                sweep.asymptotic = false;
            }
            if out.is_some() {
                sweep.output = out;
            }
            commands::cmd_keyrate(&sweep, &global).map(|_| ())
        }
        Command::Simulate { protocol, p, n, trials, key_length, flip_rate, eps, out } => {
            let params = match eps {
                Some(path) => {
                    let text = std::fs::read_to_string(&path)
                        .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
                    serde_json::from_str(&text).map_err(|e| config_error(format!("error budgets: {e}")))?
                }
                None => EpsConfig::default(),
            };
            let args = SimulateArgs { source: protocol.source()?, p, n, trials, key_length, flip_rate, params, out };
            commands::cmd_simulate(&args, &global).map(|_| ())
        }
        Command::Decoy { gains, settings, mu, p_mu, q_x, out } => {
            commands::cmd_decoy(&DecoyArgs { gains, settings, mu, p_mu, q_x, out }).map(|_| ())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use clap::CommandFactory;

    use super::*;
    use crate::error::CliError;

    #[test]
    fn clap_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn config_errors_exit_two() {
        assert_eq!(CliError::Config(anyhow::anyhow!("x")).exit_code(), 2);
        assert_eq!(CliError::Runtime(anyhow::anyhow!("x")).exit_code(), 1);
    }
}
