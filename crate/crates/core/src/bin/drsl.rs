use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use drsl_core::cli::{cmd_compare, cmd_datagen, cmd_eval_robust, cmd_reference, cmd_run, read_beta};
use drsl_core::config::ExperimentConfig;
use drsl_core::data::{load_dataset, SynthSpec};
use drsl_core::eval::{ReferenceCache, ReferenceOptions};
use drsl_core::{LinkFunction, ProblemParams, Result};

/// Wasserstein distributionally robust learning benchmarks.
#[derive(Parser)]
#[command(name = "drsl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ProblemArgs {
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
    #[arg(long, default_value = "canonical-logistic")]
    link: LinkFunction,
}

impl ProblemArgs {
    fn params(&self) -> Result<ProblemParams> {
        ProblemParams::new(self.delta, self.kappa, self.link)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset in the cache format.
    Datagen {
        #[arg(long, default_value_t = 5000)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        d: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.2)]
        noise_var: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one experiment config; `--key value` pairs override config keys.
    Run {
        config: PathBuf,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
    /// Run every `*.cfg` in a directory and merge the traces.
    Compare {
        dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Overrides applied to every config.
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
    /// Compute (or load) the certified reference solution.
    Reference {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 20_000)]
        budget: usize,
    },
    /// Evaluate the Wasserstein robust loss of a coefficient vector.
    EvalRobust {
        #[arg(long)]
        data: PathBuf,
        /// File with one coefficient per line, as written by `run`.
        #[arg(long)]
        beta: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0,0.05,0.1,0.2")]
        deltas: Vec<f64>,
        #[command(flatten)]
        problem: ProblemArgs,
    },
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<()> {
    let cache = ReferenceCache::from_env();
    match command {
        Command::Datagen {
            n,
            d,
            seed,
            noise_var,
            out: path,
        } => {
            let mut spec = SynthSpec::new(n, d, seed);
            spec.noise_var = noise_var;
            cmd_datagen(&spec, &path, out)?;
        }
        Command::Run { config, overrides } => {
            let cfg = ExperimentConfig::load(&config, &overrides)?;
            cmd_run(&cfg, &cache, out)?;
        }
        Command::Compare {
            dir,
            out: path,
            summary,
            overrides,
        } => {
            cmd_compare(&dir, &overrides, &path, summary.as_deref(), &cache, out)?;
        }
        Command::Reference {
            data,
            problem,
            tol,
            budget,
        } => {
            let ds = load_dataset(&data)?;
            let opts = ReferenceOptions {
                budget,
                tol_target: tol,
            };
            cmd_reference(&ds, &problem.params()?, &opts, &cache, out)?;
        }
        Command::EvalRobust {
            data,
            beta,
            deltas,
            problem,
        } => {
            let ds = load_dataset(&data)?;
            cmd_eval_robust(&read_beta(&beta)?, &ds, &deltas, &problem.params()?, out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let stdout = io::stdout();
    let mut lock = stdout.lock();
    match dispatch(cli.command, &mut lock) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = lock.flush();
            eprintln!("drsl: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
