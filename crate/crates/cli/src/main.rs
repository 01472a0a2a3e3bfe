use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use msbayes::driver::{Method, Problem};
use msbayes::Error;
use msbayes_cli::commands::{cache_dir, cmd_basis, cmd_experiment, cmd_reference, cmd_report, cmd_sample, Experiment};
use msbayes_cli::config::RunConfig;
use msbayes_cli::exit_code;

#[derive(Parser)]
#[command(name = "msbayes", version, about = "Bayesian multiscale basis selection for parabolic problems")]
struct Cli {
    /// Configuration file (`section.key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Sampler seed; overrides `sampler.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "results")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the fine reference problem.
    Reference,
    /// Build or load the offline basis.
    Basis,
    /// Run an ensemble of selection chains.
    Sample {
        /// seq, mcmc, fixed or full; overrides `sampler.method`.
        #[arg(long)]
        method: Option<String>,
        /// Number of samples; overrides `sampler.n_samples`.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Run table1, table2, table3 or example2.
    Experiment { name: String },
    /// Summarize a results directory and redraw its heatmaps.
    Report,
}

fn run(cli: Cli) -> Result<String, Error> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Config(format!("--threads: {e}")))?;
    }
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let cache = cache_dir();
    match cli.command {
        Command::Reference => cmd_reference(&cfg, &cli.out),
        Command::Basis => cmd_basis(&cfg, &cache, &cli.out),
        Command::Sample { method, n } => {
            let method: Method = match method {
                Some(m) => m.parse()?,
                None => cfg.method,
            };
            let n = n.unwrap_or(cfg.n_samples);
            if n == 0 {
                return Err(Error::Config("--n must be at least 1".into()));
            }
            let problem = Problem::prepare(&cfg.problem, Some(&cache))?;
            cmd_sample(&cfg, &problem, method, n, cfg.seed, &cli.out).map(|(_, s)| s)
        }
        Command::Experiment { name } => cmd_experiment(&cfg, name.parse::<Experiment>()?, &cache, &cli.out),
        Command::Report => cmd_report(&cli.out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(summary) => {
            println!("{}", summary.trim_end());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("msbayes: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
