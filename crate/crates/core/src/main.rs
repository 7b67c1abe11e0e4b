use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use mmv_huber::csv::{format_complex, read_matrix};
use mmv_huber::harness::{parse_config, run_experiment, write_outputs};
use mmv_huber::solver::{hub_sniht, sniht, HaltReason, SolverConfig};
use mmv_huber::{Error, SupportSet};

#[derive(Parser)]
#[command(name = "mmv-huber", version, about = "Robust multichannel sparse recovery")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum RecoverMethod {
    Sniht,
    Hub,
}

#[derive(Args)]
struct RecoverArgs {
    /// Measurement matrix Y (n×q) in complex CSV.
    #[arg(long)]
    y: PathBuf,
    /// Dictionary A (n×p) in complex CSV.
    #[arg(long)]
    a: PathBuf,
    /// Number of nonzero rows.
    #[arg(long)]
    k: usize,
    #[arg(long, value_enum, default_value = "hub")]
    method: RecoverMethod,
    /// Quantile that sets the Huber threshold.
    #[arg(long, default_value_t = 0.8)]
    q: f64,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Output JSON path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Recover a row-sparse signal matrix from Y = A S + E.
    Recover(RecoverArgs),
    /// Run a Monte Carlo source-localization experiment.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory for per.csv, histogram.csv and result.json.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Serialize)]
struct RecoverOutput<'a> {
    method: &'static str,
    support: &'a SupportSet,
    sigma_hat: f64,
    iterations: usize,
    converged: bool,
    halt: HaltReason,
    s_hat: Vec<Vec<String>>,
}

fn exit_code(err: &Error) -> ExitCode {
    match err {
        Error::Io { .. } => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn recover(args: RecoverArgs) -> Result<(), Error> {
    let y = read_matrix(&args.y)?;
    let a = read_matrix(&args.a)?;
    let mut config = SolverConfig::new(args.k);
    config.q_quantile = args.q;
    config.max_iter = args.max_iter;
    config.rel_tol = args.tol;
    let (name, result) = match args.method {
        RecoverMethod::Sniht => ("sniht", sniht(&y, &a, &config)?),
        RecoverMethod::Hub => ("hub", hub_sniht(&y, &a, &config)?),
    };
    let s = &result.s_hat;
    let output = RecoverOutput {
        method: name,
        support: &result.support,
        sigma_hat: result.sigma_hat,
        iterations: result.iterations,
        converged: result.converged,
        halt: result.halt,
        s_hat: (0..s.rows())
            .map(|i| s.row(i).iter().map(|&z| format_complex(z)).collect())
            .collect(),
    };
    let json = serde_json::to_string_pretty(&output).expect("recovery output serializes");
    std::fs::write(&args.out, json).map_err(|source| Error::Io { path: args.out, source })
}

fn simulate(
    config: PathBuf,
    out: PathBuf,
    trials: Option<usize>,
    seed: Option<u64>,
    threads: Option<usize>,
) -> Result<(), Error> {
    let text = std::fs::read_to_string(&config).map_err(|source| Error::Io {
        path: config.clone(),
        source,
    })?;
    let mut cfg = parse_config(&text)?;
    if let Some(t) = trials {
        cfg.trials = t;
    }
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    cfg.validate()?;
    let result = run_experiment(&cfg, threads)?;
    for m in &result.methods {
        eprintln!("{:>10}  PER {:.3}  ({} warnings)", m.method, m.per, m.warnings);
    }
    write_outputs(&result, &out)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Recover(args) => recover(args),
        Command::Simulate {
            config,
            out,
            trials,
            seed,
            threads,
        } => simulate(config, out, trials, seed, threads),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    }
}
