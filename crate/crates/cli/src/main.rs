//! Command-line front end for misspecified-kriging experiments.

mod config;
mod output;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use misspec_krige::diagnostics::{assumption_report, nystrom_eigen};
use misspec_krige::harness::{run_scenarios, ScenarioRegistry};
use misspec_krige::{Error, KernelRegistry};

const THREADS_ENV: &str = "MISSPEC_KRIGE_THREADS";

const EXIT_OK: u8 = 0;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "misspec-krige",
    about = "Kriging under misspecified Gaussian models",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run scenarios and write ratios.csv, mean_terms.csv and diagnostics.json.
    Run {
        config: PathBuf,
        /// Output directory; overrides the config's `output`.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Print the assumption report for a model pair as JSON.
    Check { config: PathBuf },
    /// Write Nystrom eigenvalues of a kernel to eigenvalues.csv.
    Eigen {
        config: PathBuf,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// List the built-in scenarios.
    ListScenarios,
    /// Print the version.
    Version,
}

enum Failure {
    Config(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Config(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(format!("i/o error: {e}"))
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Config(format!("serialization error: {e}"))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Run { config, output } => cmd_run(&config, output),
        Command::Check { config } => cmd_check(&config),
        Command::Eigen { config, output } => cmd_eigen(&config, output),
        Command::ListScenarios => {
            let names = ScenarioRegistry::with_builtins().names().join("\n");
            emit(&names)
        }
        Command::Version => emit(&format!("misspec-krige {}", env!("CARGO_PKG_VERSION"))),
    });
    if let Err(f) = &result {
        match f {
            Failure::Config(msg) => eprintln!("error: {msg}"),
            Failure::Numerical(msg) => eprintln!("numerical failure: {msg}"),
        }
    }
    ExitCode::from(exit_code(&result))
}

fn exit_code(result: &Result<(), Failure>) -> u8 {
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Config(_)) => EXIT_CONFIG,
        Err(Failure::Numerical(_)) => EXIT_NUMERICAL,
    }
}

/// Prints to stdout; a closed pipe on the reading side is not an error.
fn emit(text: &str) -> Result<(), Failure> {
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Failure::Config(format!("{THREADS_ENV} must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::Config(format!("cannot size the worker pool: {e}")))
}

fn cmd_run(path: &Path, output: Option<PathBuf>) -> Result<(), Failure> {
    let cfg = config::load_experiment(path)?;
    let scenarios = cfg.scenarios(&ScenarioRegistry::with_builtins())?;
    let kernels = KernelRegistry::with_builtins();
    for s in &scenarios {
        s.resolve(&kernels)?;
    }
    let dir = output.or(cfg.output).unwrap_or_else(|| PathBuf::from("."));

    let runs = run_scenarios(&scenarios, &kernels)
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    output::write_atomic(
        &dir,
        &[
            (output::RATIOS_FILE, output::ratios_csv(&runs)?),
            (output::MEAN_TERMS_FILE, output::mean_terms_csv(&runs)?),
            (output::DIAGNOSTICS_FILE, output::diagnostics_json(&scenarios, &runs)?),
        ],
    )?;

    let errors: Vec<&Error> = runs.iter().flat_map(|r| r.errors()).collect();
    for run in &runs {
        for e in run.errors() {
            eprintln!("scenario {}: {e}", run.scenario);
        }
    }
    match errors.iter().find(|e| !e.is_numerical()).or(errors.first()) {
        Some(e) => Err(Failure::from((*e).clone())),
        None => Ok(()),
    }
}

fn cmd_check(path: &Path) -> Result<(), Failure> {
    let cfg = config::load_check(path)?;
    let kernels = KernelRegistry::with_builtins();
    let truth = cfg.true_model.build(&kernels)?;
    let wrong = cfg.wrong_model.build(&kernels)?;
    let report = assumption_report(&truth, &wrong, &cfg.budget)?;
    emit(&serde_json::to_string_pretty(&report)?)
}

fn cmd_eigen(path: &Path, output: Option<PathBuf>) -> Result<(), Failure> {
    let cfg = config::load_eigen(path)?;
    let kernel = KernelRegistry::with_builtins().build(&cfg.kernel)?;
    let (nodes, weights) = cfg.quadrature.nodes_weights()?;
    let eig = nystrom_eigen(kernel.as_ref(), &nodes, &weights, cfg.rank_cutoff)?;
    let dir = output.or(cfg.output).unwrap_or_else(|| PathBuf::from("."));
    output::write_atomic(&dir, &[(output::EIGEN_FILE, output::eigen_csv(&eig)?)])?;
    Ok(())
}
