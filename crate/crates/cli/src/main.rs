use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use spingarn_cli::config::ExperimentConfig;
use spingarn_cli::report::RunReport;
use spingarn_cli::trace::Trace;
use spingarn_cli::{demo, out_dir, run_experiment, CliError};

/// Runs spingarn experiments and audits their traces.
#[derive(Parser)]
#[command(name = "spingarn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run { config: PathBuf },
    /// Run a builtin demonstration.
    Demo {
        #[command(subcommand)]
        demo: Demo,
    },
    /// Recompute the report of a saved trace.
    Audit { trace: PathBuf },
}

#[derive(Subcommand)]
enum Demo {
    /// Variant method diverging on a scaled identity.
    CounterexampleDivergent {
        #[arg(long, default_value_t = 0.8)]
        sigma_hat: f64,
        #[arg(long, default_value_t = 30)]
        k: usize,
    },
    /// HPE triples rejected by every variant tolerance.
    CounterexampleHpeNotVariant {
        #[arg(long, default_value_t = 0.7)]
        sigma: f64,
        #[arg(long, default_value_t = 50)]
        k: usize,
    },
    /// Forward-backward on a consensus lasso.
    ConsensusLasso {
        #[arg(long, default_value_t = 2)]
        m: usize,
        #[arg(long, default_value_t = 20)]
        n: usize,
        #[arg(long, default_value_t = 0.9)]
        sigma: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Forward-backward on consensus least squares.
    ConsensusLeastSquares {
        #[arg(long, default_value_t = 3)]
        m: usize,
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 0.9)]
        sigma: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn status_code(report: &RunReport) -> ExitCode {
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn run(cfg: ExperimentConfig) -> Result<ExitCode, CliError> {
    let outcome = run_experiment(&cfg, &out_dir())?;
    print!("{}", outcome.text);
    println!("trace: {}", outcome.trace_path.display());
    println!("report: {}", outcome.report_path.display());
    println!("wall time: {:.3} s", outcome.wall_time.as_secs_f64());
    Ok(status_code(&outcome.report))
}

fn dispatch(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Run { config } => run(ExperimentConfig::load(&config)?),
        Command::Demo { demo } => run(match demo {
            Demo::CounterexampleDivergent { sigma_hat, k } => demo::counterexample_divergent(sigma_hat, k),
            Demo::CounterexampleHpeNotVariant { sigma, k } => demo::counterexample_hpe_not_variant(sigma, k),
            Demo::ConsensusLasso { m, n, sigma, seed } => demo::consensus_lasso(m, n, sigma, seed),
            Demo::ConsensusLeastSquares { m, n, sigma, seed } => demo::consensus_least_squares(m, n, sigma, seed),
        }),
        Command::Audit { trace } => {
            let text = std::fs::read_to_string(&trace).map_err(|e| CliError::Trace(format!("{}: {e}", trace.display())))?;
            let report = RunReport::from_trace(&Trace::parse(&text)?);
            print!("{}", report.render());
            Ok(status_code(&report))
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
