use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;

use corrdyn::commands::{self, Outcome};
use corrdyn::config::{self, Validate};

#[derive(Parser)]
#[command(name = "corrdyn", version, about = "Holomorphic correspondences on the Riemann sphere")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override a configuration field, e.g. `--set protocol.n_max=8`.
    #[arg(long = "set", value_name = "PATH=JSON")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Deleted covering graph polynomial of a rational map.
    Cov(Common),
    /// Forward orbit tuples from a list of seeds.
    Orbit(Common),
    /// Topological entropy estimates (KT and DS).
    Entropy(Common),
    /// Dirac pullback clouds and their energy distances.
    Equidist(Common),
    /// Limit-set raster.
    Limitset(Common),
    /// Invariant suite with pass/fail report.
    Verify(Common),
}

enum Failure {
    Usage(String),
    Math(String),
}

fn run<T: DeserializeOwned + Validate>(
    common: &Common,
    f: fn(&T) -> corrdyn::Result<Outcome>,
) -> Result<Outcome, Failure> {
    let cfg: T = config::load(&common.config, &common.overrides).map_err(|e| Failure::Usage(e.to_string()))?;
    f(&cfg).map_err(|e| Failure::Math(e.to_string()))
}

fn init_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("CORRDYN_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Usage(format!("CORRDYN_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Math(e.to_string()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = init_threads().and_then(|_| match &cli.command {
        Command::Cov(c) => run(c, commands::run_cov),
        Command::Orbit(c) => run(c, commands::run_orbit),
        Command::Entropy(c) => run(c, commands::run_entropy),
        Command::Equidist(c) => run(c, commands::run_equidist),
        Command::Limitset(c) => run(c, commands::run_limitset),
        Command::Verify(c) => run(c, commands::run_verify),
    });
    match result {
        Ok(out) => {
            println!("{}", out.summary);
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            ExitCode::from(if out.failed { 1 } else { 0 })
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Math(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
