use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ssvortex_core::error::Error;
use ssvortex_core::runner::{run, Overrides, RunConfig, Suite};

#[derive(Parser)]
#[command(name = "ssvortex", version, about = "Linear stability checks for the self-similar power-law vortex")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integration identities and kernel composition
    Verify(Common),
    /// Resolvent solves and residuals
    Resolvent(Common),
    /// Semigroup time stepping and growth rates
    Semigroup(Common),
    /// Dense eigenvalue scans with resolvent cross-probes
    Spectrum(Common),
    /// Shooting test for integrable homogeneous solutions
    Shoot(Common),
    /// Every suite listed in the config (all five by default)
    All(Common),
}

#[derive(Args)]
struct Common {
    /// Flat TOML run configuration
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    m: Option<u32>,
    #[arg(long)]
    kmax: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for reports
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, suite) = match cli.command {
        Command::Verify(c) => (c, Some(Suite::Identities)),
        Command::Resolvent(c) => (c, Some(Suite::Resolvent)),
        Command::Semigroup(c) => (c, Some(Suite::Semigroup)),
        Command::Spectrum(c) => (c, Some(Suite::Spectrum)),
        Command::Shoot(c) => (c, Some(Suite::Shooting)),
        Command::All(c) => (c, None),
    };
    let ov = Overrides {
        alpha: common.alpha,
        beta: common.beta,
        q: common.q,
        m: common.m,
        k_max: common.kmax,
        seed: common.seed,
        output_dir: common.out,
        suites: suite.map(|s| vec![s]),
    };
    let cfg = match &common.config {
        Some(path) => RunConfig::load(path, &ov),
        None => RunConfig::parse("", &ov),
    };
    let cfg = match cfg {
        Ok(c) => c,
        Err(e) => return fail(&e, common.config.as_ref()),
    };
    match run(&cfg) {
        Ok(outcome) => {
            for r in &outcome.reports {
                println!("{:<11} {}", r.suite.name(), if r.passed { "PASS" } else { "FAIL" });
            }
            for f in outcome.failures() {
                eprintln!("failed check: {f}");
            }
            println!("artifacts in {}", cfg.output_dir.display());
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(Error::Numerical(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(e) => fail(&e, common.config.as_ref()),
    }
}

fn fail(e: &Error, path: Option<&PathBuf>) -> ExitCode {
    match (e, path) {
        (Error::Config { line, msg }, Some(p)) if *line > 0 => eprintln!("{}:{line}: {msg}", p.display()),
        (Error::Config { msg, .. }, _) => eprintln!("config error: {msg}"),
        _ => eprintln!("error: {e}"),
    }
    ExitCode::from(2)
}
