use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dsmrf::parallel::resolve_workers;
use dsmrf_cli::commands::{run, Command, RunContext};
use dsmrf_cli::config::Config;
use dsmrf_cli::{CliError, EXIT_PARTIAL};

#[derive(Parser)]
#[command(name = "dsmrf", version, about = "Learning curves, simulations and memorization runs for random-features score models")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Config file with `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output CSV path; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Global seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads.
    #[arg(long, global = true, env = "DSMRF_WORKERS")]
    workers: Option<usize>,

    /// Also write an SVG plot next to the CSV (same path, .svg extension).
    #[arg(long, global = true)]
    svg: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Asymptotic learning curves.
    Theory,
    /// Finite-size fits compared with the theory.
    Montecarlo,
    /// Test error over a (psi_n, psi_p) grid for both regimes.
    PhaseDiagram,
    /// Memorization rate of the backward sampler.
    Memorize,
    /// Resolvent traces of nonlinear features against their Gaussian equivalent.
    GepCheck,
    /// Gaussian moments of the activations.
    Stats,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Theory => Command::Theory,
            Cmd::Montecarlo => Command::MonteCarlo,
            Cmd::PhaseDiagram => Command::PhaseDiagram,
            Cmd::Memorize => Command::Memorize,
            Cmd::GepCheck => Command::GepCheck,
            Cmd::Stats => Command::Stats,
        }
    }
}

fn svg_path(cli: &Cli) -> Option<PathBuf> {
    if !cli.svg {
        return None;
    }
    Some(match &cli.out {
        Some(out) => out.with_extension("svg"),
        None => PathBuf::from("plot.svg"),
    })
}

fn write(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn main_inner(cli: &Cli) -> Result<i32, CliError> {
    let mut config = match &cli.config {
        Some(p) => Config::from_file(p)?,
        None => Config::default(),
    };
    // command-line values win over the config file
    let config_seed = config.u64_or("seed", 0)?;
    let config_workers = config.usize_or("workers", 0)?;
    let seed = cli.seed.unwrap_or(config_seed);
    let requested = cli.workers.or((config_workers > 0).then_some(config_workers));
    let svg = svg_path(cli);
    let ctx = RunContext { seed, workers: resolve_workers(requested), svg: svg.is_some() };
    let out = run(cli.command.into(), config, &ctx)?;
    write(cli.out.as_deref(), &out.csv)?;
    match (svg, &out.svg) {
        (Some(p), Some(text)) => std::fs::write(p, text)?,
        (Some(_), None) => eprintln!("note: this subcommand has no plot"),
        _ => {}
    }
    if out.failures > 0 {
        eprintln!("{} row(s) failed; see the status and message columns", out.failures);
        return Ok(EXIT_PARTIAL);
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors count as configuration errors
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match main_inner(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
