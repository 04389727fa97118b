//! Command-line runner for the cell-probe laboratory.

use std::path::PathBuf;
use std::process::ExitCode;

use cellprobe_lab::acceptance::{parse_only, run_acceptance, AcceptanceOptions};
use cellprobe_lab::config::{ConfigError, Experiment, ExperimentConfig, Settings};
use cellprobe_lab::experiments::{run_experiment, InvariantFailure};
use clap::{Args, Parser, Subcommand};

const EXIT_INVARIANT: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "cellprobe", version, about = "Seeded cell-probe lower-bound experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fibonacci lattice points and the rectangle area-bound sweep.
    Lattice(RunArgs),
    /// Build a query family and check suffix independence.
    Family(RunArgs),
    /// Run the hard distribution and write per-epoch probe profiles.
    Chronogram(RunArgs),
    /// Encode one epoch, decode it back and account for message length.
    Encode(RunArgs),
    /// Grid hitting numbers, crossing-out ranks and well-separated fractions.
    Grid(RunArgs),
    /// Replay a workload CSV (or a random one) against the oracle.
    Replay(RunArgs),
    /// Run the acceptance suite.
    Acceptance(AcceptanceArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Flat key=value config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Word size in bits.
    #[arg(long)]
    w: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// Structure id: naive or orc2d.
    #[arg(long)]
    structure: Option<String>,
    /// Problem kind: artificial or orc.
    #[arg(long)]
    kind: Option<String>,
    /// Epoch to encode, or the grid epoch.
    #[arg(long)]
    istar: Option<u32>,
    #[arg(long)]
    trials: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Any other config key, as key=value. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    extra: Vec<String>,
}

#[derive(Args)]
struct AcceptanceArgs {
    /// Comma-separated criterion numbers or groups.
    #[arg(long)]
    only: Option<String>,
    /// Corrupt encoded messages before decoding; the identity criterion must fail.
    #[arg(long, value_parser = ["decode"])]
    inject_fault: Option<String>,
}

impl RunArgs {
    fn settings(&self) -> Result<Settings, ConfigError> {
        let mut s = match &self.config {
            Some(path) => Settings::load(path)?,
            None => Settings::default(),
        };
        let extra = self
            .extra
            .iter()
            .map(|kv| Settings::parse(kv))
            .collect::<Result<Vec<_>, _>>()?;
        for e in &extra {
            for (k, v) in e.iter() {
                s.set(k, v);
            }
        }
        macro_rules! flag {
            ($($name:ident),*) => {$(
                if let Some(v) = &self.$name {
                    s.set(stringify!($name), v.to_string());
                }
            )*};
        }
        flag!(n, beta, w, seed, structure, kind, istar, trials);
        if let Some(out) = &self.out {
            s.set("out", out.display());
        }
        Ok(s)
    }
}

fn run(experiment: Experiment, args: &RunArgs) -> ExitCode {
    let config = match args.settings().and_then(|s| ExperimentConfig::resolve(experiment, &s)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("usage error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match run_experiment(&config) {
        Ok(manifest) => {
            print!("{}", manifest.render());
            ExitCode::SUCCESS
        }
        Err(e) => {
            if e.downcast_ref::<ConfigError>().is_some() || is_core_usage(&e) {
                eprintln!("usage error: {e:#}");
                ExitCode::from(EXIT_USAGE)
            } else {
                if e.downcast_ref::<InvariantFailure>().is_none() {
                    eprintln!("run failed");
                }
                eprintln!("{e:#}");
                ExitCode::from(EXIT_INVARIANT)
            }
        }
    }
}

/// Core errors that reflect bad parameters rather than broken invariants.
fn is_core_usage(e: &anyhow::Error) -> bool {
    use cellprobe_core::Error;
    matches!(
        e.downcast_ref::<Error>(),
        Some(Error::InvalidArgument(_) | Error::NotFibonacci(_) | Error::AddressOutOfRange { .. })
    )
}

fn acceptance(args: &AcceptanceArgs) -> ExitCode {
    let only = match args.only.as_deref().map(parse_only).transpose() {
        Ok(o) => o,
        Err(e) => {
            eprintln!("usage error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let opts = AcceptanceOptions {
        only,
        inject_fault: args.inject_fault.is_some(),
    };
    let results = run_acceptance(&opts, |r| println!("{r}"));
    let failed: Vec<String> = results.iter().filter(|r| !r.pass).map(|r| r.id.to_string()).collect();
    if failed.is_empty() {
        println!("all {} criteria passed", results.len());
        ExitCode::SUCCESS
    } else {
        println!("failed criteria: {}", failed.join(", "));
        ExitCode::from(EXIT_INVARIANT)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match &cli.command {
        Command::Lattice(a) => run(Experiment::Lattice, a),
        Command::Family(a) => run(Experiment::Family, a),
        Command::Chronogram(a) => run(Experiment::Chronogram, a),
        Command::Encode(a) => run(Experiment::Encode, a),
        Command::Grid(a) => run(Experiment::Grid, a),
        Command::Replay(a) => run(Experiment::Replay, a),
        Command::Acceptance(a) => acceptance(a),
    }
}
