//! `qcrb`: run the information-bound checks, build measurement designs and
//! simulate the adaptive two-stage protocol from reproducible manifests.

mod commands;
mod error;
mod manifest;
mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qcrb::estimation::{Allocation, OutOfBallPolicy};

use crate::error::{CliError, CliResult};
use crate::manifest::{CommandKind, ExperimentManifest};

#[derive(Parser)]
#[command(name = "qcrb", version, about = "Quantum Cramér–Rao laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand)]
enum Command {
    /// Check tr(H⁻¹I) against N(d-1) on random measurements and emit per-case CSV
    Verify,
    /// Build the measurement realising a target information and write it as JSON
    Design,
    /// Monte Carlo MQE of the two-stage protocol, one CSV row per (N, θ)
    Simulate,
    /// Fidelity cost of the pure-qubit protocol on random directions
    Covariant,
    /// Evaluate the two-copy collective measurement that beats N(d-1)
    Counterexample,
}

#[derive(Args)]
struct Common {
    /// JSON experiment manifest; flags below override its fields
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (default: stdout)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads
    #[arg(long, global = true, env = "QCRB_THREADS")]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum)]
    policy: Option<PolicyArg>,
    #[arg(long, global = true, value_enum)]
    allocation: Option<AllocationArg>,
    /// Also write the effective manifest (after overrides) to this path
    #[arg(long, global = true)]
    emit_manifest: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Project,
    Discard,
}

#[derive(Clone, Copy, ValueEnum)]
enum AllocationArg {
    Deterministic,
    Multinomial,
}

impl Command {
    fn kind(&self) -> CommandKind {
        match self {
            Command::Verify => CommandKind::Verify,
            Command::Design => CommandKind::Design,
            Command::Simulate => CommandKind::Simulate,
            Command::Covariant => CommandKind::Covariant,
            Command::Counterexample => CommandKind::Counterexample,
        }
    }
}

fn effective_manifest(kind: CommandKind, common: &Common) -> CliResult<ExperimentManifest> {
    let mut m = match &common.manifest {
        Some(path) => ExperimentManifest::load(path)?,
        None => ExperimentManifest::default_for(kind),
    };
    if m.command != kind {
        return Err(CliError::config(
            "command",
            format!("manifest is for `{}`, not `{}`", m.command.name(), kind.name()),
        ));
    }
    if let Some(seed) = common.seed {
        m.seed = seed;
    }
    if let Some(out) = &common.out {
        m.out = Some(out.clone());
    }
    if let Some(p) = common.policy {
        m.policy = match p {
            PolicyArg::Project => OutOfBallPolicy::Project,
            PolicyArg::Discard => OutOfBallPolicy::Discard,
        };
    }
    if let Some(a) = common.allocation {
        m.allocation = match a {
            AllocationArg::Deterministic => Allocation::Deterministic,
            AllocationArg::Multinomial => Allocation::Multinomial,
        };
    }
    Ok(m)
}

fn write_to(path: &PathBuf, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(format!("writing {}", path.display()), e))
}

fn run(cli: &Cli) -> CliResult<()> {
    if let Some(k) = cli.common.threads {
        if k == 0 {
            return Err(CliError::config("threads", "must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| CliError::config("threads", e.to_string()))?;
    }
    let manifest = effective_manifest(cli.command.kind(), &cli.common)?;
    if let Some(path) = &cli.common.emit_manifest {
        write_to(path, &(manifest.to_json() + "\n"))?;
    }
    let report = commands::run(&manifest)?;
    match &manifest.out {
        Some(path) => write_to(path, &report.body)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(report.body.as_bytes())
                .map_err(|e| CliError::io("writing stdout", e))?;
        }
    }
    for note in &report.notes {
        eprintln!("{note}");
    }
    if !report.violations.is_empty() {
        return Err(CliError::Violation(report.violations.join("; ")));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
