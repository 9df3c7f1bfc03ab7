//! `xchain`: run scenarios, sweep latency parameters and verify traces.
//!
//! Exit codes: 0 success, 1 unusable input, 2 invariant violation.

mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use xchain_core::orchestrator::{
    overhead_report, run_scenario, sweep, verify_trace, ScenarioConfig, ScenarioTrace, Violation,
};

#[derive(Debug, Parser)]
#[command(name = "xchain", version, about = "Deterministic cross-chain invocation simulator")]
struct Cli {
    /// Replaces the seed from the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Only used to print minutes next to block counts.
    #[arg(long, global = true, default_value_t = 15)]
    seconds_per_block: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a scenario, check its invariants and write the trace.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate the scenario for every waiting/phase pair.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "30,50,100")]
        waiting: Vec<u64>,
        #[arg(long, value_delimiter = ',', default_value = "5,10,30")]
        phase: Vec<u64>,
    },
    /// Re-check every invariant of a recorded trace.
    Verify {
        #[arg(long)]
        trace: PathBuf,
    },
}

#[derive(Debug)]
enum Failure {
    Input(String),
    Invariant(Violation),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Input(_) => 1,
            Failure::Invariant(_) => 2,
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<ScenarioConfig, Failure> {
    let mut config = ScenarioConfig::from_toml(&read(path)?).map_err(|e| Failure::Input(e.to_string()))?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    Ok(config)
}

fn cmd_run(cli: &Cli, config: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let config = load_config(config, cli.seed)?;
    let trace = run_scenario(&config).map_err(|e| Failure::Input(e.to_string()))?;
    // the trace is written first so a violation can be inspected
    if let Some(out) = out {
        fs::write(out, trace.to_jsonl())
            .map_err(|e| Failure::Input(format!("cannot write {}: {e}", out.display())))?;
    }
    print!("{}", report::invocation_table(&trace).render());
    if let Some(overhead) = overhead_report(&trace, &config) {
        print!("{}", report::overhead_lines(&overhead, cli.seconds_per_block));
        print!("{}", report::gas_table(&overhead).render());
    }
    verify_trace(&trace).map_err(Failure::Invariant)?;
    println!("invariants hold");
    Ok(())
}

fn cmd_sweep(cli: &Cli, config: &Path, waiting: &[u64], phase: &[u64]) -> Result<(), Failure> {
    if waiting.is_empty() || phase.is_empty() {
        return Err(Failure::Input("--waiting and --phase need at least one value".into()));
    }
    let config = load_config(config, cli.seed)?;
    let cells = sweep(&config, waiting, phase).map_err(|e| Failure::Input(e.to_string()))?;
    print!("{}", report::latency_matrix(&cells, cli.seconds_per_block).render());
    Ok(())
}

fn cmd_verify(path: &Path) -> Result<(), Failure> {
    let trace = ScenarioTrace::from_jsonl(&read(path)?)
        .map_err(|e| Failure::Input(format!("cannot parse {}: {e}", path.display())))?;
    verify_trace(&trace).map_err(Failure::Invariant)?;
    println!(
        "ok: {} blocks, {} invocations, invariants hold",
        trace.blocks.len(),
        trace.invocations.len()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config, out } => cmd_run(&cli, config, out.as_deref()),
        Command::Sweep { config, waiting, phase } => cmd_sweep(&cli, config, waiting, phase),
        Command::Verify { trace } => cmd_verify(trace),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            match &failure {
                Failure::Input(msg) => eprintln!("error: {msg}"),
                Failure::Invariant(v) => eprintln!("invariant violated: {v}"),
            }
            ExitCode::from(failure.exit_code())
        }
    }
}
