//! Command-line front end: loads a scenario file, dispatches to the
//! requested analysis or simulation, prints the JSON report to stdout and
//! optionally writes report plus curve artifacts to an output directory.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use isacsim::io::write_json;
use isacsim::scenario::{
    evaluate_checks, run_budget, run_kpi, run_simulate, run_sync_eval, Scenario,
};

const EXIT_CONFIG: u8 = 2;
const EXIT_ALL_RUNS_FAILED: u8 = 3;
const EXIT_CHECK_MISMATCH: u8 = 4;

#[derive(Parser)]
#[command(name = "isacsim", version, about = "Bistatic OFDM sensing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the waveform KPI table for the scenario's system numerology.
    Kpi(CommonArgs),
    /// Solve the detection-range budget and export its level curves.
    Budget(CommonArgs),
    /// Run the scenario's Monte-Carlo simulation and aggregate metrics.
    Simulate(CommonArgs),
    /// Sweep injected sync offsets and report estimator residuals.
    SyncEval(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Directory for report and curve files; stdout only when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the scenario's Monte-Carlo base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for Monte-Carlo runs (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Evaluate the scenario's [check] table against the report and fail on
    /// mismatch.
    #[arg(long)]
    check: bool,
}

impl Command {
    fn args(&self) -> &CommonArgs {
        match self {
            Command::Kpi(a) | Command::Budget(a) | Command::Simulate(a) | Command::SyncEval(a) => {
                a
            }
        }
    }

    fn report_name(&self) -> &'static str {
        match self {
            Command::Kpi(_) => "kpi.json",
            Command::Budget(_) => "budget.json",
            Command::Simulate(_) => "simulate.json",
            Command::SyncEval(_) => "sync_eval.json",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let args = cli.command.args();

    if let Some(jobs) = args.jobs {
        if let Err(err) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: cannot configure {jobs} worker threads: {err}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }

    let mut scenario = match Scenario::load(&args.config) {
        Ok(s) => s,
        Err(err) => {
            eprintln!("error: {}: {err}", args.config.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(seed) = args.seed {
        scenario.monte_carlo.base_seed = seed;
    }

    if let Some(out) = &args.out {
        if let Err(err) = std::fs::create_dir_all(out) {
            eprintln!("error: cannot create {}: {err}", out.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    }

    let out = args.out.as_deref();
    let mut all_runs_failed = false;
    let report = match &cli.command {
        Command::Kpi(_) => run_kpi(&scenario).map(|r| serde_json::to_value(r).unwrap()),
        Command::Budget(_) => run_budget(&scenario, out).map(|r| serde_json::to_value(r).unwrap()),
        Command::Simulate(_) => run_simulate(&scenario, out).map(|r| {
            all_runs_failed = r.aggregate.runs_succeeded == 0;
            serde_json::to_value(r).unwrap()
        }),
        Command::SyncEval(_) => {
            run_sync_eval(&scenario, out).map(|r| serde_json::to_value(r).unwrap())
        }
    };
    let report = match report {
        Ok(r) => r,
        Err(err) => {
            eprintln!("error: {err}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };

    if let Some(out) = &args.out {
        if let Err(err) = write_json(&out.join(cli.command.report_name()), &report) {
            eprintln!("error: {err}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));

    if all_runs_failed {
        eprintln!("error: all Monte-Carlo runs failed");
        return ExitCode::from(EXIT_ALL_RUNS_FAILED);
    }

    if args.check {
        let failures = evaluate_checks(&scenario.check, &report);
        if !failures.is_empty() {
            for failure in &failures {
                eprintln!("check failed: {failure}");
            }
            return ExitCode::from(EXIT_CHECK_MISMATCH);
        }
        eprintln!("all {} checks passed", scenario.check.len());
    }

    ExitCode::SUCCESS
}
