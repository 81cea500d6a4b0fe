//! `falconn`: falsification campaigns, robustness monitoring, plant
//! simulation, and surrogate distillation from the command line.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use falconn_core::falsify::{persist_campaign, run_campaign, Outcome, RunConfig};
use falconn_core::sim::{parse_trace_csv, run_experiment, save_trace, Plant, SutSpec, TraceManifest};
use falconn_core::stl::{parse_formula, robustness_exact};
use falconn_core::surrogate::load_checkpoint;
use falconn_core::symreg::{evolve, sample_derivatives, select_candidate, SrConfig};
use falconn_core::sim::InputSignal;

#[derive(Parser)]
#[command(name = "falconn", about = "STL falsification via neural-symbolic optimal control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a falsification campaign from a config file.
    Falsify {
        #[arg(long)]
        config: PathBuf,
    },
    /// Evaluate the exact robustness of a trace against a specification.
    Monitor {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        spec: String,
    },
    /// Simulate a plant under a piecewise-constant input.
    Simulate {
        #[arg(long)]
        plant: String,
        /// CSV with `time,u_<name>,...` columns (zero-order hold).
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Defaults to the last input breakpoint.
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Distill a trained surrogate checkpoint into symbolic dynamics.
    Distill {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
    },
}

const EXIT_VIOLATED: u8 = 1;
const EXIT_ERROR: u8 = 2;
const EXIT_NOT_FALSIFIED: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn run(command: Command) -> anyhow::Result<ExitCode> {
    match command {
        Command::Falsify { config } => falsify(&config),
        Command::Monitor { trace, spec } => monitor(&trace, &spec),
        Command::Simulate {
            plant,
            input,
            out,
            horizon,
        } => simulate(&plant, &input, &out, horizon),
        Command::Distill { model, dataset } => distill(&model, &dataset),
    }
}

fn falsify(config_path: &std::path::Path) -> anyhow::Result<ExitCode> {
    let config = RunConfig::from_file(config_path)?;
    let result = run_campaign(&config)?;
    persist_campaign(&result, &config)?;
    for r in &result.records {
        println!("{}", serde_json::to_string(r)?);
    }
    println!(
        "outcome: {} ({} SUT experiments)",
        result.outcome.name(),
        result.experiments
    );
    if let (Some(u), Some(rob)) = (&result.counterexample, result.robustness) {
        println!("counterexample robustness: {rob:.6}");
        println!("counterexample input: {}", serde_json::to_string(u)?);
    }
    Ok(match result.outcome {
        Outcome::Falsified => ExitCode::SUCCESS,
        Outcome::FlukeOnly | Outcome::BudgetExhausted => ExitCode::from(EXIT_NOT_FALSIFIED),
    })
}

fn monitor(trace_path: &std::path::Path, spec: &str) -> anyhow::Result<ExitCode> {
    let formula = parse_formula(spec)?;
    let csv = std::fs::read_to_string(trace_path)?;
    let trace = parse_trace_csv(&csv, vec![])?;
    let rob = robustness_exact(&formula, &trace.to_signal()?, 0)?;
    println!("{rob:.6}");
    Ok(if rob >= 0.0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_VIOLATED)
    })
}

fn simulate(
    plant_name: &str,
    input_path: &std::path::Path,
    out: &std::path::Path,
    horizon: Option<f64>,
) -> anyhow::Result<ExitCode> {
    let plant = Plant::from_name(plant_name)?;
    let csv = std::fs::read_to_string(input_path)?;
    let parsed = parse_trace_csv(&csv, vec![])?;
    let u = InputSignal::new(parsed.times.clone(), parsed.inputs)?;
    let horizon = horizon.unwrap_or_else(|| *u.breakpoints.last().unwrap());
    let trace = run_experiment(&SutSpec::new(plant), &u, horizon)?;
    let manifest = TraceManifest {
        schema_version: 1,
        plant: plant.name().to_string(),
        x0: trace.x0.clone(),
        sampling_period: trace.period(),
        provenance: None,
    };
    let stem = out.with_extension("");
    save_trace(&trace, &manifest, &stem)?;
    println!("wrote {} samples to {}.csv", trace.len(), stem.display());
    Ok(ExitCode::SUCCESS)
}

fn distill(model_path: &std::path::Path, dataset_dir: &std::path::Path) -> anyhow::Result<ExitCode> {
    let checkpoint = load_checkpoint(model_path)?;
    let dataset = falconn_core::falsify::load_dataset(dataset_dir)?;
    let traces = dataset.traces();
    let samples = sample_derivatives(&checkpoint.model, &traces, 10, 200, 0.25, checkpoint.seed)?;
    let sr = SrConfig {
        seed: checkpoint.seed,
        ..SrConfig::default()
    };
    let fronts = evolve(&samples, &sr);
    let sym = select_candidate(&fronts, &traces, &samples, &checkpoint.model.lifting, 10)?;
    for line in sym.to_lines() {
        println!("{line}");
    }
    Ok(ExitCode::SUCCESS)
}
