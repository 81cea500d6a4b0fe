//! The falsification loop: initialize data, then iterate
//! train -> distill -> transcribe -> warm-start -> solve -> experiment,
//! classifying counterexamples and growing the dataset.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

use super::config::RunConfig;
use super::dataset::{Dataset, IterationRecord, Provenance, RunSummary, RUN_SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::ocp::{extract_input, solve, transcribe, warm_start, OcpBounds, SolveStatus};
use crate::sim::{run_experiment, InputSignal, Plant, SutSpec, Trace, TraceManifest};
use crate::stl::{parse_formula, robustness_exact, StlFormula};
use crate::surrogate::{build_lifting, lifted_initial_state, train, KnownDynamics};
use crate::symreg::{evolve, sample_derivatives, select_candidate};

/// Seed fan-out offsets so each stage has its own reproducible stream.
mod seed_offset {
    pub const INIT: u64 = 0x01;
    pub const TRAIN: u64 = 0x02;
    pub const SAMPLE: u64 = 0x03;
    pub const EVOLVE: u64 = 0x04;
    pub const FALLBACK: u64 = 0x05;
}

fn stage_seed(master: u64, offset: u64, iteration: u64) -> u64 {
    master ^ (offset << 32) ^ iteration
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Falsified,
    FlukeOnly,
    BudgetExhausted,
}

impl Outcome {
    pub fn name(&self) -> &'static str {
        match self {
            Outcome::Falsified => "falsified",
            Outcome::FlukeOnly => "fluke-only",
            Outcome::BudgetExhausted => "budget-exhausted",
        }
    }
}

#[derive(Debug, Clone)]
pub struct CampaignResult {
    pub outcome: Outcome,
    /// The falsifying input, present only when `outcome == Falsified`.
    pub counterexample: Option<InputSignal>,
    /// Robustness of the returned counterexample.
    pub robustness: Option<f64>,
    /// Total SUT experiments (initializer + loop iterations).
    pub experiments: usize,
    pub records: Vec<IterationRecord>,
    pub dataset: Dataset,
    /// Per-iteration solver logs, aligned with `records`.
    pub solver_logs: Vec<Vec<String>>,
}

/// Piecewise-constant input choosing one of the two bounds per segment.
pub fn corners_random_input(
    bounds: &[(String, f64, f64)],
    horizon: f64,
    segment_seconds: f64,
    rng: &mut ChaCha8Rng,
) -> InputSignal {
    let n_segments = (horizon / segment_seconds).ceil().max(1.0) as usize;
    let breakpoints: Vec<f64> = (0..n_segments)
        .map(|i| i as f64 * segment_seconds)
        .collect();
    let channels = bounds
        .iter()
        .map(|(name, lo, hi)| {
            let vals = (0..n_segments)
                .map(|_| if rng.gen_bool(0.5) { *hi } else { *lo })
                .collect();
            (name.clone(), vals)
        })
        .collect();
    InputSignal::new(breakpoints, channels).expect("segment grid is valid")
}

/// One corners-random SUT experiment seeding D_0.
pub fn initialize_data(
    plant: Plant,
    config: &RunConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(InputSignal, Trace)> {
    let u = corners_random_input(
        &plant.input_bounds(),
        config.horizon,
        config.segment_seconds,
        rng,
    );
    let trace = run_experiment(&SutSpec::new(plant), &u, config.horizon)?;
    Ok((u, trace))
}

/// Runs the SUT on a candidate input and scores it exactly.
pub fn validate_candidate(
    plant: Plant,
    u: &InputSignal,
    spec: &StlFormula,
    horizon: f64,
) -> Result<(Trace, f64, bool)> {
    let trace = run_experiment(&SutSpec::new(plant), u, horizon)?;
    let rob = robustness_exact(spec, &trace.to_signal()?, 0)?;
    Ok((trace, rob, rob < 0.0))
}

pub fn manifest_for(plant: Plant, trace: &Trace) -> TraceManifest {
    TraceManifest {
        schema_version: 1,
        plant: plant.name().to_string(),
        x0: trace.x0.clone(),
        sampling_period: trace.period(),
        provenance: None,
    }
}

struct StageOutput {
    u: InputSignal,
    objective: Option<f64>,
    status: Option<SolveStatus>,
    symbolic: Vec<String>,
    log: Vec<String>,
    fallback: bool,
    timings: Vec<(String, f64)>,
}

/// train -> distill -> transcribe -> warm-start -> solve for one iteration;
/// any stage failure falls back to a fresh corners-random input.
fn synthesize(
    plant: Plant,
    spec: &StlFormula,
    config: &RunConfig,
    dataset: &Dataset,
    iteration: u64,
) -> StageOutput {
    let mut timings = Vec::new();
    let mut fallback_rng = ChaCha8Rng::seed_from_u64(stage_seed(
        config.seed,
        seed_offset::FALLBACK,
        iteration,
    ));
    let fallback = |reason: &str, timings: Vec<(String, f64)>, rng: &mut ChaCha8Rng| {
        let u = corners_random_input(
            &plant.input_bounds(),
            config.horizon,
            config.segment_seconds,
            rng,
        );
        StageOutput {
            u,
            objective: None,
            status: None,
            symbolic: vec![],
            log: vec![format!("fallback: {reason}")],
            fallback: true,
            timings,
        }
    };

    let traces = dataset.traces();
    let lifting = build_lifting(&config.lifting_orders);
    let known = match KnownDynamics::from_name(&config.known_dynamics) {
        Ok(k) => k,
        Err(e) => return fallback(&e.to_string(), timings, &mut fallback_rng),
    };

    let t0 = Instant::now();
    let mut train_cfg = config.train.clone();
    train_cfg.seed = stage_seed(config.seed, seed_offset::TRAIN, iteration);
    let model = match train(&traces, &train_cfg, lifting.clone(), known) {
        Ok(m) => m,
        Err(e) => {
            timings.push(("train".into(), t0.elapsed().as_secs_f64()));
            return fallback(&format!("training failed: {e}"), timings, &mut fallback_rng);
        }
    };
    timings.push(("train".into(), t0.elapsed().as_secs_f64()));

    let t0 = Instant::now();
    let samples = match sample_derivatives(
        &model,
        &traces,
        config.train.solve_stride,
        config.sr_extra_samples,
        config.sr_perturb_scale,
        stage_seed(config.seed, seed_offset::SAMPLE, iteration),
    ) {
        Ok(s) => s,
        Err(e) => {
            timings.push(("distill".into(), t0.elapsed().as_secs_f64()));
            return fallback(&format!("sampling failed: {e}"), timings, &mut fallback_rng);
        }
    };
    let mut sr_cfg = config.sr.clone();
    sr_cfg.seed = stage_seed(config.seed, seed_offset::EVOLVE, iteration);
    let fronts = evolve(&samples, &sr_cfg);
    let sym = match select_candidate(
        &fronts,
        &traces,
        &samples,
        &lifting,
        config.train.solve_stride,
    ) {
        Ok(s) => s,
        Err(e) => {
            timings.push(("distill".into(), t0.elapsed().as_secs_f64()));
            return fallback(
                &format!("distillation failed: {e}"),
                timings,
                &mut fallback_rng,
            );
        }
    };
    timings.push(("distill".into(), t0.elapsed().as_secs_f64()));
    let symbolic = sym.to_lines();

    // Warm start from the least-robust dataset trace.
    let least_robust = traces
        .iter()
        .filter_map(|t| {
            let s = t.to_signal().ok()?;
            let r = robustness_exact(spec, &s, 0).ok()?;
            Some((t, r))
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(t, _)| t.clone());
    let Some(warm_trace) = least_robust else {
        return fallback("no scoreable trace for warm start", timings, &mut fallback_rng);
    };

    let t0 = Instant::now();
    let input_bounds = plant.input_bounds();
    let bounds = OcpBounds {
        inputs: input_bounds.iter().map(|(_, lo, hi)| (*lo, *hi)).collect(),
        states: None,
    };
    let x0 = match lifted_initial_state(&lifting, &warm_trace) {
        Ok(z) => z,
        Err(e) => {
            timings.push(("solve".into(), t0.elapsed().as_secs_f64()));
            return fallback(&format!("lifting x0 failed: {e}"), timings, &mut fallback_rng);
        }
    };
    let problem = match transcribe(
        sym,
        spec,
        config.dt,
        config.horizon,
        &bounds,
        config.smoothing,
        x0,
        input_bounds.iter().map(|(n, _, _)| n.clone()).collect(),
        plant.output_names(),
    ) {
        Ok(p) => p,
        Err(e) => {
            timings.push(("solve".into(), t0.elapsed().as_secs_f64()));
            return fallback(
                &format!("transcription failed: {e}"),
                timings,
                &mut fallback_rng,
            );
        }
    };
    let warm_input = match InputSignal::new(
        warm_trace.times.clone(),
        warm_trace.inputs.clone(),
    ) {
        Ok(u) => u,
        Err(e) => {
            timings.push(("solve".into(), t0.elapsed().as_secs_f64()));
            return fallback(&format!("warm input invalid: {e}"), timings, &mut fallback_rng);
        }
    };
    let init = match warm_start(&problem, &warm_input) {
        Ok(v) => v,
        Err(e) => {
            timings.push(("solve".into(), t0.elapsed().as_secs_f64()));
            return fallback(&format!("warm start failed: {e}"), timings, &mut fallback_rng);
        }
    };
    let sol = solve(&problem, &init);
    timings.push(("solve".into(), t0.elapsed().as_secs_f64()));

    if sol.status == SolveStatus::InfeasibleStall && !sol.objective.is_finite() {
        return fallback("solver stalled without objective", timings, &mut fallback_rng);
    }
    StageOutput {
        u: extract_input(&problem, &sol.decision),
        objective: Some(sol.objective),
        status: Some(sol.status),
        symbolic,
        log: sol.log,
        fallback: false,
        timings,
    }
}

/// The main falsification loop: iterate while the iteration budget lasts
/// and the incumbent robustness is positive; flukes (violations from a
/// non-converged solve) are logged and kept as data but never returned as
/// the answer.
pub fn run_campaign(config: &RunConfig) -> Result<CampaignResult> {
    config.validate()?;
    let plant = Plant::from_name(&config.plant)?;
    let spec = parse_formula(&config.spec)?;
    if spec.horizon() > config.horizon + 1e-9 {
        return Err(Error::HorizonExceeded {
            horizon: spec.horizon(),
            t: 0.0,
            end: config.horizon,
        });
    }

    let mut dataset = Dataset::default();
    let mut records = Vec::new();
    let mut solver_logs: Vec<Vec<String>> = Vec::new();

    let mut init_rng =
        ChaCha8Rng::seed_from_u64(stage_seed(config.seed, seed_offset::INIT, 0));
    let (u0, trace0) = initialize_data(plant, config, &mut init_rng)?;
    let signal0 = trace0.to_signal()?;
    let mut rho_inc = robustness_exact(&spec, &signal0, 0)?;
    dataset.push(trace0, Provenance::Initializer);
    let mut experiments = 1;
    let mut best_counterexample: Option<(InputSignal, f64)> = None;
    let mut saw_fluke = false;

    if rho_inc < 0.0 {
        best_counterexample = Some((u0, rho_inc));
    }

    let mut k: u64 = 1;
    while k <= config.budget as u64 && rho_inc > 0.0 {
        let stage = synthesize(plant, &spec, config, &dataset, k);
        let (trace, rob, violated) =
            validate_candidate(plant, &stage.u, &spec, config.horizon)?;
        experiments += 1;

        let converged = stage.status == Some(SolveStatus::Converged);
        let fluke = violated && stage.status.is_some() && !converged;
        let provenance = if fluke {
            Provenance::Fluke
        } else {
            Provenance::OcpCandidate
        };
        let trace_index = dataset.len();
        dataset.push(trace, provenance);

        records.push(IterationRecord {
            iteration: k as usize,
            robustness: rob,
            ocp_objective: stage.objective,
            ocp_status: stage.status.map(|s| s.name().to_string()),
            symbolic_model: stage.symbolic,
            fluke,
            fallback: stage.fallback,
            trace_file: format!("trace_{trace_index:03}.csv"),
            timings: stage.timings,
        });
        solver_logs.push(stage.log);

        if violated && !fluke {
            // Converged OCP counterexample, or a fallback input that
            // happened to falsify (no solver status to disqualify it).
            best_counterexample = Some((stage.u, rob));
            rho_inc = rob;
        } else if fluke {
            saw_fluke = true;
            // Not a valid counterexample: keep searching.
        } else {
            rho_inc = rob;
        }
        k += 1;
    }

    let (outcome, counterexample, robustness) = match best_counterexample {
        Some((u, r)) => (Outcome::Falsified, Some(u), Some(r)),
        None if saw_fluke => (Outcome::FlukeOnly, None, None),
        None => (Outcome::BudgetExhausted, None, None),
    };
    Ok(CampaignResult {
        outcome,
        counterexample,
        robustness,
        experiments,
        records,
        dataset,
        solver_logs,
    })
}


/// Persists a finished campaign into `config.output_dir` (no-op when unset).
pub fn persist_campaign(result: &CampaignResult, config: &RunConfig) -> Result<()> {
    let Some(dir) = &config.output_dir else {
        return Ok(());
    };
    let plant = Plant::from_name(&config.plant)?;
    let summary = RunSummary {
        schema_version: RUN_SCHEMA_VERSION,
        outcome: result.outcome.name().to_string(),
        experiments: result.experiments,
        plant: config.plant.clone(),
        spec: config.spec.clone(),
        seed: config.seed,
        counterexample: result
            .counterexample
            .as_ref()
            .map(|u| (u.breakpoints.clone(), u.channels.clone())),
    };
    super::dataset::persist_run(
        dir,
        &result.dataset,
        &result.records,
        &result.solver_logs,
        &summary,
        |t| manifest_for(plant, t),
    )
}
