//! Trace dataset with provenance, plus run persistence (CSV traces, JSONL
//! iteration records, summary).

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::sim::{load_trace, save_trace, Trace, TraceManifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Initializer,
    OcpCandidate,
    Fluke,
}

impl Provenance {
    pub fn name(&self) -> &'static str {
        match self {
            Provenance::Initializer => "initializer",
            Provenance::OcpCandidate => "ocp-candidate",
            Provenance::Fluke => "fluke",
        }
    }
}

/// The growing campaign dataset: ordered traces with provenance tags.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub entries: Vec<(Trace, Provenance)>,
}

impl Dataset {
    pub fn traces(&self) -> Vec<Trace> {
        self.entries.iter().map(|(t, _)| t.clone()).collect()
    }

    pub fn push(&mut self, trace: Trace, tag: Provenance) {
        self.entries.push((trace, tag));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// One campaign-loop iteration, serialized as a JSONL line. Wall-clock
/// timings live in their own field so logs can be compared modulo timing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Exact SUT robustness of this iteration's experiment.
    pub robustness: f64,
    /// Smooth negated-spec objective at the solver's final iterate (absent
    /// when the iteration fell back before solving).
    pub ocp_objective: Option<f64>,
    /// Solver status name; `None` on a fallback iteration.
    pub ocp_status: Option<String>,
    /// Selected symbolic expressions, one per driven row.
    pub symbolic_model: Vec<String>,
    pub fluke: bool,
    pub fallback: bool,
    pub trace_file: String,
    /// Stage timings in seconds, keyed by stage name.
    pub timings: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub outcome: String,
    pub experiments: usize,
    pub plant: String,
    pub spec: String,
    pub seed: u64,
    /// Counterexample input as (breakpoints, channels), when falsified.
    pub counterexample: Option<(Vec<f64>, Vec<(String, Vec<f64>)>)>,
}

pub const RUN_SCHEMA_VERSION: u32 = 1;

pub fn trace_stem(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("trace_{index:03}"))
}

/// Writes every dataset trace (CSV + manifest), the iteration records as
/// JSONL, the solver logs, and the summary into `dir`.
pub fn persist_run(
    dir: &Path,
    dataset: &Dataset,
    records: &[IterationRecord],
    solver_logs: &[Vec<String>],
    summary: &RunSummary,
    manifest_for: impl Fn(&Trace) -> TraceManifest,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (i, (trace, tag)) in dataset.entries.iter().enumerate() {
        let stem = trace_stem(dir, i);
        let mut manifest = manifest_for(trace);
        manifest.provenance = Some(tag.name().to_string());
        save_trace(trace, &manifest, &stem)?;
    }
    let mut jsonl = String::new();
    for r in records {
        jsonl.push_str(&serde_json::to_string(r)?);
        jsonl.push('\n');
    }
    std::fs::write(dir.join("iterations.jsonl"), jsonl)?;
    let mut log = String::new();
    for (i, lines) in solver_logs.iter().enumerate() {
        for line in lines {
            log.push_str(&format!("iteration {}: {line}\n", i + 1));
        }
    }
    std::fs::write(dir.join("solver.log"), log)?;
    std::fs::write(
        dir.join("summary.json"),
        serde_json::to_string_pretty(summary)?,
    )?;
    Ok(())
}

/// Reads back every `trace_*.csv` in index order.
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let mut indices = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let name = entry?.file_name();
        let name = name.to_string_lossy().into_owned();
        if let Some(stem) = name.strip_suffix(".csv") {
            if let Some(num) = stem.strip_prefix("trace_") {
                if let Ok(i) = num.parse::<usize>() {
                    indices.push(i);
                }
            }
        }
    }
    indices.sort_unstable();
    let mut out = Dataset::default();
    for i in indices {
        let (trace, manifest) = load_trace(&trace_stem(dir, i))?;
        let tag = match manifest.provenance.as_deref() {
            Some("initializer") => Provenance::Initializer,
            Some("ocp-candidate") => Provenance::OcpCandidate,
            Some("fluke") => Provenance::Fluke,
            other => {
                return Err(Error::Schema(format!(
                    "trace {i} has missing or unknown provenance {other:?}"
                )))
            }
        };
        out.push(trace, tag);
    }
    Ok(out)
}
