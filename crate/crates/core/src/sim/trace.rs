//! Traces and their on-disk format: CSV samples plus a JSON sidecar
//! manifest. Serialization uses 17 significant digits so a save/load
//! round-trip is bit-exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::SampledSignal;

pub const TRACE_SCHEMA_VERSION: u32 = 1;

/// Time-stamped input/output samples plus the initial state: the universal
/// currency between SUT, surrogate, monitor, and dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub x0: Vec<f64>,
    pub times: Vec<f64>,
    pub inputs: Vec<(String, Vec<f64>)>,
    pub outputs: Vec<(String, Vec<f64>)>,
}

impl Trace {
    /// All channels (inputs then outputs) as one sampled signal for
    /// robustness evaluation.
    pub fn to_signal(&self) -> Result<SampledSignal> {
        let mut channels = self.inputs.clone();
        channels.extend(self.outputs.iter().cloned());
        SampledSignal::new(self.times.clone(), channels)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn period(&self) -> f64 {
        if self.times.len() > 1 {
            self.times[1] - self.times[0]
        } else {
            0.0
        }
    }
}

/// Sidecar metadata stored next to each trace CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceManifest {
    pub schema_version: u32,
    pub plant: String,
    pub x0: Vec<f64>,
    pub sampling_period: f64,
    /// Dataset provenance tag (initializer | ocp-candidate | fluke).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `<stem>.csv` and `<stem>.manifest.json`.
pub fn save_trace(trace: &Trace, manifest: &TraceManifest, stem: &Path) -> Result<()> {
    let mut csv = String::from("time");
    for (name, _) in &trace.inputs {
        csv.push_str(&format!(",u_{name}"));
    }
    for (name, _) in &trace.outputs {
        csv.push_str(&format!(",y_{name}"));
    }
    csv.push('\n');
    for i in 0..trace.times.len() {
        csv.push_str(&fmt17(trace.times[i]));
        for (_, vals) in &trace.inputs {
            csv.push(',');
            csv.push_str(&fmt17(vals[i]));
        }
        for (_, vals) in &trace.outputs {
            csv.push(',');
            csv.push_str(&fmt17(vals[i]));
        }
        csv.push('\n');
    }
    fs::write(stem.with_extension("csv"), csv)?;
    let json = serde_json::to_string_pretty(manifest)?;
    fs::write(stem.with_extension("manifest.json"), json)?;
    Ok(())
}

/// Reads a trace saved by [`save_trace`]. A missing or version-mismatched
/// manifest is a schema error, never a silent default.
pub fn load_trace(stem: &Path) -> Result<(Trace, TraceManifest)> {
    let manifest_path = stem.with_extension("manifest.json");
    let manifest_text = fs::read_to_string(&manifest_path).map_err(|e| {
        Error::Schema(format!(
            "missing manifest {}: {e}",
            manifest_path.display()
        ))
    })?;
    let manifest: TraceManifest = serde_json::from_str(&manifest_text)
        .map_err(|e| Error::Schema(format!("malformed manifest: {e}")))?;
    if manifest.schema_version != TRACE_SCHEMA_VERSION {
        return Err(Error::Schema(format!(
            "trace schema version {} unsupported (expected {})",
            manifest.schema_version, TRACE_SCHEMA_VERSION
        )));
    }
    let csv = fs::read_to_string(stem.with_extension("csv"))?;
    parse_trace_csv(&csv, manifest.x0.clone()).map(|t| (t, manifest))
}

pub fn parse_trace_csv(csv: &str, x0: Vec<f64>) -> Result<Trace> {
    let mut lines = csv.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Schema("empty trace CSV".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.first() != Some(&"time") {
        return Err(Error::Schema("trace CSV must start with a `time` column".into()));
    }
    let mut inputs: Vec<(String, Vec<f64>)> = Vec::new();
    let mut outputs: Vec<(String, Vec<f64>)> = Vec::new();
    // (is_input, index into inputs/outputs) per data column
    let mut slots: Vec<(bool, usize)> = Vec::new();
    for col in &cols[1..] {
        if let Some(name) = col.strip_prefix("u_") {
            slots.push((true, inputs.len()));
            inputs.push((name.to_string(), Vec::new()));
        } else if let Some(name) = col.strip_prefix("y_") {
            slots.push((false, outputs.len()));
            outputs.push((name.to_string(), Vec::new()));
        } else {
            return Err(Error::Schema(format!("unrecognized trace column `{col}`")));
        }
    }
    let mut times = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(Error::Schema(format!(
                "row {} has {} fields, expected {}",
                lineno + 2,
                fields.len(),
                cols.len()
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Schema(format!("invalid number `{s}`")))
        };
        times.push(parse(fields[0])?);
        for (field, (is_input, idx)) in fields[1..].iter().zip(&slots) {
            let v = parse(field)?;
            if *is_input {
                inputs[*idx].1.push(v);
            } else {
                outputs[*idx].1.push(v);
            }
        }
    }
    Ok(Trace {
        x0,
        times,
        inputs,
        outputs,
    })
}
