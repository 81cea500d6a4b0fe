//! Sampled multi-channel signals and the interval-to-index mapping used by
//! the robustness evaluators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A signal sampled on a strictly increasing time grid, with one named
/// real-valued sequence per channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledSignal {
    times: Vec<f64>,
    channels: Vec<(String, Vec<f64>)>,
}

impl SampledSignal {
    pub fn new(times: Vec<f64>, channels: Vec<(String, Vec<f64>)>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidSignal("signal has no samples".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidSignal(
                "time stamps must be strictly increasing".into(),
            ));
        }
        for (name, values) in &channels {
            if values.len() != times.len() {
                return Err(Error::InvalidSignal(format!(
                    "channel `{name}` has {} values for {} time stamps",
                    values.len(),
                    times.len()
                )));
            }
        }
        Ok(Self { times, channels })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn channel_names(&self) -> impl Iterator<Item = &str> {
        self.channels.iter().map(|(n, _)| n.as_str())
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn channel_index(&self, name: &str) -> Result<usize> {
        self.channels
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| Error::UnknownChannel(name.to_string()))
    }

    pub fn channel(&self, name: &str) -> Result<&[f64]> {
        self.channel_index(name).map(|i| &self.channels[i].1[..])
    }

    pub fn channel_by_index(&self, idx: usize) -> &[f64] {
        &self.channels[idx].1
    }

    pub fn value(&self, channel: usize, t_index: usize) -> f64 {
        self.channels[channel].1[t_index]
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().unwrap()
    }
}

/// Half the local sampling step around index `j`, used as the tolerance for
/// binding continuous interval bounds to discrete samples.
fn half_step(times: &[f64], j: usize) -> f64 {
    let left = if j > 0 {
        times[j] - times[j - 1]
    } else {
        f64::INFINITY
    };
    let right = if j + 1 < times.len() {
        times[j + 1] - times[j]
    } else {
        f64::INFINITY
    };
    let step = left.min(right);
    if step.is_finite() {
        0.5 * step
    } else {
        0.0
    }
}

/// Indices `j` with `t_anchor + a - eps_j <= times[j] <= t_anchor + b + eps_j`,
/// where `eps_j` is half the local sampling step at `j`.
///
/// Errors when no sample falls in the interval, which signals a mismatch
/// between the formula horizon and the sampling of the trace.
pub fn interval_indices(
    times: &[f64],
    t_anchor: f64,
    a: f64,
    b: f64,
) -> Result<std::ops::Range<usize>> {
    // Absorb floating-point noise in t_anchor + a at the comparison boundary.
    let slack = 1e-9 * (1.0 + t_anchor.abs() + b.abs());
    let lo = t_anchor + a - slack;
    let hi = t_anchor + b + slack;
    // Coarse bracket without tolerance, then widen with the local tolerance.
    let mut start = times.partition_point(|&t| t < lo);
    while start > 0 && times[start - 1] >= lo - half_step(times, start - 1) {
        start -= 1;
    }
    while start < times.len() && times[start] < lo - half_step(times, start) {
        start += 1;
    }
    let mut end = times.partition_point(|&t| t <= hi);
    while end < times.len() && times[end] <= hi + half_step(times, end) {
        end += 1;
    }
    while end > start && times[end - 1] > hi + half_step(times, end - 1) {
        end -= 1;
    }
    if start >= end {
        Err(Error::EmptyInterval { lo, hi })
    } else {
        Ok(start..end)
    }
}
