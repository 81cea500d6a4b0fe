//! Piecewise-constant input signals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A multi-channel piecewise-constant signal: at time `t` each channel takes
/// the value of its last breakpoint at or before `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSignal {
    /// Shared breakpoint instants, strictly increasing, starting at 0.
    pub breakpoints: Vec<f64>,
    /// Per-channel `(name, values)`, each aligned with `breakpoints`.
    pub channels: Vec<(String, Vec<f64>)>,
}

impl InputSignal {
    pub fn new(breakpoints: Vec<f64>, channels: Vec<(String, Vec<f64>)>) -> Result<Self> {
        if breakpoints.is_empty() {
            return Err(Error::InvalidSignal("input signal has no breakpoints".into()));
        }
        if breakpoints[0] != 0.0 {
            return Err(Error::InvalidSignal(
                "input breakpoints must start at 0".into(),
            ));
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidSignal(
                "input breakpoints must be strictly increasing".into(),
            ));
        }
        for (name, values) in &channels {
            if values.len() != breakpoints.len() {
                return Err(Error::InvalidSignal(format!(
                    "input channel `{name}` has {} values for {} breakpoints",
                    values.len(),
                    breakpoints.len()
                )));
            }
        }
        Ok(Self {
            breakpoints,
            channels,
        })
    }

    /// Constant signal over all channels.
    pub fn constant(names: &[&str], values: &[f64]) -> Self {
        Self {
            breakpoints: vec![0.0],
            channels: names
                .iter()
                .zip(values)
                .map(|(n, v)| (n.to_string(), vec![*v]))
                .collect(),
        }
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    /// Channel values at time `t` (zero-order hold; clamped before the first
    /// breakpoint).
    pub fn value_at(&self, t: f64) -> Vec<f64> {
        let idx = match self
            .breakpoints
            .partition_point(|&b| b <= t + 1e-12 * (1.0 + t.abs()))
        {
            0 => 0,
            p => p - 1,
        };
        self.channels.iter().map(|(_, v)| v[idx]).collect()
    }

    /// The same signal re-expressed on a uniform grid of the given period.
    /// The value at every instant is unchanged.
    pub fn resample(&self, period: f64, horizon: f64) -> Result<InputSignal> {
        if !(period > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "resample period must be positive, got {period}"
            )));
        }
        let steps = (horizon / period).round() as usize;
        let breakpoints: Vec<f64> = (0..=steps).map(|i| i as f64 * period).collect();
        let mut channels: Vec<(String, Vec<f64>)> = self
            .channels
            .iter()
            .map(|(n, _)| (n.clone(), Vec::with_capacity(breakpoints.len())))
            .collect();
        for &t in &breakpoints {
            for (c, v) in self.value_at(t).into_iter().enumerate() {
                channels[c].1.push(v);
            }
        }
        InputSignal::new(breakpoints, channels)
    }

    /// Checks every value against per-channel bounds.
    pub fn check_bounds(&self, bounds: &[(String, f64, f64)]) -> Result<()> {
        for (name, lo, hi) in bounds {
            let (_, values) = self
                .channels
                .iter()
                .find(|(n, _)| n == name)
                .ok_or_else(|| Error::UnknownChannel(name.clone()))?;
            for &v in values {
                if v < *lo - 1e-12 || v > *hi + 1e-12 {
                    return Err(Error::BoundViolation {
                        channel: name.clone(),
                        value: v,
                        lo: *lo,
                        hi: *hi,
                    });
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig() -> InputSignal {
        InputSignal::new(
            vec![0.0, 5.0, 10.0],
            vec![("Ref".into(), vec![1.0, 3.0, 1.0])],
        )
        .unwrap()
    }

    #[test]
    fn zero_order_hold() {
        let s = sig();
        assert_eq!(s.value_at(0.0), vec![1.0]);
        assert_eq!(s.value_at(4.99), vec![1.0]);
        assert_eq!(s.value_at(5.0), vec![3.0]);
        assert_eq!(s.value_at(12.0), vec![1.0]);
    }

    #[test]
    fn resample_preserves_values() {
        let s = sig();
        let fine = s.resample(0.01, 15.0).unwrap();
        assert_eq!(fine.breakpoints.len(), 1501);
        for &t in &[0.0, 2.5, 5.0, 7.32, 14.99] {
            assert_eq!(fine.value_at(t), s.value_at(t), "t = {t}");
        }
    }

    #[test]
    fn resample_to_own_period_is_identity_on_values() {
        let s = InputSignal::new(
            vec![0.0, 0.2, 0.4],
            vec![("u".into(), vec![1.0, -1.0, 1.0])],
        )
        .unwrap();
        let r = s.resample(0.2, 0.4).unwrap();
        assert_eq!(r, s);
    }

    #[test]
    fn coarse_to_fine_repeats_samples() {
        // 0.2 s segments on a 0.01 s grid: 20 repeats per segment.
        let s = InputSignal::new(vec![0.0, 0.2], vec![("u".into(), vec![2.0, 4.0])]).unwrap();
        let fine = s.resample(0.01, 0.4).unwrap();
        let vals = &fine.channels[0].1;
        assert_eq!(vals.iter().filter(|&&v| v == 2.0).count(), 20);
    }

    #[test]
    fn bounds_are_enforced() {
        let s = sig();
        assert!(s.check_bounds(&[("Ref".into(), 1.0, 3.0)]).is_ok());
        assert!(s.check_bounds(&[("Ref".into(), 1.5, 3.0)]).is_err());
    }
}
