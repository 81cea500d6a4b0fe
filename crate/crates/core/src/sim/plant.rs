//! Built-in benchmark plants. All exhibit setpoint tracking or bounded
//! oscillation so that settling-style specifications are meaningful.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

// MagLevAnalog constants: a PD-controlled magnet analog
//   xdd = -C_DAMP*xd - G + ALPHA*v^2/(BETA + x)^2,
//   v = clamp(KP*(Ref - x) - KD*xd, 0, V_MAX).
const C_DAMP: f64 = 1.0;
const G: f64 = 9.81;
const ALPHA: f64 = 15.0;
const BETA: f64 = 1.0;
const KP: f64 = 100.0;
const KD: f64 = 20.0;
const V_MAX: f64 = 50.0;

// LinearSecondOrder: xdd = -2*zeta*omega*xd - omega^2*x + omega^2*u.
const ZETA: f64 = 0.2;
const OMEGA: f64 = 2.0;

// VanDerPolForced: xdd = MU*(1 - x^2)*xd - x + u.
const MU: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Plant {
    MagLevAnalog,
    LinearSecondOrder,
    VanDerPolForced,
}

impl Plant {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "MagLevAnalog" => Ok(Plant::MagLevAnalog),
            "LinearSecondOrder" => Ok(Plant::LinearSecondOrder),
            "VanDerPolForced" => Ok(Plant::VanDerPolForced),
            other => Err(Error::UnknownPlant(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Plant::MagLevAnalog => "MagLevAnalog",
            Plant::LinearSecondOrder => "LinearSecondOrder",
            Plant::VanDerPolForced => "VanDerPolForced",
        }
    }

    pub fn state_dim(&self) -> usize {
        2
    }

    pub fn initial_state(&self) -> Vec<f64> {
        match self {
            Plant::MagLevAnalog => vec![1.0, 0.0],
            Plant::LinearSecondOrder => vec![0.0, 0.0],
            Plant::VanDerPolForced => vec![1.0, 0.0],
        }
    }

    /// Input channel names with `[u_min, u_max]` bounds.
    pub fn input_bounds(&self) -> Vec<(String, f64, f64)> {
        match self {
            Plant::MagLevAnalog => vec![("Ref".to_string(), 1.0, 3.0)],
            Plant::LinearSecondOrder | Plant::VanDerPolForced => {
                vec![("u".to_string(), -1.0, 1.0)]
            }
        }
    }

    pub fn output_names(&self) -> Vec<String> {
        vec!["Pos".to_string()]
    }

    pub fn derivative(&self, x: &[f64], u: &[f64], _t: f64) -> Vec<f64> {
        match self {
            Plant::MagLevAnalog => {
                let (pos, vel) = (x[0], x[1]);
                let v = (KP * (u[0] - pos) - KD * vel).clamp(0.0, V_MAX);
                let acc = -C_DAMP * vel - G + ALPHA * v * v / ((BETA + pos) * (BETA + pos));
                vec![vel, acc]
            }
            Plant::LinearSecondOrder => {
                let acc = -2.0 * ZETA * OMEGA * x[1] - OMEGA * OMEGA * x[0]
                    + OMEGA * OMEGA * u[0];
                vec![x[1], acc]
            }
            Plant::VanDerPolForced => {
                let acc = MU * (1.0 - x[0] * x[0]) * x[1] - x[0] + u[0];
                vec![x[1], acc]
            }
        }
    }

    pub fn output(&self, x: &[f64]) -> Vec<f64> {
        vec![x[0]]
    }
}
