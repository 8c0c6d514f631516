use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrators::SplitSystem;
use crate::math::{cos, sin};

/// Ideal pendulum with state `(θ, ω)`, unit bob mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PendulumParams {
    pub g: f64,
    pub length: f64,
    /// Std of Gaussian observation noise on saved frames.
    pub noise: f64,
}

impl Default for PendulumParams {
    fn default() -> Self {
        Self { g: 1.0, length: 1.0, noise: 0.0 }
    }
}

impl PendulumParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.g > 0.0 && self.length > 0.0 && self.noise >= 0.0) {
            return Err(Error::InvalidParameter("pendulum needs g, L > 0 and noise >= 0".into()));
        }
        Ok(())
    }

    /// `(θ̇, ω̇) = (ω, -(g/L) sin θ)`.
    pub fn rhs(&self, state: &[f64], out: &mut [f64]) {
        out[0] = state[1];
        out[1] = -(self.g / self.length) * sin(state[0]);
    }

    /// `E = ½L²ω² - gL cos θ`.
    pub fn energy(&self, state: &[f64]) -> f64 {
        let l = self.length;
        0.5 * l * l * state[1] * state[1] - self.g * l * cos(state[0])
    }
}

impl SplitSystem for PendulumParams {
    fn force(&self, q: &[f64], out: &mut [f64]) {
        out[0] = -(self.g / self.length) * sin(q[0]);
    }

    fn velocity(&self, p: &[f64], out: &mut [f64]) {
        out[0] = p[0];
    }
}
