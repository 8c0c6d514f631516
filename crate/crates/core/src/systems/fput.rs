use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrators::SplitSystem;

/// Periodic Fermi–Pasta–Ulam–Tsingou chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FputParams {
    pub n: usize,
    pub mass: f64,
    pub k: f64,
    pub alpha: f64,
    pub beta: f64,
    pub sigma_q: f64,
    pub sigma_p: f64,
    pub noise: f64,
}

impl Default for FputParams {
    fn default() -> Self {
        Self { n: 8, mass: 1.0, k: 1.0, alpha: 0.0, beta: 0.7, sigma_q: 0.1, sigma_p: 0.1, noise: 0.0 }
    }
}

impl FputParams {
    pub fn validate(&self) -> Result<()> {
        if self.n < 3 || !(self.mass > 0.0 && self.k > 0.0 && self.beta >= 0.0) {
            return Err(Error::InvalidParameter("FPUT needs N >= 3, m, k > 0, beta >= 0".into()));
        }
        if !(self.sigma_q >= 0.0 && self.sigma_p >= 0.0 && self.noise >= 0.0) {
            return Err(Error::InvalidParameter("FPUT standard deviations must be >= 0".into()));
        }
        Ok(())
    }

    fn stretches(&self, q: &[f64]) -> Vec<f64> {
        let n = q.len();
        (0..n).map(|i| q[(i + 1) % n] - q[i]).collect()
    }

    fn bond_force(&self, r: f64) -> f64 {
        self.k * r + self.alpha * r * r + self.beta * r * r * r
    }

    /// Particle forces `f_i - f_{i-1} = -∂V/∂q_i` (restoring).
    pub fn forces(&self, q: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; q.len()];
        SplitSystem::force(self, q, &mut out);
        out
    }

    pub fn energy(&self, q: &[f64], p: &[f64]) -> f64 {
        let kin: f64 = p.iter().map(|x| x * x / (2.0 * self.mass)).sum();
        let pot: f64 = self
            .stretches(q)
            .iter()
            .map(|&r| 0.5 * self.k * r * r + self.alpha / 3.0 * r * r * r + 0.25 * self.beta * r * r * r * r)
            .sum();
        kin + pot
    }
}

impl SplitSystem for FputParams {
    fn force(&self, q: &[f64], out: &mut [f64]) {
        let n = q.len();
        let f: Vec<f64> = self.stretches(q).into_iter().map(|r| self.bond_force(r)).collect();
        for i in 0..n {
            out[i] = f[i] - f[(i + n - 1) % n];
        }
    }

    fn velocity(&self, p: &[f64], out: &mut [f64]) {
        for (o, x) in out.iter_mut().zip(p) {
            *o = x / self.mass;
        }
    }
}
