use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slow–fast toy with quadratic potentials and state `(q_s, q_f, p_s, p_f)`:
///
/// `H = p_s²/2M_s + p_f²/2M_f + V(q_s, q_f) + W(q_f)/ε`
///
/// with `V = ½k_s q_s² + ½c (q_s - q_f)²` and `W = ½k_f (q_f - q*)²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TwoScaleParams {
    pub eps: f64,
    pub mass_slow: f64,
    pub mass_fast: f64,
    pub k_slow: f64,
    pub coupling: f64,
    pub k_fast: f64,
    pub q_star: f64,
}

impl Default for TwoScaleParams {
    fn default() -> Self {
        Self { eps: 1e-2, mass_slow: 1.0, mass_fast: 1.0, k_slow: 1.0, coupling: 0.0, k_fast: 1.0, q_star: 0.0 }
    }
}

impl TwoScaleParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::InvalidParameter("eps must lie in (0, 1)".into()));
        }
        if !(self.mass_slow > 0.0 && self.mass_fast > 0.0 && self.k_fast >= 0.0) {
            return Err(Error::InvalidParameter("masses must be positive and K_f >= 0".into()));
        }
        Ok(())
    }

    pub fn rhs(&self, z: &[f64], out: &mut [f64]) {
        let (qs, qf, ps, pf) = (z[0], z[1], z[2], z[3]);
        let dv_s = self.k_slow * qs + self.coupling * (qs - qf);
        let dv_f = -self.coupling * (qs - qf);
        out[0] = ps / self.mass_slow;
        out[1] = pf / self.mass_fast;
        out[2] = -dv_s;
        out[3] = -dv_f - self.k_fast * (qf - self.q_star) / self.eps;
    }

    pub fn energy(&self, z: &[f64]) -> f64 {
        let (qs, qf, ps, pf) = (z[0], z[1], z[2], z[3]);
        let d = qs - qf;
        let rf = qf - self.q_star;
        0.5 * ps * ps / self.mass_slow
            + 0.5 * pf * pf / self.mass_fast
            + 0.5 * self.k_slow * qs * qs
            + 0.5 * self.coupling * d * d
            + 0.5 * self.k_fast * rf * rf / self.eps
    }
}


/// Angular frequency of a roughly periodic signal from its upward zero
/// crossings (linearly interpolated). `None` with fewer than two crossings.
pub fn zero_crossing_frequency(signal: &[f64], dt: f64) -> Option<f64> {
    let mut first = None;
    let mut last = 0.0;
    let mut count = 0usize;
    for k in 1..signal.len() {
        let (a, b) = (signal[k - 1], signal[k]);
        if a < 0.0 && b >= 0.0 {
            let t = (k - 1) as f64 * dt + dt * (-a) / (b - a);
            first.get_or_insert(t);
            last = t;
            count += 1;
        }
    }
    let t0 = first?;
    if count < 2 {
        return None;
    }
    Some(2.0 * crate::math::PI * (count - 1) as f64 / (last - t0))
}
