use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::fft::solve_streamfunction;
use crate::math::{cos, exp, sin, PI};
use crate::state::FieldState;

/// Taylor–Green vortex evolved in vorticity form on `[0, L)²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaylorGreenParams {
    pub n: usize,
    pub length: f64,
    pub u0: f64,
    pub re: f64,
    pub k: f64,
}

impl Default for TaylorGreenParams {
    fn default() -> Self {
        Self { n: 64, length: 2.0 * PI, u0: 1.0, re: 100.0, k: 1.0 }
    }
}

impl TaylorGreenParams {
    pub fn validate(&self) -> Result<()> {
        if !self.n.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(self.n));
        }
        if !(self.re > 0.0 && self.length > 0.0 && self.k > 0.0) {
            return Err(Error::InvalidParameter("Taylor-Green needs Re, L, k > 0".into()));
        }
        Ok(())
    }

    /// `ν = U₀ L / Re`.
    pub fn nu(&self) -> f64 {
        self.u0 * self.length / self.re
    }

    pub fn h(&self) -> f64 {
        self.length / self.n as f64
    }

    fn coords(&self, c: usize) -> (f64, f64) {
        let h = self.h();
        ((c % self.n) as f64 * h, (c / self.n) as f64 * h)
    }

    /// `ω₀ = ∂_x v - ∂_y u` of the initial velocity field, by periodic
    /// centered differences.
    pub fn initial_vorticity(&self) -> Vec<f64> {
        let n = self.n;
        let (u0, k) = (self.u0, self.k);
        let u: Vec<f64> = (0..n * n).map(|c| { let (x, y) = self.coords(c); u0 * sin(k * x) * cos(k * y) }).collect();
        let v: Vec<f64> = (0..n * n).map(|c| { let (x, y) = self.coords(c); -u0 * cos(k * x) * sin(k * y) }).collect();
        let h2 = 2.0 * self.h();
        let mut w = vec![0.0; n * n];
        for j in 0..n {
            for i in 0..n {
                let dvdx = (v[j * n + (i + 1) % n] - v[j * n + (i + n - 1) % n]) / h2;
                let dudy = (u[((j + 1) % n) * n + i] - u[((j + n - 1) % n) * n + i]) / h2;
                w[j * n + i] = dvdx - dudy;
            }
        }
        w
    }

    /// Closed-form `2U₀k sin(kx) sin(ky) e^{-2νk²t}`.
    pub fn analytic_vorticity(&self, t: f64) -> Vec<f64> {
        let (u0, k) = (self.u0, self.k);
        let decay = exp(-2.0 * self.nu() * k * k * t);
        (0..self.n * self.n)
            .map(|c| {
                let (x, y) = self.coords(c);
                2.0 * u0 * k * sin(k * x) * sin(k * y) * decay
            })
            .collect()
    }

    /// `p = (U₀²/4)(cos 2kx + cos 2ky) e^{-4νk²t}`.
    pub fn analytic_pressure(&self, t: f64) -> Vec<f64> {
        let (u0, k) = (self.u0, self.k);
        let decay = exp(-4.0 * self.nu() * k * k * t);
        (0..self.n * self.n)
            .map(|c| {
                let (x, y) = self.coords(c);
                0.25 * u0 * u0 * (cos(2.0 * k * x) + cos(2.0 * k * y)) * decay
            })
            .collect()
    }

    /// `∂_t ω = -(u ∂_x ω + v ∂_y ω) + ν Δω`.
    pub fn rhs(&self, omega: &[f64], out: &mut [f64]) -> Result<()> {
        self.validate()?;
        let n = self.n;
        check_len("vorticity", n * n, omega.len())?;
        let s = solve_streamfunction(omega, n, n, self.length, self.length)?;
        let h = self.h();
        let nu = self.nu();
        for j in 0..n {
            for i in 0..n {
                let c = j * n + i;
                let e = omega[j * n + (i + 1) % n];
                let w = omega[j * n + (i + n - 1) % n];
                let nn = omega[((j + 1) % n) * n + i];
                let sn = omega[((j + n - 1) % n) * n + i];
                let adv = s.u[c] * (e - w) / (2.0 * h) + s.v[c] * (nn - sn) / (2.0 * h);
                let lap = (e + w + nn + sn - 4.0 * omega[c]) / (h * h);
                out[c] = -adv + nu * lap;
            }
        }
        Ok(())
    }

    /// Observed frame `(u, v, p)` at time `t`.
    pub fn observe(&self, omega: &[f64], t: f64) -> Result<FieldState> {
        let n = self.n;
        let s = solve_streamfunction(omega, n, n, self.length, self.length)?;
        let mut data = s.u;
        data.extend_from_slice(&s.v);
        data.extend_from_slice(&self.analytic_pressure(t));
        FieldState::from_data(3, n, n, self.h(), self.h(), data)
    }

    /// `½ Σ (u² + v²) · dA` of an observed frame.
    pub fn kinetic_energy(&self, frame: &FieldState) -> f64 {
        let np = frame.plane();
        0.5 * frame.data[..2 * np].iter().map(|x| x * x).sum::<f64>() * frame.cell_area()
    }
}
