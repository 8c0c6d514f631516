use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{abs, exp, sqrt};
use crate::state::FieldState;

/// Inviscid, unforced shallow water on a periodic square.
///
/// The prognostic state is `(h, m_x, m_y)` in flux form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweParams {
    pub length: f64,
    pub g: f64,
    pub depth: f64,
    pub n: usize,
    pub cfl: f64,
}

impl Default for SweParams {
    fn default() -> Self {
        Self { length: 1e6, g: 9.81, depth: 100.0, n: 64, cfl: 0.1 }
    }
}

/// Gaussian bump in the free surface, measured in grid cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PulseParams {
    pub amplitude: f64,
    pub sigma_cells: f64,
    /// `(i_c, j_c)`; the domain midpoint when absent.
    pub center: Option<(f64, f64)>,
    /// Draw a fresh center per trajectory.
    pub randomize_center: bool,
}

impl Default for PulseParams {
    fn default() -> Self {
        Self { amplitude: 0.1, sigma_cells: 2.0, center: None, randomize_center: false }
    }
}

/// Smoothed random free-surface perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RandomInitParams {
    /// Std of each raw white-noise field before averaging.
    pub amplitude: f64,
    pub jump_threshold: f64,
}

impl Default for RandomInitParams {
    fn default() -> Self {
        Self { amplitude: 1.0, jump_threshold: 0.01 }
    }
}

pub const SMOOTHING_CAP: usize = 10_000;

impl SweParams {
    pub fn validate(&self) -> Result<()> {
        if self.n < 3 || !(self.length > 0.0 && self.g > 0.0 && self.depth > 0.0 && self.cfl > 0.0) {
            return Err(Error::InvalidParameter("SWE needs N >= 3 and positive L, g, H, cfl".into()));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    /// `cfl · min(dx, dy) / √(gH)`.
    pub fn dt(&self) -> f64 {
        self.cfl * self.dx() / sqrt(self.g * self.depth)
    }

    pub fn depth_floor(&self) -> f64 {
        1e-6 * self.depth
    }

    pub fn zeros(&self) -> FieldState {
        FieldState::zeros(3, self.n, self.n, self.dx(), self.dx())
    }

    /// Time derivative of `(h, m_x, m_y)` with periodic centered differences.
    pub fn rhs(&self, s: &FieldState, out: &mut FieldState) -> Result<()> {
        let n = self.n;
        let np = n * n;
        let h = s.channel(0);
        let floor = self.depth_floor();
        let min = h.iter().copied().fold(f64::INFINITY, f64::min);
        if !(min >= floor) {
            return Err(Error::DepthBelowFloor { min_depth: min, floor });
        }
        let (mx, my) = (s.channel(1), s.channel(2));
        let half_g = 0.5 * self.g;
        let mut fxx = vec![0.0; np];
        let mut fxy = vec![0.0; np];
        let mut fyy = vec![0.0; np];
        for c in 0..np {
            fxx[c] = mx[c] * mx[c] / h[c] + half_g * h[c] * h[c];
            fxy[c] = mx[c] * my[c] / h[c];
            fyy[c] = my[c] * my[c] / h[c] + half_g * h[c] * h[c];
        }
        let ddx = |f: &[f64], j: usize, i: usize| {
            (f[j * n + (i + 1) % n] - f[j * n + (i + n - 1) % n]) / (2.0 * s.dx)
        };
        let ddy = |f: &[f64], j: usize, i: usize| {
            (f[((j + 1) % n) * n + i] - f[((j + n - 1) % n) * n + i]) / (2.0 * s.dy)
        };
        for j in 0..n {
            for i in 0..n {
                let c = j * n + i;
                out.data[c] = -(ddx(mx, j, i) + ddy(my, j, i));
                out.data[np + c] = -(ddx(&fxx, j, i) + ddy(&fxy, j, i));
                out.data[2 * np + c] = -(ddx(&fxy, j, i) + ddy(&fyy, j, i));
            }
        }
        Ok(())
    }

    pub fn total_mass(&self, s: &FieldState) -> f64 {
        s.channel(0).iter().sum::<f64>() * s.cell_area()
    }

    /// `Σ (½|m|²/h + ½gh²) · dA`.
    pub fn energy(&self, s: &FieldState) -> f64 {
        let (h, mx, my) = (s.channel(0), s.channel(1), s.channel(2));
        let floor = self.depth_floor();
        (0..h.len())
            .map(|c| {
                let hc = h[c].max(floor);
                0.5 * (mx[c] * mx[c] + my[c] * my[c]) / hc + 0.5 * self.g * h[c] * h[c]
            })
            .sum::<f64>()
            * s.cell_area()
    }

    /// Observed channels `(h, u, v)` with `u = m_x / max(h, floor)`.
    pub fn observe(&self, s: &FieldState) -> FieldState {
        let mut o = s.clone();
        let floor = self.depth_floor();
        let np = s.plane();
        for c in 0..np {
            let h = s.data[c].max(floor);
            o.data[np + c] = s.data[np + c] / h;
            o.data[2 * np + c] = s.data[2 * np + c] / h;
        }
        o
    }

    /// Energy of an observed `(h, u, v)` frame.
    pub fn observed_energy(&self, o: &FieldState) -> f64 {
        let np = o.plane();
        let (h, u, v) = (&o.data[..np], &o.data[np..2 * np], &o.data[2 * np..]);
        (0..np)
            .map(|c| 0.5 * h[c] * (u[c] * u[c] + v[c] * v[c]) + 0.5 * self.g * h[c] * h[c])
            .sum::<f64>()
            * o.cell_area()
    }

    pub fn pulse_anomaly(&self, amplitude: f64, sigma: f64, center: (f64, f64)) -> Vec<f64> {
        let n = self.n;
        let mut eta = vec![0.0; n * n];
        for j in 0..n {
            for i in 0..n {
                let (di, dj) = (i as f64 - center.0, j as f64 - center.1);
                eta[j * n + i] = amplitude * exp(-(di * di + dj * dj) / (2.0 * sigma * sigma));
            }
        }
        eta
    }

    pub fn midpoint(&self) -> (f64, f64) {
        let c = (self.n / 2) as f64;
        (c, c)
    }

    /// `h = H + η₀` for a Gaussian pulse, at rest.
    pub fn init_pulse(&self, amplitude: f64, sigma: f64, center: (f64, f64)) -> FieldState {
        let mut s = self.zeros();
        let eta = self.pulse_anomaly(amplitude, sigma, center);
        for (h, e) in s.channel_mut(0).iter_mut().zip(&eta) {
            *h = self.depth + e;
        }
        s
    }

    /// Average of two white-noise fields, smoothed until the largest
    /// nearest-neighbour jump is below `jump_threshold`.
    pub fn init_random<R: Rng + ?Sized>(&self, rng: &mut R, init: &RandomInitParams) -> Result<FieldState> {
        let np = self.n * self.n;
        let mut eta: Vec<f64> = (0..np)
            .map(|_| {
                let a: f64 = StandardNormal.sample(rng);
                let b: f64 = StandardNormal.sample(rng);
                0.5 * init.amplitude * (a + b)
            })
            .collect();
        smooth_until(&mut eta, self.n, init.jump_threshold)?;
        let mut s = self.zeros();
        for (h, e) in s.channel_mut(0).iter_mut().zip(&eta) {
            *h = self.depth + e;
        }
        Ok(s)
    }
}

/// Largest periodic nearest-neighbour difference along either axis.
pub fn max_jump(f: &[f64], n: usize) -> f64 {
    let mut m: f64 = 0.0;
    for j in 0..n {
        for i in 0..n {
            let v = f[j * n + i];
            m = m.max(abs(f[j * n + (i + 1) % n] - v)).max(abs(f[((j + 1) % n) * n + i] - v));
        }
    }
    m
}

/// One pass of the periodic `[1,2,1] ⊗ [1,2,1] / 16` kernel.
pub fn gaussian_smooth(f: &[f64], n: usize) -> Vec<f64> {
    let w = [1.0, 2.0, 1.0];
    let mut out = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            let mut acc = 0.0;
            for (a, wy) in w.iter().enumerate() {
                let jj = (j + n + a - 1) % n;
                for (b, wx) in w.iter().enumerate() {
                    let ii = (i + n + b - 1) % n;
                    acc += wy * wx * f[jj * n + ii];
                }
            }
            out[j * n + i] = acc / 16.0;
        }
    }
    out
}

pub fn smooth_until(f: &mut Vec<f64>, n: usize, threshold: f64) -> Result<usize> {
    for it in 0..SMOOTHING_CAP {
        if max_jump(f, n) < threshold {
            return Ok(it);
        }
        *f = gaussian_smooth(f, n);
    }
    if max_jump(f, n) < threshold {
        Ok(SMOOTHING_CAP)
    } else {
        Err(Error::SmoothingDidNotConverge { iterations: SMOOTHING_CAP })
    }
}
