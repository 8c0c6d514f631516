use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{cos, floor, sin, PI};

/// Planar double pendulum; states are `(θ₁, ω₁, θ₂, ω₂)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DoublePendulumParams {
    pub m1: f64,
    pub m2: f64,
    pub l1: f64,
    pub l2: f64,
    pub g: f64,
    pub noise: f64,
}

impl Default for DoublePendulumParams {
    fn default() -> Self {
        Self { m1: 1.0, m2: 1.0, l1: 1.0, l2: 1.0, g: 1.0, noise: 0.0 }
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(x: f64) -> f64 {
    let y = x - 2.0 * PI * floor((x + PI) / (2.0 * PI));
    if y <= -PI {
        y + 2.0 * PI
    } else {
        y
    }
}

impl DoublePendulumParams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.m1, self.m2, self.l1, self.l2, self.g];
        if all.iter().any(|&v| !(v > 0.0)) || !(self.noise >= 0.0) {
            return Err(Error::InvalidParameter("double pendulum parameters must be positive".into()));
        }
        Ok(())
    }

    /// Angular accelerations `(α₁, α₂)` from angles and angular velocities.
    pub fn accelerations(&self, th: [f64; 2], om: [f64; 2]) -> Result<[f64; 2]> {
        let Self { m1, m2, l1, l2, g, .. } = *self;
        let d = th[0] - th[1];
        let den = 2.0 * m1 + m2 - m2 * cos(2.0 * d);
        if den.abs() < 1e-12 {
            return Err(Error::SingularDenominator { value: den });
        }
        let a1 = (-g * (2.0 * m1 + m2) * sin(th[0])
            - m2 * g * sin(th[0] - 2.0 * th[1])
            - 2.0 * sin(d) * m2 * (om[1] * om[1] * l2 + om[0] * om[0] * l1 * cos(d)))
            / (l1 * den);
        let a2 = 2.0
            * sin(d)
            * (om[0] * om[0] * l1 * (m1 + m2) + g * (m1 + m2) * cos(th[0]) + om[1] * om[1] * l2 * m2 * cos(d))
            / (l2 * den);
        Ok([a1, a2])
    }

    /// `(ω₁, α₁, ω₂, α₂)` for a state `(θ₁, ω₁, θ₂, ω₂)`.
    pub fn rhs(&self, s: &[f64], out: &mut [f64]) -> Result<()> {
        let a = self.accelerations([s[0], s[2]], [s[1], s[3]])?;
        out[0] = s[1];
        out[1] = a[0];
        out[2] = s[3];
        out[3] = a[1];
        Ok(())
    }

    /// Total energy for angles `th` and angular velocities `om`.
    pub fn energy(&self, th: [f64; 2], om: [f64; 2]) -> f64 {
        let Self { m1, m2, l1, l2, g, .. } = *self;
        let t = 0.5 * (m1 + m2) * l1 * l1 * om[0] * om[0]
            + 0.5 * m2 * l2 * l2 * om[1] * om[1]
            + m2 * l1 * l2 * om[0] * om[1] * cos(th[0] - th[1]);
        let v = -(m1 + m2) * g * l1 * cos(th[0]) - m2 * g * l2 * cos(th[1]);
        t + v
    }

    /// One semi-implicit Euler step on `q = (θ₁, θ₂)`, `v = (ω₁, ω₂)`,
    /// followed by angle wrapping.
    pub fn step(&self, q: &mut [f64], v: &mut [f64], dt: f64) -> Result<()> {
        crate::integrators::semi_implicit_euler_step(
            |q: &[f64], v: &[f64], out: &mut [f64]| {
                let a = self.accelerations([q[0], q[1]], [v[0], v[1]])?;
                out.copy_from_slice(&a);
                Ok(())
            },
            q,
            v,
            dt,
        )?;
        q[0] = wrap_angle(q[0]);
        q[1] = wrap_angle(q[1]);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrators::rk4_step;

    #[test]
    fn equilibrium_and_wrap() {
        let p = DoublePendulumParams::default();
        let mut out = [1.0; 4];
        p.rhs(&[0.0; 4], &mut out).unwrap();
        assert_eq!(out, [0.0; 4]);
        assert!((wrap_angle(PI + 0.1) - (-PI + 0.1)).abs() < 1e-15);
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(7.0 * PI / 2.0) + PI / 2.0).abs() < 1e-14);
    }

    /// Lagrangian oracle: the accelerations solve the 2×2 mass-matrix system
    /// `M(θ) α = b(θ, ω)` written independently of the closed form.
    #[test]
    fn accelerations_solve_the_equations_of_motion() {
        let p = DoublePendulumParams { m1: 1.3, m2: 0.7, l1: 0.9, l2: 1.4, g: 9.81, noise: 0.0 };
        for (th, om) in [([PI / 2.0, PI / 2.0], [0.0, 0.0]), ([0.3, -1.1], [0.5, 2.0])] {
            let a = p.accelerations(th, om).unwrap();
            let d = th[0] - th[1];
            let (m1, m2, l1, l2, g) = (p.m1, p.m2, p.l1, p.l2, p.g);
            let r1 = (m1 + m2) * l1 * a[0] + m2 * l2 * a[1] * cos(d) + m2 * l2 * om[1] * om[1] * sin(d)
                + (m1 + m2) * g * sin(th[0]);
            let r2 = l2 * a[1] + l1 * a[0] * cos(d) - l1 * om[0] * om[0] * sin(d) + g * sin(th[1]);
            assert!(r1.abs() < 1e-12 && r2.abs() < 1e-12, "{r1} {r2}");
        }
    }

    #[test]
    fn fine_rk4_conserves_energy_from_horizontal_start() {
        let p = DoublePendulumParams::default();
        let mut z = [PI / 2.0, 0.0, PI / 2.0, 0.0];
        let e0 = p.energy([z[0], z[2]], [z[1], z[3]]);
        let f = |s: &[f64], _t: f64, out: &mut [f64]| p.rhs(s, out);
        for _ in 0..2000 {
            rk4_step(&f, &mut z, 0.0, 1e-3).unwrap();
        }
        let e1 = p.energy([z[0], z[2]], [z[1], z[3]]);
        assert!((e1 - e0).abs() < 1e-9);
    }
}
