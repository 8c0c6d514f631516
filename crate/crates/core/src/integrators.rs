//! Time steppers for data generation and learned-model rollout.
//!
//! Split (separable) steppers update `q` and `p` in place. Vector-field
//! steppers take a closure `f(z, t, out)` and update `z` in place.
//! Negative `dt` is accepted so that reversibility can be tested.

use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::Trajectory;
use crate::error::{Error, Result};

/// A separable Hamiltonian `H = T(p) + V(q)`.
pub trait SplitSystem {
    /// `-∂V/∂q`.
    fn force(&self, q: &[f64], out: &mut [f64]);
    /// `∂T/∂p`.
    fn velocity(&self, p: &[f64], out: &mut [f64]);
}

/// `ż = f(z, t)`.
pub trait VectorField {
    fn eval(&self, z: &[f64], t: f64, out: &mut [f64]) -> Result<()>;
}

impl<F> VectorField for F
where
    F: Fn(&[f64], f64, &mut [f64]) -> Result<()>,
{
    fn eval(&self, z: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        self(z, t, out)
    }
}

fn finite(v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteForce)
    }
}

fn force<S: SplitSystem + ?Sized>(sys: &S, q: &[f64], out: &mut [f64]) -> Result<()> {
    sys.force(q, out);
    finite(out)
}

fn velocity<S: SplitSystem + ?Sized>(sys: &S, p: &[f64], out: &mut [f64]) -> Result<()> {
    sys.velocity(p, out);
    finite(out)
}

/// Kick–drift–kick leapfrog.
pub fn leapfrog_step<S: SplitSystem + ?Sized>(sys: &S, q: &mut [f64], p: &mut [f64], dt: f64) -> Result<()> {
    let mut f = vec![0.0; q.len()];
    force(sys, q, &mut f)?;
    for (pi, fi) in p.iter_mut().zip(&f) {
        *pi += 0.5 * dt * fi;
    }
    let mut v = vec![0.0; p.len()];
    velocity(sys, p, &mut v)?;
    for (qi, vi) in q.iter_mut().zip(&v) {
        *qi += dt * vi;
    }
    force(sys, q, &mut f)?;
    for (pi, fi) in p.iter_mut().zip(&f) {
        *pi += 0.5 * dt * fi;
    }
    Ok(())
}

/// `p' = p + dt·F(q)`, then `q' = q + dt·v(p')`.
pub fn symplectic_euler_step<S: SplitSystem + ?Sized>(
    sys: &S,
    q: &mut [f64],
    p: &mut [f64],
    dt: f64,
) -> Result<()> {
    let mut f = vec![0.0; q.len()];
    force(sys, q, &mut f)?;
    for (pi, fi) in p.iter_mut().zip(&f) {
        *pi += dt * fi;
    }
    let mut v = vec![0.0; p.len()];
    velocity(sys, p, &mut v)?;
    for (qi, vi) in q.iter_mut().zip(&v) {
        *qi += dt * vi;
    }
    Ok(())
}

/// Semi-implicit Euler for accelerations that also depend on velocity:
/// `v' = v + dt·a(q, v)`, then `q' = q + dt·v'`.
pub fn semi_implicit_euler_step<A>(accel: A, q: &mut [f64], v: &mut [f64], dt: f64) -> Result<()>
where
    A: Fn(&[f64], &[f64], &mut [f64]) -> Result<()>,
{
    let mut a = vec![0.0; q.len()];
    accel(q, v, &mut a)?;
    finite(&a)?;
    for (vi, ai) in v.iter_mut().zip(&a) {
        *vi += dt * ai;
    }
    for (qi, vi) in q.iter_mut().zip(v.iter()) {
        *qi += dt * vi;
    }
    Ok(())
}

/// Velocity Verlet with scalar mass `m`; only the force is used.
pub fn velocity_verlet_step<S: SplitSystem + ?Sized>(
    sys: &S,
    mass: f64,
    q: &mut [f64],
    p: &mut [f64],
    dt: f64,
) -> Result<()> {
    let mut f0 = vec![0.0; q.len()];
    force(sys, q, &mut f0)?;
    for i in 0..q.len() {
        q[i] += p[i] / mass * dt + 0.5 * f0[i] / mass * dt * dt;
    }
    let mut f1 = vec![0.0; q.len()];
    force(sys, q, &mut f1)?;
    for i in 0..p.len() {
        p[i] += 0.5 * (f0[i] + f1[i]) * dt;
    }
    Ok(())
}

fn eval<F: VectorField + ?Sized>(f: &F, z: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
    f.eval(z, t, out)?;
    finite(out)
}

fn axpy(z: &[f64], a: f64, k: &[f64]) -> Vec<f64> {
    z.iter().zip(k).map(|(zi, ki)| zi + a * ki).collect()
}

pub fn explicit_euler_step<F: VectorField + ?Sized>(f: &F, z: &mut [f64], t: f64, dt: f64) -> Result<()> {
    let mut k = vec![0.0; z.len()];
    eval(f, z, t, &mut k)?;
    for (zi, ki) in z.iter_mut().zip(&k) {
        *zi += dt * ki;
    }
    Ok(())
}

/// Heun's method (explicit trapezoidal RK2).
pub fn heun_rk2_step<F: VectorField + ?Sized>(f: &F, z: &mut [f64], t: f64, dt: f64) -> Result<()> {
    let n = z.len();
    let mut k1 = vec![0.0; n];
    eval(f, z, t, &mut k1)?;
    let mut k2 = vec![0.0; n];
    eval(f, &axpy(z, dt, &k1), t + dt, &mut k2)?;
    for i in 0..n {
        z[i] += 0.5 * dt * (k1[i] + k2[i]);
    }
    Ok(())
}

/// Classical fourth-order Runge–Kutta.
pub fn rk4_step<F: VectorField + ?Sized>(f: &F, z: &mut [f64], t: f64, dt: f64) -> Result<()> {
    let n = z.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    eval(f, z, t, &mut k1)?;
    eval(f, &axpy(z, 0.5 * dt, &k1), t + 0.5 * dt, &mut k2)?;
    eval(f, &axpy(z, 0.5 * dt, &k2), t + 0.5 * dt, &mut k3)?;
    eval(f, &axpy(z, dt, &k3), t + dt, &mut k4)?;
    for i in 0..n {
        z[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(())
}

/// Runs `n_steps` of `step(z, t, dt)` from `z0`, saving the initial state and
/// every `save_every`-th state after it. Frame `k` is stamped
/// `k · save_every · dt`.
pub fn rollout<S>(z0: &[f64], dt: f64, n_steps: usize, save_every: usize, mut step: S) -> Result<Trajectory>
where
    S: FnMut(&mut [f64], f64, f64) -> Result<()>,
{
    if n_steps == 0 || save_every == 0 {
        return Err(Error::InvalidParameter("n_steps and save_every must be positive".into()));
    }
    let mut traj = Trajectory::new(z0.len());
    let mut z = z0.to_vec();
    traj.push(0.0, &z);
    for n in 0..n_steps {
        let t = n as f64 * dt;
        step(&mut z, t, dt).map_err(|e| Error::StepFailed { step: n, source: e.into() })?;
        if (n + 1) % save_every == 0 {
            traj.push(((n + 1) / save_every) as f64 * save_every as f64 * dt, &z);
        }
    }
    Ok(traj)
}

/// Adapts a `(q, p)` stepper to a flat `z = (q, p)` state.
pub fn split_state<S>(mut step: S) -> impl FnMut(&mut [f64], f64, f64) -> Result<()>
where
    S: FnMut(&mut [f64], &mut [f64], f64) -> Result<()>,
{
    move |z: &mut [f64], _t: f64, dt: f64| {
        let d = z.len() / 2;
        let (q, p) = z.split_at_mut(d);
        step(q, p, dt)
    }
}
