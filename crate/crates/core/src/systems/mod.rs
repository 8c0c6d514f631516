//! Benchmark systems and their dataset generators.
//!
//! ODE systems are integrated as one long trajectory that is cut into
//! segments sharing their boundary frames. PDE systems produce independent
//! rollouts. Energies are recorded on clean states; observation noise is
//! added to saved frames afterwards.

mod double_pendulum;
mod fput;
mod pendulum;
mod swe;
mod taylor_green;
mod two_scale;

pub use double_pendulum::{wrap_angle, DoublePendulumParams};
pub use fput::FputParams;
pub use pendulum::PendulumParams;
pub use swe::{gaussian_smooth, max_jump, smooth_until, PulseParams, RandomInitParams, SweParams, SMOOTHING_CAP};
pub use taylor_green::TaylorGreenParams;
pub use two_scale::{zero_crossing_frequency, TwoScaleParams};

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{StateLayout, Trajectory, TrajectoryDataset};
use crate::error::{Error, Result};
use crate::integrators::{heun_rk2_step, leapfrog_step, rk4_step, rollout, velocity_verlet_step};
use crate::math::PI;
use crate::state::FieldState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum System {
    Pendulum(PendulumParams),
    DoublePendulum(DoublePendulumParams),
    Fput(FputParams),
    TwoScale(TwoScaleParams),
    SwePulse {
        #[serde(default)]
        swe: SweParams,
        #[serde(default)]
        pulse: PulseParams,
    },
    SweRandom {
        #[serde(default)]
        swe: SweParams,
        #[serde(default)]
        init: RandomInitParams,
    },
    TaylorGreen(TaylorGreenParams),
}

/// Shape of a generation run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenSettings {
    pub n_traj: usize,
    /// Integration steps per trajectory (per segment for ODE systems).
    pub n_steps: usize,
    /// Step size; the system default when absent (the CFL step for SWE).
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "one")]
    pub save_every: usize,
    pub seed: u64,
}

fn one() -> usize {
    1
}

/// Seeded generator for an independent stream, so results do not depend on
/// the order in which trajectories are produced.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const NOISE_STREAM: u64 = 1 << 32;

impl System {
    pub fn name(&self) -> &'static str {
        match self {
            System::Pendulum(_) => "pendulum",
            System::DoublePendulum(_) => "double_pendulum",
            System::Fput(_) => "fput",
            System::TwoScale(_) => "two_scale",
            System::SwePulse { .. } => "swe_pulse",
            System::SweRandom { .. } => "swe_random",
            System::TaylorGreen(_) => "taylor_green",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            System::Pendulum(p) => p.validate(),
            System::DoublePendulum(p) => p.validate(),
            System::Fput(p) => p.validate(),
            System::TwoScale(p) => p.validate(),
            System::SwePulse { swe, .. } | System::SweRandom { swe, .. } => swe.validate(),
            System::TaylorGreen(p) => p.validate(),
        }
    }

    pub fn layout(&self) -> StateLayout {
        match self {
            System::Pendulum(_) => StateLayout::Phase { dof: 1 },
            System::DoublePendulum(_) | System::TwoScale(_) => StateLayout::Phase { dof: 2 },
            System::Fput(p) => StateLayout::Phase { dof: p.n },
            System::SwePulse { swe, .. } | System::SweRandom { swe, .. } => {
                StateLayout::Field { channels: 3, ny: swe.n, nx: swe.n, dx: swe.dx(), dy: swe.dx() }
            }
            System::TaylorGreen(p) => StateLayout::Field { channels: 3, ny: p.n, nx: p.n, dx: p.h(), dy: p.h() },
        }
    }

    pub fn default_dt(&self) -> f64 {
        match self {
            System::Pendulum(_) | System::Fput(_) | System::TaylorGreen(_) => 0.01,
            System::DoublePendulum(_) => 1e-3,
            System::TwoScale(p) => 0.01 * crate::math::sqrt(p.eps),
            System::SwePulse { swe, .. } | System::SweRandom { swe, .. } => swe.dt(),
        }
    }

    fn noise(&self) -> f64 {
        match self {
            System::Pendulum(p) => p.noise,
            System::DoublePendulum(p) => p.noise,
            System::Fput(p) => p.noise,
            _ => 0.0,
        }
    }

    /// Energy of one saved frame, in the dataset's own coordinates.
    pub fn frame_energy(&self, frame: &[f64]) -> Result<f64> {
        crate::error::check_len("frame", self.layout().dim(), frame.len())?;
        Ok(match self {
            System::Pendulum(p) => p.energy(frame),
            System::DoublePendulum(p) => p.energy([frame[0], frame[1]], [frame[2], frame[3]]),
            System::Fput(p) => p.energy(&frame[..p.n], &frame[p.n..]),
            System::TwoScale(p) => p.energy(frame),
            System::SwePulse { swe, .. } | System::SweRandom { swe, .. } => {
                swe.observed_energy(&self.layout().field(frame)?)
            }
            System::TaylorGreen(p) => p.kinetic_energy(&self.layout().field(frame)?),
        })
    }

    fn ode_initial<R: Rng>(&self, rng: &mut R) -> Result<Vec<f64>> {
        Ok(match self {
            System::Pendulum(_) => alloc::vec![rng.random_range(-PI..=PI), rng.random_range(-1.0..=1.0)],
            System::DoublePendulum(_) => {
                let th1 = rng.random_range(-PI..=PI);
                let om1 = rng.random_range(-1.0..=1.0);
                let th2 = rng.random_range(-PI..=PI);
                let om2 = rng.random_range(-1.0..=1.0);
                alloc::vec![th1, th2, om1, om2]
            }
            System::Fput(p) => {
                let nq = normal(p.sigma_q)?;
                let np = normal(p.sigma_p)?;
                let mut z: Vec<f64> = (0..p.n).map(|_| nq.sample(rng)).collect();
                z.extend((0..p.n).map(|_| np.sample(rng)));
                z
            }
            System::TwoScale(_) => (0..4).map(|_| rng.random_range(-1.0..=1.0)).collect(),
            _ => return Err(Error::InvalidParameter(format!("{} is not an ODE system", self.name()))),
        })
    }

    fn ode_step(&self, z: &mut [f64], dt: f64) -> Result<()> {
        if let System::TwoScale(s) = self {
            let f = |z: &[f64], _t: f64, out: &mut [f64]| {
                s.rhs(z, out);
                Ok(())
            };
            return rk4_step(&f, z, 0.0, dt);
        }
        let (q, p) = z.split_at_mut(z.len() / 2);
        match self {
            System::Pendulum(s) => leapfrog_step(s, q, p, dt),
            System::DoublePendulum(s) => s.step(q, p, dt),
            System::Fput(s) => velocity_verlet_step(s, s.mass, q, p, dt),
            _ => Err(Error::InvalidParameter(format!("{} is not an ODE system", self.name()))),
        }
    }
}

fn normal(sigma: f64) -> Result<Normal<f64>> {
    Normal::new(0.0, sigma).map_err(|e| Error::InvalidParameter(format!("normal distribution: {e}")))
}

fn add_noise(ds: &mut TrajectoryDataset, sigma: f64, seed: u64) -> Result<()> {
    if sigma == 0.0 {
        return Ok(());
    }
    let dist = normal(sigma)?;
    let per = ds.n_frames * ds.dim();
    for (traj, chunk) in ds.states.chunks_mut(per).enumerate() {
        let mut rng = stream_rng(seed, NOISE_STREAM + traj as u64);
        for v in chunk {
            *v += dist.sample(&mut rng);
        }
    }
    Ok(())
}

fn generation(traj: usize) -> impl FnOnce(Error) -> Error {
    move |e| Error::Generation { traj, source: Box::new(e) }
}

/// Produces a dataset of shape `[n_traj, n_steps / save_every + 1, dim]`.
pub fn generate_dataset(system: &System, settings: &GenSettings) -> Result<TrajectoryDataset> {
    system.validate()?;
    let GenSettings { n_traj, n_steps, save_every, seed, .. } = *settings;
    if n_traj == 0 || n_steps == 0 || save_every == 0 {
        return Err(Error::InvalidParameter("n_traj, n_steps and save_every must be positive".into()));
    }
    if n_steps % save_every != 0 {
        return Err(Error::InvalidParameter(format!(
            "n_steps {n_steps} must be a multiple of save_every {save_every}"
        )));
    }
    let dt = settings.dt.unwrap_or_else(|| system.default_dt());
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt {dt} must be positive")));
    }
    let layout = system.layout();
    let frame_dt = dt * save_every as f64;
    let per_seg = n_steps / save_every + 1;
    let mut trajs = Vec::with_capacity(n_traj);
    let mut energy = Vec::with_capacity(n_traj * per_seg);
    match system {
        System::SwePulse { .. } | System::SweRandom { .. } | System::TaylorGreen(_) => {
            for traj in 0..n_traj {
                let mut rng = stream_rng(seed, traj as u64);
                let (tr, e) = pde_rollout(system, &mut rng, dt, n_steps, save_every).map_err(generation(traj))?;
                trajs.push(tr);
                energy.extend(e);
            }
        }
        _ => {
            let mut rng = stream_rng(seed, 0);
            let z0 = system.ode_initial(&mut rng)?;
            let long = rollout(&z0, dt, n_traj * n_steps, save_every, |z, _t, dt| system.ode_step(z, dt))
                .map_err(|e| match e {
                    Error::StepFailed { step, .. } => generation(step / n_steps)(e),
                    e => e,
                })?;
            for traj in 0..n_traj {
                let a = traj * (per_seg - 1);
                let mut seg = Trajectory::new(layout.dim());
                for k in a..a + per_seg {
                    seg.push(long.times[k], long.frame(k));
                    energy.push(system.frame_energy(long.frame(k))?);
                }
                trajs.push(seg);
            }
        }
    }
    let mut ds = TrajectoryDataset::from_trajectories(layout, frame_dt, &trajs, energy)?;
    add_noise(&mut ds, system.noise(), seed)?;
    Ok(ds)
}

fn pde_rollout(
    system: &System,
    rng: &mut ChaCha8Rng,
    dt: f64,
    n_steps: usize,
    save_every: usize,
) -> Result<(Trajectory, Vec<f64>)> {
    let (frames, times): (Vec<FieldState>, Vec<f64>) = match system {
        System::SwePulse { swe, pulse } => {
            let center = if pulse.randomize_center {
                let n = swe.n as f64;
                (rng.random_range(0.0..n), rng.random_range(0.0..n))
            } else {
                pulse.center.unwrap_or_else(|| swe.midpoint())
            };
            let s0 = swe.init_pulse(pulse.amplitude, pulse.sigma_cells, center);
            swe_frames(swe, s0, dt, n_steps, save_every)?
        }
        System::SweRandom { swe, init } => {
            let s0 = swe.init_random(rng, init)?;
            swe_frames(swe, s0, dt, n_steps, save_every)?
        }
        System::TaylorGreen(p) => {
            let w0 = p.initial_vorticity();
            let f = |w: &[f64], _t: f64, out: &mut [f64]| p.rhs(w, out);
            let tr = rollout(&w0, dt, n_steps, save_every, |w, t, dt| rk4_step(&f, w, t, dt))?;
            let mut frames = Vec::new();
            for (k, w) in tr.frames().enumerate() {
                frames.push(p.observe(w, tr.times[k])?);
            }
            (frames, tr.times)
        }
        _ => return Err(Error::InvalidParameter(String::from("not a PDE system"))),
    };
    let mut tr = Trajectory::new(system.layout().dim());
    let mut energy = Vec::with_capacity(frames.len());
    for (f, t) in frames.iter().zip(times) {
        tr.push(t, &f.data);
        energy.push(system.frame_energy(&f.data)?);
    }
    Ok((tr, energy))
}

fn swe_frames(
    swe: &SweParams,
    s0: FieldState,
    dt: f64,
    n_steps: usize,
    save_every: usize,
) -> Result<(Vec<FieldState>, Vec<f64>)> {
    let shape = s0.clone();
    let f = |z: &[f64], _t: f64, out: &mut [f64]| {
        let mut s = shape.clone();
        s.data.copy_from_slice(z);
        let mut o = shape.zeros_like();
        swe.rhs(&s, &mut o)?;
        out.copy_from_slice(&o.data);
        Ok(())
    };
    let tr = rollout(&s0.data, dt, n_steps, save_every, |z, t, dt| heun_rk2_step(&f, z, t, dt))?;
    let mut frames = Vec::new();
    for z in tr.frames() {
        let mut s = shape.clone();
        s.data.copy_from_slice(z);
        frames.push(swe.observe(&s));
    }
    Ok((frames, tr.times))
}

/// Runs one conservative-state SWE trajectory, for diagnostics.
pub fn swe_conservative_rollout(swe: &SweParams, s0: &FieldState, dt: f64, n_steps: usize) -> Result<Trajectory> {
    let shape = s0.clone();
    let f = |z: &[f64], _t: f64, out: &mut [f64]| {
        let mut s = shape.clone();
        s.data.copy_from_slice(z);
        let mut o = shape.zeros_like();
        swe.rhs(&s, &mut o)?;
        out.copy_from_slice(&o.data);
        Ok(())
    };
    rollout(&s0.data, dt, n_steps, 1, |z, t, dt| heun_rk2_step(&f, z, t, dt))
}
