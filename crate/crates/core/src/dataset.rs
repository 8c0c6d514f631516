//! Trajectory containers shared by the generators, models and metrics.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::state::FieldState;

/// How a flat frame vector is to be read.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum StateLayout {
    /// `(q, p)` with `dof` degrees of freedom.
    Phase { dof: usize },
    /// Channel-major periodic grid.
    Field {
        channels: usize,
        ny: usize,
        nx: usize,
        dx: f64,
        dy: f64,
    },
}

impl StateLayout {
    pub fn dim(&self) -> usize {
        match *self {
            StateLayout::Phase { dof } => 2 * dof,
            StateLayout::Field { channels, ny, nx, .. } => channels * ny * nx,
        }
    }

    pub fn field(&self, data: &[f64]) -> Result<FieldState> {
        match *self {
            StateLayout::Field { channels, ny, nx, dx, dy } => {
                FieldState::from_data(channels, ny, nx, dx, dy, data.to_vec())
            }
            StateLayout::Phase { .. } => Err(Error::Shape("phase-space layout has no grid".into())),
        }
    }
}

/// A single saved trajectory: `n_frames × dim` states and their times.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dim: usize,
    pub times: Vec<f64>,
    pub states: Vec<f64>,
}

impl Trajectory {
    pub fn new(dim: usize) -> Self {
        Self { dim, times: Vec::new(), states: Vec::new() }
    }

    pub fn push(&mut self, t: f64, z: &[f64]) {
        debug_assert_eq!(z.len(), self.dim);
        self.times.push(t);
        self.states.extend_from_slice(z);
    }

    pub fn n_frames(&self) -> usize {
        self.times.len()
    }

    pub fn frame(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[f64]> {
        self.states.chunks(self.dim)
    }
}

/// `n_traj × n_frames × dim` states with per-frame energy and time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryDataset {
    pub layout: StateLayout,
    pub n_traj: usize,
    pub n_frames: usize,
    /// Time between consecutive saved frames.
    pub frame_dt: f64,
    pub states: Vec<f64>,
    pub energy: Vec<f64>,
    pub times: Vec<f64>,
}

impl TrajectoryDataset {
    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn validate(&self) -> Result<()> {
        let frames = self.n_traj * self.n_frames;
        check_len("dataset states", frames * self.dim(), self.states.len())?;
        check_len("dataset energy", frames, self.energy.len())?;
        check_len("dataset times", frames, self.times.len())?;
        if !(self.frame_dt.is_finite() && self.frame_dt > 0.0) {
            return Err(Error::InvalidParameter(format!("frame_dt {} must be positive", self.frame_dt)));
        }
        Ok(())
    }

    pub fn frame(&self, traj: usize, k: usize) -> &[f64] {
        let d = self.dim();
        let off = (traj * self.n_frames + k) * d;
        &self.states[off..off + d]
    }

    pub fn energy_at(&self, traj: usize, k: usize) -> f64 {
        self.energy[traj * self.n_frames + k]
    }

    pub fn trajectory(&self, traj: usize) -> Trajectory {
        let d = self.dim();
        let a = traj * self.n_frames;
        Trajectory {
            dim: d,
            times: self.times[a..a + self.n_frames].to_vec(),
            states: self.states[a * d..(a + self.n_frames) * d].to_vec(),
        }
    }

    /// Stacks equally long trajectories. `energy` holds one value per frame
    /// per trajectory, in the same order.
    pub fn from_trajectories(
        layout: StateLayout,
        frame_dt: f64,
        trajs: &[Trajectory],
        energy: Vec<f64>,
    ) -> Result<Self> {
        let n_frames = trajs.first().map_or(0, Trajectory::n_frames);
        let mut states = Vec::new();
        let mut times = Vec::new();
        for t in trajs {
            check_len("trajectory dim", layout.dim(), t.dim)?;
            check_len("trajectory frames", n_frames, t.n_frames())?;
            states.extend_from_slice(&t.states);
            times.extend_from_slice(&t.times);
        }
        let ds = Self { layout, n_traj: trajs.len(), n_frames, frame_dt, states, energy, times };
        ds.validate()?;
        Ok(ds)
    }

    /// First `n` frames of every trajectory.
    pub fn truncate_frames(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.n_frames {
            return Err(Error::InvalidParameter(format!(
                "cannot keep {n} of {} frames",
                self.n_frames
            )));
        }
        self.select_frames(&(0..n).collect::<Vec<_>>(), self.frame_dt)
    }

    /// Keeps the listed frame indices of every trajectory.
    pub fn select_frames(&self, idx: &[usize], frame_dt: f64) -> Result<Self> {
        let d = self.dim();
        let mut out = Self {
            layout: self.layout,
            n_traj: self.n_traj,
            n_frames: idx.len(),
            frame_dt,
            states: Vec::with_capacity(self.n_traj * idx.len() * d),
            energy: Vec::new(),
            times: Vec::new(),
        };
        for tr in 0..self.n_traj {
            for &k in idx {
                if k >= self.n_frames {
                    return Err(Error::InvalidParameter(format!("frame {k} out of range")));
                }
                out.states.extend_from_slice(self.frame(tr, k));
                out.energy.push(self.energy_at(tr, k));
                out.times.push(self.times[tr * self.n_frames + k]);
            }
        }
        Ok(out)
    }
}
