//! Phase-space vectors for ODE systems and multichannel periodic grids for
//! PDE systems.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// `z = (q, p)` with `d` degrees of freedom, stored as `[q_0..q_d, p_0..p_d]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub dof: usize,
    pub data: Vec<f64>,
}

impl PhaseState {
    pub fn new(q: &[f64], p: &[f64]) -> Result<Self> {
        check_len("momentum", q.len(), p.len())?;
        let mut data = q.to_vec();
        data.extend_from_slice(p);
        Ok(Self { dof: q.len(), data })
    }

    pub fn from_vec(data: Vec<f64>) -> Result<Self> {
        if data.len() % 2 != 0 {
            return Err(Error::Shape("phase state length must be even".into()));
        }
        Ok(Self {
            dof: data.len() / 2,
            data,
        })
    }

    pub fn q(&self) -> &[f64] {
        &self.data[..self.dof]
    }

    pub fn p(&self) -> &[f64] {
        &self.data[self.dof..]
    }
}

/// Applies the canonical `J = [[0, I], [-I, 0]]` to `grad = (∂H/∂q, ∂H/∂p)`,
/// giving `(∂H/∂p, -∂H/∂q)`. `J` is never materialised.
pub fn apply_canonical_j(grad: &[f64], out: &mut [f64]) {
    let d = grad.len() / 2;
    for i in 0..d {
        out[i] = grad[d + i];
        out[d + i] = -grad[i];
    }
}

/// `C × ny × nx` periodic grid stored channel-major, rows along `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldState {
    pub channels: usize,
    pub ny: usize,
    pub nx: usize,
    pub dx: f64,
    pub dy: f64,
    pub data: Vec<f64>,
}

impl FieldState {
    pub fn zeros(channels: usize, ny: usize, nx: usize, dx: f64, dy: f64) -> Self {
        Self {
            channels,
            ny,
            nx,
            dx,
            dy,
            data: vec![0.0; channels * ny * nx],
        }
    }

    pub fn from_data(
        channels: usize,
        ny: usize,
        nx: usize,
        dx: f64,
        dy: f64,
        data: Vec<f64>,
    ) -> Result<Self> {
        check_len("field data", channels * ny * nx, data.len())?;
        Ok(Self {
            channels,
            ny,
            nx,
            dx,
            dy,
            data,
        })
    }

    pub fn plane(&self) -> usize {
        self.ny * self.nx
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let p = self.plane();
        &self.data[c * p..(c + 1) * p]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let p = self.plane();
        &mut self.data[c * p..(c + 1) * p]
    }

    #[inline]
    pub fn at(&self, c: usize, j: usize, i: usize) -> f64 {
        self.data[(c * self.ny + j) * self.nx + i]
    }

    /// Same grid with zeroed data.
    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.channels, self.ny, self.nx, self.dx, self.dy)
    }

    pub fn same_shape(&self, other: &FieldState) -> bool {
        self.channels == other.channels && self.ny == other.ny && self.nx == other.nx
    }

    /// Circular shift: the value at `(j, i)` moves to `(j + sy, i + sx)`.
    pub fn shifted(&self, sy: isize, sx: isize) -> Self {
        let mut out = self.zeros_like();
        for c in 0..self.channels {
            for j in 0..self.ny {
                let tj = (j as isize + sy).rem_euclid(self.ny as isize) as usize;
                for i in 0..self.nx {
                    let ti = (i as isize + sx).rem_euclid(self.nx as isize) as usize;
                    out.data[(c * self.ny + tj) * self.nx + ti] = self.at(c, j, i);
                }
            }
        }
        out
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
