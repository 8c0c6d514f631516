use alloc::format;
use alloc::vec::Vec;

use crate::dataset::TrajectoryDataset;
use crate::error::{Error, Result};

/// Keeps frames `0, I, 2I, …` and records the coarser frame spacing.
pub fn subsample(ds: &TrajectoryDataset, interval: usize) -> Result<TrajectoryDataset> {
    if interval == 0 {
        return Err(Error::InvalidParameter("interval must be positive".into()));
    }
    let idx: Vec<usize> = (0..ds.n_frames).step_by(interval).collect();
    ds.select_frames(&idx, ds.frame_dt * interval as f64)
}

/// Time derivative at frame `k` of trajectory `traj` from the frames alone:
/// central differences inside, second-order one-sided differences at the
/// ends (first order if only two frames exist).
pub fn derivative_estimate(ds: &TrajectoryDataset, traj: usize, k: usize) -> Result<Vec<f64>> {
    let n = ds.n_frames;
    if n < 2 {
        return Err(Error::InvalidParameter("derivatives need at least two frames".into()));
    }
    if k >= n {
        return Err(Error::InvalidParameter(format!("frame {k} out of range")));
    }
    let h = ds.frame_dt;
    let f = |i: usize| ds.frame(traj, i);
    let comb = |terms: &[(f64, usize)], scale: f64| -> Vec<f64> {
        (0..ds.dim())
            .map(|d| terms.iter().map(|&(c, i)| c * f(i)[d]).sum::<f64>() / scale)
            .collect()
    };
    Ok(if n == 2 {
        comb(&[(-1.0, 0), (1.0, 1)], h)
    } else if k == 0 {
        comb(&[(-3.0, 0), (4.0, 1), (-1.0, 2)], 2.0 * h)
    } else if k == n - 1 {
        comb(&[(3.0, k), (-4.0, k - 1), (1.0, k - 2)], 2.0 * h)
    } else {
        comb(&[(1.0, k + 1), (-1.0, k - 1)], 2.0 * h)
    })
}

/// A state with its estimated time derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub z: Vec<f64>,
    pub zdot: Vec<f64>,
}

/// Every frame of every trajectory with its derivative estimate.
pub fn gradient_samples(ds: &TrajectoryDataset) -> Result<Vec<Sample>> {
    let mut out = Vec::with_capacity(ds.n_traj * ds.n_frames);
    for tr in 0..ds.n_traj {
        for k in 0..ds.n_frames {
            out.push(Sample { z: ds.frame(tr, k).to_vec(), zdot: derivative_estimate(ds, tr, k)? });
        }
    }
    Ok(out)
}

/// Consecutive frame pairs `(z_t, z_{t+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pair {
    pub z: Vec<f64>,
    pub next: Vec<f64>,
}

pub fn pairs(ds: &TrajectoryDataset) -> Vec<Pair> {
    let mut out = Vec::new();
    for tr in 0..ds.n_traj {
        for k in 0..ds.n_frames.saturating_sub(1) {
            out.push(Pair { z: ds.frame(tr, k).to_vec(), next: ds.frame(tr, k + 1).to_vec() });
        }
    }
    out
}
