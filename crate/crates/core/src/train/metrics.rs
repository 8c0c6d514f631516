use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::Trajectory;
use crate::error::{check_len, Error, Result};
use crate::math::abs;

/// Per-frame mean squared error, frames aligned by index.
pub fn mse_curve(pred: &Trajectory, truth: &Trajectory) -> Result<Vec<f64>> {
    check_len("trajectory dimension", truth.dim, pred.dim)?;
    check_len("trajectory frames", truth.n_frames(), pred.n_frames())?;
    if truth.dim == 0 {
        return Err(Error::Shape("empty state".into()));
    }
    Ok(pred
        .frames()
        .zip(truth.frames())
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / truth.dim as f64)
        .collect())
}

/// Mean over frames and components of the squared difference.
pub fn rollout_mse(pred: &Trajectory, truth: &Trajectory) -> Result<f64> {
    let c = mse_curve(pred, truth)?;
    if c.is_empty() {
        return Err(Error::Shape("trajectories have no frames".into()));
    }
    Ok(c.iter().sum::<f64>() / c.len() as f64)
}

/// `(E_t − E_0)/|E_0|`, or `E_t − E_0` when `|E_0| < 1e-12` (flagged).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyDeviation {
    pub curve: Vec<f64>,
    pub absolute: bool,
}

pub fn energy_deviation(energies: &[f64]) -> Result<EnergyDeviation> {
    let e0 = *energies.first().ok_or_else(|| Error::Shape("no energies".into()))?;
    let absolute = abs(e0) < 1e-12;
    let scale = if absolute { 1.0 } else { abs(e0) };
    Ok(EnergyDeviation { curve: energies.iter().map(|e| (e - e0) / scale).collect(), absolute })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rollout_mse: f64,
    pub times: Vec<f64>,
    pub mse_curve: Vec<f64>,
    pub energy_deviation: Option<Vec<f64>>,
    /// Set when the energy curve is absolute because `E_0` was near zero.
    pub energy_absolute: bool,
    pub diverged_at: Option<usize>,
}

/// Compares a prediction with the truth. When the prediction diverged, only
/// its finite prefix is scored and the truth is cut to match.
pub fn evaluate(
    pred: &Trajectory,
    truth: &Trajectory,
    energy: Option<&dyn Fn(&[f64]) -> Result<f64>>,
    diverged_at: Option<usize>,
) -> Result<MetricReport> {
    let n = pred.n_frames();
    if diverged_at.is_none() {
        check_len("trajectory frames", truth.n_frames(), n)?;
    } else if n > truth.n_frames() {
        check_len("trajectory frames", truth.n_frames(), n)?;
    }
    let mut cut = Trajectory::new(truth.dim);
    for k in 0..n {
        cut.push(truth.times[k], truth.frame(k));
    }
    let mse_curve = mse_curve(pred, &cut)?;
    let rollout_mse = mse_curve.iter().sum::<f64>() / mse_curve.len().max(1) as f64;
    let (energy_deviation, energy_absolute) = match energy {
        Some(f) => {
            let es = pred.frames().map(f).collect::<Result<Vec<f64>>>()?;
            let d = energy_deviation(&es)?;
            (Some(d.curve), d.absolute)
        }
        None => (None, false),
    };
    Ok(MetricReport { rollout_mse, times: pred.times.clone(), mse_curve, energy_deviation, energy_absolute, diverged_at })
}
