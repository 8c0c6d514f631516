//! Datasets, rollouts, checkpoints and curves on disk. Arrays go into the
//! binary container; everything a reader needs to interpret them goes into
//! a JSON sidecar next to it (`<file>.json`).

use std::path::{Path, PathBuf};

use fshnn_core::dataset::{StateLayout, TrajectoryDataset};
use fshnn_core::models::Model;
use fshnn_core::train::LossHistory;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Family};
use crate::container::{find, read_container, write_atomic, write_container, Record, RecordKind};
use crate::Failure;

pub fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::format(path, e))?;
    text.push('\n');
    Ok(write_atomic(path, text.as_bytes())?)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Failure::format(path, e))
}

/// Where a predicted trajectory set came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutInfo {
    pub system: String,
    pub family: Family,
    /// `High`, `Med`, `Low` or `Com.`.
    pub resolution: String,
    pub intervals: Vec<usize>,
    pub component: Option<usize>,
    pub seed: u64,
    pub steps: usize,
    /// Step at which each rollout stopped being finite.
    pub diverged_at: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetMeta {
    pub layout: StateLayout,
    pub frame_dt: f64,
    pub n_traj: usize,
    pub n_frames: usize,
    /// The full configuration for generated datasets.
    pub config: Option<ExperimentConfig>,
    /// Present for model rollouts.
    pub rollout: Option<RolloutInfo>,
}

pub fn save_dataset(path: &Path, ds: &TrajectoryDataset, meta: &DatasetMeta) -> Result<(), Failure> {
    let (n, f) = (ds.n_traj, ds.n_frames);
    let records = [
        Record::new(RecordKind::Dataset, "states", &[n, f, ds.dim()], ds.states.clone()),
        Record::new(RecordKind::Dataset, "energy", &[n, f], ds.energy.clone()),
        Record::new(RecordKind::Dataset, "times", &[n, f], ds.times.clone()),
    ];
    write_container(path, &records)?;
    write_json(&sidecar(path), meta)
}

pub fn load_dataset(path: &Path) -> Result<(TrajectoryDataset, DatasetMeta), Failure> {
    let meta: DatasetMeta = read_json(&sidecar(path))?;
    let records = read_container(path)?;
    let get = |name: &str, dims: &[usize]| -> Result<Vec<f64>, Failure> {
        let r = find(&records, name)?;
        let want: Vec<u64> = dims.iter().map(|&d| d as u64).collect();
        if r.dims != want {
            return Err(Failure::format(path, format!("record {name} has dims {:?}, expected {want:?}", r.dims)));
        }
        Ok(r.data.clone())
    };
    let (n, f) = (meta.n_traj, meta.n_frames);
    let ds = TrajectoryDataset {
        layout: meta.layout,
        n_traj: n,
        n_frames: f,
        frame_dt: meta.frame_dt,
        states: get("states", &[n, f, meta.layout.dim()])?,
        energy: get("energy", &[n, f])?,
        times: get("times", &[n, f])?,
    };
    ds.validate()?;
    Ok((ds, meta))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointHeader {
    /// Architecture and settings; parameter values live in the container.
    model: Model,
    config: ExperimentConfig,
}

pub fn save_checkpoint(path: &Path, model: &Model, config: &ExperimentConfig) -> Result<(), Failure> {
    let records: Vec<Record> = model
        .named_groups()
        .into_iter()
        .map(|(name, g)| Record::new(RecordKind::Params, name, &[g.len()], g.values.clone()))
        .collect();
    let mut skeleton = model.clone();
    for g in skeleton.groups_mut() {
        g.values.clear();
    }
    write_container(path, &records)?;
    write_json(&sidecar(path), &CheckpointHeader { model: skeleton, config: config.clone() })
}

pub fn load_checkpoint(path: &Path) -> Result<(Model, ExperimentConfig), Failure> {
    let header: CheckpointHeader = read_json(&sidecar(path))?;
    let records = read_container(path)?;
    let mut model = header.model;
    let names: Vec<String> = model.named_groups().into_iter().map(|(n, _)| n).collect();
    for (name, g) in names.iter().zip(model.groups_mut()) {
        g.values = find(&records, name)?.data.clone();
    }
    model.validate()?;
    Ok((model, header.config))
}

fn write_csv(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<(), Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Failure::format(path, e);
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::format(path, e))?;
    Ok(write_atomic(path, &bytes)?)
}

/// One row per epoch: running step, phase, component (empty in phase 2),
/// epoch within the phase and mean loss.
pub fn write_loss_csv(path: &Path, history: &LossHistory) -> Result<(), Failure> {
    write_csv(
        path,
        &["step", "phase", "component", "epoch", "value"],
        history.iter().enumerate().map(|(i, r)| {
            vec![
                i.to_string(),
                r.phase.to_string(),
                r.component.map(|c| c.to_string()).unwrap_or_default(),
                r.epoch.to_string(),
                r.loss.to_string(),
            ]
        }),
    )
}

pub fn write_curve_csv(path: &Path, times: &[f64], values: &[f64]) -> Result<(), Failure> {
    write_csv(path, &["time", "value"], times.iter().zip(values).map(|(t, v)| vec![t.to_string(), v.to_string()]))
}

pub fn write_rows_csv(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<(), Failure> {
    write_csv(path, header, rows.into_iter())
}
