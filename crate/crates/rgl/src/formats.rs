//! CSV forms of trajectories, targets and input streams.

use std::io::{Read, Write};

use anyhow::{bail, Result};
use rgl_core::{Series, Trajectory};
use serde::{Deserialize, Serialize};

#[derive(Debug, Serialize)]
struct TrajectoryRow {
    t: usize,
    neuron: usize,
    h_0: f64,
    h_1: Option<f64>,
    o: f64,
}

/// One row per step and neuron, `t = 0..=T`. `h_1` is empty for cells with
/// a scalar hidden state.
pub fn write_trajectory<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for t in 0..=traj.steps() {
        for j in 0..traj.n() {
            let h = traj.h(t, j);
            w.serialize(TrajectoryRow { t, neuron: j, h_0: h[0], h_1: h.get(1).copied(), o: traj.o(t, j) })?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct SeriesRow {
    t: usize,
    k: usize,
    value: f64,
}

/// Writes a step-indexed series (row `t - 1` holds step `t`) as `t,k,value`.
pub fn write_targets<W: Write>(series: &Series, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for t in 1..=series.rows() {
        for (k, &value) in series.at(t).iter().enumerate() {
            w.serialize(SeriesRow { t, k, value })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads `t,k,value` rows into a `steps x outputs` series. Every cell must
/// appear exactly once.
pub fn read_targets<R: Read>(input: R, steps: usize, outputs: usize) -> Result<Series> {
    let mut series = Series::zeros(steps, outputs);
    let mut seen = vec![false; steps * outputs];
    for row in csv::Reader::from_reader(input).deserialize() {
        let SeriesRow { t, k, value } = row?;
        if t == 0 || t > steps || k >= outputs {
            bail!("target row (t={t}, k={k}) outside {steps} steps x {outputs} outputs");
        }
        let idx = (t - 1) * outputs + k;
        if seen[idx] {
            bail!("duplicate target row (t={t}, k={k})");
        }
        seen[idx] = true;
        series.at_mut(t)[k] = value;
    }
    if let Some(idx) = seen.iter().position(|s| !s) {
        bail!("missing target row (t={}, k={})", idx / outputs.max(1) + 1, idx % outputs.max(1));
    }
    Ok(series)
}
