use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::jacobian::Topology;
use crate::series::Series;

/// Exact operation counts of the trace and adjoint kernels of one run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Cost {
    /// Multiply-add operations performed by trace or adjoint updates.
    pub flops: u64,
    /// Peak number of trace (or adjoint) scalars held in memory.
    pub trace_floats: usize,
}

/// Gradient over synapses, in the network's synapse order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub values: Vec<f64>,
    /// Per-step contributions `C^t` (`T` rows by `p`), for causal algorithms.
    pub per_step: Option<Series>,
    pub cost: Cost,
}

impl Gradient {
    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// `max |a - b| / max(max |a|, max |b|)`, or 0 when both are identically zero.
pub fn max_relative_deviation(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = a.iter().chain(b).map(|x| x.abs()).fold(0.0, f64::max);
    if diff == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

pub(crate) fn check_partials(topo: &Topology, steps: usize, partials: &Series) -> Result<()> {
    if partials.rows() != steps || partials.width() != topo.n {
        return Err(Error::SeriesShape { expected: (steps, topo.n), found: (partials.rows(), partials.width()) });
    }
    Ok(())
}
