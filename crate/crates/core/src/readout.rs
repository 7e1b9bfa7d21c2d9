//! Readout networks, loss partials, and the readout forms of e-prop.
//!
//! A readout maps neuron outputs to `K` readout units:
//!
//! ```text
//! y^t_k = κ y^{t-1}_k + Σ_j w_out[j][k] o^t_j + b_k,   y^0 = 0
//! ```
//!
//! with `κ = 0` for a static readout. The loss is the squared error
//! `Σ_{t,k} (y^t_k - y*^t_k)^2 / 2` over steps `1..=T`.

use alloc::vec;
use alloc::vec::Vec;

use crate::eprop::ImplicitTrace;
use crate::error::{Error, Result};
use crate::gradient::{Cost, Gradient};
use crate::jacobian::{LocalJacobians, Topology};
use crate::model::Trajectory;
use crate::series::Series;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReadoutKind {
    Static,
    /// Readout units with implicit recurrence `∂y^t/∂y^{t-1} = κ`.
    LeakyIntegrator {
        kappa: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Readout {
    pub kind: ReadoutKind,
    pub outputs: usize,
    /// `w_out[j][k]` stored at `j * outputs + k`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Readout {
    /// Static readout with `y^t = o^t`, so the loss acts on outputs directly.
    pub fn identity(n: usize) -> Self {
        let mut weights = vec![0.0; n * n];
        for j in 0..n {
            weights[j * n + j] = 1.0;
        }
        Self { kind: ReadoutKind::Static, outputs: n, weights, biases: vec![0.0; n] }
    }

    pub fn kappa(&self) -> f64 {
        match self.kind {
            ReadoutKind::Static => 0.0,
            ReadoutKind::LeakyIntegrator { kappa } => kappa,
        }
    }

    pub fn weight(&self, j: usize, k: usize) -> f64 {
        self.weights[j * self.outputs + k]
    }

    pub(crate) fn validate(&self, n: usize) -> Result<()> {
        if self.outputs == 0 {
            return Err(Error::InvalidNetwork("readout needs at least one unit"));
        }
        if self.weights.len() != n * self.outputs || self.biases.len() != self.outputs {
            return Err(Error::InvalidNetwork("readout weights must be n x K and biases K"));
        }
        let kappa = self.kappa();
        if !(0.0..1.0).contains(&kappa) {
            return Err(Error::InvalidParameter { name: "kappa", value: kappa });
        }
        Ok(())
    }

    fn check_targets(&self, steps: usize, targets: &Series) -> Result<()> {
        if targets.rows() != steps || targets.width() != self.outputs {
            return Err(Error::SeriesShape {
                expected: (steps, self.outputs),
                found: (targets.rows(), targets.width()),
            });
        }
        Ok(())
    }

    /// Readout activity `y^t_k` for `t in 1..=T`.
    pub fn forward(&self, traj: &Trajectory) -> Series {
        let (n, kk) = (traj.n(), self.outputs);
        let kappa = self.kappa();
        let mut y = Series::zeros(traj.steps(), kk);
        let mut prev = vec![0.0; kk];
        for t in 1..=traj.steps() {
            let o = traj.o_step(t);
            let row = y.at_mut(t);
            for k in 0..kk {
                let drive: f64 = (0..n).map(|j| self.weights[j * kk + k] * o[j]).sum();
                row[k] = kappa * prev[k] + drive + self.biases[k];
            }
            prev.copy_from_slice(row);
        }
        y
    }
}

/// `Σ_{t,k} (y - y*)^2 / 2`.
pub fn squared_error(y: &Series, targets: &Series) -> f64 {
    y.as_slice().iter().zip(targets.as_slice()).map(|(a, b)| 0.5 * (a - b) * (a - b)).sum()
}

/// Readout series and loss for one trajectory.
pub fn readout_forward(readout: &Readout, traj: &Trajectory, targets: &Series) -> Result<(Series, f64)> {
    readout.check_targets(traj.steps(), targets)?;
    let y = readout.forward(traj);
    let loss = squared_error(&y, targets);
    Ok((y, loss))
}

/// `∂L/∂y^t_k = y^t_k - y*^t_k`.
pub fn output_errors(y: &Series, targets: &Series) -> Series {
    let data = y.as_slice().iter().zip(targets.as_slice()).map(|(a, b)| a - b).collect();
    Series::from_flat(y.width(), data)
}

fn project(readout: &Readout, n: usize, errors: &Series) -> Series {
    let kk = readout.outputs;
    let mut out = Series::zeros(errors.rows(), n);
    for t in 1..=errors.rows() {
        let err = errors.at(t);
        for (j, v) in out.at_mut(t).iter_mut().enumerate() {
            *v = (0..kk).map(|k| err[k] * readout.weights[j * kk + k]).sum();
        }
    }
    out
}

/// `∂L/∂o^t_j = Σ_k (y^t_k - y*^t_k) w_out[j][k]` for a static readout.
///
/// Fails for a leaky-integrator readout, whose output derivatives are not
/// direct; use [`readout_loss_partials`] or the readout-trace path instead.
pub fn static_loss_partials(readout: &Readout, n: usize, y: &Series, targets: &Series) -> Result<Series> {
    if readout.kind != ReadoutKind::Static {
        return Err(Error::ReadoutMisuse("static partials requested for a leaky-integrator readout"));
    }
    readout.check_targets(y.rows(), targets)?;
    Ok(project(readout, n, &output_errors(y, targets)))
}

/// Derivative of the loss with respect to each output through the readout
/// only (no path back into the recurrent network).
///
/// For a leaky integrator this back-propagates through the readout's own
/// recurrence, `δ^t = (y^t - y*^t) + κ δ^{t+1}`, and is therefore
/// non-causal. It is what the exact algorithms consume as loss partials.
pub fn readout_loss_partials(readout: &Readout, n: usize, y: &Series, targets: &Series) -> Result<Series> {
    readout.check_targets(y.rows(), targets)?;
    let mut delta = output_errors(y, targets);
    let kappa = readout.kappa();
    if kappa != 0.0 {
        for t in (1..delta.rows()).rev() {
            for k in 0..readout.outputs {
                let next = delta.at(t + 1)[k];
                delta.at_mut(t)[k] += kappa * next;
            }
        }
    }
    Ok(project(readout, n, &delta))
}

/// `γ^{t,k}_s` for every readout unit and synapse.
#[derive(Debug, Clone)]
pub struct ReadoutTrace {
    outputs: usize,
    p: usize,
    gamma: Vec<f64>,
}

impl ReadoutTrace {
    pub fn new(readout: &Readout, topo: &Topology) -> Self {
        Self { outputs: readout.outputs, p: topo.p(), gamma: vec![0.0; readout.outputs * topo.p()] }
    }

    pub fn gamma(&self, k: usize, s: usize) -> f64 {
        self.gamma[k * self.p + s]
    }

    /// `K * p`.
    pub fn stored_floats(&self) -> usize {
        self.gamma.len()
    }

    /// `γ^{t,k}_s = κ γ^{t-1,k}_s + w_out[j][k] e^t_s`.
    pub fn step(&mut self, readout: &Readout, topo: &Topology, eligibility: &[f64]) -> u64 {
        let kappa = readout.kappa();
        for k in 0..self.outputs {
            let row = &mut self.gamma[k * self.p..(k + 1) * self.p];
            for (s, g) in row.iter_mut().enumerate() {
                *g = kappa * *g + readout.weight(topo.posts[s], k) * eligibility[s];
            }
        }
        (2 * self.outputs * self.p) as u64
    }
}

/// `dL/dw_s ≈ Σ_{k,t} ∂L/∂y^t_k · γ^{t,k}_s`, causal in the readout as well.
pub fn eprop_readout_gradient(
    readout: &Readout,
    traj: &Trajectory,
    jac: &LocalJacobians,
    targets: &Series,
) -> Result<Gradient> {
    let topo = jac.topology();
    let steps = jac.steps();
    let (y, _) = readout_forward(readout, traj, targets)?;
    let errors = output_errors(&y, targets);
    let p = topo.p();
    let mut trace = ImplicitTrace::new(topo);
    let mut gamma = ReadoutTrace::new(readout, topo);
    let mut values = vec![0.0; p];
    let mut per_step = Series::zeros(steps, p);
    let mut flops = 0;
    for t in 1..=steps {
        flops += trace.step(topo, jac.slice(t));
        flops += gamma.step(readout, topo, trace.eligibility());
        let err = errors.at(t);
        let contrib = per_step.at_mut(t);
        for k in 0..readout.outputs {
            for (s, c) in contrib.iter_mut().enumerate() {
                *c += err[k] * gamma.gamma(k, s);
            }
        }
        flops += (readout.outputs * p) as u64;
        for (v, c) in values.iter_mut().zip(contrib.iter()) {
            *v += c;
        }
    }
    let cost = Cost { flops, trace_floats: trace.stored_floats() + gamma.stored_floats() };
    Ok(Gradient { values, per_step: Some(per_step), cost })
}

/// `F_α(x^t) = α F_α(x^{t-1}) + x^t`, starting from `F_α(x^first) = x^first`.
pub fn low_pass_filter(x: &[f64], alpha: f64) -> Vec<f64> {
    let mut acc = 0.0;
    x.iter()
        .map(|&v| {
            acc = alpha * acc + v;
            acc
        })
        .collect()
}

/// Learning-signal form: `dL/dw_s ≈ Σ_t L^t_j F_κ(e^t_s)` with
/// `L^t_j = Σ_k w_out[j][k] ∂L/∂y^t_k`.
///
/// Returns the gradient and the learning signals (`T x n`).
pub fn lsnn_gradient(
    readout: &Readout,
    traj: &Trajectory,
    jac: &LocalJacobians,
    targets: &Series,
) -> Result<(Gradient, Series)> {
    let topo = jac.topology();
    let steps = jac.steps();
    let (y, _) = readout_forward(readout, traj, targets)?;
    let signals = project(readout, topo.n, &output_errors(&y, targets));
    let p = topo.p();
    let kappa = readout.kappa();
    let mut trace = ImplicitTrace::new(topo);
    let mut filtered = vec![0.0; p];
    let mut values = vec![0.0; p];
    let mut per_step = Series::zeros(steps, p);
    let mut flops = 0;
    for t in 1..=steps {
        flops += trace.step(topo, jac.slice(t));
        let l = signals.at(t);
        let contrib = per_step.at_mut(t);
        for (s, c) in contrib.iter_mut().enumerate() {
            filtered[s] = kappa * filtered[s] + trace.e(s);
            *c = l[topo.posts[s]] * filtered[s];
        }
        flops += (2 * p) as u64;
        for (v, c) in values.iter_mut().zip(contrib.iter()) {
            *v += c;
        }
    }
    let cost = Cost { flops, trace_floats: trace.stored_floats() + p };
    Ok((Gradient { values, per_step: Some(per_step), cost }, signals))
}
