//! Network model: cells, synapses, and the forward dynamics.
//!
//! Time convention: the hidden state `h^t_j` is computed from `h^{t-1}_j`
//! (implicit recurrence) and from the previous outputs `o^{t-1}` of all
//! presynaptic nodes (explicit recurrences). External inputs act as the
//! outputs of virtual input nodes, so input row `x^{t-1}` drives step `t`.
//! Initial hidden states and neuron outputs are zero.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::readout::Readout;
use crate::series::Series;

/// Presynaptic end of a synapse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Source {
    Input(usize),
    Neuron(usize),
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Input(i) => write!(f, "input {i}"),
            Source::Neuron(i) => write!(f, "neuron {i}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Synapse {
    pub pre: Source,
    pub post: usize,
    pub weight: f64,
}

impl Synapse {
    pub fn new(pre: Source, post: usize, weight: f64) -> Self {
        Self { pre, post, weight }
    }

    /// Self-synapses are explicit recurrences, not implicit ones.
    pub fn is_self(&self) -> bool {
        self.pre == Source::Neuron(self.post)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LifParams {
    /// Membrane leak, in `(0, 1)`.
    pub alpha: f64,
    pub v_th: f64,
    /// Peak of the triangular surrogate derivative.
    pub gamma_pd: f64,
    /// Soft-reset coefficient: a spike subtracts `reset * v_th` at the next step.
    pub reset: f64,
}

impl Default for LifParams {
    fn default() -> Self {
        Self { alpha: 0.9, v_th: 1.0, gamma_pd: 0.3, reset: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlifParams {
    pub alpha: f64,
    pub v_th: f64,
    pub gamma_pd: f64,
    pub reset: f64,
    /// Adaptation leak, in `(0, 1)`.
    pub rho: f64,
    /// Threshold increase per unit of adaptation variable.
    pub beta_a: f64,
}

impl Default for AlifParams {
    fn default() -> Self {
        Self { alpha: 0.9, v_th: 1.0, gamma_pd: 0.3, reset: 1.0, rho: 0.95, beta_a: 0.2 }
    }
}

/// Neuron dynamics shared by every neuron of a network.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    /// `v^t = a_j v^{t-1} + drive`, `o^t = tanh(v^t)`, or `o^t = v^t` when
    /// `linear_output` is set.
    LeakyTanh { leak: Vec<f64>, linear_output: bool },
    /// Leaky integrate-and-fire with soft reset; hidden state `(v)`.
    Lif(LifParams),
    /// Adaptive-threshold LIF; hidden state `(v, b)`.
    Alif(AlifParams),
}

/// Triangular pseudo-derivative `gamma * max(0, 1 - |v - thr| / v_th)`.
#[inline]
pub fn surrogate(v: f64, thr: f64, v_th: f64, gamma: f64) -> f64 {
    gamma * (1.0 - libm::fabs(v - thr) / v_th).max(0.0)
}

fn check_leak(name: &'static str, value: f64) -> Result<()> {
    // Zero is admitted so that memoryless hand-computable cases stay expressible.
    if (0.0..1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name, value })
    }
}

impl Cell {
    pub fn leaky_tanh(leak: Vec<f64>) -> Self {
        Cell::LeakyTanh { leak, linear_output: false }
    }

    pub fn leaky_linear(leak: Vec<f64>) -> Self {
        Cell::LeakyTanh { leak, linear_output: true }
    }

    pub fn hidden_dim(&self) -> usize {
        match self {
            Cell::LeakyTanh { .. } | Cell::Lif(_) => 1,
            Cell::Alif(_) => 2,
        }
    }

    pub fn is_spiking(&self) -> bool {
        !matches!(self, Cell::LeakyTanh { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Cell::LeakyTanh { linear_output: false, .. } => "leaky_tanh",
            Cell::LeakyTanh { linear_output: true, .. } => "leaky_linear",
            Cell::Lif(_) => "lif",
            Cell::Alif(_) => "alif",
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        match self {
            Cell::LeakyTanh { leak, .. } => {
                if leak.len() != n {
                    return Err(Error::InvalidNetwork("leak vector length must equal n"));
                }
                leak.iter().try_for_each(|&a| check_leak("leak", a))
            }
            Cell::Lif(p) => {
                check_leak("alpha", p.alpha)?;
                check_spiking(p.v_th, p.gamma_pd, p.reset)
            }
            Cell::Alif(p) => {
                check_leak("alpha", p.alpha)?;
                check_leak("rho", p.rho)?;
                if !(p.beta_a >= 0.0 && p.beta_a.is_finite()) {
                    return Err(Error::InvalidParameter { name: "beta_a", value: p.beta_a });
                }
                check_spiking(p.v_th, p.gamma_pd, p.reset)
            }
        }
    }

    /// Derivative of the hidden state with respect to the summed synaptic drive.
    pub(crate) fn drive_column(&self) -> &'static [f64] {
        match self {
            Cell::Alif(_) => &[1.0, 0.0],
            _ => &[1.0],
        }
    }

    /// Explicit self-coupling `o^{t-1}_j -> h^t_j` that exists without a
    /// self-synapse (reset and adaptation), or `None` if the cell has none.
    pub(crate) fn self_column(&self) -> Option<[f64; 2]> {
        match self {
            Cell::LeakyTanh { .. } => None,
            Cell::Lif(p) if p.reset == 0.0 => None,
            Cell::Lif(p) => Some([-p.reset * p.v_th, 0.0]),
            Cell::Alif(p) => Some([-p.reset * p.v_th, 1.0]),
        }
    }

    /// Advances neuron `j` by one step and returns its new output.
    pub(crate) fn step(&self, j: usize, h_prev: &[f64], o_prev_self: f64, drive: f64, h: &mut [f64]) -> f64 {
        match self {
            Cell::LeakyTanh { leak, linear_output } => {
                h[0] = leak[j] * h_prev[0] + drive;
                if *linear_output {
                    h[0]
                } else {
                    libm::tanh(h[0])
                }
            }
            Cell::Lif(p) => {
                h[0] = p.alpha * h_prev[0] + drive - p.reset * p.v_th * o_prev_self;
                heaviside(h[0] - p.v_th)
            }
            Cell::Alif(p) => {
                h[1] = p.rho * h_prev[1] + o_prev_self;
                h[0] = p.alpha * h_prev[0] + drive - p.reset * p.v_th * o_prev_self;
                heaviside(h[0] - (p.v_th + p.beta_a * h[1]))
            }
        }
    }

    /// `∂h^t_j / ∂h^{t-1}_j`, row-major.
    pub(crate) fn implicit_jacobian(&self, j: usize, out: &mut [f64]) {
        match self {
            Cell::LeakyTanh { leak, .. } => out[0] = leak[j],
            Cell::Lif(p) => out[0] = p.alpha,
            Cell::Alif(p) => {
                out[0] = p.alpha;
                out[1] = 0.0;
                out[2] = 0.0;
                out[3] = p.rho;
            }
        }
    }

    /// `∂o^t_j / ∂h^t_j` as a row; the surrogate for spiking cells.
    pub(crate) fn output_jacobian(&self, h: &[f64], out: &mut [f64]) {
        match self {
            Cell::LeakyTanh { linear_output: true, .. } => out[0] = 1.0,
            Cell::LeakyTanh { linear_output: false, .. } => {
                let o = libm::tanh(h[0]);
                out[0] = 1.0 - o * o;
            }
            Cell::Lif(p) => out[0] = surrogate(h[0], p.v_th, p.v_th, p.gamma_pd),
            Cell::Alif(p) => {
                let psi = surrogate(h[0], p.v_th + p.beta_a * h[1], p.v_th, p.gamma_pd);
                out[0] = psi;
                out[1] = -p.beta_a * psi;
            }
        }
    }
}

fn check_spiking(v_th: f64, gamma_pd: f64, reset: f64) -> Result<()> {
    if !(v_th > 0.0 && v_th.is_finite()) {
        return Err(Error::InvalidParameter { name: "v_th", value: v_th });
    }
    if !(gamma_pd > 0.0 && gamma_pd.is_finite()) {
        return Err(Error::InvalidParameter { name: "gamma_pd", value: gamma_pd });
    }
    if !reset.is_finite() {
        return Err(Error::InvalidParameter { name: "reset", value: reset });
    }
    Ok(())
}

#[inline]
fn heaviside(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// The static object whose parameter gradients are computed.
///
/// Synapses are kept in one list covering both input and recurrent
/// connections; gradients are indexed by position in that list.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    n: usize,
    n_inputs: usize,
    cell: Cell,
    synapses: Vec<Synapse>,
    readout: Readout,
    seed: u64,
}

impl Network {
    pub fn new(
        n: usize,
        n_inputs: usize,
        cell: Cell,
        synapses: Vec<Synapse>,
        readout: Readout,
        seed: u64,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidNetwork("network needs at least one neuron"));
        }
        cell.validate(n)?;
        readout.validate(n)?;
        let mut keys = Vec::with_capacity(synapses.len());
        for s in &synapses {
            let in_range = s.post < n
                && match s.pre {
                    Source::Input(i) => i < n_inputs,
                    Source::Neuron(i) => i < n,
                };
            if !in_range {
                return Err(Error::NodeOutOfRange { pre: s.pre, post: s.post });
            }
            if !s.weight.is_finite() {
                return Err(Error::InvalidParameter { name: "weight", value: s.weight });
            }
            keys.push((s.pre, s.post));
        }
        keys.sort_unstable();
        if let Some(w) = keys.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateSynapse { pre: w[0].0, post: w[0].1 });
        }
        Ok(Self { n, n_inputs, cell, synapses, readout, seed })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn cell(&self) -> &Cell {
        &self.cell
    }

    pub fn hidden_dim(&self) -> usize {
        self.cell.hidden_dim()
    }

    pub fn synapses(&self) -> &[Synapse] {
        &self.synapses
    }

    /// Number of synapses `p`, inputs included.
    pub fn p(&self) -> usize {
        self.synapses.len()
    }

    /// Number of neuron-to-neuron synapses.
    pub fn recurrent_count(&self) -> usize {
        self.synapses.iter().filter(|s| matches!(s.pre, Source::Neuron(_))).count()
    }

    pub fn readout(&self) -> &Readout {
        &self.readout
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn weights(&self) -> Vec<f64> {
        self.synapses.iter().map(|s| s.weight).collect()
    }

    /// Replaces all synaptic weights, keeping the topology.
    pub fn set_weights(&mut self, weights: &[f64]) {
        assert_eq!(weights.len(), self.synapses.len());
        for (s, &w) in self.synapses.iter_mut().zip(weights) {
            s.weight = w;
        }
    }

    /// `w <- w - eta * delta`.
    pub fn descend(&mut self, delta: &[f64], eta: f64) {
        assert_eq!(delta.len(), self.synapses.len());
        for (s, d) in self.synapses.iter_mut().zip(delta) {
            s.weight -= eta * d;
        }
    }

    pub fn with_readout(mut self, readout: Readout) -> Result<Self> {
        readout.validate(self.n)?;
        self.readout = readout;
        Ok(self)
    }

    /// Summed synaptic drive of every neuron from the previous outputs and inputs.
    pub(crate) fn drives(&self, o_prev: &[f64], x_prev: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|d| *d = 0.0);
        for s in &self.synapses {
            out[s.post] += s.weight * source_value(s.pre, o_prev, x_prev);
        }
    }

    /// One step of the dynamics for all neurons.
    pub(crate) fn step(
        &self,
        h_prev: &[f64],
        o_prev: &[f64],
        x_prev: &[f64],
        drive: &mut [f64],
        h: &mut [f64],
        o: &mut [f64],
    ) {
        let dh = self.hidden_dim();
        self.drives(o_prev, x_prev, drive);
        for j in 0..self.n {
            let span = j * dh..(j + 1) * dh;
            o[j] = self.cell.step(j, &h_prev[span.clone()], o_prev[j], drive[j], &mut h[span]);
        }
    }
}

#[inline]
pub(crate) fn source_value(pre: Source, o: &[f64], x: &[f64]) -> f64 {
    match pre {
        Source::Input(i) => x[i],
        Source::Neuron(i) => o[i],
    }
}

/// Recorded forward run: hidden states and outputs for steps `0..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    n: usize,
    dh: usize,
    steps: usize,
    h: Vec<f64>,
    o: Vec<f64>,
    inputs: Series,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn hidden_dim(&self) -> usize {
        self.dh
    }

    /// Hidden vector of neuron `j` at step `t` (`h^0 = 0`).
    pub fn h(&self, t: usize, j: usize) -> &[f64] {
        let base = (t * self.n + j) * self.dh;
        &self.h[base..base + self.dh]
    }

    /// All hidden vectors at step `t`, neuron-major.
    pub fn h_step(&self, t: usize) -> &[f64] {
        &self.h[t * self.n * self.dh..(t + 1) * self.n * self.dh]
    }

    pub fn o(&self, t: usize, j: usize) -> f64 {
        self.o[t * self.n + j]
    }

    /// All outputs at step `t`.
    pub fn o_step(&self, t: usize) -> &[f64] {
        &self.o[t * self.n..(t + 1) * self.n]
    }

    /// Inputs as seen by the network; row `t` drives step `t + 1`.
    pub fn inputs(&self) -> &Series {
        &self.inputs
    }
}

/// Runs the network for `steps` steps from the zero state.
pub fn simulate(net: &Network, inputs: &Series, steps: usize) -> Result<Trajectory> {
    if inputs.rows() < steps {
        return Err(Error::InputShape { expected: steps, found: inputs.rows() });
    }
    if inputs.width() < net.n_inputs && steps > 0 {
        return Err(Error::InputShape { expected: net.n_inputs, found: inputs.width() });
    }
    let n = net.n;
    let dh = net.hidden_dim();
    let mut h = vec![0.0; (steps + 1) * n * dh];
    let mut o = vec![0.0; (steps + 1) * n];
    let mut drive = vec![0.0; n];
    let mut kept = Vec::with_capacity(steps * net.n_inputs);
    for t in 1..=steps {
        let x_prev = inputs.row(t - 1);
        kept.extend_from_slice(&x_prev[..net.n_inputs]);
        let (h_done, h_rest) = h.split_at_mut(t * n * dh);
        let (o_done, o_rest) = o.split_at_mut(t * n);
        let h_prev = &h_done[(t - 1) * n * dh..];
        let o_prev = &o_done[(t - 1) * n..];
        let h_t = &mut h_rest[..n * dh];
        let o_t = &mut o_rest[..n];
        net.step(h_prev, o_prev, x_prev, &mut drive, h_t, o_t);
        if let Some(j) =
            (0..n).find(|&j| !o_t[j].is_finite() || h_t[j * dh..(j + 1) * dh].iter().any(|v| !v.is_finite()))
        {
            return Err(Error::Divergent { t, neuron: j });
        }
    }
    let inputs = if net.n_inputs == 0 { Series::zeros(steps, 0) } else { Series::from_flat(net.n_inputs, kept) };
    Ok(Trajectory { n, dh, steps, h, o, inputs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::readout::Readout;

    fn single(cell: Cell, syn: Vec<Synapse>, n_inputs: usize) -> Network {
        Network::new(1, n_inputs, cell, syn, Readout::identity(1), 0).unwrap()
    }

    #[test]
    fn zero_input_stays_at_fixed_point() {
        let net = single(
            Cell::leaky_tanh(vec![0.7]),
            vec![Synapse::new(Source::Input(0), 0, 2.0), Synapse::new(Source::Neuron(0), 0, -1.5)],
            1,
        );
        let traj = simulate(&net, &Series::zeros(5, 1), 5).unwrap();
        for t in 0..=5 {
            assert_eq!(traj.h(t, 0), &[0.0]);
            assert_eq!(traj.o(t, 0), 0.0);
        }
    }

    #[test]
    fn linear_cell_hand_unroll() {
        let net = single(Cell::leaky_linear(vec![0.5]), vec![Synapse::new(Source::Input(0), 0, 1.0)], 1);
        let traj = simulate(&net, &Series::from_rows(1, &[[1.0], [1.0]]), 2).unwrap();
        assert_eq!(traj.h(1, 0), &[1.0]);
        assert_eq!(traj.h(2, 0), &[1.5]);
    }

    #[test]
    fn subthreshold_lif_is_silent() {
        let cell = Cell::Lif(LifParams { alpha: 0.9, v_th: 1.0, ..LifParams::default() });
        let net = single(cell, vec![Synapse::new(Source::Input(0), 0, 0.05)], 1);
        // Steady state 0.05 / 0.1 = 0.5 < v_th.
        let traj = simulate(&net, &Series::from_flat(1, vec![1.0; 200]), 200).unwrap();
        assert!((1..=200).all(|t| traj.o(t, 0) == 0.0));
    }

    #[test]
    fn lif_soft_reset_subtracts_threshold() {
        let cell = Cell::Lif(LifParams { alpha: 0.5, v_th: 1.0, gamma_pd: 0.3, reset: 1.0 });
        let net = single(cell, vec![Synapse::new(Source::Input(0), 0, 1.2)], 1);
        let traj = simulate(&net, &Series::from_flat(1, vec![1.0, 0.0]), 2).unwrap();
        assert_eq!(traj.o(1, 0), 1.0);
        assert!((traj.h(2, 0)[0] - (0.6 - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn alif_threshold_adapts() {
        let p = AlifParams { alpha: 0.0, v_th: 1.0, gamma_pd: 0.3, reset: 0.0, rho: 0.5, beta_a: 1.0 };
        let net = single(Cell::Alif(p), vec![Synapse::new(Source::Input(0), 0, 1.5)], 1);
        let traj = simulate(&net, &Series::from_flat(1, vec![1.0; 3]), 3).unwrap();
        // v = 1.5 every step; b^2 = 1 so the threshold rises to 2 and blocks the second spike.
        assert_eq!(traj.o(1, 0), 1.0);
        assert_eq!(traj.h(2, 0), &[1.5, 1.0]);
        assert_eq!(traj.o(2, 0), 0.0);
    }

    #[test]
    fn divergence_is_reported() {
        let syn = vec![Synapse::new(Source::Input(0), 0, 1e200), Synapse::new(Source::Neuron(0), 0, 1e200)];
        let net = single(Cell::leaky_linear(vec![0.0]), syn, 1);
        let err = simulate(&net, &Series::from_flat(1, vec![1.0; 4]), 4).unwrap_err();
        assert_eq!(err, Error::Divergent { t: 2, neuron: 0 });
    }

    #[test]
    fn validation_rejects_bad_networks() {
        let r = Readout::identity(2);
        let dup = vec![Synapse::new(Source::Neuron(0), 1, 1.0), Synapse::new(Source::Neuron(0), 1, 2.0)];
        assert!(matches!(
            Network::new(2, 0, Cell::leaky_tanh(vec![0.5; 2]), dup, r.clone(), 0),
            Err(Error::DuplicateSynapse { .. })
        ));
        let oob = vec![Synapse::new(Source::Input(3), 1, 1.0)];
        assert!(matches!(
            Network::new(2, 1, Cell::leaky_tanh(vec![0.5; 2]), oob, r.clone(), 0),
            Err(Error::NodeOutOfRange { .. })
        ));
        assert!(matches!(
            Network::new(2, 0, Cell::leaky_tanh(vec![1.0, 0.5]), vec![], r.clone(), 0),
            Err(Error::InvalidParameter { name: "leak", .. })
        ));
        let lif = Cell::Lif(LifParams { v_th: 0.0, ..LifParams::default() });
        assert!(Network::new(2, 0, lif, vec![], r, 0).is_err());
    }

    #[test]
    fn short_inputs_are_rejected() {
        let net = single(Cell::leaky_tanh(vec![0.5]), vec![], 1);
        assert!(matches!(simulate(&net, &Series::zeros(2, 1), 3), Err(Error::InputShape { .. })));
    }
}
