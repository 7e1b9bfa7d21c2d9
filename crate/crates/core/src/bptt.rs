//! Exact gradient by backward recursion over the unrolled graph.
//!
//! The total derivative with respect to each output collects the direct
//! loss partial plus every explicit path into the next step's hidden
//! states; the total derivative with respect to each hidden state adds the
//! implicit path into the same neuron's next state. Weight gradients then
//! contract the hidden adjoints with `G`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Result;
use crate::gradient::{check_partials, Cost, Gradient};
use crate::jacobian::LocalJacobians;
use crate::linalg::{dot, vec_mat};
use crate::series::Series;

/// Total derivatives `dL/do^t_j` and `dL/dh^t_j` for `t in 1..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointState {
    n: usize,
    dh: usize,
    steps: usize,
    dldo: Vec<f64>,
    dldh: Vec<f64>,
}

impl AdjointState {
    fn zeros(n: usize, dh: usize, steps: usize) -> Self {
        Self { n, dh, steps, dldo: vec![0.0; steps * n], dldh: vec![0.0; steps * n * dh] }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// `dL/do^t_j`; zero beyond `T`.
    pub fn dldo(&self, t: usize, j: usize) -> f64 {
        if t == 0 || t > self.steps {
            0.0
        } else {
            self.dldo[(t - 1) * self.n + j]
        }
    }

    /// `dL/dh^t_j`, a row of length `d_h`.
    pub fn dldh(&self, t: usize, j: usize) -> &[f64] {
        let base = ((t - 1) * self.n + j) * self.dh;
        &self.dldh[base..base + self.dh]
    }

    /// Total output derivatives as a step-indexed series.
    pub fn output_adjoints(&self) -> Series {
        Series::from_flat(self.n, self.dldo.clone())
    }

    /// Stored adjoint scalars: `n * T * (d_h + 1)`.
    pub fn stored_floats(&self) -> usize {
        self.dldo.len() + self.dldh.len()
    }
}

/// `dL/do^t_j = ∂L/∂o^t_j + Σ_k dL/dh^{t+1}_k · E[t][k][j]` for every `j`.
///
/// Requires `dL/dh^{t+1}` to be filled already. Returns the multiply-adds.
pub fn output_adjoint_step(jac: &LocalJacobians, partials: &Series, state: &mut AdjointState, t: usize) -> u64 {
    let topo = jac.topology();
    let (n, dh) = (topo.n, topo.dh);
    let row = (t - 1) * n;
    state.dldo[row..row + n].copy_from_slice(partials.at(t));
    if t == state.steps {
        return 0;
    }
    let mut flops = 0;
    for j in 0..n {
        let mut acc = state.dldo[row + j];
        for &e in &topo.outgoing[j] {
            let k = topo.edges[e].post;
            acc += dot(state.dldh(t + 1, k), jac.e(t, e));
        }
        flops += (topo.outgoing[j].len() * dh) as u64;
        state.dldo[row + j] = acc;
    }
    flops
}

/// `dL/dh^t_j = dL/do^t_j · psi[t][j] + dL/dh^{t+1}_j · D[t+1][j]`.
pub fn hidden_adjoint_step(jac: &LocalJacobians, state: &mut AdjointState, t: usize) -> u64 {
    let topo = jac.topology();
    let (n, dh) = (topo.n, topo.dh);
    let mut carry = vec![0.0; dh];
    let mut flops = 0;
    for j in 0..n {
        let dldo = state.dldo(t, j);
        let has_future = t < state.steps;
        if has_future {
            vec_mat(state.dldh(t + 1, j), jac.d(t + 1, j), &mut carry);
            flops += (dh * dh) as u64;
        }
        let psi = jac.psi(t, j);
        let base = ((t - 1) * n + j) * dh;
        for c in 0..dh {
            let future = if has_future { carry[c] } else { 0.0 };
            state.dldh[base + c] = dldo * psi[c] + future;
        }
        flops += dh as u64;
    }
    flops
}

/// Runs both adjoint recursions from `T` down to 1.
pub fn backward_adjoints(jac: &LocalJacobians, partials: &Series) -> Result<(AdjointState, u64)> {
    let topo = jac.topology();
    let steps = jac.steps();
    check_partials(topo, steps, partials)?;
    let mut state = AdjointState::zeros(topo.n, topo.dh, steps);
    let mut flops = 0;
    for t in (1..=steps).rev() {
        flops += output_adjoint_step(jac, partials, &mut state, t);
        flops += hidden_adjoint_step(jac, &mut state, t);
    }
    Ok((state, flops))
}

/// `dL/dw_s = Σ_t dL/dh^t_j · G[t][s]`, with the adjoints kept for inspection.
pub fn bptt_gradient(jac: &LocalJacobians, partials: &Series) -> Result<(Gradient, AdjointState)> {
    let topo = jac.topology();
    let (state, mut flops) = backward_adjoints(jac, partials)?;
    let mut values = vec![0.0; topo.p()];
    for t in 1..=jac.steps() {
        for (s, v) in values.iter_mut().enumerate() {
            *v += dot(state.dldh(t, topo.posts[s]), jac.g(t, s));
        }
        flops += (topo.p() * topo.dh) as u64;
    }
    let cost = Cost { flops, trace_floats: state.stored_floats() };
    Ok((Gradient { values, per_step: None, cost }, state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases::{leaky_pair, self_recurrent};
    use crate::jacobian::local_jacobians;
    use crate::model::{simulate, Cell, Network, Source, Synapse};
    use crate::readout::Readout;

    #[test]
    fn last_step_has_no_future_terms() {
        let prep = self_recurrent().prepare().unwrap();
        let (state, _) = backward_adjoints(&prep.jac, &prep.partials).unwrap();
        assert_eq!(state.dldo(2, 0), prep.partials.at(2)[0]);
        assert_eq!(state.dldh(2, 0), &[state.dldo(2, 0) * prep.jac.psi(2, 0)[0]]);
        assert_eq!(state.dldo(3, 0), 0.0);
    }

    #[test]
    fn self_recurrence_doubles_first_output_adjoint() {
        let prep = self_recurrent().prepare().unwrap();
        let (state, _) = backward_adjoints(&prep.jac, &prep.partials).unwrap();
        assert_eq!(state.dldo(1, 0), 2.0);
    }

    #[test]
    fn leaky_pair_hidden_adjoint() {
        let prep = leaky_pair().prepare().unwrap();
        let (state, _) = backward_adjoints(&prep.jac, &prep.partials).unwrap();
        assert_eq!(state.dldo(1, 0), 1.0);
        assert_eq!(state.dldo(2, 0), 1.5);
        assert_eq!(state.dldh(1, 0), &[1.75]);
    }

    #[test]
    fn worked_gradients() {
        let prep = leaky_pair().prepare().unwrap();
        let (g, _) = bptt_gradient(&prep.jac, &prep.partials).unwrap();
        assert_eq!(g.values, [3.25]);
        let prep = self_recurrent().prepare().unwrap();
        let (g, _) = bptt_gradient(&prep.jac, &prep.partials).unwrap();
        assert_eq!(g.values, [2.0, 1.0]);
    }

    #[test]
    fn without_explicit_synapses_output_adjoints_are_partials() {
        let syn = vec![Synapse::new(Source::Input(0), 0, 0.7), Synapse::new(Source::Input(1), 1, -0.4)];
        let net = Network::new(2, 2, Cell::leaky_tanh(vec![0.3, 0.6]), syn, Readout::identity(2), 0).unwrap();
        let inputs = Series::from_flat(2, vec![1.0, 0.5, -0.2, 0.9, 0.4, 0.1]);
        let traj = simulate(&net, &inputs, 3).unwrap();
        let jac = local_jacobians(&net, &traj);
        let partials = Series::from_flat(2, vec![0.3, -1.0, 2.0, 0.5, -0.7, 0.25]);
        let (state, _) = backward_adjoints(&jac, &partials).unwrap();
        assert_eq!(state.output_adjoints(), partials);
    }

    #[test]
    fn memoryless_cells_decouple_hidden_adjoints() {
        let syn = vec![Synapse::new(Source::Input(0), 0, 1.0), Synapse::new(Source::Neuron(0), 1, 0.5)];
        let net = Network::new(2, 1, Cell::leaky_tanh(vec![0.0, 0.0]), syn, Readout::identity(2), 0).unwrap();
        let traj = simulate(&net, &Series::from_flat(1, vec![0.4, -0.3, 0.8]), 3).unwrap();
        let jac = local_jacobians(&net, &traj);
        let partials = Series::from_flat(2, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
        let (state, _) = backward_adjoints(&jac, &partials).unwrap();
        for t in 1..=3 {
            for j in 0..2 {
                assert_eq!(state.dldh(t, j), &[state.dldo(t, j) * jac.psi(t, j)[0]]);
            }
        }
    }

    #[test]
    fn zero_partials_give_zero_gradient() {
        let prep = self_recurrent().prepare().unwrap();
        let zero = Series::zeros(2, 1);
        let (g, _) = bptt_gradient(&prep.jac, &zero).unwrap();
        assert!(g.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn adjoint_store_matches_closed_form() {
        let prep = self_recurrent().prepare().unwrap();
        let (g, state) = bptt_gradient(&prep.jac, &prep.partials).unwrap();
        assert_eq!(state.stored_floats(), 1 * 2 * (1 + 1));
        assert_eq!(g.cost.trace_floats, 4);
    }

    #[test]
    fn partials_shape_is_checked() {
        let prep = self_recurrent().prepare().unwrap();
        assert!(bptt_gradient(&prep.jac, &Series::zeros(3, 1)).is_err());
    }
}
