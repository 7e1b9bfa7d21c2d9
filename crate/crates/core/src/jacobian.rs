//! Local Jacobians: the four partial-derivative families every gradient
//! algorithm consumes.
//!
//! For step `t` a [`JacobianSlice`] holds
//!
//! - `D[t][j] = ∂h^t_j/∂h^{t-1}_j` (implicit recurrence, `d_h x d_h`),
//! - `psi[t][j] = ∂o^t_j/∂h^t_j` (row of length `d_h`),
//! - `E[t][k][j] = ∂h^{t+1}_k/∂o^t_j` (column, one per explicit edge),
//! - `G[t][s] = ∂h^t_j/∂w_s` for synapse `s` with target `j` (column).
//!
//! Slice 0 carries only `E[0]`; `psi[0]` and `G[0]` are zero because the
//! initial outputs are constants.

use alloc::vec;
use alloc::vec::Vec;

use crate::model::{source_value, Network, Source, Trajectory};

/// Explicit recurrence `o_pre -> h_post` one step later.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub post: usize,
    pub pre: usize,
    /// Neuron-to-neuron synapse carrying this edge, if any. Self edges of
    /// spiking cells (reset, adaptation) exist without one.
    pub synapse: Option<usize>,
}

/// Index structure shared by the Jacobians and every trace bank.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub n: usize,
    pub dh: usize,
    /// Target neuron of every synapse.
    pub posts: Vec<usize>,
    pub pres: Vec<Source>,
    /// Explicit edges sorted by `(post, pre)`.
    pub edges: Vec<Edge>,
    /// Edge indices grouped by postsynaptic neuron.
    pub incoming: Vec<Vec<usize>>,
    /// Edge indices grouped by presynaptic neuron.
    pub outgoing: Vec<Vec<usize>>,
}

impl Topology {
    pub fn of(net: &Network) -> Self {
        let n = net.n();
        let mut edges: Vec<Edge> = net
            .synapses()
            .iter()
            .enumerate()
            .filter_map(|(s, syn)| match syn.pre {
                Source::Neuron(pre) => Some(Edge { post: syn.post, pre, synapse: Some(s) }),
                Source::Input(_) => None,
            })
            .collect();
        if net.cell().self_column().is_some() {
            for j in 0..n {
                if !edges.iter().any(|e| e.post == j && e.pre == j) {
                    edges.push(Edge { post: j, pre: j, synapse: None });
                }
            }
        }
        edges.sort_by_key(|e| (e.post, e.pre));
        let mut incoming = vec![Vec::new(); n];
        let mut outgoing = vec![Vec::new(); n];
        for (idx, e) in edges.iter().enumerate() {
            incoming[e.post].push(idx);
            outgoing[e.pre].push(idx);
        }
        Self {
            n,
            dh: net.hidden_dim(),
            posts: net.synapses().iter().map(|s| s.post).collect(),
            pres: net.synapses().iter().map(|s| s.pre).collect(),
            edges,
            incoming,
            outgoing,
        }
    }

    pub fn p(&self) -> usize {
        self.posts.len()
    }

    pub fn edge_between(&self, post: usize, pre: usize) -> Option<usize> {
        self.incoming[post].iter().copied().find(|&e| self.edges[e].pre == pre)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JacobianSlice {
    /// `n * d_h * d_h`, row-major per neuron.
    pub d: Vec<f64>,
    /// `n * d_h`.
    pub psi: Vec<f64>,
    /// `edges * d_h`.
    pub e: Vec<f64>,
    /// `p * d_h`.
    pub g: Vec<f64>,
}

impl JacobianSlice {
    fn zeros(topo: &Topology) -> Self {
        let dh = topo.dh;
        Self {
            d: vec![0.0; topo.n * dh * dh],
            psi: vec![0.0; topo.n * dh],
            e: vec![0.0; topo.edges.len() * dh],
            g: vec![0.0; topo.p() * dh],
        }
    }

    /// Slice for step 0: only the explicit Jacobian is populated.
    pub fn initial(net: &Network, topo: &Topology) -> Self {
        let mut slice = Self::zeros(topo);
        fill_implicit(net, topo, &mut slice.d);
        fill_explicit(net, topo, &mut slice.e);
        slice
    }

    /// Slice for step `t >= 1` from the state at `t` and the presynaptic
    /// values at `t - 1`.
    pub fn at_step(net: &Network, topo: &Topology, h_t: &[f64], o_prev: &[f64], x_prev: &[f64]) -> Self {
        let dh = topo.dh;
        let mut slice = Self::zeros(topo);
        fill_implicit(net, topo, &mut slice.d);
        for j in 0..topo.n {
            net.cell().output_jacobian(&h_t[j * dh..(j + 1) * dh], &mut slice.psi[j * dh..(j + 1) * dh]);
        }
        fill_explicit(net, topo, &mut slice.e);
        let col = net.cell().drive_column();
        for (s, syn) in net.synapses().iter().enumerate() {
            let pre = source_value(syn.pre, o_prev, x_prev);
            for (g, c) in slice.g[s * dh..(s + 1) * dh].iter_mut().zip(col) {
                *g = pre * c;
            }
        }
        slice
    }

    /// Re-evaluates the explicit entries after the weights changed.
    pub fn refresh_explicit(&mut self, net: &Network, topo: &Topology) {
        fill_explicit(net, topo, &mut self.e);
    }

    pub fn d(&self, j: usize, dh: usize) -> &[f64] {
        &self.d[j * dh * dh..(j + 1) * dh * dh]
    }

    pub fn psi(&self, j: usize, dh: usize) -> &[f64] {
        &self.psi[j * dh..(j + 1) * dh]
    }

    pub fn e(&self, edge: usize, dh: usize) -> &[f64] {
        &self.e[edge * dh..(edge + 1) * dh]
    }

    pub fn g(&self, s: usize, dh: usize) -> &[f64] {
        &self.g[s * dh..(s + 1) * dh]
    }
}

fn fill_implicit(net: &Network, topo: &Topology, d: &mut [f64]) {
    let dd = topo.dh * topo.dh;
    for j in 0..topo.n {
        net.cell().implicit_jacobian(j, &mut d[j * dd..(j + 1) * dd]);
    }
}

fn fill_explicit(net: &Network, topo: &Topology, e: &mut [f64]) {
    let dh = topo.dh;
    let col = net.cell().drive_column();
    let self_col = net.cell().self_column();
    for (idx, edge) in topo.edges.iter().enumerate() {
        let out = &mut e[idx * dh..(idx + 1) * dh];
        let w = edge.synapse.map_or(0.0, |s| net.synapses()[s].weight);
        for (o, c) in out.iter_mut().zip(col) {
            *o = w * c;
        }
        if edge.post == edge.pre {
            if let Some(sc) = self_col {
                for (o, c) in out.iter_mut().zip(sc) {
                    *o += c;
                }
            }
        }
    }
}

/// Jacobians for every step `0..=T` of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalJacobians {
    topo: Topology,
    slices: Vec<JacobianSlice>,
}

impl LocalJacobians {
    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn steps(&self) -> usize {
        self.slices.len() - 1
    }

    pub fn slice(&self, t: usize) -> &JacobianSlice {
        &self.slices[t]
    }

    pub fn d(&self, t: usize, j: usize) -> &[f64] {
        self.slices[t].d(j, self.topo.dh)
    }

    pub fn psi(&self, t: usize, j: usize) -> &[f64] {
        self.slices[t].psi(j, self.topo.dh)
    }

    /// `∂h^{t+1}_post / ∂o^t_pre` for the given edge.
    pub fn e(&self, t: usize, edge: usize) -> &[f64] {
        self.slices[t].e(edge, self.topo.dh)
    }

    pub fn g(&self, t: usize, s: usize) -> &[f64] {
        self.slices[t].g(s, self.topo.dh)
    }

    /// Negates one component of one explicit-recurrence entry. Used to check
    /// that the equivalence suites are not vacuous.
    pub fn flip_explicit(&mut self, t: usize, edge: usize, component: usize) {
        let dh = self.topo.dh;
        self.slices[t].e[edge * dh + component] *= -1.0;
    }

    /// Number of stored nonzero explicit columns at step `t`.
    pub fn nonzero_explicit(&self, t: usize) -> usize {
        let dh = self.topo.dh;
        (0..self.topo.edges.len()).filter(|&e| self.slices[t].e[e * dh..(e + 1) * dh].iter().any(|&v| v != 0.0)).count()
    }
}

/// Evaluates all local Jacobians along a trajectory.
pub fn local_jacobians(net: &Network, traj: &Trajectory) -> LocalJacobians {
    let topo = Topology::of(net);
    let mut slices = Vec::with_capacity(traj.steps() + 1);
    slices.push(JacobianSlice::initial(net, &topo));
    for t in 1..=traj.steps() {
        slices.push(JacobianSlice::at_step(net, &topo, traj.h_step(t), traj.o_step(t - 1), traj.inputs().row(t - 1)));
    }
    LocalJacobians { topo, slices }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{simulate, AlifParams, Cell, LifParams, Synapse};
    use crate::readout::Readout;
    use crate::series::Series;

    #[test]
    fn leaky_tanh_implicit_is_the_leak() {
        let syn = vec![Synapse::new(Source::Input(0), 0, 0.3), Synapse::new(Source::Neuron(0), 1, 0.8)];
        let net = Network::new(2, 1, Cell::leaky_tanh(vec![0.25, 0.75]), syn, Readout::identity(2), 0).unwrap();
        let traj = simulate(&net, &Series::from_flat(1, vec![1.0, -1.0, 0.5]), 3).unwrap();
        let jac = local_jacobians(&net, &traj);
        for t in 1..=3 {
            assert_eq!(jac.d(t, 0), &[0.25]);
            assert_eq!(jac.d(t, 1), &[0.75]);
        }
    }

    #[test]
    fn surrogate_peaks_at_threshold() {
        let p = LifParams { alpha: 0.5, v_th: 1.0, gamma_pd: 0.3, reset: 1.0 };
        let net =
            Network::new(1, 1, Cell::Lif(p), vec![Synapse::new(Source::Input(0), 0, 1.0)], Readout::identity(1), 0)
                .unwrap();
        let traj = simulate(&net, &Series::from_flat(1, vec![1.0]), 1).unwrap();
        assert_eq!(traj.h(1, 0), &[1.0]);
        let jac = local_jacobians(&net, &traj);
        assert_eq!(jac.psi(1, 0), &[0.3]);
        assert_eq!(jac.psi(0, 0), &[0.0]);
    }

    #[test]
    fn absent_synapses_are_structurally_zero() {
        let syn = vec![Synapse::new(Source::Neuron(0), 1, 0.5), Synapse::new(Source::Input(0), 0, 1.0)];
        let net = Network::new(3, 1, Cell::leaky_tanh(vec![0.5; 3]), syn, Readout::identity(3), 0).unwrap();
        let topo = Topology::of(&net);
        assert_eq!(topo.edges.len(), 1);
        assert_eq!(topo.edge_between(1, 0), Some(0));
        assert_eq!(topo.edge_between(0, 1), None);
        assert_eq!(topo.edge_between(2, 2), None);
    }

    #[test]
    fn spiking_cells_get_self_edges() {
        let net = Network::new(
            2,
            0,
            Cell::Alif(AlifParams::default()),
            vec![Synapse::new(Source::Neuron(0), 0, 0.4), Synapse::new(Source::Neuron(0), 1, 0.2)],
            Readout::identity(2),
            0,
        )
        .unwrap();
        let traj = simulate(&net, &Series::zeros(2, 0), 2).unwrap();
        let jac = local_jacobians(&net, &traj);
        let topo = jac.topology();
        assert_eq!(topo.edges.len(), 3);
        let own = topo.edge_between(0, 0).unwrap();
        assert_eq!(topo.edges[own].synapse, Some(0));
        assert_eq!(jac.e(1, own), &[0.4 - 1.0, 1.0]);
        let bare = topo.edge_between(1, 1).unwrap();
        assert_eq!(jac.e(1, bare), &[-1.0, 0.0 + 1.0]);
    }
}
