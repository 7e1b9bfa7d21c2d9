//! Brute-force reference implementations.
//!
//! Every incremental trace recursion in this crate has a definitional
//! counterpart here: an explicit sum over all time anchors and neuron
//! paths, with each product formed left to right as a chain of Jacobian
//! matrices. None of these functions share code with the recursions they
//! check. They are exponential in the path length and meant for desk-scale
//! instances only.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::jacobian::LocalJacobians;
use crate::linalg::{identity, mat_mul, mat_vec, outer};
use crate::model::{simulate, Network};
use crate::readout::{readout_forward, Readout};
use crate::series::Series;

/// Default cap on the number of neuron paths a definitional sum may visit.
pub const DEFAULT_PATH_CAP: u128 = 1 << 20;

/// One term of an explicit-variable path sum.
#[derive(Debug, Clone, PartialEq)]
pub struct PathTerm {
    pub synapse: usize,
    /// Neurons from the current one back to the synapse's target:
    /// `[k_r, ..., k_1, k_0 = j]`.
    pub path: Vec<usize>,
    /// Jump times `τ_1 > ... > τ_r` followed by the anchor `t_0 <= τ_r`
    /// at which the synapse acted.
    pub anchors: Vec<usize>,
    pub value: Vec<f64>,
}

/// Running left-to-right matrix product.
struct Chain {
    dh: usize,
    m: Vec<f64>,
    tmp: Vec<f64>,
}

impl Chain {
    fn new(dh: usize) -> Self {
        let mut m = vec![0.0; dh * dh];
        identity(dh, &mut m);
        Self { dh, m, tmp: vec![0.0; dh * dh] }
    }

    fn times(&mut self, factor: &[f64]) {
        mat_mul(&self.m, factor, self.dh, &mut self.tmp);
        core::mem::swap(&mut self.m, &mut self.tmp);
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dh];
        mat_vec(&self.m, v, &mut out);
        out
    }
}

/// `ε^t_s = Σ_{t' <= t} D[t] ··· D[t'+1] G[t']`.
pub fn implicit_variable_definitional(jac: &LocalJacobians, s: usize, t: usize) -> Vec<f64> {
    let topo = jac.topology();
    let (dh, j) = (topo.dh, topo.posts[s]);
    let mut sum = vec![0.0; dh];
    for anchor in 1..=t {
        let mut chain = Chain::new(dh);
        for u in (anchor + 1..=t).rev() {
            chain.times(jac.d(u, j));
        }
        for (acc, v) in sum.iter_mut().zip(chain.apply(jac.g(anchor, s))) {
            *acc += v;
        }
    }
    sum
}

/// Every nonzero-structure term of the explicit variable `β^t_s(path)`.
///
/// `path = [k_r, ..., k_1, j]` must end at the synapse's target. Paths
/// through a missing explicit edge contribute no terms.
pub fn path_terms(jac: &LocalJacobians, s: usize, path: &[usize], t: usize) -> Vec<PathTerm> {
    let topo = jac.topology();
    assert_eq!(path.last(), Some(&topo.posts[s]), "path must end at the synapse target");
    let mut edges = Vec::with_capacity(path.len().saturating_sub(1));
    for w in path.windows(2) {
        match topo.edge_between(w[0], w[1]) {
            Some(e) => edges.push(e),
            None => return Vec::new(),
        }
    }
    let mut out = Vec::new();
    let mut anchors = Vec::with_capacity(path.len());
    enumerate_anchors(jac, s, path, &edges, t, &mut anchors, &mut out);
    out
}

fn enumerate_anchors(
    jac: &LocalJacobians,
    s: usize,
    path: &[usize],
    edges: &[usize],
    t: usize,
    anchors: &mut Vec<usize>,
    out: &mut Vec<PathTerm>,
) {
    let depth = anchors.len();
    let jumps = path.len() - 1;
    if depth == jumps + 1 {
        out.push(PathTerm {
            synapse: s,
            path: path.to_vec(),
            anchors: anchors.clone(),
            value: evaluate_term(jac, s, path, edges, t, anchors),
        });
        return;
    }
    // Jumps need strictly earlier times; the final anchor may equal the last jump time.
    let upper = match depth {
        0 if jumps == 0 => t,
        0 => t.saturating_sub(1),
        d if d < jumps => anchors[d - 1] - 1,
        d => anchors[d - 1],
    };
    for a in 1..=upper {
        anchors.push(a);
        enumerate_anchors(jac, s, path, edges, t, anchors, out);
        anchors.pop();
    }
}

fn evaluate_term(
    jac: &LocalJacobians,
    s: usize,
    path: &[usize],
    edges: &[usize],
    t: usize,
    anchors: &[usize],
) -> Vec<f64> {
    let dh = jac.topology().dh;
    let jumps = edges.len();
    let mut chain = Chain::new(dh);
    let mut jump_matrix = vec![0.0; dh * dh];
    let mut top = t;
    for level in 0..jumps {
        let tau = anchors[level];
        let (k, k_next) = (path[level], path[level + 1]);
        for u in (tau + 2..=top).rev() {
            chain.times(jac.d(u, k));
        }
        outer(jac.e(tau, edges[level]), jac.psi(tau, k_next), &mut jump_matrix);
        chain.times(&jump_matrix);
        top = tau;
    }
    let anchor = anchors[jumps];
    let j = path[jumps];
    for u in (anchor + 1..=top).rev() {
        chain.times(jac.d(u, j));
    }
    chain.apply(jac.g(anchor, s))
}

/// `β^t_s(path)` as the sum of all its [`PathTerm`]s.
pub fn explicit_variable_definitional(jac: &LocalJacobians, s: usize, path: &[usize], t: usize) -> Vec<f64> {
    let mut sum = vec![0.0; jac.topology().dh];
    for term in path_terms(jac, s, path, t) {
        for (acc, v) in sum.iter_mut().zip(&term.value) {
            *acc += v;
        }
    }
    sum
}

fn path_count(n: usize, jumps: usize) -> u128 {
    if jumps == 0 {
        1
    } else {
        (n as u128).saturating_pow(jumps as u32 - 1)
    }
}

/// Visits every neuron path `[end, k_{r-1}, ..., k_1, j]` with exactly `jumps` jumps.
fn for_each_path(n: usize, end: usize, j: usize, jumps: usize, mut visit: impl FnMut(&[usize])) {
    if jumps == 0 {
        if end == j {
            visit(&[j]);
        }
        return;
    }
    let mut path = vec![0; jumps + 1];
    path[0] = end;
    path[jumps] = j;
    let inner = jumps - 1;
    let total = path_count(n, jumps);
    for code in 0..total {
        let mut c = code;
        for slot in 1..=inner {
            path[slot] = (c % n as u128) as usize;
            c /= n as u128;
        }
        visit(&path);
    }
}

/// Sum of `β^t_s` over all paths with exactly `jumps` explicit jumps ending at `k`.
pub fn order_variable_definitional(
    jac: &LocalJacobians,
    s: usize,
    jumps: usize,
    k: usize,
    t: usize,
    cap: u128,
) -> Result<Vec<f64>> {
    let topo = jac.topology();
    let paths = path_count(topo.n, jumps);
    if paths > cap {
        return Err(Error::TooLarge { paths, cap });
    }
    let mut sum = vec![0.0; topo.dh];
    for_each_path(topo.n, k, topo.posts[s], jumps, |path| {
        for (acc, v) in sum.iter_mut().zip(explicit_variable_definitional(jac, s, path, t)) {
            *acc += v;
        }
    });
    Ok(sum)
}

/// `α^{t,r}_s`: the explicit variable summed over every path of every
/// length `0..t` from the synapse target to neuron `r`.
pub fn recurrence_variable_definitional(
    jac: &LocalJacobians,
    s: usize,
    r: usize,
    t: usize,
    cap: u128,
) -> Result<Vec<f64>> {
    let topo = jac.topology();
    let paths: u128 = (0..t).map(|l| path_count(topo.n, l)).fold(0u128, |a, b| a.saturating_add(b));
    if paths > cap {
        return Err(Error::TooLarge { paths, cap });
    }
    let mut sum = vec![0.0; topo.dh];
    for jumps in 0..t {
        for_each_path(topo.n, r, topo.posts[s], jumps, |path| {
            for (acc, v) in sum.iter_mut().zip(explicit_variable_definitional(jac, s, path, t)) {
                *acc += v;
            }
        });
    }
    Ok(sum)
}

/// `γ^{t,k}_s = Σ_{t' <= t} κ ··· κ · w_out[j][k] · e^{t'}_s` with
/// `t - t'` factors of `κ`.
///
/// `eligibility` is the step-indexed `T x p` series of `e^t_s`.
pub fn readout_variable_definitional(
    readout: &Readout,
    jac: &LocalJacobians,
    eligibility: &Series,
    k: usize,
    s: usize,
    t: usize,
) -> f64 {
    let j = jac.topology().posts[s];
    let kappa = readout.kappa();
    let mut sum = 0.0;
    for anchor in 1..=t {
        let mut factor = 1.0;
        for _ in anchor..t {
            factor *= kappa;
        }
        sum += factor * readout.weight(j, k) * eligibility.at(anchor)[s];
    }
    sum
}

/// Loss of a full re-simulation.
pub fn loss_of(net: &Network, inputs: &Series, targets: &Series, steps: usize) -> Result<f64> {
    let traj = simulate(net, inputs, steps)?;
    Ok(readout_forward(net.readout(), &traj, targets)?.1)
}

/// Central finite differences `(L(w + h) - L(w - h)) / 2h` per synapse.
pub fn fd_gradient(net: &Network, inputs: &Series, targets: &Series, steps: usize, h: f64) -> Result<Vec<f64>> {
    if net.cell().is_spiking() {
        return Err(Error::NonDifferentiable);
    }
    if h.is_nan() || h <= 0.0 {
        return Err(Error::InvalidParameter { name: "h", value: h });
    }
    let base = net.weights();
    let mut probe = net.clone();
    let mut grad = Vec::with_capacity(base.len());
    for s in 0..base.len() {
        let mut w = base.clone();
        w[s] = base[s] + h;
        probe.set_weights(&w);
        let up = loss_of(&probe, inputs, targets, steps)?;
        w[s] = base[s] - h;
        probe.set_weights(&w);
        let down = loss_of(&probe, inputs, targets, steps)?;
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}
