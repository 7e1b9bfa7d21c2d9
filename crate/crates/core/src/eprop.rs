//! Implicit eligibility traces, e-prop, and the m-order e-prop family.
//!
//! The implicit variable `ε^t_s` follows only the target neuron's own
//! implicit recurrence. Multiplying by `psi` gives the eligibility trace
//! `e^t_s`, and pairing it with the partial loss derivative of the target
//! neuron gives e-prop.
//!
//! Higher orders add explicit recurrences back. [`OrderTraceBank`] keeps,
//! for each jump count `r`, the sum of all path traces that leave the
//! target neuron through exactly `r` explicit recurrences and end at neuron
//! `k`. Summing orders `0..m` gives m-order e-prop; `m = T` is exact.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::gradient::{check_partials, Cost, Gradient};
use crate::jacobian::{JacobianSlice, LocalJacobians, Topology};
use crate::linalg::{dot, mat_vec};
use crate::series::Series;

/// `ε^t_s` and `e^t_s = psi[t][j] · ε^t_s` for every synapse.
#[derive(Debug, Clone)]
pub struct ImplicitTrace {
    dh: usize,
    eps: Vec<f64>,
    e: Vec<f64>,
}

impl ImplicitTrace {
    pub fn new(topo: &Topology) -> Self {
        Self { dh: topo.dh, eps: vec![0.0; topo.p() * topo.dh], e: vec![0.0; topo.p()] }
    }

    pub fn eps(&self, s: usize) -> &[f64] {
        &self.eps[s * self.dh..(s + 1) * self.dh]
    }

    pub fn e(&self, s: usize) -> f64 {
        self.e[s]
    }

    pub fn eligibility(&self) -> &[f64] {
        &self.e
    }

    /// `p * (d_h + 1)`.
    pub fn stored_floats(&self) -> usize {
        self.eps.len() + self.e.len()
    }

    /// `ε^t = D[t][j] ε^{t-1} + G[t]`, then `e^t = psi[t][j] ε^t`.
    pub fn step(&mut self, topo: &Topology, cur: &JacobianSlice) -> u64 {
        let dh = self.dh;
        let mut tmp = [0.0; 2];
        for (s, &j) in topo.posts.iter().enumerate() {
            let eps = &mut self.eps[s * dh..(s + 1) * dh];
            tmp[..dh].copy_from_slice(eps);
            mat_vec(cur.d(j, dh), &tmp[..dh], eps);
            for (x, g) in eps.iter_mut().zip(cur.g(s, dh)) {
                *x += g;
            }
            self.e[s] = dot(cur.psi(j, dh), eps);
        }
        (topo.p() * (dh * dh + 2 * dh)) as u64
    }
}

/// Eligibility traces `e^t_s` for every step, as a step-indexed `T x p` series.
pub fn eligibility_series(jac: &LocalJacobians) -> Series {
    let topo = jac.topology();
    let mut trace = ImplicitTrace::new(topo);
    let mut out = Series::zeros(jac.steps(), topo.p());
    for t in 1..=jac.steps() {
        trace.step(topo, jac.slice(t));
        out.at_mut(t).copy_from_slice(trace.eligibility());
    }
    out
}

/// `dL/dw_s ≈ Σ_t ∂L/∂o^t_j · e^t_s`.
///
/// `partials` must be the partial loss derivatives, which carry no path
/// back into the recurrent network. Passing total derivatives instead turns
/// this into the exact gradient.
pub fn eprop_gradient(jac: &LocalJacobians, partials: &Series) -> Result<Gradient> {
    let topo = jac.topology();
    let steps = jac.steps();
    check_partials(topo, steps, partials)?;
    let p = topo.p();
    let mut trace = ImplicitTrace::new(topo);
    let mut values = vec![0.0; p];
    let mut per_step = Series::zeros(steps, p);
    let mut flops = 0;
    for t in 1..=steps {
        flops += trace.step(topo, jac.slice(t));
        let lp = partials.at(t);
        let contrib = per_step.at_mut(t);
        for (s, c) in contrib.iter_mut().enumerate() {
            *c = lp[topo.posts[s]] * trace.e(s);
        }
        flops += p as u64;
        for (v, c) in values.iter_mut().zip(contrib.iter()) {
            *v += c;
        }
    }
    let cost = Cost { flops, trace_floats: trace.stored_floats() };
    Ok(Gradient { values, per_step: Some(per_step), cost })
}

/// Aggregated explicit traces `B_r^{t,k}_s` for jump counts `r in 0..m`.
///
/// `B_0` is nonzero only at `k = j` where it equals `ε^t_s`. Slices with
/// `r >= t` are structurally zero and are not touched by [`Self::step`].
#[derive(Debug, Clone)]
pub struct OrderTraceBank {
    m: usize,
    n: usize,
    p: usize,
    dh: usize,
    b: Vec<f64>,
    carried: Vec<f64>,
}

impl OrderTraceBank {
    pub fn new(topo: &Topology, m: usize) -> Self {
        let (n, p, dh) = (topo.n, topo.p(), topo.dh);
        Self { m, n, p, dh, b: vec![0.0; m * n * p * dh], carried: vec![0.0; n * p] }
    }

    pub fn order(&self) -> usize {
        self.m
    }

    fn index(&self, r: usize, k: usize, s: usize) -> usize {
        ((r * self.n + k) * self.p + s) * self.dh
    }

    pub fn trace(&self, r: usize, k: usize, s: usize) -> &[f64] {
        let i = self.index(r, k, s);
        &self.b[i..i + self.dh]
    }

    /// `m * n * p * d_h`.
    pub fn stored_floats(&self) -> usize {
        self.b.len()
    }

    /// Advances every order to step `t`. `trace` must already hold `ε^t`.
    ///
    /// For `r >= 1`:
    /// `B_r^{t,k} = D[t][k] B_r^{t-1,k} + Σ_{k'} E[t-1][k][k'] psi[t-1][k'] B_{r-1}^{t-1,k'}`.
    pub fn step(
        &mut self,
        topo: &Topology,
        prev: &JacobianSlice,
        cur: &JacobianSlice,
        trace: &ImplicitTrace,
        t: usize,
    ) -> u64 {
        let (n, p, dh) = (self.n, self.p, self.dh);
        let top = (self.m - 1).min(t - 1);
        let mut flops = 0;
        let mut tmp = [0.0; 2];
        // Descending r keeps B_{r-1} at its t - 1 value while B_r is rebuilt.
        for r in (1..=top).rev() {
            for k in 0..n {
                let psi = prev.psi(k, dh);
                for s in 0..p {
                    let i = self.index(r - 1, k, s);
                    self.carried[k * p + s] = dot(psi, &self.b[i..i + dh]);
                }
            }
            let start = self.index(r, 0, 0);
            let slab = &mut self.b[start..start + n * p * dh];
            for k in 0..n {
                let block = &mut slab[k * p * dh..(k + 1) * p * dh];
                let d = cur.d(k, dh);
                for a in block.chunks_exact_mut(dh) {
                    tmp[..dh].copy_from_slice(a);
                    mat_vec(d, &tmp[..dh], a);
                }
                for &e in &topo.incoming[k] {
                    let col = prev.e(e, dh);
                    let pre = topo.edges[e].pre;
                    for (a, &u) in block.chunks_exact_mut(dh).zip(&self.carried[pre * p..(pre + 1) * p]) {
                        for c in 0..dh {
                            a[c] += col[c] * u;
                        }
                    }
                }
            }
            flops += (n * p * dh) as u64 + (n * p * dh * dh) as u64 + (topo.edges.len() * p * dh) as u64;
        }
        for (s, &j) in topo.posts.iter().enumerate() {
            let i = self.index(0, j, s);
            self.b[i..i + dh].copy_from_slice(trace.eps(s));
        }
        flops
    }
}

/// Adds the order-`r` contribution `Σ_k ∂L/∂o^t_k psi[t][k] B_r^{t,k}_s` to `out`.
fn accumulate_order(bank: &OrderTraceBank, cur: &JacobianSlice, partials: &[f64], r: usize, out: &mut [f64]) {
    let dh = bank.dh;
    for k in 0..bank.n {
        let psi = cur.psi(k, dh);
        for (s, o) in out.iter_mut().enumerate() {
            *o += partials[k] * dot(psi, bank.trace(r, k, s));
        }
    }
}

/// m-order e-prop: `Σ_t Σ_{r<m} Σ_k ∂L/∂o^t_k · psi[t][k] · B_r^{t,k}_s`.
///
/// `m = 1` reproduces [`eprop_gradient`] bit for bit; `m = T` is exact.
pub fn m_order_gradient(jac: &LocalJacobians, partials: &Series, m: usize) -> Result<Gradient> {
    let topo = jac.topology();
    let steps = jac.steps();
    if m < 1 || m > steps {
        return Err(Error::InvalidOrder { m, steps });
    }
    check_partials(topo, steps, partials)?;
    let p = topo.p();
    let mut trace = ImplicitTrace::new(topo);
    let mut bank = OrderTraceBank::new(topo, m);
    let mut values = vec![0.0; p];
    let mut per_step = Series::zeros(steps, p);
    let mut flops = 0;
    for t in 1..=steps {
        flops += trace.step(topo, jac.slice(t));
        flops += bank.step(topo, jac.slice(t - 1), jac.slice(t), &trace, t);
        let lp = partials.at(t);
        let contrib = per_step.at_mut(t);
        for (s, c) in contrib.iter_mut().enumerate() {
            *c = lp[topo.posts[s]] * trace.e(s);
        }
        for r in 1..m.min(t) {
            accumulate_order(&bank, jac.slice(t), lp, r, contrib);
        }
        for (v, c) in values.iter_mut().zip(contrib.iter()) {
            *v += c;
        }
    }
    let cost = Cost { flops, trace_floats: trace.stored_floats() + bank.stored_floats() };
    Ok(Gradient { values, per_step: Some(per_step), cost })
}

/// Gradient contribution of each jump count `r in 0..T` separately.
///
/// The m-order gradient is the sum of the first `m` rows, up to summation
/// order.
pub fn order_contributions(jac: &LocalJacobians, partials: &Series) -> Result<Vec<Vec<f64>>> {
    let topo = jac.topology();
    let steps = jac.steps();
    check_partials(topo, steps, partials)?;
    let p = topo.p();
    let mut trace = ImplicitTrace::new(topo);
    let mut bank = OrderTraceBank::new(topo, steps.max(1));
    let mut orders = vec![vec![0.0; p]; steps];
    let mut scratch = vec![0.0; p];
    for t in 1..=steps {
        trace.step(topo, jac.slice(t));
        bank.step(topo, jac.slice(t - 1), jac.slice(t), &trace, t);
        let lp = partials.at(t);
        for (s, o) in orders[0].iter_mut().enumerate() {
            *o += lp[topo.posts[s]] * trace.e(s);
        }
        for r in 1..t {
            scratch.iter_mut().for_each(|x| *x = 0.0);
            accumulate_order(&bank, jac.slice(t), lp, r, &mut scratch);
            for (o, x) in orders[r].iter_mut().zip(&scratch) {
                *o += x;
            }
        }
    }
    Ok(orders)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bptt::bptt_gradient;
    use crate::cases::{leaky_pair, self_recurrent};
    use crate::jacobian::local_jacobians;
    use crate::model::{simulate, Cell, Network, Source, Synapse};
    use crate::readout::Readout;

    fn run_eps(cell: Cell, inputs: Series, steps: usize) -> Vec<f64> {
        let net =
            Network::new(1, 1, cell, vec![Synapse::new(Source::Input(0), 0, 1.0)], Readout::identity(1), 0).unwrap();
        let traj = simulate(&net, &inputs, steps).unwrap();
        let jac = local_jacobians(&net, &traj);
        let mut trace = ImplicitTrace::new(jac.topology());
        (1..=steps)
            .map(|t| {
                trace.step(jac.topology(), jac.slice(t));
                trace.eps(0)[0]
            })
            .collect()
    }

    #[test]
    fn implicit_variable_accumulates_leak() {
        let eps = run_eps(Cell::leaky_linear(vec![0.5]), Series::from_flat(1, vec![1.0; 3]), 3);
        assert_eq!(eps, [1.0, 1.5, 1.75]);
    }

    #[test]
    fn memoryless_implicit_variable_is_g() {
        let x = vec![0.3, -1.2, 0.8, 0.0];
        let eps = run_eps(Cell::leaky_tanh(vec![0.0]), Series::from_flat(1, x.clone()), 4);
        assert_eq!(eps, x);
    }

    #[test]
    fn self_recurrent_case_misses_the_explicit_term() {
        let prep = self_recurrent().prepare().unwrap();
        let g = eprop_gradient(&prep.jac, &prep.partials).unwrap();
        assert_eq!(g.values[0], 1.0);
        let m2 = m_order_gradient(&prep.jac, &prep.partials, 2).unwrap();
        assert_eq!(m2.values[0], 2.0);
    }

    #[test]
    fn exact_without_explicit_recurrence() {
        let prep = leaky_pair().prepare().unwrap();
        let g = eprop_gradient(&prep.jac, &prep.partials).unwrap();
        let (exact, _) = bptt_gradient(&prep.jac, &prep.partials).unwrap();
        assert_eq!(g.values, exact.values);
    }

    #[test]
    fn first_order_is_eprop_bit_for_bit() {
        let prep = self_recurrent().prepare().unwrap();
        let e = eprop_gradient(&prep.jac, &prep.partials).unwrap();
        let m1 = m_order_gradient(&prep.jac, &prep.partials, 1).unwrap();
        assert_eq!(e.values, m1.values);
        assert_eq!(e.per_step, m1.per_step);
    }

    #[test]
    fn order_bounds() {
        let prep = self_recurrent().prepare().unwrap();
        assert_eq!(m_order_gradient(&prep.jac, &prep.partials, 0).unwrap_err(), Error::InvalidOrder { m: 0, steps: 2 });
        assert!(m_order_gradient(&prep.jac, &prep.partials, 3).is_err());
    }

    #[test]
    fn higher_orders_vanish_on_first_step_and_without_edges() {
        let prep = self_recurrent().prepare().unwrap();
        let topo = prep.jac.topology();
        let mut trace = ImplicitTrace::new(topo);
        let mut bank = OrderTraceBank::new(topo, 2);
        trace.step(topo, prep.jac.slice(1));
        bank.step(topo, prep.jac.slice(0), prep.jac.slice(1), &trace, 1);
        assert_eq!(bank.trace(1, 0, 0), &[0.0]);
        assert_eq!(bank.trace(0, 0, 0), trace.eps(0));

        let prep = leaky_pair().prepare().unwrap();
        let topo = prep.jac.topology();
        let mut trace = ImplicitTrace::new(topo);
        let mut bank = OrderTraceBank::new(topo, 2);
        for t in 1..=2 {
            trace.step(topo, prep.jac.slice(t));
            bank.step(topo, prep.jac.slice(t - 1), prep.jac.slice(t), &trace, t);
            assert_eq!(bank.trace(1, 0, 0), &[0.0]);
        }
    }

    #[test]
    fn feedforward_pair_single_path() {
        // Neuron 0 receives the input and feeds neuron 1; the only first-order
        // path for the input synapse is 0 -> 1 with one jump.
        let syn = vec![Synapse::new(Source::Input(0), 0, 0.8), Synapse::new(Source::Neuron(0), 1, 1.3)];
        let net = Network::new(2, 1, Cell::leaky_tanh(vec![0.5, 0.25]), syn, Readout::identity(2), 0).unwrap();
        let traj = simulate(&net, &Series::from_flat(1, vec![1.0, -0.5, 0.25]), 3).unwrap();
        let jac = local_jacobians(&net, &traj);
        let topo = jac.topology();
        let mut trace = ImplicitTrace::new(topo);
        let mut bank = OrderTraceBank::new(topo, 3);
        let mut eps_hist = Vec::new();
        for t in 1..=3 {
            trace.step(topo, jac.slice(t));
            eps_hist.push(trace.eps(0)[0]);
            bank.step(topo, jac.slice(t - 1), jac.slice(t), &trace, t);
        }
        // β^3(1, 0) = D1 E[1] psi0[1] ε^1 + E[2] psi0[2] ε^2, written out by hand.
        let e = jac.e(1, 0)[0];
        let d1 = 0.25;
        let expected = d1 * e * jac.psi(1, 0)[0] * eps_hist[0] + e * jac.psi(2, 0)[0] * eps_hist[1];
        assert!((bank.trace(1, 1, 0)[0] - expected).abs() < 1e-15);
        assert_eq!(bank.trace(2, 1, 0), &[0.0]);
    }
}
