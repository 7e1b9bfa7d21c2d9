//! Exact gradient by causal forward propagation of the recurrence variable.
//!
//! `α^{t,r}_s` tracks how synapse `s` has influenced the hidden state of
//! every neuron `r` through all paths of implicit and explicit recurrences.
//! The implicit source `G[t][s]` is injected at the synapse's own target
//! neuron each step, which reproduces the zero-jump path term.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Result;
use crate::gradient::{check_partials, Cost, Gradient};
use crate::jacobian::{JacobianSlice, LocalJacobians, Topology};
use crate::linalg::{dot, mat_vec};
use crate::series::Series;

/// `α^{t,r}_s` for every neuron `r` and synapse `s` at the current step.
#[derive(Debug, Clone)]
pub struct RecurrenceTraceBank {
    n: usize,
    p: usize,
    dh: usize,
    alpha: Vec<f64>,
    // psi[t-1][k] · α^{t-1,k}_s, rebuilt every step.
    carried: Vec<f64>,
}

impl RecurrenceTraceBank {
    pub fn new(topo: &Topology) -> Self {
        let (n, p, dh) = (topo.n, topo.p(), topo.dh);
        Self { n, p, dh, alpha: vec![0.0; n * p * dh], carried: vec![0.0; n * p] }
    }

    pub fn alpha(&self, r: usize, s: usize) -> &[f64] {
        let base = (r * self.p + s) * self.dh;
        &self.alpha[base..base + self.dh]
    }

    /// Trace scalars kept between steps: `n * p * d_h`.
    pub fn stored_floats(&self) -> usize {
        self.alpha.len()
    }

    /// Advances from `t - 1` to `t`:
    /// `α^{t,r} = D[t][r] α^{t-1,r} + Σ_k E[t-1][r][k] psi[t-1][k] α^{t-1,k} + δ_{r=j} G[t]`.
    ///
    /// `prev` is the slice for `t - 1`, `cur` the slice for `t`. Returns the
    /// multiply-adds performed.
    pub fn step(&mut self, topo: &Topology, prev: &JacobianSlice, cur: &JacobianSlice) -> u64 {
        let (n, p, dh) = (self.n, self.p, self.dh);
        for k in 0..n {
            let psi = prev.psi(k, dh);
            for s in 0..p {
                let base = (k * p + s) * dh;
                self.carried[k * p + s] = dot(psi, &self.alpha[base..base + dh]);
            }
        }
        let mut flops = (n * p * dh) as u64;

        let mut tmp = [0.0; 2];
        for r in 0..n {
            let d = cur.d(r, dh);
            let block = &mut self.alpha[r * p * dh..(r + 1) * p * dh];
            for a in block.chunks_exact_mut(dh) {
                tmp[..dh].copy_from_slice(a);
                mat_vec(d, &tmp[..dh], a);
            }
            flops += (p * dh * dh) as u64;
            for &e in &topo.incoming[r] {
                // E[t-1] lives in the slice for t - 1.
                let col = prev.e(e, dh);
                let src = &self.carried[topo.edges[e].pre * p..(topo.edges[e].pre + 1) * p];
                for (a, &u) in block.chunks_exact_mut(dh).zip(src) {
                    for c in 0..dh {
                        a[c] += col[c] * u;
                    }
                }
                flops += (p * dh) as u64;
            }
        }
        for s in 0..p {
            let base = (topo.posts[s] * p + s) * dh;
            for (a, g) in self.alpha[base..base + dh].iter_mut().zip(cur.g(s, dh)) {
                *a += g;
            }
        }
        flops + (p * dh) as u64
    }
}

/// `dL/dw_s = Σ_t C^t_s` with `C^t_s = Σ_k ∂L/∂o^t_k · psi[t][k] · α^{t,k}_s`.
///
/// Contributions are summed over ascending `k` inside each step and over
/// ascending `t` across steps.
pub fn rtrl_gradient(jac: &LocalJacobians, partials: &Series) -> Result<Gradient> {
    let topo = jac.topology();
    let steps = jac.steps();
    check_partials(topo, steps, partials)?;
    let (n, p, dh) = (topo.n, topo.p(), topo.dh);
    let mut bank = RecurrenceTraceBank::new(topo);
    let mut values = vec![0.0; p];
    let mut per_step = Series::zeros(steps, p);
    let mut flops = 0;
    for t in 1..=steps {
        flops += bank.step(topo, jac.slice(t - 1), jac.slice(t));
        let lp = partials.at(t);
        let contrib = per_step.at_mut(t);
        for k in 0..n {
            let psi = jac.psi(t, k);
            for (s, c) in contrib.iter_mut().enumerate() {
                *c += lp[k] * dot(psi, bank.alpha(k, s));
            }
        }
        flops += (n * p * (dh + 1)) as u64;
        for (v, c) in values.iter_mut().zip(contrib.iter()) {
            *v += c;
        }
    }
    let cost = Cost { flops, trace_floats: bank.stored_floats() };
    Ok(Gradient { values, per_step: Some(per_step), cost })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bptt::bptt_gradient;
    use crate::cases::{leaky_pair, self_recurrent};
    use crate::eprop::ImplicitTrace;
    use crate::jacobian::local_jacobians;
    use crate::model::{simulate, Cell, Network, Source, Synapse};
    use crate::readout::Readout;

    fn decoupled() -> (Network, Series) {
        let syn = vec![
            Synapse::new(Source::Input(0), 0, 0.9),
            Synapse::new(Source::Input(0), 1, -0.6),
            Synapse::new(Source::Input(1), 1, 0.3),
        ];
        let net = Network::new(2, 2, Cell::leaky_tanh(vec![0.4, 0.8]), syn, Readout::identity(2), 0).unwrap();
        (net, Series::from_flat(2, vec![1.0, 0.0, 0.5, -1.0, -0.3, 0.7, 0.2, 0.2]))
    }

    #[test]
    fn first_step_injects_implicit_source() {
        let (net, inputs) = decoupled();
        let traj = simulate(&net, &inputs, 4).unwrap();
        let jac = local_jacobians(&net, &traj);
        let topo = jac.topology();
        let mut bank = RecurrenceTraceBank::new(topo);
        bank.step(topo, jac.slice(0), jac.slice(1));
        for s in 0..topo.p() {
            for r in 0..topo.n {
                let expected = if r == topo.posts[s] { jac.g(1, s)[0] } else { 0.0 };
                assert_eq!(bank.alpha(r, s), &[expected]);
            }
        }
    }

    #[test]
    fn without_explicit_recurrence_alpha_is_the_implicit_variable() {
        let (net, inputs) = decoupled();
        let traj = simulate(&net, &inputs, 4).unwrap();
        let jac = local_jacobians(&net, &traj);
        let topo = jac.topology();
        let mut bank = RecurrenceTraceBank::new(topo);
        let mut trace = ImplicitTrace::new(topo);
        for t in 1..=4 {
            bank.step(topo, jac.slice(t - 1), jac.slice(t));
            trace.step(topo, jac.slice(t));
            for s in 0..topo.p() {
                for r in 0..topo.n {
                    if r == topo.posts[s] {
                        assert_eq!(bank.alpha(r, s), trace.eps(s));
                    } else {
                        assert_eq!(bank.alpha(r, s), &[0.0]);
                    }
                }
            }
        }
    }

    #[test]
    fn worked_cases_and_contributions() {
        let prep = self_recurrent().prepare().unwrap();
        let g = rtrl_gradient(&prep.jac, &prep.partials).unwrap();
        assert_eq!(g.values[0], 2.0);
        let per_step = g.per_step.unwrap();
        assert_eq!(per_step.at(1)[0], 1.0);
        assert_eq!(per_step.at(2)[0], 1.0);

        let prep = leaky_pair().prepare().unwrap();
        let g = rtrl_gradient(&prep.jac, &prep.partials).unwrap();
        let (exact, _) = bptt_gradient(&prep.jac, &prep.partials).unwrap();
        assert_eq!(g.values, exact.values);
        assert_eq!(g.values, [3.25]);
    }

    #[test]
    fn zero_partials_zero_contributions() {
        let prep = self_recurrent().prepare().unwrap();
        let g = rtrl_gradient(&prep.jac, &Series::zeros(2, 1)).unwrap();
        assert!(g.values.iter().all(|&v| v == 0.0));
        assert!(g.per_step.unwrap().as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bank_size_is_n_p_dh() {
        let (net, _) = decoupled();
        let topo = Topology::of(&net);
        assert_eq!(RecurrenceTraceBank::new(&topo).stored_floats(), 2 * 3 * 1);
    }
}
