//! Streaming gradient computation and online weight updates.
//!
//! The causal algorithms produce a contribution `C^t` at every step from
//! past activity only. Summing the contributions over a sequence while the
//! weights stay fixed reproduces the batch gradient. Applying each `C^t`
//! as soon as it is available is a different algorithm: the traces then mix
//! activity generated under several weight values.

use alloc::vec;
use alloc::vec::Vec;

use crate::eprop::ImplicitTrace;
use crate::error::{Error, Result};
use crate::jacobian::{JacobianSlice, Topology};
use crate::linalg::dot;
use crate::model::Network;
use crate::readout::{ReadoutKind, ReadoutTrace};
use crate::rtrl::RecurrenceTraceBank;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OnlineRule {
    /// Exact causal gradient; needs a static readout.
    Rtrl,
    /// e-prop with partial loss derivatives; needs a static readout.
    Eprop,
    /// e-prop through the readout trace; works with either readout kind.
    EpropReadout,
}

/// Output of one streaming step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// `C^t` for every synapse.
    pub contribution: Vec<f64>,
    /// `Σ_k (y^t_k - y*^t_k)^2 / 2`.
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct OnlineLearner {
    net: Network,
    topo: Topology,
    rule: OnlineRule,
    t: usize,
    h: Vec<f64>,
    o: Vec<f64>,
    h_next: Vec<f64>,
    o_next: Vec<f64>,
    drive: Vec<f64>,
    y: Vec<f64>,
    prev: JacobianSlice,
    trace: ImplicitTrace,
    bank: Option<RecurrenceTraceBank>,
    gamma: Option<ReadoutTrace>,
}

impl OnlineLearner {
    pub fn new(net: Network, rule: OnlineRule) -> Result<Self> {
        let needs_static = matches!(rule, OnlineRule::Rtrl | OnlineRule::Eprop);
        if needs_static && matches!(net.readout().kind, ReadoutKind::LeakyIntegrator { .. }) {
            return Err(Error::ReadoutMisuse(
                "online rtrl and e-prop need a static readout; use the readout-trace rule",
            ));
        }
        let topo = Topology::of(&net);
        let (n, dh) = (net.n(), net.hidden_dim());
        let prev = JacobianSlice::initial(&net, &topo);
        let trace = ImplicitTrace::new(&topo);
        let bank = (rule == OnlineRule::Rtrl).then(|| RecurrenceTraceBank::new(&topo));
        let gamma = (rule == OnlineRule::EpropReadout).then(|| ReadoutTrace::new(net.readout(), &topo));
        let outputs = net.readout().outputs;
        Ok(Self {
            net,
            topo,
            rule,
            t: 0,
            h: vec![0.0; n * dh],
            o: vec![0.0; n],
            h_next: vec![0.0; n * dh],
            o_next: vec![0.0; n],
            drive: vec![0.0; n],
            y: vec![0.0; outputs],
            prev,
            trace,
            bank,
            gamma,
        })
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn steps_taken(&self) -> usize {
        self.t
    }

    /// Advances one step with input `x^{t-1}` and readout target `y*^t`.
    pub fn step(&mut self, x_prev: &[f64], target: &[f64]) -> Result<StepOutcome> {
        let (n, dh) = (self.net.n(), self.net.hidden_dim());
        let readout = self.net.readout();
        if target.len() != readout.outputs {
            return Err(Error::InputShape { expected: readout.outputs, found: target.len() });
        }
        if x_prev.len() < self.net.n_inputs() {
            return Err(Error::InputShape { expected: self.net.n_inputs(), found: x_prev.len() });
        }
        self.t += 1;
        self.net.step(&self.h, &self.o, x_prev, &mut self.drive, &mut self.h_next, &mut self.o_next);
        if let Some(j) = (0..n)
            .find(|&j| !self.o_next[j].is_finite() || self.h_next[j * dh..(j + 1) * dh].iter().any(|v| !v.is_finite()))
        {
            return Err(Error::Divergent { t: self.t, neuron: j });
        }
        let cur = JacobianSlice::at_step(&self.net, &self.topo, &self.h_next, &self.o, x_prev);

        let kk = readout.outputs;
        let kappa = readout.kappa();
        let mut errors = vec![0.0; kk];
        let mut loss = 0.0;
        for k in 0..kk {
            let drive: f64 = (0..n).map(|j| readout.weight(j, k) * self.o_next[j]).sum();
            self.y[k] = kappa * self.y[k] + drive + readout.biases[k];
            errors[k] = self.y[k] - target[k];
            loss += 0.5 * errors[k] * errors[k];
        }
        let partials: Vec<f64> = (0..n).map(|j| (0..kk).map(|k| errors[k] * readout.weight(j, k)).sum()).collect();

        self.trace.step(&self.topo, &cur);
        let p = self.topo.p();
        let mut contribution = vec![0.0; p];
        match self.rule {
            OnlineRule::Eprop => {
                for (s, c) in contribution.iter_mut().enumerate() {
                    *c = partials[self.topo.posts[s]] * self.trace.e(s);
                }
            }
            OnlineRule::Rtrl => {
                let bank = self.bank.as_mut().expect("rtrl bank");
                bank.step(&self.topo, &self.prev, &cur);
                for k in 0..n {
                    let psi = cur.psi(k, dh);
                    for (s, c) in contribution.iter_mut().enumerate() {
                        *c += partials[k] * dot(psi, bank.alpha(k, s));
                    }
                }
            }
            OnlineRule::EpropReadout => {
                let gamma = self.gamma.as_mut().expect("readout trace");
                gamma.step(readout, &self.topo, self.trace.eligibility());
                for (k, err) in errors.iter().enumerate() {
                    for (s, c) in contribution.iter_mut().enumerate() {
                        *c += err * gamma.gamma(k, s);
                    }
                }
            }
        }

        core::mem::swap(&mut self.h, &mut self.h_next);
        core::mem::swap(&mut self.o, &mut self.o_next);
        self.prev = cur;
        Ok(StepOutcome { contribution, loss })
    }

    /// `w <- w - eta * delta` in the middle of a sequence. Traces are kept.
    pub fn apply(&mut self, delta: &[f64], eta: f64) {
        self.net.descend(delta, eta);
        self.prev.refresh_explicit(&self.net, &self.topo);
    }
}
