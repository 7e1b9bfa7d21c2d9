use std::time::Instant;

use anyhow::Result;
use rgl_core::bptt::bptt_gradient;
use rgl_core::cases::{leaky_pair, self_recurrent, Instance};
use rgl_core::eprop::{eligibility_series, eprop_gradient, ImplicitTrace, OrderTraceBank};
use rgl_core::oracle::{
    fd_gradient, implicit_variable_definitional, order_variable_definitional, readout_variable_definitional,
    recurrence_variable_definitional, DEFAULT_PATH_CAP,
};
use rgl_core::readout::ReadoutTrace;
use rgl_core::rtrl::RecurrenceTraceBank;
use rgl_core::Error;

use super::{max_abs_diff, per_trial, RowCtx};
use crate::config::ExperimentConfig;
use crate::report::Report;

pub const DEFINITIONAL_TOL: f64 = 1e-12;
pub const WORKED_TOL: f64 = 1e-12;

/// Largest absolute gap between each incremental trace and its
/// definitional path sum, over all steps, synapses and neurons.
fn definitional(seed: u64, inst: Instance) -> Result<Report> {
    let ctx = RowCtx::new("oracle", seed, &inst);
    let prep = inst.prepare()?;
    let jac = &prep.jac;
    let topo = jac.topology();
    let steps = inst.steps;
    let readout = inst.net.readout();
    let elig = eligibility_series(jac);
    let mut trace = ImplicitTrace::new(topo);
    let mut bank = OrderTraceBank::new(topo, steps);
    let mut rtrl = RecurrenceTraceBank::new(topo);
    let mut gamma = ReadoutTrace::new(readout, topo);
    let mut gaps = [0.0f64; 4];
    let mut report = Report::default();
    for t in 1..=steps {
        trace.step(topo, jac.slice(t));
        bank.step(topo, jac.slice(t - 1), jac.slice(t), &trace, t);
        rtrl.step(topo, jac.slice(t - 1), jac.slice(t));
        gamma.step(readout, topo, trace.eligibility());
        for s in 0..topo.p() {
            gaps[0] = gaps[0].max(max_abs_diff(trace.eps(s), &implicit_variable_definitional(jac, s, t)));
            for k in 0..topo.n {
                for r in 0..steps {
                    let def = match order_variable_definitional(jac, s, r, k, t, DEFAULT_PATH_CAP) {
                        Ok(def) => def,
                        Err(Error::TooLarge { .. }) => {
                            report.push(ctx.skipped("oracle", "definitional", "skipped: too many paths"));
                            return Ok(report);
                        }
                        Err(e) => return Err(e.into()),
                    };
                    gaps[1] = gaps[1].max(max_abs_diff(bank.trace(r, k, s), &def));
                }
                let def = recurrence_variable_definitional(jac, s, k, t, DEFAULT_PATH_CAP)?;
                gaps[2] = gaps[2].max(max_abs_diff(rtrl.alpha(k, s), &def));
            }
            for k in 0..readout.outputs {
                let def = readout_variable_definitional(readout, jac, &elig, k, s, t);
                gaps[3] = gaps[3].max((gamma.gamma(k, s) - def).abs());
            }
        }
    }
    let names = ["implicit_trace", "order_traces", "recurrence_traces", "readout_trace"];
    for (name, gap) in names.iter().zip(gaps) {
        report.push(ctx.bound(*name, "max_abs_diff_vs_definitional", gap, DEFINITIONAL_TOL));
    }
    Ok(report)
}

/// Incremental traces against brute-force path sums on every configured
/// instance, plus the hand-computed cases.
pub fn run_oracle_suite(config: &ExperimentConfig) -> Result<Report> {
    let clock = Instant::now();
    let mut report = per_trial("oracle", config, definitional)?;
    report.wall_seconds.insert("oracle".into(), clock.elapsed().as_secs_f64());
    report.extend(worked_cases()?);
    Ok(report)
}

/// The two hand-unrolled cases: a leaky pair with gradient 3.25, and a
/// self-recurrent neuron whose input weight has exact gradient 2 but
/// e-prop gradient 1.
pub fn worked_cases() -> Result<Report> {
    let mut report = Report::default();

    let pair = leaky_pair();
    let ctx = RowCtx::new("worked", 0, &pair);
    let prep = pair.prepare()?;
    let (bptt, _) = bptt_gradient(&prep.jac, &prep.partials)?;
    let fd = fd_gradient(&pair.net, &pair.inputs, &pair.targets, pair.steps, 1e-5)?;
    report.push(ctx.bound("bptt", "abs_err_vs_3.25", (bptt.values[0] - 3.25).abs(), WORKED_TOL));
    report.push(ctx.bound("fd", "abs_err_vs_3.25", (fd[0] - 3.25).abs(), 1e-6));

    let selfrec = self_recurrent();
    let ctx = RowCtx::new("worked", 1, &selfrec);
    let prep = selfrec.prepare()?;
    let (bptt, _) = bptt_gradient(&prep.jac, &prep.partials)?;
    let eprop = eprop_gradient(&prep.jac, &prep.partials)?;
    let fd = fd_gradient(&selfrec.net, &selfrec.inputs, &selfrec.targets, selfrec.steps, 1e-5)?;
    report.push(ctx.bound("bptt", "abs_err_vs_2", (bptt.values[0] - 2.0).abs(), WORKED_TOL));
    report.push(ctx.bound("eprop", "abs_err_vs_1", (eprop.values[0] - 1.0).abs(), WORKED_TOL));
    report.push(ctx.bound("fd", "abs_err_vs_2", (fd[0] - 2.0).abs(), 1e-6));
    Ok(report)
}
