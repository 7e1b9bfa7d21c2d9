use std::time::Instant;

use anyhow::Result;
use rgl_core::bptt::bptt_gradient;
use rgl_core::cases::Instance;
use rgl_core::eprop::{eprop_gradient, m_order_gradient};
use rgl_core::oracle::fd_gradient;
use rgl_core::readout::{eprop_readout_gradient, lsnn_gradient};
use rgl_core::rtrl::rtrl_gradient;
use rgl_core::{max_relative_deviation, LocalJacobians};

use super::{max_abs_diff, max_entry_relative_error, per_trial, RowCtx};
use crate::config::ExperimentConfig;
use crate::report::Report;

pub const EXACT_TOL: f64 = 1e-10;
pub const FD_TOL: f64 = 1e-4;
pub const FD_STEP: f64 = 1e-5;
/// Entries below this fraction of the largest fd entry are compared on
/// that scale instead of their own.
pub const FD_FLOOR: f64 = 1e-3;
pub const IDENTITY_TOL: f64 = 1e-12;

/// Negates the first nonzero explicit entry at the middle step. Returns
/// false when every explicit entry there is zero.
fn mutate(jac: &mut LocalJacobians) -> bool {
    let t = jac.steps().saturating_sub(1) / 2;
    let dh = jac.topology().dh;
    for edge in 0..jac.topology().edges.len() {
        if let Some(c) = (0..dh).find(|&c| jac.e(t, edge)[c] != 0.0) {
            jac.flip_explicit(t, edge, c);
            return true;
        }
    }
    false
}

fn equivalence(seed: u64, inst: Instance, mutated: bool) -> Result<Report> {
    const SUITE: &str = "equiv";
    let ctx = RowCtx::new(SUITE, seed, &inst);
    let prep = inst.prepare()?;
    let mut report = Report::default();

    let (bptt, _) = bptt_gradient(&prep.jac, &prep.partials)?;
    let mut causal_jac = prep.jac.clone();
    if mutated && !mutate(&mut causal_jac) {
        report.push(ctx.row("rtrl", "mutation", 0.0).with_note("no nonzero explicit entry to flip"));
    }
    let rtrl = rtrl_gradient(&causal_jac, &prep.partials)?;
    let full = m_order_gradient(&causal_jac, &prep.partials, inst.steps)?;
    let full_name = format!("morder({})", inst.steps);

    let finite = bptt.is_finite() && rtrl.is_finite() && full.is_finite();
    if !finite {
        report.push(ctx.bound("all", "non_finite_gradient", 1.0, 0.0));
        return Ok(report);
    }
    report.push(ctx.bound("rtrl", "rel_dev_vs_bptt", max_relative_deviation(&rtrl.values, &bptt.values), EXACT_TOL));
    report.push(ctx.bound(
        &full_name,
        "rel_dev_vs_bptt",
        max_relative_deviation(&full.values, &bptt.values),
        EXACT_TOL,
    ));
    report.push(ctx.bound(
        &full_name,
        "rel_dev_vs_rtrl",
        max_relative_deviation(&full.values, &rtrl.values),
        EXACT_TOL,
    ));

    if inst.net.cell().is_spiking() {
        report.push(ctx.skipped("bptt", "fd_max_entry_rel_err", "skipped: non-differentiable"));
    } else {
        let fd = fd_gradient(&inst.net, &inst.inputs, &inst.targets, inst.steps, FD_STEP)?;
        report.push(ctx.bound(
            "bptt",
            "fd_max_entry_rel_err",
            max_entry_relative_error(&bptt.values, &fd, FD_FLOOR),
            FD_TOL,
        ));
    }

    let readout = inst.net.readout();
    let trace = eprop_readout_gradient(readout, &prep.traj, &prep.jac, &inst.targets)?;
    let (lsnn, _) = lsnn_gradient(readout, &prep.traj, &prep.jac, &inst.targets)?;
    report.push(ctx.bound(
        "lsnn",
        "max_abs_diff_vs_readout_trace",
        max_abs_diff(&lsnn.values, &trace.values),
        IDENTITY_TOL,
    ));
    Ok(report)
}

/// Per instance: BPTT, RTRL and full-order e-prop pairwise, finite
/// differences for smooth cells, and the learning-signal identity.
pub fn run_equivalence_suite(config: &ExperimentConfig) -> Result<Report> {
    let clock = Instant::now();
    let mut report = per_trial("equiv", config, |seed, inst| equivalence(seed, inst, config.mutate))?;
    report.wall_seconds.insert("equiv".into(), clock.elapsed().as_secs_f64());
    Ok(report)
}

/// e-prop against BPTT on networks whose only explicit recurrences are
/// absent: e-prop must then be exact.
pub fn eprop_boundary_report(config: &ExperimentConfig) -> Result<Report> {
    per_trial("eprop-boundary", config, |seed, inst| {
        let ctx = RowCtx::new("eprop-boundary", seed, &inst);
        let prep = inst.prepare()?;
        let mut report = Report::default();
        let explicit = prep.jac.topology().edges.len();
        report.push(ctx.bound("eprop", "explicit_edges", explicit as f64, 0.0));
        let (bptt, _) = bptt_gradient(&prep.jac, &prep.partials)?;
        let eprop = eprop_gradient(&prep.jac, &prep.partials)?;
        report.push(ctx.bound(
            "eprop",
            "rel_dev_vs_bptt",
            max_relative_deviation(&eprop.values, &bptt.values),
            EXACT_TOL,
        ));
        Ok(report)
    })
}
