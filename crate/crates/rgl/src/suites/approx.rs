use std::time::Instant;

use anyhow::Result;
use rgl_core::bptt::bptt_gradient;
use rgl_core::eprop::{eprop_gradient, m_order_gradient};

use super::{cosine, per_trial, relative_l2, RowCtx};
use crate::config::ExperimentConfig;
use crate::report::Report;

pub const TERMINAL_TOL: f64 = 1e-10;
pub const FIRST_ORDER_TOL: f64 = 1e-12;

/// Relative L2 error and cosine similarity of every order `m = 1..=T`
/// against BPTT. Asserts exactness at `m = T` and that `m = 1` has the
/// e-prop error; monotonicity is reported only.
pub fn run_approximation_report(config: &ExperimentConfig) -> Result<Report> {
    let clock = Instant::now();
    let mut report = per_trial("approx", config, |seed, inst| {
        let ctx = RowCtx::new("approx", seed, &inst);
        let prep = inst.prepare()?;
        let mut report = Report::default();
        let (exact, _) = bptt_gradient(&prep.jac, &prep.partials)?;
        let eprop = eprop_gradient(&prep.jac, &prep.partials)?;
        let eprop_err = relative_l2(&eprop.values, &exact.values);
        report.push(ctx.row("eprop", "rel_l2_error", eprop_err));
        report.push(ctx.row("eprop", "cosine", cosine(&eprop.values, &exact.values)));
        let mut errors = Vec::with_capacity(inst.steps);
        for m in 1..=inst.steps {
            let g = m_order_gradient(&prep.jac, &prep.partials, m)?;
            let err = relative_l2(&g.values, &exact.values);
            let name = format!("morder({m})");
            if m == inst.steps {
                report.push(ctx.bound(&name, "rel_l2_error", err, TERMINAL_TOL));
            } else {
                report.push(ctx.row(&name, "rel_l2_error", err));
            }
            report.push(ctx.row(&name, "cosine", cosine(&g.values, &exact.values)));
            errors.push(err);
        }
        report.push(ctx.bound("morder(1)", "abs_diff_vs_eprop_error", (errors[0] - eprop_err).abs(), FIRST_ORDER_TOL));
        let monotone = errors.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-15);
        report.push(ctx.row("morder", "monotone", if monotone { 1.0 } else { 0.0 }));
        Ok(report)
    })?;
    report.wall_seconds.insert("approx".into(), clock.elapsed().as_secs_f64());
    Ok(report)
}
