use std::time::Instant;

use anyhow::Result;
use rgl_core::cases::Instance;
use rgl_core::online::{OnlineLearner, OnlineRule};
use rgl_core::{max_relative_deviation, Network, ReadoutKind};

use super::{gradient, per_trial, RowCtx};
use crate::config::{Algorithm, ExperimentConfig, UpdateMode};
use crate::report::Report;

pub const TRAJECTORY_TOL: f64 = 1e-12;

fn mode_name(mode: UpdateMode) -> &'static str {
    match mode {
        UpdateMode::OfflineAfterT => "offline_after_t",
        UpdateMode::OnlinePerStep => "online_per_step",
    }
}

/// Losses and parameters of one training run.
struct Run {
    /// Loss of each sequence, measured while it was processed.
    losses: Vec<f64>,
    /// Parameters after each update.
    weights: Vec<Vec<f64>>,
    /// Total parameter change requested during the last sequence, before
    /// scaling by the learning rate.
    last_update: Vec<f64>,
    diverged: bool,
}

fn online_rule(alg: Algorithm, net: &Network) -> Option<OnlineRule> {
    let static_readout = net.readout().kind == ReadoutKind::Static;
    match alg {
        Algorithm::Rtrl if static_readout => Some(OnlineRule::Rtrl),
        Algorithm::Eprop if static_readout => Some(OnlineRule::Eprop),
        Algorithm::EpropReadout | Algorithm::Lsnn => Some(OnlineRule::EpropReadout),
        _ => None,
    }
}

fn offline(alg: Algorithm, inst: &Instance, eta: f64, iterations: usize) -> Result<Run> {
    let mut cur = inst.clone();
    let mut run = Run { losses: Vec::new(), weights: Vec::new(), last_update: Vec::new(), diverged: false };
    for _ in 0..iterations {
        let prep = match cur.prepare() {
            Ok(prep) => prep,
            Err(rgl_core::Error::Divergent { .. }) => {
                run.diverged = true;
                break;
            }
            Err(e) => return Err(e.into()),
        };
        let g = gradient(alg, &cur, &prep)?;
        if !prep.loss.is_finite() || !g.is_finite() {
            run.diverged = true;
            break;
        }
        run.losses.push(prep.loss);
        cur.net.descend(&g.values, eta);
        run.weights.push(cur.net.weights());
        run.last_update = g.values;
    }
    Ok(run)
}

fn online(rule: OnlineRule, inst: &Instance, eta: f64, iterations: usize) -> Result<Run> {
    let mut net = inst.net.clone();
    let mut run = Run { losses: Vec::new(), weights: Vec::new(), last_update: Vec::new(), diverged: false };
    'outer: for _ in 0..iterations {
        let mut learner = OnlineLearner::new(net.clone(), rule)?;
        let mut loss = 0.0;
        let mut update = vec![0.0; net.p()];
        for t in 1..=inst.steps {
            let out = match learner.step(inst.inputs.at(t), inst.targets.at(t)) {
                Ok(out) => out,
                Err(rgl_core::Error::Divergent { .. }) => {
                    run.diverged = true;
                    break 'outer;
                }
                Err(e) => return Err(e.into()),
            };
            if !out.loss.is_finite() || out.contribution.iter().any(|c| !c.is_finite()) {
                run.diverged = true;
                break 'outer;
            }
            loss += out.loss;
            learner.apply(&out.contribution, eta);
            for (u, c) in update.iter_mut().zip(&out.contribution) {
                *u += c;
            }
        }
        net = learner.network().clone();
        run.losses.push(loss);
        run.weights.push(net.weights());
        run.last_update = update;
    }
    Ok(run)
}

fn trajectory_deviation(a: &Run, b: &Run) -> f64 {
    if a.weights.len() != b.weights.len() {
        return f64::INFINITY;
    }
    a.weights.iter().zip(&b.weights).map(|(x, y)| max_relative_deviation(x, y)).fold(0.0, f64::max)
}

/// Trains each configured algorithm in each update mode on one fixed
/// sequence per trial. Asserts that RTRL and BPTT produce the same
/// parameter trajectory under offline updates; the divergence between
/// offline and online updates is reported only.
pub fn run_online_training(config: &ExperimentConfig) -> Result<Report> {
    let clock = Instant::now();
    let eta = config.learning_rate;
    let iterations = config.iterations;
    let modes = config.modes();
    let mut report = per_trial("train", config, |seed, inst| {
        let ctx = RowCtx::new("train", seed, &inst);
        let mut report = Report::default();
        let mut runs: Vec<(Algorithm, UpdateMode, Run)> = Vec::new();
        for &alg in &config.algorithms {
            for &mode in &modes {
                let run = match mode {
                    UpdateMode::OfflineAfterT => offline(alg, &inst, eta, iterations)?,
                    UpdateMode::OnlinePerStep => match online_rule(alg, &inst.net) {
                        Some(rule) => online(rule, &inst, eta, iterations)?,
                        None => {
                            report.push(ctx.skipped(alg, "online_per_step/loss", "skipped: no causal form"));
                            continue;
                        }
                    },
                };
                let prefix = mode_name(mode);
                for (i, loss) in run.losses.iter().enumerate() {
                    report.push(ctx.row(alg, format!("{prefix}/loss@{i}"), *loss));
                }
                if run.diverged {
                    report.push(
                        ctx.bound(alg, format!("{prefix}/diverged_at"), run.losses.len() as f64, -1.0)
                            .with_note("non-finite loss; run truncated"),
                    );
                }
                runs.push((alg, mode, run));
            }
        }

        let find = |alg: Algorithm, mode: UpdateMode| runs.iter().find(|r| r.0 == alg && r.1 == mode).map(|r| &r.2);
        if let (Some(rtrl), Some(bptt)) =
            (find(Algorithm::Rtrl, UpdateMode::OfflineAfterT), find(Algorithm::Bptt, UpdateMode::OfflineAfterT))
        {
            report.push(ctx.bound(
                "rtrl",
                "offline_after_t/max_weight_rel_dev_vs_bptt",
                trajectory_deviation(rtrl, bptt),
                TRAJECTORY_TOL,
            ));
        }
        for &alg in &config.algorithms {
            let (Some(off), Some(on)) = (find(alg, UpdateMode::OfflineAfterT), find(alg, UpdateMode::OnlinePerStep))
            else {
                continue;
            };
            if let (Some(a), Some(b)) = (off.weights.last(), on.weights.last()) {
                report.push(ctx.row(alg, "final_weight_rel_dev_online_vs_offline", max_relative_deviation(b, a)));
                report.push(ctx.row(
                    alg,
                    "final_gradient_rel_dev_online_vs_offline",
                    max_relative_deviation(&on.last_update, &off.last_update),
                ));
            }
            if let (Some(a), Some(b)) = (off.losses.last(), on.losses.last()) {
                report.push(ctx.row(alg, "final_loss_online_minus_offline", b - a));
            }
            if eta == 0.0 {
                let same = off.losses.len() == on.losses.len()
                    && off.losses.iter().zip(&on.losses).all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(1.0));
                report.push(ctx.bound(alg, "zero_rate_loss_curves_differ", if same { 0.0 } else { 1.0 }, 0.0));
            }
        }
        Ok(report)
    })?;
    report.wall_seconds.insert("train".into(), clock.elapsed().as_secs_f64());
    Ok(report)
}
