//! Experiment suites. Each returns a [`Report`] whose failing rows and
//! checks decide the exit status of the command-line driver.

mod approx;
mod bench;
mod equiv;
mod oracle;
mod train;

use anyhow::{Context, Result};
use rayon::prelude::*;
use rgl_core::bptt::bptt_gradient;
use rgl_core::cases::{Instance, Prepared};
use rgl_core::eprop::{eprop_gradient, m_order_gradient};
use rgl_core::readout::{eprop_readout_gradient, lsnn_gradient};
use rgl_core::rtrl::rtrl_gradient;
use rgl_core::Gradient;

pub use approx::run_approximation_report;
pub use bench::{fit_slope, run_complexity_benchmark};
pub use equiv::{eprop_boundary_report, run_equivalence_suite};
pub use oracle::{run_oracle_suite, worked_cases};
pub use train::run_online_training;

use crate::config::{Algorithm, ExperimentConfig};
use crate::random;
use crate::report::{Report, Row, Status};

/// Worker pool sized by `RGL_THREADS` when set, rayon's default otherwise.
pub fn pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("RGL_THREADS") {
        let threads: usize = v.trim().parse().with_context(|| format!("RGL_THREADS={v:?} is not a count"))?;
        builder = builder.num_threads(threads.max(1));
    }
    Ok(builder.build()?)
}

/// Runs `per_seed` for every trial in parallel and concatenates the
/// reports in seed order. Errors become a failing row for that trial.
fn per_trial<F>(suite: &'static str, config: &ExperimentConfig, per_seed: F) -> Result<Report>
where
    F: Fn(u64, Instance) -> Result<Report> + Sync,
{
    let seeds = config.trial_seeds();
    let reports: Vec<Report> = pool()?.install(|| {
        seeds
            .par_iter()
            .map(|&seed| {
                random::instance(config, seed)
                    .and_then(|inst| per_seed(seed, inst))
                    .unwrap_or_else(|err| error_report(suite, seed, &err))
            })
            .collect()
    });
    let mut out = Report::default();
    for r in reports {
        out.extend(r);
    }
    Ok(out)
}

fn error_report(suite: &'static str, seed: u64, err: &anyhow::Error) -> Report {
    let mut r = Report::default();
    r.push(Row {
        suite,
        instance: seed,
        cell: "",
        n: 0,
        steps: 0,
        algorithm: String::new(),
        metric: "error".into(),
        value: f64::NAN,
        tolerance: None,
        status: Status::Fail,
        note: format!("{err:#}"),
    });
    r
}

/// Row builder bound to one instance.
pub(crate) struct RowCtx {
    pub suite: &'static str,
    pub instance: u64,
    pub cell: &'static str,
    pub n: usize,
    pub steps: usize,
}

impl RowCtx {
    pub fn new(suite: &'static str, instance: u64, inst: &Instance) -> Self {
        RowCtx { suite, instance, cell: inst.net.cell().name(), n: inst.net.n(), steps: inst.steps }
    }

    pub fn row(&self, algorithm: impl ToString, metric: impl Into<String>, value: f64) -> Row {
        Row {
            suite: self.suite,
            instance: self.instance,
            cell: self.cell,
            n: self.n,
            steps: self.steps,
            algorithm: algorithm.to_string(),
            metric: metric.into(),
            value,
            tolerance: None,
            status: Status::Info,
            note: String::new(),
        }
    }

    /// A row asserting `value <= tol`.
    pub fn bound(&self, algorithm: impl ToString, metric: impl Into<String>, value: f64, tol: f64) -> Row {
        Row { tolerance: Some(tol), status: crate::report::within(value, tol), ..self.row(algorithm, metric, value) }
    }

    pub fn skipped(&self, algorithm: impl ToString, metric: impl Into<String>, note: &str) -> Row {
        Row { value: f64::NAN, status: Status::Skipped, note: note.into(), ..self.row(algorithm, metric, f64::NAN) }
    }
}

/// Gradient of one algorithm on a prepared instance.
///
/// Algorithms that take loss partials receive the partials through the
/// readout, so with a leaky readout they see back-filtered errors.
pub fn gradient(alg: Algorithm, inst: &Instance, prep: &Prepared) -> Result<Gradient> {
    let readout = inst.net.readout();
    Ok(match alg {
        Algorithm::Bptt => bptt_gradient(&prep.jac, &prep.partials)?.0,
        Algorithm::Rtrl => rtrl_gradient(&prep.jac, &prep.partials)?,
        Algorithm::Eprop => eprop_gradient(&prep.jac, &prep.partials)?,
        Algorithm::MOrder(m) => m_order_gradient(&prep.jac, &prep.partials, m)?,
        Algorithm::EpropReadout => eprop_readout_gradient(readout, &prep.traj, &prep.jac, &inst.targets)?,
        Algorithm::Lsnn => lsnn_gradient(readout, &prep.traj, &prep.jac, &inst.targets)?.0,
    })
}

/// `max_s |a_s - b_s| / max(|b_s|, floor · max |b|)`.
pub fn max_entry_relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let diff = (x - y).abs();
            if diff == 0.0 {
                0.0
            } else {
                diff / y.abs().max(floor * scale)
            }
        })
        .fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `||a - b|| / ||b||`; 0 when both vanish.
pub fn relative_l2(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let d = norm(&diff);
    if d == 0.0 {
        0.0
    } else {
        d / norm(b)
    }
}

/// Cosine similarity; 1 when both vanish, 0 when only one does.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (norm(a), norm(b));
    match (na == 0.0, nb == 0.0) {
        (true, true) => 1.0,
        (false, false) => a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb),
        _ => 0.0,
    }
}
