use std::time::Instant;

use anyhow::Result;
use rgl_core::bptt::bptt_gradient;
use rgl_core::eprop::eprop_gradient;
use rgl_core::rtrl::rtrl_gradient;
use rgl_core::{local_jacobians, simulate, Gradient};

use crate::config::{ExperimentConfig, RandomNetwork, Size};
use crate::random::{random_inputs, random_network};
use crate::report::{Report, Row, Status};

pub const SLOPE_TOL: f64 = 0.15;
/// Allowed relative miss of the per-doubling flop ratios.
pub const RATIO_TOL: f64 = 0.2;

/// Least-squares slope of `ln y` against `ln x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / k, ly.iter().sum::<f64>() / k);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

struct Point {
    n: usize,
    p: usize,
    flops: [f64; 3],
}

const ALGS: [(&str, f64); 3] = [("bptt", 1.0), ("eprop", 1.0), ("rtrl", 2.0)];

/// Per-step flops and stored trace floats of BPTT, e-prop and RTRL on
/// dense networks of each configured size, with fitted scaling exponents
/// in `p`.
pub fn run_complexity_benchmark(config: &ExperimentConfig) -> Result<Report> {
    let steps = config.steps.bounds().1;
    let seed = config.trial_seeds()[0];
    let mut report = Report::default();
    let mut points = Vec::new();
    for &n in &config.bench_sizes {
        let opts = RandomNetwork { density: 1.0, n: Size::Fixed(n), ..config.random.clone() };
        let net = random_network(&opts, n, seed)?;
        let inputs = random_inputs(&net, steps, seed);
        let traj = simulate(&net, &inputs, steps)?;
        let jac = local_jacobians(&net, &traj);
        let partials = {
            let mut s = rgl_core::Series::zeros(steps, n);
            s.as_mut_slice().iter_mut().enumerate().for_each(|(i, v)| *v = ((i % 7) as f64 - 3.0) * 0.1);
            s
        };
        let (p, dh) = (net.p(), net.hidden_dim());
        let row = |alg: &str, metric: &str, value: f64| Row {
            suite: "bench",
            instance: seed,
            cell: net.cell().name(),
            n,
            steps,
            algorithm: alg.into(),
            metric: metric.into(),
            value,
            tolerance: None,
            status: Status::Info,
            note: format!("p={p}"),
        };
        let mut timed = |alg: &str, f: &dyn Fn() -> Result<Gradient>| -> Result<Gradient> {
            let clock = Instant::now();
            let g = f()?;
            report.wall_seconds.insert(format!("bench/{alg}/n={n}"), clock.elapsed().as_secs_f64());
            Ok(g)
        };
        let bptt = timed("bptt", &|| Ok(bptt_gradient(&jac, &partials)?.0))?;
        let eprop = timed("eprop", &|| Ok(eprop_gradient(&jac, &partials)?))?;
        let rtrl = timed("rtrl", &|| Ok(rtrl_gradient(&jac, &partials)?))?;
        let expected = [n * steps * (dh + 1), p * (dh + 1), n * p * dh];
        let mut flops = [0.0; 3];
        for (i, g) in [&bptt, &eprop, &rtrl].into_iter().enumerate() {
            let alg = ALGS[i].0;
            flops[i] = g.cost.flops as f64 / steps as f64;
            report.push(row(alg, "flops_per_step", flops[i]));
            let stored = g.cost.trace_floats;
            let status = if stored == expected[i] { Status::Pass } else { Status::Fail };
            report.push(Row {
                tolerance: Some(0.0),
                status,
                note: format!("p={p}, expected {}", expected[i]),
                ..row(alg, "trace_floats", stored as f64)
            });
        }
        points.push(Point { n, p, flops });
    }

    let ps: Vec<f64> = points.iter().map(|pt| pt.p as f64).collect();
    for (i, (alg, expected)) in ALGS.iter().enumerate() {
        let ys: Vec<f64> = points.iter().map(|pt| pt.flops[i]).collect();
        let slope = if points.len() >= 2 { fit_slope(&ps, &ys) } else { f64::NAN };
        let dev = (slope - expected).abs();
        report.push(Row {
            suite: "bench",
            instance: seed,
            cell: "",
            n: 0,
            steps,
            algorithm: alg.to_string(),
            metric: "loglog_slope_flops_vs_p".into(),
            value: slope,
            tolerance: Some(SLOPE_TOL),
            status: crate::report::within(dev, SLOPE_TOL),
            note: format!("expected {expected}"),
        });
        // Doubling n multiplies p by about 4 on dense networks; input
        // synapses make it a little less.
        for w in points.windows(2).filter(|w| w[1].n == 2 * w[0].n) {
            let ratio = w[1].flops[i] / w[0].flops[i];
            let target = (w[1].p as f64 / w[0].p as f64).powf(*expected);
            report.push(Row {
                suite: "bench",
                instance: seed,
                cell: "",
                n: 0,
                steps,
                algorithm: alg.to_string(),
                metric: format!("flop_ratio_n{}_to_n{}", w[0].n, w[1].n),
                value: ratio,
                tolerance: Some(RATIO_TOL),
                status: crate::report::within((ratio / target - 1.0).abs(), RATIO_TOL),
                note: format!("expected about {target:.3}"),
            });
        }
    }
    Ok(report)
}
