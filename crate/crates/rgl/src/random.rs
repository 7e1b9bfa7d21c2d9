//! Random networks and task instances.

use anyhow::{bail, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rgl_core::cases::Instance;
use rgl_core::{simulate, AlifParams, Cell, LifParams, Network, Readout, ReadoutKind, Series, Source, Synapse};

use crate::config::{ExperimentConfig, NetworkSource, RandomNetwork, Task};
use crate::spec::{CellName, NetworkSpec, ReadoutName};

/// Seed offset separating the teacher and input streams from the student.
const TEACHER_STREAM: u64 = 0x7ea_c4e5;
const INPUT_STREAM: u64 = 0x1_9b07;

fn sample(rng: &mut ChaCha8Rng, (lo, hi): (usize, usize)) -> usize {
    rng.gen_range(lo..=hi)
}

/// Draws a network with `n` neurons. Smooth cells get weights scaled by
/// `1/sqrt(n)`; spiking cells get positive input weights so they fire.
pub fn random_network(opts: &RandomNetwork, n: usize, seed: u64) -> Result<Network> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spiking = matches!(opts.cell, CellName::Lif | CellName::Alif);
    let cell = match opts.cell {
        CellName::LeakyTanh => Cell::leaky_tanh((0..n).map(|_| rng.gen_range(0.1..0.95)).collect()),
        CellName::LeakyLinear => Cell::leaky_linear((0..n).map(|_| rng.gen_range(0.1..0.6)).collect()),
        CellName::Lif => Cell::Lif(LifParams {
            alpha: rng.gen_range(0.6..0.95),
            reset: opts.reset.unwrap_or(LifParams::default().reset),
            ..LifParams::default()
        }),
        CellName::Alif => Cell::Alif(AlifParams {
            alpha: rng.gen_range(0.6..0.95),
            reset: opts.reset.unwrap_or(AlifParams::default().reset),
            rho: rng.gen_range(0.8..0.98),
            beta_a: rng.gen_range(0.05..0.5),
            ..AlifParams::default()
        }),
    };
    let rec_scale = opts.recurrent_scale.unwrap_or(match opts.cell {
        CellName::LeakyLinear => 0.3 / (n as f64).sqrt(),
        CellName::LeakyTanh => 1.2 / (n as f64).sqrt(),
        CellName::Lif | CellName::Alif => 2.0 / (n as f64).sqrt(),
    });
    let mut synapses = Vec::new();
    for post in 0..n {
        for i in 0..opts.inputs {
            let w = if spiking { rng.gen_range(0.2..1.2) } else { rng.gen_range(-1.0..1.0) };
            synapses.push(Synapse::new(Source::Input(i), post, w));
        }
        for pre in 0..n {
            if rng.gen_bool(opts.density) {
                synapses.push(Synapse::new(Source::Neuron(pre), post, rng.gen_range(-rec_scale..rec_scale)));
            }
        }
    }
    let kind = match opts.readout {
        ReadoutName::Static => ReadoutKind::Static,
        ReadoutName::LeakyIntegrator => {
            ReadoutKind::LeakyIntegrator { kappa: opts.kappa.unwrap_or_else(|| rng.gen_range(0.3..0.9)) }
        }
    };
    let out_scale = 1.0 / (n as f64).sqrt();
    let readout = Readout {
        kind,
        outputs: opts.outputs,
        weights: (0..n * opts.outputs).map(|_| rng.gen_range(-out_scale..out_scale)).collect(),
        biases: (0..opts.outputs).map(|_| rng.gen_range(-0.2..0.2)).collect(),
    };
    Ok(Network::new(n, opts.inputs, cell, synapses, readout, seed)?)
}

/// Input stream suited to the cell: uniform on `[-1, 1)` for smooth cells,
/// `[0, 1.5)` for spiking cells.
pub fn random_inputs(net: &Network, steps: usize, seed: u64) -> Series {
    let width = net.n_inputs();
    if width == 0 {
        return Series::zeros(steps, 0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ INPUT_STREAM);
    let spiking = net.cell().is_spiking();
    let data =
        (0..steps * width).map(|_| if spiking { rng.gen_range(0.0..1.5) } else { rng.gen_range(-1.0..1.0) }).collect();
    Series::from_flat(width, data)
}

/// Targets for `net` driven by `inputs`.
pub fn task_targets(task: &Task, net: &Network, inputs: &Series, steps: usize, seed: u64) -> Result<Series> {
    let outputs = net.readout().outputs;
    match task {
        Task::TeacherStudent => {
            let mut teacher = net.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ TEACHER_STREAM);
            let w: Vec<f64> =
                teacher.weights().iter().map(|w| w + rng.gen_range(-0.5..0.5) * w.abs().max(0.1)).collect();
            teacher.set_weights(&w);
            let traj = simulate(&teacher, inputs, steps)?;
            Ok(teacher.readout().forward(&traj))
        }
        Task::SinePattern { frequencies } => {
            if !frequencies.is_empty() && frequencies.len() != outputs {
                bail!("{} frequencies for {} readout outputs", frequencies.len(), outputs);
            }
            let mut y = Series::zeros(steps, outputs);
            for t in 1..=steps {
                for k in 0..outputs {
                    let f = frequencies.get(k).copied().unwrap_or((k + 1) as f64);
                    y.at_mut(t)[k] = (2.0 * std::f64::consts::PI * f * t as f64 / steps as f64).sin();
                }
            }
            Ok(y)
        }
    }
}

/// The instance for one trial seed.
pub fn instance(config: &ExperimentConfig, seed: u64) -> Result<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let steps = sample(&mut rng, config.steps.bounds());
    let net = match &config.network {
        Some(NetworkSource::Inline(spec)) => spec.build()?,
        Some(NetworkSource::Path(path)) => NetworkSpec::load(path)?.build()?,
        None => {
            let n = sample(&mut rng, config.random.n.bounds());
            random_network(&config.random, n, seed)?
        }
    };
    let inputs = random_inputs(&net, steps, seed);
    let targets = task_targets(&config.task, &net, &inputs, steps, seed)?;
    Ok(Instance { net, inputs, targets, steps })
}
