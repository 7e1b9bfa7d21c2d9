#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rgl_core::{cases::Instance, AlifParams, Cell, LifParams, Network, Readout, ReadoutKind, Series, Source, Synapse};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Tanh,
    Lif,
    Alif,
}

pub const KINDS: [Kind; 3] = [Kind::Tanh, Kind::Lif, Kind::Alif];

#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub n: usize,
    pub inputs: usize,
    pub outputs: usize,
    pub steps: usize,
    pub density: f64,
    pub leaky_readout: bool,
}

impl Shape {
    pub fn small(n: usize, steps: usize) -> Self {
        Shape { n, inputs: 2, outputs: 2, steps, density: 1.0, leaky_readout: false }
    }
}

pub fn cell(kind: Kind, n: usize, rng: &mut ChaCha8Rng) -> Cell {
    match kind {
        Kind::Tanh => Cell::leaky_tanh((0..n).map(|_| rng.gen_range(0.1..0.95)).collect()),
        Kind::Lif => Cell::Lif(LifParams { alpha: rng.gen_range(0.6..0.95), ..LifParams::default() }),
        Kind::Alif => Cell::Alif(AlifParams {
            alpha: rng.gen_range(0.6..0.95),
            rho: rng.gen_range(0.8..0.98),
            beta_a: rng.gen_range(0.05..0.5),
            ..AlifParams::default()
        }),
    }
}

pub fn instance(kind: Kind, shape: Shape, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let Shape { n, inputs, outputs, steps, density, leaky_readout } = shape;
    let spiking = kind != Kind::Tanh;
    let cell = cell(kind, n, &mut rng);
    let rec_scale = if spiking { 0.6 } else { 1.2 / (n as f64).sqrt() };
    let mut synapses = Vec::new();
    for post in 0..n {
        for i in 0..inputs {
            let w = if spiking { rng.gen_range(0.2..1.2) } else { rng.gen_range(-1.0..1.0) };
            synapses.push(Synapse::new(Source::Input(i), post, w));
        }
        for pre in 0..n {
            if rng.gen_bool(density) {
                synapses.push(Synapse::new(Source::Neuron(pre), post, rng.gen_range(-rec_scale..rec_scale)));
            }
        }
    }
    let kind = if leaky_readout {
        ReadoutKind::LeakyIntegrator { kappa: rng.gen_range(0.3..0.9) }
    } else {
        ReadoutKind::Static
    };
    let readout = Readout {
        kind,
        outputs,
        weights: (0..n * outputs).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        biases: (0..outputs).map(|_| rng.gen_range(-0.2..0.2)).collect(),
    };
    let net = Network::new(n, inputs, cell, synapses, readout, seed).unwrap();
    let x = Series::from_flat(
        inputs,
        (0..steps * inputs).map(|_| if spiking { rng.gen_range(0.0..1.5) } else { rng.gen_range(-1.0..1.0) }).collect(),
    );
    let targets = Series::from_flat(outputs, (0..steps * outputs).map(|_| rng.gen_range(-1.0..1.0)).collect());
    Instance { net, inputs: x, targets, steps }
}

/// Relative closeness on the scale of the reference vector.
pub fn assert_close(a: &[f64], b: &[f64], tol: f64, what: &str) {
    let dev = rgl_core::max_relative_deviation(a, b);
    assert!(dev <= tol, "{what}: deviation {dev:e} > {tol:e}\n{a:?}\n{b:?}");
}
