//! Experiment configuration.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use crate::spec::{CellName, NetworkSpec, ReadoutName};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Algorithm {
    Bptt,
    Rtrl,
    Eprop,
    MOrder(usize),
    EpropReadout,
    Lsnn,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Algorithm::Bptt => f.write_str("bptt"),
            Algorithm::Rtrl => f.write_str("rtrl"),
            Algorithm::Eprop => f.write_str("eprop"),
            Algorithm::MOrder(m) => write!(f, "morder({m})"),
            Algorithm::EpropReadout => f.write_str("eprop-readout"),
            Algorithm::Lsnn => f.write_str("lsnn"),
        }
    }
}

impl FromStr for Algorithm {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "bptt" => Algorithm::Bptt,
            "rtrl" => Algorithm::Rtrl,
            "eprop" => Algorithm::Eprop,
            "eprop-readout" => Algorithm::EpropReadout,
            "lsnn" => Algorithm::Lsnn,
            other => {
                let m = other
                    .strip_prefix("morder(")
                    .and_then(|rest| rest.strip_suffix(')'))
                    .with_context(|| format!("unknown algorithm {other:?}"))?;
                Algorithm::MOrder(m.trim().parse().with_context(|| format!("bad order in {other:?}"))?)
            }
        })
    }
}

impl TryFrom<String> for Algorithm {
    type Error = anyhow::Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Algorithm> for String {
    fn from(a: Algorithm) -> String {
        a.to_string()
    }
}

/// A fixed size or an inclusive `[min, max]` range sampled per instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Size {
    Fixed(usize),
    Range([usize; 2]),
}

impl Size {
    pub fn bounds(self) -> (usize, usize) {
        match self {
            Size::Fixed(v) => (v, v),
            Size::Range([a, b]) => (a.min(b), a.max(b)),
        }
    }
}

/// Where the network comes from: a path to a JSON spec or the spec inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NetworkSource {
    Path(PathBuf),
    Inline(Box<NetworkSpec>),
}

/// Options for randomly drawn networks, used when no network is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RandomNetwork {
    pub cell: CellName,
    pub n: Size,
    pub inputs: usize,
    pub outputs: usize,
    /// Probability of each neuron to neuron synapse, self-synapses included.
    pub density: f64,
    pub readout: ReadoutName,
    /// Readout leak; drawn from `[0.3, 0.9)` when absent.
    pub kappa: Option<f64>,
    /// Scale of the uniform recurrent weights.
    pub recurrent_scale: Option<f64>,
    /// Reset coefficient of spiking cells; the cell default when absent.
    pub reset: Option<f64>,
}

impl Default for RandomNetwork {
    fn default() -> Self {
        RandomNetwork {
            cell: CellName::LeakyTanh,
            n: Size::Fixed(8),
            inputs: 2,
            outputs: 2,
            density: 1.0,
            readout: ReadoutName::Static,
            kappa: None,
            recurrent_scale: None,
            reset: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub enum Task {
    /// Targets produced by a frozen random network of the same architecture.
    TeacherStudent,
    /// `y*^t_k = sin(2π f_k t / T)`; `f_k = k + 1` when no frequencies are given.
    SinePattern {
        #[serde(default)]
        frequencies: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UpdateMode {
    OfflineAfterT,
    OnlinePerStep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub network: Option<NetworkSource>,
    #[serde(default)]
    pub random: RandomNetwork,
    pub task: Task,
    pub algorithms: Vec<Algorithm>,
    #[serde(rename = "T")]
    pub steps: Size,
    pub trials: usize,
    /// One seed per trial; when empty, trial `i` uses `i`.
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Update modes compared by training runs; both when empty.
    #[serde(default)]
    pub update_mode: Vec<UpdateMode>,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    /// Training iterations (one sequence each).
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    /// Inject one sign flip into the explicit Jacobians of the causal
    /// algorithms. The equivalence suite must then fail.
    #[serde(default)]
    pub mutate: bool,
    /// Neuron counts of the complexity benchmark.
    #[serde(default = "default_bench_sizes")]
    pub bench_sizes: Vec<usize>,
}

fn default_learning_rate() -> f64 {
    0.01
}

fn default_iterations() -> usize {
    50
}

fn default_bench_sizes() -> Vec<usize> {
    vec![8, 16, 32]
}

impl ExperimentConfig {
    pub fn new(task: Task, algorithms: Vec<Algorithm>, steps: Size, trials: usize) -> Self {
        ExperimentConfig {
            network: None,
            random: RandomNetwork::default(),
            task,
            algorithms,
            steps,
            trials,
            seeds: Vec::new(),
            output: None,
            update_mode: Vec::new(),
            learning_rate: default_learning_rate(),
            iterations: default_iterations(),
            mutate: false,
            bench_sizes: default_bench_sizes(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut config: Self = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        // Relative network paths are relative to the config file.
        if let (Some(NetworkSource::Path(p)), Some(dir)) = (&mut config.network, path.parent()) {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            bail!("trials must be at least 1");
        }
        if !self.seeds.is_empty() && self.seeds.len() != self.trials {
            bail!("{} seeds given for {} trials", self.seeds.len(), self.trials);
        }
        let (lo, _) = self.steps.bounds();
        if lo == 0 {
            bail!("T must be at least 1");
        }
        let (n_lo, _) = self.random.n.bounds();
        if n_lo == 0 {
            bail!("random.n must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.random.density) {
            bail!("random.density must lie in [0, 1]");
        }
        if !self.learning_rate.is_finite() {
            bail!("learning_rate must be finite");
        }
        if let Some(m) = self.algorithms.iter().find_map(|a| match a {
            Algorithm::MOrder(0) => Some(0),
            _ => None,
        }) {
            bail!("morder({m}) needs m >= 1");
        }
        Ok(())
    }

    /// Replaces the per-trial seeds with `seed, seed + 1, ...`.
    pub fn reseed(&mut self, seed: u64) {
        self.seeds = (0..self.trials as u64).map(|i| seed.wrapping_add(i)).collect();
    }

    pub fn trial_seeds(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            (0..self.trials as u64).collect()
        } else {
            self.seeds.clone()
        }
    }

    pub fn modes(&self) -> Vec<UpdateMode> {
        if self.update_mode.is_empty() {
            vec![UpdateMode::OfflineAfterT, UpdateMode::OnlinePerStep]
        } else {
            self.update_mode.clone()
        }
    }
}
