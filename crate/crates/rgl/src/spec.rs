//! JSON form of a network.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use rgl_core::{AlifParams, Cell, LifParams, Network, Readout, ReadoutKind, Source, Synapse};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellName {
    LeakyTanh,
    LeakyLinear,
    Lif,
    Alif,
}

/// Union of every cell's parameters; unused fields are omitted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leak: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_th: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_pd: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reset: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_a: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightEntry {
    pub pre: usize,
    pub post: usize,
    pub w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadoutName {
    Static,
    LeakyIntegrator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadoutSpec {
    pub kind: ReadoutName,
    pub outputs: usize,
    /// `weights[j][k]`.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    #[serde(default)]
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub n: usize,
    pub cell: CellName,
    pub params: CellParams,
    /// Neuron to neuron synapses.
    pub synapses: Vec<WeightEntry>,
    /// Input channel to neuron synapses.
    pub input_weights: Vec<WeightEntry>,
    pub readout: ReadoutSpec,
    pub seed: u64,
}

impl NetworkSpec {
    pub fn n_inputs(&self) -> usize {
        self.input_weights.iter().map(|e| e.pre + 1).max().unwrap_or(0)
    }

    fn cell(&self) -> Result<Cell> {
        let p = &self.params;
        let lif = LifParams::default();
        let alif = AlifParams::default();
        Ok(match self.cell {
            CellName::LeakyTanh | CellName::LeakyLinear => {
                let leak = p.leak.clone().context("leaky cells need params.leak")?;
                if leak.len() != self.n {
                    bail!("params.leak has {} entries for {} neurons", leak.len(), self.n);
                }
                if self.cell == CellName::LeakyTanh {
                    Cell::leaky_tanh(leak)
                } else {
                    Cell::leaky_linear(leak)
                }
            }
            CellName::Lif => Cell::Lif(LifParams {
                alpha: p.alpha.unwrap_or(lif.alpha),
                v_th: p.v_th.unwrap_or(lif.v_th),
                gamma_pd: p.gamma_pd.unwrap_or(lif.gamma_pd),
                reset: p.reset.unwrap_or(lif.reset),
            }),
            CellName::Alif => Cell::Alif(AlifParams {
                alpha: p.alpha.unwrap_or(alif.alpha),
                v_th: p.v_th.unwrap_or(alif.v_th),
                gamma_pd: p.gamma_pd.unwrap_or(alif.gamma_pd),
                reset: p.reset.unwrap_or(alif.reset),
                rho: p.rho.unwrap_or(alif.rho),
                beta_a: p.beta_a.unwrap_or(alif.beta_a),
            }),
        })
    }

    fn readout(&self) -> Result<Readout> {
        let r = &self.readout;
        if r.weights.len() != self.n || r.weights.iter().any(|row| row.len() != r.outputs) {
            bail!("readout.weights must be {} rows of {} entries", self.n, r.outputs);
        }
        if r.biases.len() != r.outputs {
            bail!("readout.biases must have {} entries", r.outputs);
        }
        let kind = match r.kind {
            ReadoutName::Static => ReadoutKind::Static,
            ReadoutName::LeakyIntegrator => ReadoutKind::LeakyIntegrator { kappa: r.kappa },
        };
        Ok(Readout { kind, outputs: r.outputs, weights: r.weights.concat(), biases: r.biases.clone() })
    }

    /// Builds the network. Input synapses come first, then neuron synapses,
    /// each in document order; gradients follow this order.
    pub fn build(&self) -> Result<Network> {
        let inputs = self.input_weights.iter().map(|e| Synapse::new(Source::Input(e.pre), e.post, e.w));
        let recurrent = self.synapses.iter().map(|e| Synapse::new(Source::Neuron(e.pre), e.post, e.w));
        let synapses = inputs.chain(recurrent).collect();
        Ok(Network::new(self.n, self.n_inputs(), self.cell()?, synapses, self.readout()?, self.seed)?)
    }

    pub fn from_network(net: &Network) -> Self {
        let mut synapses = Vec::new();
        let mut input_weights = Vec::new();
        for s in net.synapses() {
            match s.pre {
                Source::Input(i) => input_weights.push(WeightEntry { pre: i, post: s.post, w: s.weight }),
                Source::Neuron(i) => synapses.push(WeightEntry { pre: i, post: s.post, w: s.weight }),
            }
        }
        let (cell, params) = match net.cell() {
            Cell::LeakyTanh { leak, linear_output } => (
                if *linear_output { CellName::LeakyLinear } else { CellName::LeakyTanh },
                CellParams { leak: Some(leak.clone()), ..CellParams::default() },
            ),
            Cell::Lif(p) => (
                CellName::Lif,
                CellParams {
                    alpha: Some(p.alpha),
                    v_th: Some(p.v_th),
                    gamma_pd: Some(p.gamma_pd),
                    reset: Some(p.reset),
                    ..CellParams::default()
                },
            ),
            Cell::Alif(p) => (
                CellName::Alif,
                CellParams {
                    leak: None,
                    alpha: Some(p.alpha),
                    v_th: Some(p.v_th),
                    gamma_pd: Some(p.gamma_pd),
                    reset: Some(p.reset),
                    rho: Some(p.rho),
                    beta_a: Some(p.beta_a),
                },
            ),
        };
        let r = net.readout();
        let (kind, kappa) = match r.kind {
            ReadoutKind::Static => (ReadoutName::Static, 0.0),
            ReadoutKind::LeakyIntegrator { kappa } => (ReadoutName::LeakyIntegrator, kappa),
        };
        let weights = r.weights.chunks(r.outputs).map(<[f64]>::to_vec).collect();
        NetworkSpec {
            n: net.n(),
            cell,
            params,
            synapses,
            input_weights,
            readout: ReadoutSpec { kind, outputs: r.outputs, weights, biases: r.biases.clone(), kappa },
            seed: net.seed(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network spec serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).with_context(|| format!("writing {}", path.display()))
    }
}
