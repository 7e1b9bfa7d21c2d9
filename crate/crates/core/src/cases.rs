//! Hand-computable reference instances.
//!
//! Both use one linear-output leaky neuron behind an identity readout with
//! zero targets, so the loss is `Σ_t (o^t)^2 / 2` and every quantity can be
//! unrolled by hand.

use alloc::vec;

use crate::error::Result;
use crate::jacobian::{local_jacobians, LocalJacobians};
use crate::model::{simulate, Cell, Network, Source, Synapse, Trajectory};
use crate::readout::{readout_forward, readout_loss_partials, Readout};
use crate::series::Series;

/// A network together with the inputs and targets of one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub net: Network,
    pub inputs: Series,
    pub targets: Series,
    pub steps: usize,
}

/// Leak 0.5, one input synapse of weight 1, inputs (1, 1), two steps.
///
/// `h^1 = 1`, `h^2 = 1.5`, and `dL/dw = 1 + 1.5 * 1.5 = 3.25`. There is no
/// explicit recurrence, so e-prop is exact here.
pub fn leaky_pair() -> Instance {
    let net = Network::new(
        1,
        1,
        Cell::leaky_linear(vec![0.5]),
        vec![Synapse::new(Source::Input(0), 0, 1.0)],
        Readout::identity(1),
        0,
    )
    .expect("valid reference network");
    Instance { net, inputs: Series::from_flat(1, vec![1.0, 1.0]), targets: Series::zeros(2, 1), steps: 2 }
}

/// No leak, a self-synapse of weight 1 and an input synapse of weight 1
/// (synapse 0), inputs (1, 0), two steps.
///
/// `h^1 = h^2 = w_in`, so `dL/dw_in = 2`. e-prop keeps only the first-step
/// term and returns 1; the self-synapse path supplies the missing 1.
pub fn self_recurrent() -> Instance {
    let net = Network::new(
        1,
        1,
        Cell::leaky_linear(vec![0.0]),
        vec![Synapse::new(Source::Input(0), 0, 1.0), Synapse::new(Source::Neuron(0), 0, 1.0)],
        Readout::identity(1),
        0,
    )
    .expect("valid reference network");
    Instance { net, inputs: Series::from_flat(1, vec![1.0, 0.0]), targets: Series::zeros(2, 1), steps: 2 }
}

/// Forward pass, Jacobians and readout partials of one instance.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub traj: Trajectory,
    pub jac: LocalJacobians,
    pub y: Series,
    pub loss: f64,
    /// Loss derivatives with respect to the outputs through the readout only.
    pub partials: Series,
}

impl Instance {
    pub fn prepare(&self) -> Result<Prepared> {
        let traj = simulate(&self.net, &self.inputs, self.steps)?;
        let jac = local_jacobians(&self.net, &traj);
        let (y, loss) = readout_forward(self.net.readout(), &traj, &self.targets)?;
        let partials = readout_loss_partials(self.net.readout(), self.net.n(), &y, &self.targets)?;
        Ok(Prepared { traj, jac, y, loss, partials })
    }
}
