//! Gradient computation for a general class of recurrent networks.
//!
//! Every neuron carries a hidden state `h` that feeds its own next state
//! (the implicit recurrence) and emits an output `o` that reaches other
//! neurons' next states through weighted synapses (the explicit
//! recurrences). On top of one forward model and one set of local
//! Jacobians this crate provides:
//!
//! - [`bptt`]: exact gradient by backward recursion,
//! - [`rtrl`]: exact gradient by forward-propagated recurrence variables,
//! - [`eprop`]: implicit eligibility traces, e-prop, and the m-order family
//!   that interpolates between e-prop (`m = 1`) and the exact gradient (`m = T`),
//! - [`readout`]: loss partials through static and leaky-integrator readouts,
//!   and the readout-trace and learning-signal forms of e-prop,
//! - [`oracle`]: brute-force definitional sums and finite differences used to
//!   validate all of the above,
//! - [`online`]: a streaming learner that computes per-step contributions
//!   and can apply them as weight updates.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
#![forbid(unsafe_code)]
#![allow(clippy::needless_range_loop)]

extern crate alloc;

pub mod bptt;
pub mod cases;
pub mod eprop;
pub mod error;
pub mod jacobian;
pub mod linalg;
pub mod model;
pub mod online;
pub mod oracle;
pub mod readout;
pub mod rtrl;
pub mod series;

mod gradient;

pub use error::{Error, Result};
pub use gradient::{max_relative_deviation, Cost, Gradient};
pub use jacobian::{local_jacobians, Edge, JacobianSlice, LocalJacobians, Topology};
pub use model::{simulate, AlifParams, Cell, LifParams, Network, Source, Synapse, Trajectory};
pub use readout::{Readout, ReadoutKind};
pub use series::Series;
