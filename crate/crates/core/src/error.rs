use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A network description failed validation.
    InvalidNetwork(&'static str),
    /// The same `(pre, post)` pair appears twice.
    DuplicateSynapse { pre: Source, post: usize },
    /// A synapse refers to a node that does not exist.
    NodeOutOfRange { pre: Source, post: usize },
    /// A cell parameter lies outside its admissible range.
    InvalidParameter { name: &'static str, value: f64 },
    /// Fewer input rows than requested steps, or a width mismatch.
    InputShape { expected: usize, found: usize },
    /// The dynamics produced a non-finite value at step `t` in neuron `neuron`.
    Divergent { t: usize, neuron: usize },
    /// m-order e-prop requires `1 <= m <= T`.
    InvalidOrder { m: usize, steps: usize },
    /// An operation was called with a readout kind it does not support.
    ReadoutMisuse(&'static str),
    /// Finite differences are undefined for spiking cells.
    NonDifferentiable,
    /// A brute-force enumeration would exceed its configured path cap.
    TooLarge { paths: u128, cap: u128 },
    /// A time series has the wrong shape for this network.
    SeriesShape { expected: (usize, usize), found: (usize, usize) },
}

use crate::model::Source;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidNetwork(msg) => write!(f, "invalid network: {msg}"),
            Error::DuplicateSynapse { pre, post } => {
                write!(f, "duplicate synapse {pre} -> {post}")
            }
            Error::NodeOutOfRange { pre, post } => {
                write!(f, "synapse {pre} -> {post} refers to a missing node")
            }
            Error::InvalidParameter { name, value } => {
                write!(f, "parameter {name} = {value} is out of range")
            }
            Error::InputShape { expected, found } => {
                write!(f, "input series too short or too narrow: expected {expected}, found {found}")
            }
            Error::Divergent { t, neuron } => {
                write!(f, "non-finite state at step {t}, neuron {neuron}")
            }
            Error::InvalidOrder { m, steps } => {
                write!(f, "order m = {m} must satisfy 1 <= m <= T = {steps}")
            }
            Error::ReadoutMisuse(msg) => write!(f, "readout misuse: {msg}"),
            Error::NonDifferentiable => {
                write!(f, "finite differences are unsupported for spiking cells")
            }
            Error::TooLarge { paths, cap } => {
                write!(f, "enumeration needs {paths} paths, above the cap of {cap}")
            }
            Error::SeriesShape { expected, found } => {
                write!(f, "series shape {}x{} does not match expected {}x{}", found.0, found.1, expected.0, expected.1)
            }
        }
    }
}

impl core::error::Error for Error {}
