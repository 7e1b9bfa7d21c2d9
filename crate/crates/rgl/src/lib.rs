//! File formats, experiment suites and the command-line driver built on
//! [`rgl_core`].

pub mod config;
pub mod formats;
pub mod random;
pub mod report;
pub mod spec;
pub mod suites;

pub use rgl_core;
