//! Simulation and numerical verification toolkit for truncated symmetric
//! α-stable processes.

pub mod domains;
pub mod error;
pub mod estimators;
pub mod kernels;
pub mod quadrature;
pub mod simulator;
pub mod verify;

pub use error::{Error, Result};
