//! Qubit population decay and decoherence under periodic instantaneous pi
//! pulses, from the second-order time-convolutionless master equation.

// `!(x > 0.0)` guards are meant to reject NaN too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod kernels;
pub mod model;
pub mod oracles;
pub mod propagator;
pub mod quadrature;
