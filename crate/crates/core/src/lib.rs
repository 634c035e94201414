//! Coupled particle swarm and Hamiltonian Monte Carlo optimization.
//!
//! A swarm of EM-PSO particles and one HMC particle share a global best.
//! The HMC particle follows a gradient surrogate built from the swarm's
//! attraction terms, so no derivatives of the objective are needed.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod coupler;
pub mod error;
pub mod hmc;
pub mod nn;
pub mod objectives;
pub mod presets;
pub mod swarm;

pub use error::{Error, Result, RunFailure};
