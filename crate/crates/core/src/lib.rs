//! Delayed-feedback simulation for multi-agent sequential decision making.
//!
//! The crate is organised around one idea: a *multi-batched* learner fixes its
//! policy and a stopping rule at the start of every batch, so running it under
//! stochastically delayed trajectory feedback only requires waiting longer
//! inside each batch. The pieces are:
//!
//! - [`msdm`]: environments (bandits, MDPs, Markov games), policies, episode
//!   sampling and exact dynamic-programming oracles (values, best responses,
//!   Nash values, CCE gaps).
//! - [`delay`]: delay laws with exact quantiles and the arrival queue.
//! - [`batch`]: the batch protocol, stopping criteria and the undelayed /
//!   delayed runners.
//! - [`algorithms`]: batched successive elimination, phase elimination with a
//!   G-optimal design, multi-batched Nash-VI, LSVI for linear Markov games and
//!   multi-batched V-learning.
//! - [`equilibrium`]: matrix-game solvers and CCE certification.
//! - [`harness`]: configs, seed sweeps, regret accounting, CSV output, scaling
//!   fits and the `verify` suite.

pub mod algorithms;
pub mod batch;
pub mod delay;
pub mod equilibrium;
pub mod error;
pub mod harness;
pub mod msdm;
pub mod rng;

pub use error::{Error, Result};
