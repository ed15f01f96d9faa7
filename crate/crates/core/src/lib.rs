//! Bayesian nonparametric inference for time-varying infection rates in SIR
//! epidemics observed through removal times only.
//!
//! The crate provides exact simulators ([`epi`]), Gaussian-process prior
//! machinery ([`gp`]) and three data-augmented MCMC samplers: constant-rate
//! continuous time ([`parametric`]), discrete time with a log-GP rate
//! ([`discrete`]) and continuous time with a sigmoidal-GP rate ([`cts`]).

pub mod chain;
pub mod cts;
pub mod discrete;
pub mod epi;
pub mod error;
pub mod gp;
pub mod parametric;
pub mod rng;
pub mod stats;
pub mod trajectory;

pub use error::{Error, Result};
