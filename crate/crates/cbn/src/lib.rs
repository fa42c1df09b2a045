//! Simulation and verification toolkit for degenerate diffusions on
//! catalytic branching networks.
//!
//! The library models a directed catalyst/reactant network, classifies
//! initial points by their degeneracy structure, samples the associated
//! SDE system and its frozen reference diffusion, evaluates the reference
//! semigroup through its explicit Gaussian-mixture representation, and
//! checks weighted Hoelder / semigroup norm machinery and the resolvent
//! perturbation series against closed-form identities and independent
//! Monte Carlo oracles.
//!
//! Entry points:
//! - [`network::BranchingNetwork`] and [`network::InitialClassification`]
//! - [`coeff::CoefficientField`], [`coeff::freeze`], [`coeff::tilde_field`]
//! - [`feller`] for exact Feller branching samplers
//! - [`sde::simulate`] and [`sde::simulate_a0`]
//! - [`semigroup::pt_f`] and the moment oracles
//! - [`norms`] for weighted Hoelder and semigroup norms
//! - [`resolvent`] for the resolvent, the perturbation operator and the
//!   Neumann-type series
//!
//! The `examples/` directory has one runnable example per capability; the
//! thin `cbn` binary drives batch runs from JSON configs.

pub mod cli;
pub mod coeff;
pub mod config;
pub mod error;
pub mod feller;
pub mod network;
pub mod norms;
pub mod report;
pub mod resolvent;
pub mod rng;
pub mod sde;
pub mod semigroup;
pub mod stats;
pub mod testfn;
pub mod verify;

pub use error::{Error, Result};
