//! Transient-stability simulation of multi-machine grids with federated
//! learning of distributed neural controllers.
//!
//! The crate covers the full pipeline: Kron-reduced network modeling
//! ([`grid`]), controlled swing-equation integration with bus faults
//! ([`dynamics`]), the CPFL / DPFL / FLC control laws ([`control`]), a
//! from-scratch Chebyshev Kolmogorov-Arnold network with exact gradients
//! ([`kan`]), FedAvg orchestration ([`federated`]) and the evaluation harness
//! ([`experiments`]). Everything is deterministic given explicit seeds.

pub mod cases;
pub mod control;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod federated;
pub mod grid;
pub mod kan;
pub mod linalg;
pub mod rng;

pub use error::{Error, Result};
