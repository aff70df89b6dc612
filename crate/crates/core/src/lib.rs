//! Finite-n simulation and hydrodynamic-limit equations for a balanced
//! excitatory/inhibitory network with Poisson synapses and `n^{-1/2}` coupling.
//!
//! The `parallel` feature (on by default) runs Monte Carlo trials, per-target
//! updates and parameter sweeps on rayon; without it the same code runs
//! sequentially and produces identical output.

pub mod config;
pub mod empirics;
pub mod error;
pub mod experiment;
pub mod fluctuations;
pub mod io;
pub mod limit;
pub mod manifold;
pub mod model;
mod par;
pub mod quadrature;
pub mod rng;
pub mod sim;
pub mod svg;

pub use error::{Error, Result};
pub use model::{macro_of_micro, ChannelId, CustomRate, FiringRate, MacroState, MicroState, NetworkParams, Population};
pub use quadrature::{Jacobian2x2, QuadratureRule};
