//! Ulam discretization, ergodic decomposition and statistical classification
//! of random interval maps.
//!
//! The crate models one-dimensional random dynamical systems (finite IFS,
//! additive/multiplicative/blend noise, deterministic maps) on [0,1],
//! discretizes their annealed transfer operator on a uniform partition, and
//! runs numerical probes for a hierarchy of Markov-operator properties
//! (Straube criterion, weak almost periodicity, mean/almost/plain/uniform
//! constrictivity, Doeblin conditions, uniform ergodicity, mixing and
//! exactness). Monte Carlo orbit simulation cross-checks the operator
//! picture through duality, Birkhoff histograms and basin surveys.
//!
//! Start with [`gallery::list_gallery`] for ready-made systems, or build a
//! [`system::RandomSystem`] by hand; see the `examples/` directory for one
//! runnable walkthrough per capability.

pub mod classify;
pub mod error;
pub mod gallery;
pub mod io;
pub mod montecarlo;
pub mod rng;
pub mod spectral;
pub mod stepfn;
pub mod system;
pub mod ulam;

pub use error::{Result, TlError};
