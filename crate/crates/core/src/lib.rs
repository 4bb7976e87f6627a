//! Numerical laboratory for quantized Metropolis-Hastings walks on local
//! Ising models.
//!
//! The crate builds classical Metropolis/Glauber walks over spin
//! configurations, simulates their quantization exactly on a compact
//! System x Move x Coin space, benchmarks classical annealing against
//! measurement-based and coherent quantum heuristics by total time to
//! solution, runs the irreversible parallel sweep walk, and prices the
//! circuit components of one walk application.
//!
//! Data-parallel kernels run on rayon when the `parallel` feature (default)
//! is enabled and fall back to sequential loops otherwise; all reductions
//! are chunked deterministically so outputs are identical either way.

pub mod anneal;
pub mod error;
pub mod exec;
pub mod ising;
pub mod parallel_walk;
pub mod resources;
pub mod spectral;
pub mod szegedy;
pub mod walk;

pub use error::{Error, Result};
