//! Library side of the experiment driver, kept separate from the binary so
//! integration tests can run experiments in-process.

pub mod config;
pub mod plot;
pub mod rows;
pub mod runner;
pub mod seed;
