//! Simulation and verification lab for the Hammersley process.

pub mod acceptance;
pub mod error;
pub mod fluctuation_lab;
pub mod hammersley_sim;
pub mod macro_solver;
pub mod increasing_seq;
pub mod poisson_field;
pub mod rng;
pub mod stats_harness;

pub use error::{Error, Result};
