//! Stochastic gradient-boosted decision trees trained asynchronously
//! through a simulated parameter server with bounded staleness, plus a
//! calculator for the associated convergence constants.
#![forbid(unsafe_code)]

pub mod cli;
pub mod config;
pub mod dataset;
pub mod experiment;
pub mod loss;
pub mod rng;
pub mod sampler;
pub mod synth;
pub mod theory;
pub mod trainer;
pub mod tree;
