//! Flux estimation on directed factor graphs: graph model, message-passing
//! balancing, synthetic benchmarks, per-variable networks and training.

// `!(x >= 0.0)` style checks are how NaN gets rejected along with the rest.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod error;
pub mod graph;
pub mod matrix;
pub mod metrics;
pub mod mpo;
pub mod nn;
mod rng;
pub mod synth;
pub mod trainer;

pub use error::{Error, ErrorKind, Result};
pub use graph::{
    CycleCount, Direction, DirectedFactorGraph, Edge, FactorNode, Norm, StoichiometricMatrix,
    VariableNode, DEFAULT_CYCLE_CAP,
};
pub use matrix::{FluxMatrix, Matrix};
pub use mpo::{run_mpo, run_mpo_batch, MpoConfig, MpoTrace};
