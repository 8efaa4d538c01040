//! Pointwise-Lipschitz graph algorithms.
//!
//! Regularized convex relaxations of minimum S-T cut, bipartite b-matching
//! and packing integer programs, solved by first-order methods, paired with
//! stability-preserving rounding schemes, plus a harness that measures
//! pointwise Lipschitz constants and dynamic recourse empirically via coupled
//! randomized runs on a shared tape of uniform draws.

pub mod error;
pub mod graph;
pub mod harness;
pub mod io;
pub mod matching;
pub mod mincut;
pub mod pip;
pub mod sample;
pub mod solver;
pub mod spectral;
pub mod tape;

pub use error::{Error, Result};
pub use graph::{CutInstance, Perturbation, WeightedGraph, WEIGHT_FLOOR};
pub use tape::RandomTape;
