//! Weyl (Dirichlet-to-Neumann) matrices of Schrödinger operators on compact
//! star graphs, and recovery of the edge potentials from Weyl-matrix samples
//! through Neumann series of Bessel functions.

// `!(a <= b)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod direct;
pub mod error;
pub mod graph;
pub mod inverse;
pub mod linalg;
pub mod nsbf;
pub mod ode;
pub mod roots;

pub use error::{Error, Result};
pub use graph::{build_graph, Edge, EdgeSpec, SpectralSamplingPlan, StarGraph};
