//! Random regular graphs and their second eigenvalue: samplers, double
//! switchings and exact size-biased couplings, size-bias concentration
//! bounds, the uniform tails property, the Kahn–Szemerédi light/heavy
//! machinery, and a dense symmetric eigensolver.

pub mod error;
pub mod experiment;
pub mod graph;
pub mod ks;
pub mod perm;
pub mod render;
pub mod report;
pub mod rng;
pub mod samplers;
pub mod scalar;
pub mod sizebias;
pub mod spectra;
pub mod switchings;
pub mod utp;

pub use error::{Error, Result};
pub use graph::{AdjacencyMatrix, DenseMatrix, LinearFormStats, VertexSet};
pub use perm::Permutation;
pub use rng::RngStream;
pub use samplers::{GraphModel, PermKind};
pub use scalar::Real;

pub type Matrix64 = DenseMatrix<f64>;
pub type LinearFormStats64 = LinearFormStats<f64>;
pub type BoundParams64 = sizebias::BoundParams<f64>;
pub type BennettParams64 = sizebias::BennettParams<f64>;
pub type UtpParams64 = utp::UtpParams<f64>;
pub type KsConstants64 = ks::KsConstants<f64>;
pub type DiscrepancyParams64 = ks::DiscrepancyParams<f64>;
