//! Order statistics from two overlapping samples drawn from one parent law.
//!
//! The samples are `X_1..X_m` and `X_{r+1}..X_{r+n}`. The crate computes the
//! exact probabilities that the `i`-th order statistic of the first and the
//! `j`-th of the second take given ranks in the pooled sample, the joint
//! density of the pair (a planar part plus an atom on the diagonal), forward
//! regression curves, reconstructions of the parent from regression curves,
//! and Monte Carlo checks of all of these.

pub mod cli;
pub mod combinatorics;
pub mod curve;
pub mod density;
pub mod error;
pub mod mc;
pub mod overlap;
pub mod parent;
pub mod quadrature;
pub mod rational;
pub mod reconstruct;
pub mod regression;

pub use curve::Curve;
pub use density::{joint_overlap_density, NuDensity};
pub use error::{Error, Result};
pub use mc::MCReport;
pub use overlap::{p_overlap, probability_table, OverlapSpec, ProbabilityTable};
pub use parent::{make_family, ModelSpec, ParentModel};
pub use rational::ExactRational;
pub use reconstruct::ReconstructionResult;
