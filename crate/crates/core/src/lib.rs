//! Robust PAC learning of low-degree polynomial threshold functions under
//! Gaussian marginals with strong (nasty) contamination.
//!
//! The crate is organized around the pipeline that the learner executes:
//!
//! * [`poly`] / [`shift`] / [`probes`] — exact multivariate Hermite algebra
//!   with Gaussian L2 geometry, plus Monte-Carlo concentration probes.
//! * [`snpt`] / [`split`] / [`decompose`] — super non-singularity testing
//!   and the extendible decomposition engine that rewrites a polynomial as a
//!   composition over a well-conditioned set of harmonic primitives.
//! * [`region`] / [`partition`] — polynomial slabs, conditional rejection
//!   sampling, and the set partitioner that restores (anti-)concentration on
//!   low-margin regions.
//! * [`perceptron`] — feature lifting, whitening, robust mean estimation and
//!   the margin-perceptron loop.
//! * [`learner`] — the region worklist that assembles a decision list of
//!   PTFs.
//! * [`adversary`] — ground-truth generation, contamination strategies, and
//!   the conditioning-failure demonstration.

pub mod adversary;
pub mod decompose;
pub mod error;
pub mod index;
pub mod learner;
pub mod partition;
pub mod perceptron;
pub mod poly;
pub mod probes;
pub mod region;
pub mod rng;
pub mod shift;
pub mod snpt;
pub mod split;
pub mod tables;

pub use error::{LearnerError, PartitionError, PerceptronError, PolyError, SnptError};
pub use index::MultiIndex;
pub use poly::{compose, gaussian_moment_inner_product, Basis, HermitePoly, PolyVec};
