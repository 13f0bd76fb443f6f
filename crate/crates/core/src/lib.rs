//! Geometry of bounded-rank correlation matrices.
//!
//! A correlation matrix of rank at most `k` is written `Z = XXᵀ` with `X` an
//! `m×k` matrix of unit rows, unique up to `X ↦ XO` for orthogonal `O`. This
//! crate works on the orbit space of such factors: orbit distances by
//! alignment over `O(k)`, logarithm and exponential maps, rank behaviour
//! along geodesics, and weighted Fréchet means.

pub mod config;
pub mod corr_factor;
pub mod error;
pub mod fixed_rank;
pub mod frechet;
pub mod kernels;
pub mod oracle;
pub mod orthogonal;
pub mod product_sphere;
pub mod quotient;
pub mod sphere;

pub use config::{ArmijoConfig, SolverConfig, SolverReport};
pub use corr_factor::{
    factorize, gram, validate, CorrelationMatrix, ValidationTolerances, Violation,
};
pub use error::{GeomError, Result};
pub use frechet::{frechet_mean, frechet_variance, MeanReport, WeightedSampleSet};
pub use kernels::RankTolerance;
pub use orthogonal::OrthogonalMatrix;
pub use product_sphere::{ProductTangent, UnitRowMatrix};
pub use quotient::{
    align, orbit_dist, orbit_exp, orbit_log, AlignmentResult, GeodesicSegment, OrbitPoint,
};
pub use sphere::{SpherePoint, SphereTangent};

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
pub struct ReadmeDoctests;
