//! Two-point-measurement (TPM) and Margenau-Hill (MH) work statistics for
//! finite-dimensional, unitarily driven quantum systems.
//!
//! The numerical core is generic over the scalar type ([`Real`], implemented
//! for `f32` and `f64`); the aliases at the crate root fix it to `f64`, which
//! is what the CLI and the acceptance suite use.

pub mod bounds;
pub mod coherence;
pub mod entropy;
pub mod error;
pub mod io;
pub mod policy;
pub mod qmath;
pub mod sampling;
pub mod scalar;
pub mod workstats;

pub use error::{Error, Result};
pub use policy::NumericPolicy;
pub use scalar::Real;

pub use num_complex::Complex;

pub type ComplexMatrix = qmath::ComplexMatrix<f64>;
pub type HermitianObservable = qmath::HermitianObservable<f64>;
pub type DensityMatrix = qmath::DensityMatrix<f64>;
pub type UnitaryPropagator = qmath::UnitaryPropagator<f64>;
pub type GibbsState = qmath::GibbsState<f64>;
pub type Protocol = workstats::Protocol<f64>;
pub type JointWorkTable = workstats::JointWorkTable<f64>;
pub type WorkDistribution = workstats::WorkDistribution<f64>;
pub type MomentSet = workstats::MomentSet<f64>;
pub type GapReport = bounds::GapReport<f64>;
pub type EntropyReport = entropy::EntropyReport<f64>;
