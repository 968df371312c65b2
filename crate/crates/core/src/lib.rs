//! Periodic linear DAEs `J f' + H f = λ W f` with constant skew-Hermitian
//! `J` and layered, piecewise constant `H`, `W`.
//!
//! The crate splits `C^n` into the range and kernel of `J`, checks the
//! index-1 hypotheses, reduces the system to an ODE on `ran J`, propagates
//! it exactly layer by layer and reads off Floquet multipliers, band edges
//! and point spectrum. [`maxwell`] builds the six-component Maxwell system
//! for planar stacks on top of that.
//!
//! Everything numerical is generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix `f64`. [`io`], [`random`] and [`selftest`] are `f64`
//! only.

pub mod canonical;
pub mod coefficients;
pub mod error;
pub mod hypotheses;
pub mod io;
pub mod linalg;
pub mod maxwell;
pub mod propagation;
pub mod random;
pub mod reduction;
pub mod scalar;
pub mod selftest;
pub mod spectral;

pub use canonical::build_splitting;
pub use error::{Error, Result};
pub use hypotheses::{certify_self_adjoint, check_index1, License, Mode};
pub use maxwell::{assemble, band_structure, LightCone, MaxwellMode};
pub use propagation::{monodromy, monodromy_at, solve_ivp, transfer};
pub use reduction::{reduce, reduce_at};
pub use scalar::Real;
pub use spectral::{band_scan, floquet, floquet_at, point_spectrum, EdgeDirection};

pub type Complex = num_complex::Complex<f64>;
pub type Matrix = scalar::CMatrix<f64>;
pub type Vector = scalar::CVector<f64>;
pub type Tolerances = scalar::Tolerances<f64>;
pub type SkewHermitian = canonical::SkewHermitian<f64>;
pub type Splitting = canonical::CanonicalSplitting<f64>;
pub type Layer = coefficients::Layer<f64>;
pub type Coefficients = coefficients::LayeredCoefficients<f64>;
pub type ValidationReport = coefficients::ValidationReport<f64>;
pub type PeriodFunction = coefficients::PeriodFunction<f64>;
pub type Index1Report = hypotheses::Index1Report<f64>;
pub type Certificate = hypotheses::SelfAdjointCertificate<f64>;
pub type Generator = reduction::ReducedGenerator<f64>;
pub type Monodromy = propagation::Monodromy<f64>;
pub type IvpSolution = propagation::IvpSolution<f64>;
pub type FloquetSet = spectral::FloquetSet<f64>;
pub type BandScan = spectral::BandScan<f64>;
pub type PointSpectrumFinding = spectral::PointSpectrumFinding<f64>;
pub type MaterialTensor = maxwell::MaterialTensor<f64>;
pub type MaxwellLayer = maxwell::MaxwellLayer<f64>;
pub type MaxwellProblem = maxwell::MaxwellProblem<f64>;
pub type MaxwellSystem = maxwell::MaxwellSystem<f64>;
pub type DispersionTable = maxwell::DispersionTable<f64>;
