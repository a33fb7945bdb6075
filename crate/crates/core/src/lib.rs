//! Non-stationary quasi-Hermitian quantum mechanics in the hybrid
//! interaction picture.
//!
//! A time-dependent Dyson map is factorized as `Ω(t) = Ω₂(t) Ω₁(t)`. From the
//! factors and an auxiliary-space Hamiltonian `H(t)` the crate derives the
//! metrics `Θ = Ω†Ω` and `Θ₂ = Ω₂†Ω₂`, the Coriolis operators `Σ = iΩ⁻¹Ω̇` and
//! `Σ₂`, the generators `G = H − Σ` and `G₁ = H₁ − Σ₂`, and propagates kets,
//! dual kets and observables in every picture. The [`verify`] module checks
//! the operator identities tying the pictures together.
//!
//! Modules:
//! - [`matrix`]: dense complex matrices (inverse, eigenvalues, Cholesky, expm).
//! - [`poly`]: polynomial-in-time matrices with exact derivatives.
//! - [`pictures`]: Dyson factorizations and derived operators.
//! - [`evolution`]: RK4 / Dormand–Prince propagation and trajectories.
//! - [`toy`]: the exactly solvable two-state model.
//! - [`verify`]: identity suite and conditioning comparison.

#![forbid(unsafe_code)]

pub mod error;
pub mod evolution;
pub mod matrix;
pub mod pictures;
pub mod poly;
pub mod toy;
pub mod verify;

pub use num_complex::Complex64 as C64;

pub use error::{HipError, Result};
pub use matrix::{CMatrix, Positivity, Spectrum};
pub use pictures::{DysonFactorization, PictureModel, PictureTag};
pub use poly::{CPoly, PolyMatrix, TimeMatrixFn};
pub use toy::{ToyParams, ToyPrinted};
pub use evolution::{IntegratorSpec, OperatorTrajectory, StateTrajectory};
pub use verify::{CheckResult, CheckStatus, ConditioningReport, SuiteOptions, VerificationReport};
