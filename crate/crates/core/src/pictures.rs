//! Operator algebra of the factorized Dyson map `Ω(t) = Ω₂(t) Ω₁(t)`.
//!
//! All derived operators live in the auxiliary representation space and are
//! returned as [`TimeMatrixFn`]s: exact polynomial matrices whenever the
//! inputs allow it (including exact 2x2 inverses with constant determinant),
//! pointwise closures otherwise. Singular Dyson factors surface lazily as
//! [`HipError::SingularMatrix`] on evaluation.

use std::fmt;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{HipError, Result};
use crate::matrix::CMatrix;
use crate::poly::TimeMatrixFn;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Default relative tolerance for operator identities.
pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-10;

/// Hermiticity tolerance for Schrödinger-picture observables.
pub const OBSERVABLE_HERMITIAN_TOL: f64 = 1e-10;

/// The working representations. The auxiliary K-space is never an evolution target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PictureTag {
    #[serde(rename = "SP_textbook")]
    SpTextbook,
    #[serde(rename = "NSP_auxiliary")]
    NspAuxiliary,
    #[serde(rename = "NIP_auxiliary")]
    NipAuxiliary,
    #[serde(rename = "HIP_Kphysical")]
    HipKphysical,
    #[serde(rename = "HIP_dual")]
    HipDual,
}

impl PictureTag {
    pub const ALL: [PictureTag; 5] = [
        PictureTag::SpTextbook,
        PictureTag::NspAuxiliary,
        PictureTag::NipAuxiliary,
        PictureTag::HipKphysical,
        PictureTag::HipDual,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PictureTag::SpTextbook => "SP_textbook",
            PictureTag::NspAuxiliary => "NSP_auxiliary",
            PictureTag::NipAuxiliary => "NIP_auxiliary",
            PictureTag::HipKphysical => "HIP_Kphysical",
            PictureTag::HipDual => "HIP_dual",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.name() == s)
    }
}

impl fmt::Display for PictureTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The pair of Dyson factors `(Ω₁(t), Ω₂(t))`.
#[derive(Debug, Clone)]
pub struct DysonFactorization {
    omega1: TimeMatrixFn,
    omega2: TimeMatrixFn,
}

impl DysonFactorization {
    pub fn new(omega1: TimeMatrixFn, omega2: TimeMatrixFn) -> Result<Self> {
        if omega1.dim() != omega2.dim() {
            return Err(HipError::DimMismatch { left: omega1.dim(), right: omega2.dim() });
        }
        Ok(Self { omega1, omega2 })
    }

    /// Trivial factorization `Ω₁ = Ω₂ = I`.
    pub fn identity(dim: usize) -> Self {
        Self { omega1: TimeMatrixFn::constant(CMatrix::identity(dim)), omega2: TimeMatrixFn::constant(CMatrix::identity(dim)) }
    }

    pub fn dim(&self) -> usize {
        self.omega1.dim()
    }

    pub fn omega1(&self) -> &TimeMatrixFn {
        &self.omega1
    }

    pub fn omega2(&self) -> &TimeMatrixFn {
        &self.omega2
    }
}

/// `Ω(t) = Ω₂(t) Ω₁(t)`.
pub fn full_dyson(d: &DysonFactorization) -> Result<TimeMatrixFn> {
    d.omega2.mul(&d.omega1)
}

/// `Θ(t) = Ω†(t) Ω(t)`.
pub fn metric_of(omega: &TimeMatrixFn) -> TimeMatrixFn {
    omega.conj_transpose().mul(omega).expect("Ω† and Ω share a dimension")
}

/// Coriolis operator `Σ(t) = i Ω⁻¹(t) Ω̇(t)`.
pub fn coriolis(omega: &TimeMatrixFn) -> TimeMatrixFn {
    omega.inverse().mul(&omega.derivative()).expect("same dimension").scale(I)
}

/// `Ω₂₁(t) = Ω₂(t) Ω₁(t) Ω₂⁻¹(t)`.
pub fn omega21(d: &DysonFactorization) -> TimeMatrixFn {
    d.omega2.mul(&d.omega1).and_then(|m| m.mul(&d.omega2.inverse())).expect("same dimension")
}

/// `‖a − b‖_F / max(‖a‖_F, ‖b‖_F)`, or the plain difference norm when both vanish.
pub fn relative_residual(a: &CMatrix, b: &CMatrix) -> f64 {
    let diff = (a - b).fro_norm();
    let scale = a.fro_norm().max(b.fro_norm());
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// `‖op†·metric − metric·op‖_F / ‖metric·op‖_F`.
pub fn quasi_hermiticity_residual(op: &CMatrix, metric: &CMatrix) -> f64 {
    let lhs = &op.conj_transpose() * metric;
    let rhs = metric * op;
    let diff = (&lhs - &rhs).fro_norm();
    let scale = rhs.fro_norm();
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// A Hamiltonian `H(t)` in the auxiliary space bound to a Dyson factorization.
#[derive(Debug, Clone)]
pub struct PictureModel {
    dyson: DysonFactorization,
    hamiltonian: TimeMatrixFn,
    window: (f64, f64),
}

impl PictureModel {
    /// Quasi-Hermiticity is deliberately not enforced here; see `verify`.
    pub fn new(dyson: DysonFactorization, hamiltonian: TimeMatrixFn, window: (f64, f64)) -> Result<Self> {
        if dyson.dim() != hamiltonian.dim() {
            return Err(HipError::DimMismatch { left: dyson.dim(), right: hamiltonian.dim() });
        }
        let (t0, t1) = window;
        if !(t0.is_finite() && t1.is_finite() && t0 < t1) {
            return Err(HipError::InvalidArgument(format!("window [{t0}, {t1}] must be finite and nondegenerate")));
        }
        Ok(Self { dyson, hamiltonian, window })
    }

    pub fn dim(&self) -> usize {
        self.dyson.dim()
    }

    pub fn dyson(&self) -> &DysonFactorization {
        &self.dyson
    }

    pub fn hamiltonian(&self) -> &TimeMatrixFn {
        &self.hamiltonian
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    /// Same model with a different Hamiltonian (used to study broken models).
    pub fn with_hamiltonian(&self, hamiltonian: TimeMatrixFn) -> Result<Self> {
        Self::new(self.dyson.clone(), hamiltonian, self.window)
    }

    pub fn with_window(&self, window: (f64, f64)) -> Result<Self> {
        Self::new(self.dyson.clone(), self.hamiltonian.clone(), window)
    }

    pub fn omega(&self) -> TimeMatrixFn {
        full_dyson(&self.dyson).expect("validated dims")
    }

    pub fn theta(&self) -> TimeMatrixFn {
        metric_of(&self.omega())
    }

    pub fn theta2(&self) -> TimeMatrixFn {
        metric_of(self.dyson.omega2())
    }

    pub fn sigma(&self) -> TimeMatrixFn {
        coriolis(&self.omega())
    }

    pub fn sigma1(&self) -> TimeMatrixFn {
        coriolis(self.dyson.omega1())
    }

    pub fn sigma2(&self) -> TimeMatrixFn {
        coriolis(self.dyson.omega2())
    }

    pub fn omega21(&self) -> TimeMatrixFn {
        omega21(&self.dyson)
    }

    /// `H₁(t) = Ω₁ H Ω₁⁻¹`.
    pub fn hamiltonian_h1(&self) -> TimeMatrixFn {
        let o1 = self.dyson.omega1();
        o1.mul(&self.hamiltonian).and_then(|m| m.mul(&o1.inverse())).expect("validated dims")
    }

    /// `H_S(t) = Ω H Ω⁻¹`, Hermitian for a quasi-Hermitian `H`.
    pub fn textbook_hamiltonian(&self) -> TimeMatrixFn {
        let omega = self.omega();
        omega.mul(&self.hamiltonian).and_then(|m| m.mul(&omega.inverse())).expect("validated dims")
    }

    /// Generator `G_tag(t)` of `i d/dt ψ = G ψ` in the given picture.
    pub fn generator(&self, tag: PictureTag) -> TimeMatrixFn {
        let diff = |a: TimeMatrixFn, b: TimeMatrixFn| a.sub(&b).expect("validated dims");
        match tag {
            PictureTag::SpTextbook => self.textbook_hamiltonian(),
            PictureTag::NspAuxiliary | PictureTag::NipAuxiliary => diff(self.hamiltonian.clone(), self.sigma()),
            PictureTag::HipKphysical => diff(self.hamiltonian_h1(), self.sigma2()),
            // G₁† is the adjoint of the stored G₁, not a separate construction.
            PictureTag::HipDual => diff(self.hamiltonian_h1(), self.sigma2()).conj_transpose(),
        }
    }

    /// Coriolis generator of the Heisenberg-type observable equation.
    ///
    /// For the textbook picture this is `H_S(t)` itself, which is the
    /// Heisenberg generator only when `H_S` is stationary.
    pub fn observable_generator(&self, tag: PictureTag) -> TimeMatrixFn {
        match tag {
            PictureTag::SpTextbook => self.textbook_hamiltonian(),
            PictureTag::NspAuxiliary | PictureTag::NipAuxiliary => self.sigma(),
            PictureTag::HipKphysical | PictureTag::HipDual => self.sigma2(),
        }
    }

    /// Metric defining the physical norm of kets carried by `tag`.
    ///
    /// Dual kets `Θ₂|ψ]` carry the norm `φ† Θ₂⁻¹ φ`.
    pub fn picture_metric(&self, tag: PictureTag) -> TimeMatrixFn {
        match tag {
            PictureTag::SpTextbook => TimeMatrixFn::constant(CMatrix::identity(self.dim())),
            PictureTag::NspAuxiliary | PictureTag::NipAuxiliary => self.theta(),
            PictureTag::HipKphysical => self.theta2(),
            PictureTag::HipDual => self.theta2().inverse(),
        }
    }

    /// Maps an auxiliary-space ket at time `t` into the representation used by `tag`.
    pub fn map_state(&self, tag: PictureTag, psi_aux: &[C64], t: f64) -> Result<Vec<C64>> {
        if psi_aux.len() != self.dim() {
            return Err(HipError::DimMismatch { left: self.dim(), right: psi_aux.len() });
        }
        Ok(match tag {
            PictureTag::SpTextbook => self.omega().eval(t)?.mul_vec(psi_aux),
            PictureTag::NspAuxiliary | PictureTag::NipAuxiliary => psi_aux.to_vec(),
            PictureTag::HipKphysical => self.dyson.omega1().eval(t)?.mul_vec(psi_aux),
            PictureTag::HipDual => {
                let k = self.dyson.omega1().eval(t)?.mul_vec(psi_aux);
                self.theta2().eval(t)?.mul_vec(&k)
            }
        })
    }

    /// `Ã(t) = Ω⁻¹ A_S Ω` for a Hermitian Schrödinger-picture observable.
    pub fn observable_tilde(&self, a_s: &CMatrix) -> Result<TimeMatrixFn> {
        self.check_observable(a_s)?;
        let omega = self.omega();
        omega.inverse().mul(&TimeMatrixFn::constant(a_s.clone()))?.mul(&omega)
    }

    /// `Ã₁(t) = Ω₁ Ã Ω₁⁻¹`, which obeys `Ω₂ Ã₁ = A_S Ω₂`.
    pub fn observable_hip(&self, a_s: &CMatrix) -> Result<TimeMatrixFn> {
        let tilde = self.observable_tilde(a_s)?;
        let o1 = self.dyson.omega1();
        o1.mul(&tilde)?.mul(&o1.inverse())
    }

    /// Observable in the representation of `tag` (`A_S` itself for the textbook picture).
    pub fn observable_for(&self, tag: PictureTag, a_s: &CMatrix) -> Result<TimeMatrixFn> {
        match tag {
            PictureTag::SpTextbook => {
                self.check_observable(a_s)?;
                Ok(TimeMatrixFn::constant(a_s.clone()))
            }
            PictureTag::NspAuxiliary | PictureTag::NipAuxiliary => self.observable_tilde(a_s),
            PictureTag::HipKphysical | PictureTag::HipDual => self.observable_hip(a_s),
        }
    }

    fn check_observable(&self, a_s: &CMatrix) -> Result<()> {
        if a_s.dim() != self.dim() {
            return Err(HipError::DimMismatch { left: self.dim(), right: a_s.dim() });
        }
        let dev = a_s.hermitian_deviation();
        if dev > OBSERVABLE_HERMITIAN_TOL * a_s.fro_norm().max(1.0) {
            return Err(HipError::NotHermitian { deviation: dev });
        }
        Ok(())
    }
}
