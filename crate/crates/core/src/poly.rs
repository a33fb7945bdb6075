//! Time-dependent matrices with polynomial entries.
//!
//! Toy-model operators are polynomial in `t` once the model parameters are
//! bound, so products, sums and derivatives stay exact and identities can be
//! checked coefficient by coefficient. Non-polynomial inputs go through
//! [`TimeMatrixFn::Sampled`] with central differences.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::error::{HipError, Result};
use crate::matrix::CMatrix;

/// Relative finite-difference step used when none is given.
pub const DEFAULT_FD_STEP: f64 = 1e-6;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Complex polynomial in `t`; `coeffs[k]` multiplies `t^k`. Always trimmed.
#[derive(Clone, PartialEq, Default)]
pub struct CPoly {
    coeffs: Vec<C64>,
}

impl CPoly {
    pub fn new(coeffs: Vec<C64>) -> Self {
        let mut p = Self { coeffs };
        p.trim();
        p
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: C64) -> Self {
        Self::new(vec![c])
    }

    pub fn one() -> Self {
        Self::constant(C64::new(1.0, 0.0))
    }

    /// The monomial `t`.
    pub fn t() -> Self {
        Self::from_real(&[0.0, 1.0])
    }

    fn trim(&mut self) {
        while self.coeffs.last() == Some(&ZERO) {
            self.coeffs.pop();
        }
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, or `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    /// Constant value, if the polynomial has degree ≤ 0.
    pub fn as_constant(&self) -> Option<C64> {
        match self.coeffs.len() {
            0 => Some(ZERO),
            1 => Some(self.coeffs[0]),
            _ => None,
        }
    }

    pub fn eval(&self, t: f64) -> C64 {
        let t = C64::new(t, 0.0);
        self.coeffs.iter().rev().fold(ZERO, |acc, &c| acc * t + c)
    }

    pub fn derivative(&self) -> Self {
        Self::new(self.coeffs.iter().enumerate().skip(1).map(|(k, &c)| c * k as f64).collect())
    }

    pub fn scale(&self, k: C64) -> Self {
        Self::new(self.coeffs.iter().map(|&c| c * k).collect())
    }

    pub fn conj(&self) -> Self {
        Self::new(self.coeffs.iter().map(|c| c.conj()).collect())
    }

    /// `self(inner(t))`.
    pub fn compose(&self, inner: &CPoly) -> Self {
        self.coeffs.iter().rev().fold(CPoly::zero(), |acc, &c| &(&acc * inner) + &CPoly::constant(c))
    }

    /// Largest coefficient modulus of `self - other`.
    pub fn max_coeff_diff(&self, other: &CPoly) -> f64 {
        (self - other).coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

impl fmt::Debug for CPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return write!(f, "0");
        }
        let terms: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != ZERO)
            .map(|(k, c)| match k {
                0 => format!("({c})"),
                1 => format!("({c})t"),
                _ => format!("({c})t^{k}"),
            })
            .collect();
        write!(f, "{}", terms.join(" + "))
    }
}

impl<'a> Add<&'a CPoly> for &'a CPoly {
    type Output = CPoly;
    fn add(self, rhs: &CPoly) -> CPoly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let get = |p: &CPoly, k: usize| p.coeffs.get(k).copied().unwrap_or(ZERO);
        CPoly::new((0..n).map(|k| get(self, k) + get(rhs, k)).collect())
    }
}

impl<'a> Sub<&'a CPoly> for &'a CPoly {
    type Output = CPoly;
    fn sub(self, rhs: &CPoly) -> CPoly {
        self + &(-rhs)
    }
}

impl Neg for &CPoly {
    type Output = CPoly;
    fn neg(self) -> CPoly {
        self.scale(C64::new(-1.0, 0.0))
    }
}

impl<'a> Mul<&'a CPoly> for &'a CPoly {
    type Output = CPoly;
    fn mul(self, rhs: &CPoly) -> CPoly {
        if self.is_zero() || rhs.is_zero() {
            return CPoly::zero();
        }
        let mut out = vec![ZERO; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        CPoly::new(out)
    }
}

/// Square matrix of [`CPoly`] entries, row-major.
#[derive(Clone, PartialEq)]
pub struct PolyMatrix {
    dim: usize,
    entries: Vec<CPoly>,
}

impl PolyMatrix {
    pub fn new(dim: usize, entries: Vec<CPoly>) -> Result<Self> {
        if dim == 0 {
            return Err(HipError::InvalidArgument("matrix dimension must be positive".into()));
        }
        if entries.len() != dim * dim {
            return Err(HipError::DimMismatch { left: dim * dim, right: entries.len() });
        }
        if !entries.iter().all(CPoly::is_finite) {
            return Err(HipError::InvalidArgument("polynomial coefficients must be finite".into()));
        }
        Ok(Self { dim, entries })
    }

    /// Builds from nested rows; panics on non-square input.
    pub fn from_rows(rows: Vec<Vec<CPoly>>) -> Self {
        let dim = rows.len();
        assert!(rows.iter().all(|r| r.len() == dim), "PolyMatrix::from_rows: not square");
        Self { dim, entries: rows.into_iter().flatten().collect() }
    }

    pub fn constant(m: &CMatrix) -> Self {
        Self { dim: m.dim(), entries: m.as_slice().iter().map(|&c| CPoly::constant(c)).collect() }
    }

    pub fn identity(dim: usize) -> Self {
        Self::constant(&CMatrix::identity(dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Self { dim, entries: vec![CPoly::zero(); dim * dim] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, i: usize, j: usize) -> &CPoly {
        &self.entries[i * self.dim + j]
    }

    pub fn entries(&self) -> &[CPoly] {
        &self.entries
    }

    pub fn max_degree(&self) -> Option<usize> {
        self.entries.iter().filter_map(CPoly::degree).max()
    }

    /// Entrywise Horner evaluation.
    pub fn eval(&self, t: f64) -> CMatrix {
        CMatrix::new(self.dim, self.entries.iter().map(|p| p.eval(t)).collect())
            .expect("evaluation of a finite polynomial matrix")
    }

    pub fn derivative(&self) -> Self {
        Self { dim: self.dim, entries: self.entries.iter().map(CPoly::derivative).collect() }
    }

    pub fn conj_transpose(&self) -> Self {
        let n = self.dim;
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                entries.push(self.entry(j, i).conj());
            }
        }
        Self { dim: n, entries }
    }

    pub fn scale(&self, k: C64) -> Self {
        Self { dim: self.dim, entries: self.entries.iter().map(|p| p.scale(k)).collect() }
    }

    pub fn mul(&self, rhs: &PolyMatrix) -> Result<Self> {
        self.check_dims(rhs)?;
        let n = self.dim;
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = CPoly::zero();
                for k in 0..n {
                    acc = &acc + &(self.entry(i, k) * rhs.entry(k, j));
                }
                entries.push(acc);
            }
        }
        Ok(Self { dim: n, entries })
    }

    pub fn add(&self, rhs: &PolyMatrix) -> Result<Self> {
        self.check_dims(rhs)?;
        Ok(Self { dim: self.dim, entries: self.entries.iter().zip(&rhs.entries).map(|(a, b)| a + b).collect() })
    }

    pub fn sub(&self, rhs: &PolyMatrix) -> Result<Self> {
        self.check_dims(rhs)?;
        Ok(Self { dim: self.dim, entries: self.entries.iter().zip(&rhs.entries).map(|(a, b)| a - b).collect() })
    }

    /// Determinant of a 2x2 polynomial matrix.
    pub fn det_2x2(&self) -> Result<CPoly> {
        if self.dim != 2 {
            return Err(HipError::DimMismatch { left: 2, right: self.dim });
        }
        Ok(&(self.entry(0, 0) * self.entry(1, 1)) - &(self.entry(0, 1) * self.entry(1, 0)))
    }

    /// Exact inverse of a 2x2 matrix whose determinant is a nonzero constant.
    pub fn inverse_2x2(&self) -> Result<Self> {
        let det = self.det_2x2()?;
        let d = match det.as_constant() {
            Some(d) if d.norm() > 0.0 => d,
            _ => return Err(HipError::NonConstantDeterminant),
        };
        let k = C64::new(1.0, 0.0) / d;
        Ok(Self::from_rows(vec![
            vec![self.entry(1, 1).scale(k), (-self.entry(0, 1)).scale(k)],
            vec![(-self.entry(1, 0)).scale(k), self.entry(0, 0).scale(k)],
        ]))
    }

    /// Largest coefficient modulus over all entries of `self - other`.
    pub fn max_coeff_diff(&self, other: &PolyMatrix) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.entries.iter().zip(&other.entries).map(|(a, b)| a.max_coeff_diff(b)).fold(0.0, f64::max)
    }

    fn check_dims(&self, rhs: &PolyMatrix) -> Result<()> {
        if self.dim != rhs.dim {
            Err(HipError::DimMismatch { left: self.dim, right: rhs.dim })
        } else {
            Ok(())
        }
    }
}

impl fmt::Debug for PolyMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "PolyMatrix({}x{}) [", self.dim, self.dim)?;
        for i in 0..self.dim {
            let row: Vec<String> = (0..self.dim).map(|j| format!("{:?}", self.entry(i, j))).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        write!(f, "]")
    }
}

type SampleFn = dyn Fn(f64) -> Result<CMatrix> + Send + Sync;

/// A pointwise-evaluated matrix function with its differentiation step.
#[derive(Clone)]
pub struct Sampled {
    dim: usize,
    f: Arc<SampleFn>,
    step: f64,
}

impl Sampled {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Base step `h`; the step used at `t` is `h · max(1, |t|)`.
    pub fn step(&self) -> f64 {
        self.step
    }
}

/// Either an exact polynomial matrix or a sampled matrix function of time.
#[derive(Clone)]
pub enum TimeMatrixFn {
    Exact(PolyMatrix),
    Sampled(Sampled),
}

impl fmt::Debug for TimeMatrixFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeMatrixFn::Exact(p) => write!(f, "Exact({p:?})"),
            TimeMatrixFn::Sampled(s) => write!(f, "Sampled(dim={}, h={})", s.dim, s.step),
        }
    }
}

impl From<PolyMatrix> for TimeMatrixFn {
    fn from(p: PolyMatrix) -> Self {
        TimeMatrixFn::Exact(p)
    }
}

impl TimeMatrixFn {
    /// Wraps a fallible closure with the default relative step.
    pub fn sampled<F>(dim: usize, f: F) -> Self
    where
        F: Fn(f64) -> Result<CMatrix> + Send + Sync + 'static,
    {
        Self::sampled_with_step(dim, DEFAULT_FD_STEP, f)
    }

    /// Panics if `step` is not strictly positive.
    pub fn sampled_with_step<F>(dim: usize, step: f64, f: F) -> Self
    where
        F: Fn(f64) -> Result<CMatrix> + Send + Sync + 'static,
    {
        assert!(step > 0.0 && step.is_finite(), "finite-difference step must be positive");
        TimeMatrixFn::Sampled(Sampled { dim, f: Arc::new(f), step })
    }

    pub fn constant(m: CMatrix) -> Self {
        TimeMatrixFn::Exact(PolyMatrix::constant(&m))
    }

    pub fn dim(&self) -> usize {
        match self {
            TimeMatrixFn::Exact(p) => p.dim(),
            TimeMatrixFn::Sampled(s) => s.dim,
        }
    }

    pub fn as_exact(&self) -> Option<&PolyMatrix> {
        match self {
            TimeMatrixFn::Exact(p) => Some(p),
            TimeMatrixFn::Sampled(_) => None,
        }
    }

    pub fn eval(&self, t: f64) -> Result<CMatrix> {
        match self {
            TimeMatrixFn::Exact(p) => Ok(p.eval(t)),
            TimeMatrixFn::Sampled(s) => {
                let m = (s.f)(t)?;
                if m.dim() != s.dim {
                    return Err(HipError::DimMismatch { left: s.dim, right: m.dim() });
                }
                Ok(m)
            }
        }
    }

    /// Time derivative at `t`: exact for polynomials, central difference otherwise.
    pub fn derivative_at(&self, t: f64) -> Result<CMatrix> {
        match self {
            TimeMatrixFn::Exact(p) => Ok(p.derivative().eval(t)),
            TimeMatrixFn::Sampled(_) => self.fd_derivative(t),
        }
    }

    /// Central difference `(f(t+h) − f(t−h)) / 2h` for either representation.
    pub fn fd_derivative(&self, t: f64) -> Result<CMatrix> {
        let base = match self {
            TimeMatrixFn::Exact(_) => DEFAULT_FD_STEP,
            TimeMatrixFn::Sampled(s) => s.step,
        };
        let h = base * t.abs().max(1.0);
        let fp = self.eval(t + h)?;
        let fm = self.eval(t - h)?;
        Ok((&fp - &fm).scale(C64::new(1.0 / (2.0 * h), 0.0)))
    }

    /// Whole-function derivative: exact when possible, else a sampled wrapper.
    pub fn derivative(&self) -> TimeMatrixFn {
        match self {
            TimeMatrixFn::Exact(p) => TimeMatrixFn::Exact(p.derivative()),
            TimeMatrixFn::Sampled(s) => {
                let me = self.clone();
                TimeMatrixFn::sampled_with_step(s.dim, s.step, move |t| me.fd_derivative(t))
            }
        }
    }

    /// Pointwise (or exact) product.
    pub fn mul(&self, rhs: &TimeMatrixFn) -> Result<TimeMatrixFn> {
        self.combine(rhs, PolyMatrix::mul, |a, b| a.try_mul(b))
    }

    pub fn add(&self, rhs: &TimeMatrixFn) -> Result<TimeMatrixFn> {
        self.combine(rhs, PolyMatrix::add, |a, b| a.try_add(b))
    }

    pub fn sub(&self, rhs: &TimeMatrixFn) -> Result<TimeMatrixFn> {
        self.combine(rhs, PolyMatrix::sub, |a, b| a.try_sub(b))
    }

    pub fn conj_transpose(&self) -> TimeMatrixFn {
        match self {
            TimeMatrixFn::Exact(p) => TimeMatrixFn::Exact(p.conj_transpose()),
            TimeMatrixFn::Sampled(s) => {
                let me = self.clone();
                TimeMatrixFn::sampled_with_step(s.dim, s.step, move |t| Ok(me.eval(t)?.conj_transpose()))
            }
        }
    }

    pub fn scale(&self, k: C64) -> TimeMatrixFn {
        match self {
            TimeMatrixFn::Exact(p) => TimeMatrixFn::Exact(p.scale(k)),
            TimeMatrixFn::Sampled(s) => {
                let me = self.clone();
                TimeMatrixFn::sampled_with_step(s.dim, s.step, move |t| Ok(me.eval(t)?.scale(k)))
            }
        }
    }

    /// Inverse: exact for 2x2 with constant determinant, pointwise LU otherwise.
    pub fn inverse(&self) -> TimeMatrixFn {
        if let TimeMatrixFn::Exact(p) = self {
            if p.dim() == 2 {
                if let Ok(inv) = p.inverse_2x2() {
                    return TimeMatrixFn::Exact(inv);
                }
            } else if p.dim() == 1 {
                if let Some(c) = p.entry(0, 0).as_constant().filter(|c| c.norm() > 0.0) {
                    let inv = CMatrix::from_rows(&[[C64::new(1.0, 0.0) / c]]);
                    return TimeMatrixFn::constant(inv);
                }
            } else if let Some(m) = constant_value(p) {
                if let Ok(inv) = m.inverse() {
                    return TimeMatrixFn::constant(inv);
                }
            }
        }
        let me = self.clone();
        TimeMatrixFn::sampled_with_step(self.dim(), self.step(), move |t| me.eval(t)?.inverse())
    }

    fn step(&self) -> f64 {
        match self {
            TimeMatrixFn::Exact(_) => DEFAULT_FD_STEP,
            TimeMatrixFn::Sampled(s) => s.step,
        }
    }

    fn combine(
        &self,
        rhs: &TimeMatrixFn,
        exact: fn(&PolyMatrix, &PolyMatrix) -> Result<PolyMatrix>,
        pointwise: fn(&CMatrix, &CMatrix) -> Result<CMatrix>,
    ) -> Result<TimeMatrixFn> {
        if self.dim() != rhs.dim() {
            return Err(HipError::DimMismatch { left: self.dim(), right: rhs.dim() });
        }
        if let (TimeMatrixFn::Exact(a), TimeMatrixFn::Exact(b)) = (self, rhs) {
            return Ok(TimeMatrixFn::Exact(exact(a, b)?));
        }
        let (a, b) = (self.clone(), rhs.clone());
        let step = self.step().min(rhs.step());
        Ok(TimeMatrixFn::sampled_with_step(self.dim(), step, move |t| pointwise(&a.eval(t)?, &b.eval(t)?)))
    }

    /// Evaluates the whole function if every entry is constant.
    pub fn constant_value(&self) -> Option<CMatrix> {
        self.as_exact().and_then(constant_value)
    }
}

fn constant_value(p: &PolyMatrix) -> Option<CMatrix> {
    if p.entries().iter().all(|e| e.degree().unwrap_or(0) == 0) {
        Some(p.eval(0.0))
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn s_poly(a: f64, b: f64) -> CPoly {
        CPoly::from_real(&[0.0, a, b / 2.0])
    }

    fn omega2(s: &CPoly) -> PolyMatrix {
        PolyMatrix::from_rows(vec![vec![CPoly::one(), CPoly::zero()], vec![s.clone(), CPoly::one()]])
    }

    #[test]
    fn trimming_and_degree() {
        let p = CPoly::from_real(&[1.0, 2.0, 0.0, 0.0]);
        assert_eq!(p.coeffs().len(), 2);
        assert_eq!(p.degree(), Some(1));
        assert_eq!(CPoly::from_real(&[0.0, 0.0]).degree(), None);
        assert!(CPoly::zero().is_zero());
    }

    #[test]
    fn s_of_t_evaluates() {
        assert_relative_eq!(s_poly(1.0, 2.0).eval(1.0).re, 2.0);
        assert!(s_poly(0.0, 0.0).is_zero());
    }

    #[test]
    fn theta2_composed_with_s_is_identity_at_zero() {
        let s = s_poly(1.0, 0.0);
        let o = omega2(&s);
        let theta2 = o.conj_transpose().mul(&o).unwrap();
        assert_eq!(theta2.eval(0.0), CMatrix::identity(2));
    }

    #[test]
    fn derivative_examples() {
        let k = PolyMatrix::constant(&CMatrix::from_real_rows(&[[1.0, 2.0], [3.0, 4.0]]));
        assert_eq!(k.derivative(), PolyMatrix::zeros(2));
        let (a, b) = (0.7, -1.3);
        assert_eq!(s_poly(a, b).derivative(), CPoly::from_real(&[a, b]));
        let t2 = PolyMatrix::identity(2).mul(&PolyMatrix::identity(2)).unwrap();
        let t2 = PolyMatrix::from_rows(
            (0..2)
                .map(|i| (0..2).map(|j| &(t2.entry(i, j) * &CPoly::t()) * &CPoly::t()).collect())
                .collect(),
        );
        let expected = PolyMatrix::identity(2).scale(c(2.0, 0.0));
        let expected = PolyMatrix::from_rows(
            (0..2).map(|i| (0..2).map(|j| expected.entry(i, j) * &CPoly::t()).collect()).collect(),
        );
        assert_eq!(t2.derivative(), expected);
    }

    #[test]
    fn product_examples() {
        let a = PolyMatrix::from_rows(vec![
            vec![CPoly::t(), CPoly::from_real(&[1.0, 0.0, 3.0])],
            vec![CPoly::constant(c(0.0, 2.0)), CPoly::one()],
        ]);
        assert_eq!(a.mul(&PolyMatrix::identity(2)).unwrap(), a);
        let r = 0.8;
        let s = s_poly(1.0, 0.5);
        let omega1 = PolyMatrix::constant(&CMatrix::from_real_rows(&[[1.0, r], [0.0, 1.0]]));
        let omega = omega2(&s).mul(&omega1).unwrap();
        let expected = PolyMatrix::from_rows(vec![
            vec![CPoly::one(), CPoly::from_real(&[r])],
            vec![s.clone(), &s.scale(c(r, 0.0)) + &CPoly::one()],
        ]);
        assert!(omega.max_coeff_diff(&expected) < 1e-15);
        assert!(matches!(
            PolyMatrix::identity(2).mul(&PolyMatrix::identity(3)),
            Err(HipError::DimMismatch { .. })
        ));
    }

    #[test]
    fn inverse_2x2_examples() {
        assert_eq!(PolyMatrix::identity(2).inverse_2x2().unwrap(), PolyMatrix::identity(2));
        let s = s_poly(1.0, 0.5);
        let inv = omega2(&s).inverse_2x2().unwrap();
        assert_eq!(inv, omega2(&-&s));
        assert_eq!(omega2(&s).mul(&inv).unwrap(), PolyMatrix::identity(2));
        let tdiag = PolyMatrix::from_rows(vec![vec![CPoly::t(), CPoly::zero()], vec![CPoly::zero(), CPoly::one()]]);
        assert!(matches!(tdiag.inverse_2x2(), Err(HipError::NonConstantDeterminant)));
    }

    #[test]
    fn fd_derivative_examples() {
        let k = TimeMatrixFn::sampled(2, |_| Ok(CMatrix::from_real_rows(&[[1.0, 2.0], [3.0, 4.0]])));
        assert!(k.fd_derivative(0.4).unwrap().max_abs() < 1e-12);

        let exact = omega2(&s_poly(1.0, 0.5));
        let wrapped = {
            let e = exact.clone();
            TimeMatrixFn::sampled_with_step(2, 1e-5, move |t| Ok(e.eval(t)))
        };
        let fd = wrapped.fd_derivative(0.3).unwrap();
        let ex = exact.derivative().eval(0.3);
        assert!(fd.max_abs_diff(&ex) < 1e-8);

        let sq = TimeMatrixFn::sampled(2, |t| Ok(CMatrix::identity(2).scale(C64::new(t * t, 0.0))));
        let d = sq.fd_derivative(1.0).unwrap();
        assert!(d.max_abs_diff(&CMatrix::identity(2).scale(C64::new(2.0, 0.0))) < 1e-9);
    }

    #[test]
    fn time_fn_inverse_falls_back_pointwise() {
        let tdiag = PolyMatrix::from_rows(vec![
            vec![&CPoly::t() + &CPoly::one(), CPoly::zero()],
            vec![CPoly::zero(), CPoly::one()],
        ]);
        let f = TimeMatrixFn::Exact(tdiag);
        let inv = f.inverse();
        assert!(inv.as_exact().is_none());
        assert_relative_eq!(inv.eval(1.0).unwrap()[(0, 0)].re, 0.5);
        let sing = TimeMatrixFn::Exact(PolyMatrix::zeros(2)).inverse();
        assert!(matches!(sing.eval(0.0), Err(HipError::SingularMatrix { .. })));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn poly() -> impl Strategy<Value = CPoly> {
            proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 0..=4)
                .prop_map(|v| CPoly::new(v.into_iter().map(|(a, b)| C64::new(a, b)).collect()))
        }

        fn pmat(n: usize) -> impl Strategy<Value = PolyMatrix> {
            proptest::collection::vec(poly(), n * n).prop_map(move |e| PolyMatrix::new(n, e).unwrap())
        }

        proptest! {
            #[test]
            fn eval_is_multiplicative(
                (a, b) in (1usize..=4).prop_flat_map(|n| (pmat(n), pmat(n))),
                t in -1.5f64..1.5,
            ) {
                let prod = a.mul(&b).unwrap().eval(t);
                let pointwise = &a.eval(t) * &b.eval(t);
                prop_assert!(prod.max_abs_diff(&pointwise) < 1e-12 * (1.0 + pointwise.max_abs()));
            }

            #[test]
            fn leibniz_rule(
                (a, b) in (1usize..=3).prop_flat_map(|n| (pmat(n), pmat(n))),
            ) {
                let lhs = a.mul(&b).unwrap().derivative();
                let rhs = a.derivative().mul(&b).unwrap().add(&a.mul(&b.derivative()).unwrap()).unwrap();
                prop_assert!(lhs.max_coeff_diff(&rhs) < 1e-12);
            }

            #[test]
            fn unit_triangular_inverse_is_exact(p in poly(), q in poly()) {
                let m = PolyMatrix::from_rows(vec![
                    vec![CPoly::one(), p.clone()],
                    vec![CPoly::zero(), CPoly::one()],
                ]).mul(&PolyMatrix::from_rows(vec![
                    vec![CPoly::one(), CPoly::zero()],
                    vec![q.clone(), CPoly::one()],
                ])).unwrap();
                let inv = m.inverse_2x2().unwrap();
                prop_assert!(inv.mul(&m).unwrap().max_coeff_diff(&PolyMatrix::identity(2)) < 1e-10);
            }
        }
    }
}
