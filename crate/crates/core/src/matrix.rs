//! Dense complex square matrices at desk scale.
//!
//! Everything here is written for `n <= 16`: products, LU inverses,
//! eigenvalues (closed form for 2x2, Hessenberg + shifted QR above),
//! a Cholesky positivity certificate, the Padé matrix exponential and
//! the Frobenius / operator 2-norms.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{HipError, Result};

/// Relative pivot threshold used by [`CMatrix::inverse`] and [`CMatrix::solve`].
pub const SINGULAR_PIVOT_RTOL: f64 = 1e-13;

/// Tolerance for the Hermiticity precondition of [`CMatrix::is_positive_definite`].
pub const HERMITIAN_TOL: f64 = 1e-10;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Square complex matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl CMatrix {
    /// Builds a matrix from row-major entries, checking squareness and finiteness.
    pub fn new(dim: usize, data: Vec<C64>) -> Result<Self> {
        if dim == 0 {
            return Err(HipError::InvalidArgument("matrix dimension must be positive".into()));
        }
        if data.len() != dim * dim {
            return Err(HipError::DimMismatch { left: dim * dim, right: data.len() });
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(HipError::InvalidArgument("matrix entries must be finite".into()));
        }
        Ok(Self { dim, data })
    }

    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![C64::new(0.0, 0.0); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_diag(diag: &[C64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds from nested rows; panics on ragged or non-square input.
    pub fn from_rows<R: AsRef<[C64]>>(rows: &[R]) -> Self {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            let row = row.as_ref();
            assert_eq!(row.len(), dim, "from_rows: matrix must be square");
            data.extend_from_slice(row);
        }
        Self { dim, data }
    }

    /// Real-valued convenience constructor.
    pub fn from_real_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cplx: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.as_ref().iter().map(|&x| C64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&cplx)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn rows(&self) -> Vec<Vec<C64>> {
        self.data.chunks(self.dim).map(|r| r.to_vec()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn conj_transpose(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] = self[(j, i)].conj();
            }
        }
        out
    }

    pub fn scale(&self, k: C64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|&z| z * k).collect() }
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.dim).map(|i| self[(i, i)]).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn fro_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Maximum absolute column sum.
    pub fn one_norm(&self) -> f64 {
        let n = self.dim;
        (0..n).map(|j| (0..n).map(|i| self[(i, j)].norm()).sum::<f64>()).fold(0.0, f64::max)
    }

    /// Operator 2-norm via power iteration on `m† m`.
    pub fn op_norm_estimate(&self) -> f64 {
        let n = self.dim;
        let gram = self.conj_transpose().try_mul(self).expect("square");
        if gram.max_abs() == 0.0 {
            return 0.0;
        }
        // Start vector with distinct phases so it is unlikely to be orthogonal
        // to the dominant singular vector.
        let mut v: Vec<C64> = (0..n)
            .map(|j| C64::new(1.0 + 0.1 * j as f64, 0.37 * (j as f64 + 1.0) / (n as f64 + 1.0)))
            .collect();
        normalize(&mut v);
        let mut lambda = 0.0;
        for _ in 0..10_000 {
            let w = gram.mul_vec(&v);
            let next = vdot(&v, &w).re;
            let wn = vnorm(&w);
            if wn == 0.0 {
                break;
            }
            v = w.into_iter().map(|z| z / wn).collect();
            let done = (next - lambda).abs() <= 1e-15 * next.abs();
            lambda = next;
            if done {
                break;
            }
        }
        lambda.max(0.0).sqrt()
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.dim, "mul_vec: dimension mismatch");
        self.data
            .chunks(self.dim)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn try_mul(&self, rhs: &Self) -> Result<Self> {
        check_dims(self, rhs)?;
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        Ok(out)
    }

    pub fn try_add(&self, rhs: &Self) -> Result<Self> {
        check_dims(self, rhs)?;
        Ok(Self { dim: self.dim, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect() })
    }

    pub fn try_sub(&self, rhs: &Self) -> Result<Self> {
        check_dims(self, rhs)?;
        Ok(Self { dim: self.dim, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect() })
    }

    /// `self * rhs - rhs * self`.
    pub fn commutator(&self, rhs: &Self) -> Result<Self> {
        self.try_mul(rhs)?.try_sub(&rhs.try_mul(self)?)
    }

    /// Frobenius norm of `self - self†`.
    pub fn hermitian_deviation(&self) -> f64 {
        (self - &self.conj_transpose()).fro_norm()
    }

    pub fn lu(&self) -> Result<Lu> {
        Lu::factor(self)
    }

    pub fn inverse(&self) -> Result<Self> {
        let lu = self.lu()?;
        let n = self.dim;
        let mut out = Self::zeros(n);
        let mut e = vec![C64::new(0.0, 0.0); n];
        for j in 0..n {
            e.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
            e[j] = C64::new(1.0, 0.0);
            let col = lu.solve(&e);
            for i in 0..n {
                out[(i, j)] = col[i];
            }
        }
        Ok(out)
    }

    /// Solves `self * x = b`.
    pub fn solve(&self, b: &[C64]) -> Result<Vec<C64>> {
        if b.len() != self.dim {
            return Err(HipError::DimMismatch { left: self.dim, right: b.len() });
        }
        Ok(self.lu()?.solve(b))
    }

    pub fn det(&self) -> C64 {
        match self.dim {
            1 => self.data[0],
            2 => self.data[0] * self.data[3] - self.data[1] * self.data[2],
            _ => match Lu::factor(self) {
                Ok(lu) => lu.det(),
                Err(_) => C64::new(0.0, 0.0),
            },
        }
    }

    /// Eigenvalues, sorted lexicographically by (re, im).
    pub fn eigenvalues(&self) -> Result<Spectrum> {
        eigen::eigenvalues(self).map(Spectrum::new)
    }

    /// Cholesky-based positivity certificate.
    ///
    /// Fails with [`HipError::HermitianityViolated`] when `‖m − m†‖_F`
    /// exceeds `1e-10 · max(1, ‖m‖_F)`.
    pub fn is_positive_definite(&self) -> Result<Positivity> {
        let dev = self.hermitian_deviation();
        if dev > HERMITIAN_TOL * self.fro_norm().max(1.0) {
            return Err(HipError::HermitianityViolated { deviation: dev });
        }
        let n = self.dim;
        let mut l = Self::zeros(n);
        let mut min_pivot = f64::INFINITY;
        for j in 0..n {
            let mut d = self[(j, j)].re;
            for k in 0..j {
                d -= l[(j, k)].norm_sqr();
            }
            if !(d > 0.0) {
                return Ok(Positivity::FailedAt { index: j, pivot: d });
            }
            let ljj = d.sqrt();
            min_pivot = min_pivot.min(ljj);
            l[(j, j)] = C64::new(ljj, 0.0);
            for i in j + 1..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = s / ljj;
            }
        }
        Ok(Positivity::PositiveDefinite { min_pivot })
    }

    /// Matrix exponential by scaling and squaring with Padé approximants.
    pub fn expm(&self) -> Self {
        expm::expm(self)
    }
}

fn check_dims(a: &CMatrix, b: &CMatrix) -> Result<()> {
    if a.dim != b.dim {
        Err(HipError::DimMismatch { left: a.dim, right: b.dim })
    } else {
        Ok(())
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.dim + j]
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix({}x{}) [", self.dim, self.dim)?;
        for row in self.data.chunks(self.dim) {
            write!(f, "  ")?;
            for z in row {
                write!(f, "{:>12.6}{:+.6}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

// Operator impls panic on dimension mismatch; the `try_*` methods report it.
impl<'a> Mul<&'a CMatrix> for &'a CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.try_mul(rhs).expect("matrix product dimension mismatch")
    }
}

impl<'a> Add<&'a CMatrix> for &'a CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        self.try_add(rhs).expect("matrix sum dimension mismatch")
    }
}

impl<'a> Sub<&'a CMatrix> for &'a CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        self.try_sub(rhs).expect("matrix difference dimension mismatch")
    }
}

impl AddAssign<&CMatrix> for CMatrix {
    fn add_assign(&mut self, rhs: &CMatrix) {
        assert_eq!(self.dim, rhs.dim);
        self.data.iter_mut().zip(&rhs.data).for_each(|(a, b)| *a += b);
    }
}

impl Neg for &CMatrix {
    type Output = CMatrix;
    fn neg(self) -> CMatrix {
        self.scale(C64::new(-1.0, 0.0))
    }
}

impl Mul<C64> for &CMatrix {
    type Output = CMatrix;
    fn mul(self, k: C64) -> CMatrix {
        self.scale(k)
    }
}

/// LU factorization with partial pivoting.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: CMatrix,
    perm: Vec<usize>,
    swaps: usize,
}

impl Lu {
    fn factor(m: &CMatrix) -> Result<Self> {
        let n = m.dim;
        let threshold = SINGULAR_PIVOT_RTOL * m.max_abs();
        let mut lu = m.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut swaps = 0;
        for k in 0..n {
            let (p, pmag) = (k..n)
                .map(|i| (i, lu[(i, k)].norm()))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .expect("nonempty");
            if pmag == 0.0 || pmag < threshold {
                return Err(HipError::SingularMatrix { pivot: pmag, threshold });
            }
            if p != k {
                for j in 0..n {
                    lu.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                swaps += 1;
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                for j in k + 1..n {
                    let u = lu[(k, j)];
                    lu[(i, j)] -= f * u;
                }
            }
        }
        Ok(Self { lu, perm, swaps })
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let n = self.lu.dim;
        let mut x: Vec<C64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for k in 0..i {
                let l = self.lu[(i, k)];
                x[i] = x[i] - l * x[k];
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                let u = self.lu[(i, k)];
                x[i] = x[i] - u * x[k];
            }
            x[i] /= self.lu[(i, i)];
        }
        x
    }

    pub fn det(&self) -> C64 {
        let d: C64 = (0..self.lu.dim).map(|i| self.lu[(i, i)]).product();
        if self.swaps % 2 == 1 {
            -d
        } else {
            d
        }
    }
}

/// Outcome of the Cholesky positivity test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Positivity {
    /// Factorization succeeded; the smallest diagonal entry of the factor.
    PositiveDefinite { min_pivot: f64 },
    /// The pivot at `index` (zero-based) was not strictly positive.
    FailedAt { index: usize, pivot: f64 },
}

impl Positivity {
    pub fn is_positive(&self) -> bool {
        matches!(self, Positivity::PositiveDefinite { .. })
    }
}

/// Eigenvalues in lexicographic (re, im) order.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Spectrum(Vec<C64>);

impl Spectrum {
    pub fn new(mut values: Vec<C64>) -> Self {
        values.sort_by(lex_cmp);
        Self(values)
    }

    pub fn values(&self) -> &[C64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_abs_imag(&self) -> f64 {
        self.0.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    /// Bottleneck matching distance between two spectra of equal length.
    ///
    /// Exact over all pairings for up to 7 eigenvalues, greedy above.
    pub fn distance(&self, other: &Spectrum) -> f64 {
        assert_eq!(self.len(), other.len(), "spectra of different lengths");
        let n = self.len();
        if n <= 7 {
            let mut idx: Vec<usize> = (0..n).collect();
            let mut best = f64::INFINITY;
            permute(&mut idx, 0, &mut |p| {
                let d = p
                    .iter()
                    .enumerate()
                    .map(|(i, &j)| (self.0[i] - other.0[j]).norm())
                    .fold(0.0, f64::max);
                best = best.min(d);
            });
            best
        } else {
            let mut used = vec![false; n];
            let mut worst: f64 = 0.0;
            for a in &self.0 {
                let (j, d) = other
                    .0
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| !used[*j])
                    .map(|(j, b)| (j, (a - b).norm()))
                    .min_by(|x, y| x.1.total_cmp(&y.1))
                    .expect("nonempty");
                used[j] = true;
                worst = worst.max(d);
            }
            worst
        }
    }
}

fn permute(idx: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == idx.len() {
        f(idx);
        return;
    }
    for i in k..idx.len() {
        idx.swap(k, i);
        permute(idx, k + 1, f);
        idx.swap(k, i);
    }
}

fn lex_cmp(a: &C64, b: &C64) -> Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

pub(crate) fn vdot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub(crate) fn vnorm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn normalize(v: &mut [C64]) {
    let n = vnorm(v);
    v.iter_mut().for_each(|z| *z /= n);
}

mod eigen {
    use super::*;

    pub(super) fn eigenvalues(m: &CMatrix) -> Result<Vec<C64>> {
        let n = m.dim;
        if n == 1 {
            return Ok(vec![m.data[0]]);
        }
        if is_triangular(m) {
            return Ok(m.diagonal());
        }
        if n == 2 {
            return Ok(quadratic(m));
        }
        let mut h = hessenberg(m);
        shifted_qr(&mut h, 100 * n)
    }

    fn is_triangular(m: &CMatrix) -> bool {
        let n = m.dim;
        let zero = C64::new(0.0, 0.0);
        let lower_zero = (0..n).all(|i| (0..i).all(|j| m[(i, j)] == zero));
        let upper_zero = (0..n).all(|i| (i + 1..n).all(|j| m[(i, j)] == zero));
        lower_zero || upper_zero
    }

    /// Roots of λ² − tr·λ + det with the cancellation-free branch.
    fn quadratic(m: &CMatrix) -> Vec<C64> {
        let tr = m.trace();
        let det = m.det();
        let disc = (tr * tr - det * 4.0).sqrt();
        let plus = tr + disc;
        let minus = tr - disc;
        let big = if plus.norm() >= minus.norm() { plus } else { minus };
        let l1 = big / 2.0;
        let l2 = if l1.norm() == 0.0 { C64::new(0.0, 0.0) } else { det / l1 };
        vec![l1, l2]
    }

    /// Householder reduction to upper Hessenberg form.
    pub(super) fn hessenberg(m: &CMatrix) -> CMatrix {
        let n = m.dim;
        let mut h = m.clone();
        for k in 0..n.saturating_sub(2) {
            let x: Vec<C64> = (k + 1..n).map(|i| h[(i, k)]).collect();
            let xnorm = vnorm(&x);
            if xnorm == 0.0 {
                continue;
            }
            let phase = if x[0].norm() == 0.0 { C64::new(1.0, 0.0) } else { x[0] / x[0].norm() };
            let alpha = -phase * xnorm;
            let mut v = x;
            v[0] -= alpha;
            let vn = vnorm(&v);
            if vn == 0.0 {
                continue;
            }
            v.iter_mut().for_each(|z| *z /= vn);
            // H <- P H with P = I - 2 v v†, acting on rows k+1..n
            for j in 0..n {
                let s: C64 = v.iter().enumerate().map(|(r, vr)| vr.conj() * h[(k + 1 + r, j)]).sum();
                for (r, vr) in v.iter().enumerate() {
                    h[(k + 1 + r, j)] -= *vr * s * 2.0;
                }
            }
            // H <- H P, acting on columns k+1..n
            for i in 0..n {
                let s: C64 = v.iter().enumerate().map(|(c, vc)| h[(i, k + 1 + c)] * vc).sum();
                for (c, vc) in v.iter().enumerate() {
                    h[(i, k + 1 + c)] -= s * vc.conj() * 2.0;
                }
            }
            for i in k + 2..n {
                h[(i, k)] = C64::new(0.0, 0.0);
            }
        }
        h
    }

    fn wilkinson(a: C64, b: C64, c: C64, d: C64) -> C64 {
        let tr = a + d;
        let det = a * d - b * c;
        let disc = (tr * tr - det * 4.0).sqrt();
        let l1 = (tr + disc) / 2.0;
        let l2 = (tr - disc) / 2.0;
        if (l1 - d).norm() <= (l2 - d).norm() {
            l1
        } else {
            l2
        }
    }

    /// Single-shift complex QR on a Hessenberg matrix with deflation.
    fn shifted_qr(h: &mut CMatrix, cap: usize) -> Result<Vec<C64>> {
        let n = h.dim;
        let mut eig = vec![C64::new(0.0, 0.0); n];
        let mut hi = n - 1;
        let mut total = 0usize;
        let mut since_deflation = 0usize;
        let eps = f64::EPSILON;
        loop {
            if hi == 0 {
                eig[0] = h[(0, 0)];
                break;
            }
            let mut l = hi;
            while l > 0 {
                let sub = h[(l, l - 1)].norm();
                let scale = h[(l - 1, l - 1)].norm() + h[(l, l)].norm();
                if sub <= eps * scale || sub < f64::MIN_POSITIVE {
                    h[(l, l - 1)] = C64::new(0.0, 0.0);
                    break;
                }
                l -= 1;
            }
            if l == hi {
                eig[hi] = h[(hi, hi)];
                hi -= 1;
                since_deflation = 0;
                continue;
            }
            if l + 1 == hi {
                // 2x2 block: closed form
                let sub = CMatrix::from_rows(&[
                    [h[(l, l)], h[(l, hi)]],
                    [h[(hi, l)], h[(hi, hi)]],
                ]);
                let ev = quadratic(&sub);
                eig[l] = ev[0];
                eig[hi] = ev[1];
                if l == 0 {
                    break;
                }
                hi = l - 1;
                since_deflation = 0;
                continue;
            }
            total += 1;
            since_deflation += 1;
            if total > cap {
                return Err(HipError::NoConvergence { iterations: cap });
            }
            let mu = if since_deflation.is_multiple_of(11) {
                // exceptional shift
                h[(hi, hi)] + C64::new(h[(hi, hi - 1)].norm() * 0.75, 0.0)
            } else {
                wilkinson(h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)])
            };
            for k in l..=hi {
                h[(k, k)] -= mu;
            }
            let mut rots = Vec::with_capacity(hi - l);
            for k in l..hi {
                let a = h[(k, k)];
                let b = h[(k + 1, k)];
                let r = (a.norm_sqr() + b.norm_sqr()).sqrt();
                let (c, s) = if r == 0.0 {
                    (C64::new(1.0, 0.0), C64::new(0.0, 0.0))
                } else {
                    (a / r, b / r)
                };
                for j in k..=hi {
                    let x = h[(k, j)];
                    let y = h[(k + 1, j)];
                    h[(k, j)] = c.conj() * x + s.conj() * y;
                    h[(k + 1, j)] = -s * x + c * y;
                }
                rots.push((c, s));
            }
            for (idx, (c, s)) in rots.into_iter().enumerate() {
                let k = l + idx;
                for i in l..=(k + 1).min(hi) {
                    let x = h[(i, k)];
                    let y = h[(i, k + 1)];
                    h[(i, k)] = x * c + y * s;
                    h[(i, k + 1)] = -x * s.conj() + y * c.conj();
                }
            }
            for k in l..=hi {
                h[(k, k)] += mu;
            }
        }
        Ok(eig)
    }
}

mod expm {
    use super::*;

    const THETA: [(usize, f64); 4] = [
        (3, 1.495585217958292e-2),
        (5, 2.53939833006323e-1),
        (7, 9.504178996162932e-1),
        (9, 2.097847961257068e0),
    ];
    const THETA_13: f64 = 5.371920351148152e0;

    fn coeffs(order: usize) -> &'static [f64] {
        match order {
            3 => &[120.0, 60.0, 12.0, 1.0],
            5 => &[30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0],
            7 => &[17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0],
            9 => &[
                17643225600.0,
                8821612800.0,
                2075673600.0,
                302702400.0,
                30270240.0,
                2162160.0,
                110880.0,
                3960.0,
                90.0,
                1.0,
            ],
            13 => &[
                64764752532480000.0,
                32382376266240000.0,
                7771770303897600.0,
                1187353796428800.0,
                129060195264000.0,
                10559470521600.0,
                670442572800.0,
                33522128640.0,
                1323241920.0,
                40840800.0,
                960960.0,
                16380.0,
                182.0,
                1.0,
            ],
            _ => unreachable!("unsupported Padé order"),
        }
    }

    pub(super) fn expm(a: &CMatrix) -> CMatrix {
        let n = a.dim;
        let norm = a.one_norm();
        if norm == 0.0 {
            return CMatrix::identity(n);
        }
        for &(order, theta) in &THETA {
            if norm <= theta {
                return pade(a, order);
            }
        }
        let s = ((norm / THETA_13).log2().ceil()).max(0.0) as i32;
        let scaled = a.scale(C64::new(2f64.powi(-s), 0.0));
        let mut r = pade(&scaled, 13);
        for _ in 0..s {
            r = &r * &r;
        }
        r
    }

    /// Diagonal Padé approximant r_m(A) = q_m(A)^{-1} p_m(A).
    fn pade(a: &CMatrix, order: usize) -> CMatrix {
        let n = a.dim;
        let b = coeffs(order);
        let id = CMatrix::identity(n);
        let a2 = a * a;
        let (u, v) = if order == 13 {
            let a4 = &a2 * &a2;
            let a6 = &a4 * &a2;
            let c = |k: usize| C64::new(b[k], 0.0);
            let u_inner = &(&a6.scale(c(13)) + &a4.scale(c(11))) + &a2.scale(c(9));
            let u_tail = &(&(&a6.scale(c(7)) + &a4.scale(c(5))) + &a2.scale(c(3))) + &id.scale(c(1));
            let u = a * &(&(&a6 * &u_inner) + &u_tail);
            let v_inner = &(&a6.scale(c(12)) + &a4.scale(c(10))) + &a2.scale(c(8));
            let v_tail = &(&(&a6.scale(c(6)) + &a4.scale(c(4))) + &a2.scale(c(2))) + &id.scale(c(0));
            let v = &(&a6 * &v_inner) + &v_tail;
            (u, v)
        } else {
            let mut pow = id.clone();
            let mut u_acc = CMatrix::zeros(n);
            let mut v_acc = CMatrix::zeros(n);
            for k in 0..=order / 2 {
                u_acc += &pow.scale(C64::new(b[2 * k + 1], 0.0));
                v_acc += &pow.scale(C64::new(b[2 * k], 0.0));
                pow = &pow * &a2;
            }
            (a * &u_acc, v_acc)
        };
        let p = &v + &u;
        let q = &v - &u;
        let lu = q.lu().expect("Padé denominator is nonsingular inside the theta bound");
        let mut out = CMatrix::zeros(n);
        for j in 0..n {
            let col: Vec<C64> = (0..n).map(|i| p[(i, j)]).collect();
            let x = lu.solve(&col);
            for i in 0..n {
                out[(i, j)] = x[i];
            }
        }
        out
    }
}

/// `-i · t · m`, the argument of a stationary propagator.
pub fn minus_i_t(m: &CMatrix, t: f64) -> CMatrix {
    m.scale(-I * t)
}
