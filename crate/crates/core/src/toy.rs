//! The exactly solvable non-stationary two-state model.
//!
//! Parameters `r, a, b` are bound numerically; every operator is then an
//! exact polynomial matrix in `t` with `s(t) = a·t + b·t²/2`. The Dyson
//! factors are the unit-triangular pair `Ω₂ = [[1,0],[s,1]]`,
//! `Ω₁ = [[1,r],[0,1]]`.
//!
//! [`toy_printed`] transcribes the published closed forms term by term from
//! `s(t)`, never through the Dyson factors, so that comparing them with the
//! derived operators is an independent check.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{HipError, Result};
use crate::pictures::{DysonFactorization, PictureModel};
use crate::poly::{CPoly, PolyMatrix, TimeMatrixFn};

/// Default verification grid over `r`.
pub const GRID_R: [f64; 4] = [0.0, 0.5, 1.0, 2.0];
/// Default verification grid over `a`.
pub const GRID_A: [f64; 2] = [0.0, 1.0];
/// Default verification grid over `b`.
pub const GRID_B: [f64; 2] = [0.0, 0.5];
/// Default probe times.
pub const GRID_T: [f64; 4] = [0.0, 0.25, 0.5, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToyParams {
    pub r: f64,
    pub a: f64,
    pub b: f64,
    pub window: (f64, f64),
}

impl ToyParams {
    /// Parameters on the default window `[0, 1]`.
    pub fn new(r: f64, a: f64, b: f64) -> Self {
        Self { r, a, b, window: (0.0, 1.0) }
    }

    pub fn with_window(mut self, t_min: f64, t_max: f64) -> Self {
        self.window = (t_min, t_max);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if ![self.r, self.a, self.b, self.window.0, self.window.1].iter().all(|x| x.is_finite()) {
            return Err(HipError::InvalidArgument("toy parameters must be finite".into()));
        }
        if !(self.window.0 < self.window.1) {
            return Err(HipError::InvalidArgument("toy window must be nondegenerate".into()));
        }
        Ok(())
    }

    /// Cartesian product of the default `r, a, b` grids, in that nesting order.
    pub fn default_grid() -> Vec<ToyParams> {
        let mut out = Vec::new();
        for &r in &GRID_R {
            for &a in &GRID_A {
                for &b in &GRID_B {
                    out.push(ToyParams::new(r, a, b));
                }
            }
        }
        out
    }
}

fn k(x: f64) -> CPoly {
    CPoly::from_real(&[x])
}

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// `s(t) = a·t + b·t²/2`.
pub fn toy_s(p: &ToyParams) -> CPoly {
    CPoly::from_real(&[0.0, p.a, p.b / 2.0])
}

pub fn toy_dyson(p: &ToyParams) -> DysonFactorization {
    let s = toy_s(p);
    let omega2 = PolyMatrix::from_rows(vec![vec![CPoly::one(), CPoly::zero()], vec![s, CPoly::one()]]);
    let omega1 = PolyMatrix::from_rows(vec![vec![CPoly::one(), k(p.r)], vec![CPoly::zero(), CPoly::one()]]);
    DysonFactorization::new(omega1.into(), omega2.into()).expect("both factors are 2x2")
}

/// The non-Hermitian, quasi-Hermitian `H(t)` with `s → s(t)` substituted.
pub fn toy_hamiltonian(p: &ToyParams) -> TimeMatrixFn {
    let r = p.r;
    let s = toy_s(p);
    let t = CPoly::t();
    let st = &s * &t;
    let rs = s.scale(re(r));
    let rst = st.scale(re(r));
    let r2s = s.scale(re(r * r));
    let r2st = st.scale(re(r * r));
    let h11 = &(&(&-&rs + &rst) + &k(1.0)) + &t;
    let h12 = &(&(&-&r2s + &r2st) - &k(r)) + &t.scale(re(r));
    let h21 = &s - &st;
    let h22 = &(&rs - &rst) + &k(2.0);
    PolyMatrix::from_rows(vec![vec![h11, h12], vec![h21, h22]]).into()
}

pub fn toy_model(p: &ToyParams) -> Result<PictureModel> {
    p.validate()?;
    PictureModel::new(toy_dyson(p), toy_hamiltonian(p), p.window)
}

/// The published closed forms of the toy model.
#[derive(Debug, Clone)]
pub struct ToyPrinted {
    pub params: ToyParams,
    /// Full metric `Θ(t)`.
    pub theta: PolyMatrix,
    /// Reduced metric `Θ₂(t)`.
    pub theta2: PolyMatrix,
    /// Triangular `H₁(t)`.
    pub h1: PolyMatrix,
    /// Full Coriolis operator as printed. Agrees with `iΩ⁻¹Ω̇` only at `r = 1`.
    pub sigma: PolyMatrix,
    /// Partial Coriolis operator `Σ₂(t)`.
    pub sigma2: PolyMatrix,
    /// HIP generator `G₁(t)`.
    pub g1: PolyMatrix,
}

pub fn toy_printed(p: &ToyParams) -> ToyPrinted {
    let (r, a, b) = (p.r, p.a, p.b);
    let s = toy_s(p);
    let s2 = &s * &s;
    let t = CPoly::t();
    let t2 = &t * &t;
    let t3 = &t2 * &t;
    let i = C64::new(0.0, 1.0);
    // a + b t
    let sdot = CPoly::from_real(&[a, b]);

    let theta11 = &k(1.0) + &s2;
    let theta12 = &(&k(r) + &s2.scale(re(r))) + &s;
    let theta22 = &(&(&k(r * r) + &s2.scale(re(r * r))) + &s.scale(re(2.0 * r))) + &k(1.0);
    let theta = PolyMatrix::from_rows(vec![vec![theta11.clone(), theta12.clone()], vec![theta12, theta22]]);

    let theta2 = PolyMatrix::from_rows(vec![vec![theta11, s.clone()], vec![s.clone(), k(1.0)]]);

    let one_plus_t = &k(1.0) + &t;
    let h1 = PolyMatrix::from_rows(vec![
        vec![one_plus_t.clone(), CPoly::zero()],
        vec![&s - &(&t * &s), k(2.0)],
    ]);

    let sigma = PolyMatrix::from_rows(vec![
        vec![sdot.scale(-i * r), sdot.scale(-i * r)],
        vec![sdot.scale(i), sdot.scale(i)],
    ]);

    let sigma2 = PolyMatrix::from_rows(vec![vec![CPoly::zero(), CPoly::zero()], vec![sdot.scale(i), CPoly::zero()]]);

    // a t − a t² + b t²/2 − b t³/2 − i (a + b t)
    let g1_21 = &(&(&(&t.scale(re(a)) - &t2.scale(re(a))) + &t2.scale(re(0.5 * b))) - &t3.scale(re(0.5 * b)))
        - &sdot.scale(i);
    let g1 = PolyMatrix::from_rows(vec![vec![one_plus_t, CPoly::zero()], vec![g1_21, k(2.0)]]);

    ToyPrinted { params: *p, theta, theta2, h1, sigma, sigma2, g1 }
}

impl ToyPrinted {
    /// Printed eigenvalue doublet of `G = H − Σ`: `{1+t, 2 − ibt + ibtr − ia + iar}`.
    pub fn doublet(&self, t: f64) -> [C64; 2] {
        let ToyParams { r, a, b, .. } = self.params;
        let i = C64::new(0.0, 1.0);
        [re(1.0 + t), re(2.0) - i * b * t + i * b * t * r - i * a + i * a * r]
    }

    /// `H(t) − Σ_printed(t)`.
    pub fn g_printed(&self) -> TimeMatrixFn {
        let h = toy_hamiltonian(&self.params);
        h.sub(&TimeMatrixFn::Exact(self.sigma.clone())).expect("2x2")
    }
}

/// Closed-form spectrum `{1+t, 2}` shared by `H`, `H₁`, `H_S` and `G₁`.
pub fn toy_energies(t: f64) -> [C64; 2] {
    [re(1.0 + t), re(2.0)]
}
