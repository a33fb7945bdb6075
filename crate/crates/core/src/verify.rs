//! Named identity checks and the NIP/HIP conditioning comparison.
//!
//! Every check in [`REGISTRY`] computes a nonnegative residual. Checks that
//! error out (e.g. a singular Dyson factor) fail with an infinite residual.
//! Results come back in registry order whatever the thread count.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{HipError, Result};
use crate::evolution::{evolve_hip_with_dual, evolve_ket, evolve_observable, propagator_series, uniform_times, IntegratorSpec};
use crate::matrix::{vnorm, CMatrix, Spectrum};
use crate::pictures::{quasi_hermiticity_residual, relative_residual, PictureModel, PictureTag, DEFAULT_RESIDUAL_TOL};
use crate::poly::{PolyMatrix, TimeMatrixFn};
use crate::toy::{toy_energies, toy_model, toy_printed, ToyParams, ToyPrinted, GRID_T};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    RecordedDiscrepancy,
}

fn ser_residual<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str("inf")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub status: CheckStatus,
    #[serde(serialize_with = "ser_residual")]
    pub residual: f64,
    pub tolerance: f64,
    /// Parameter bindings and probe times.
    pub context: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub pass: usize,
    pub fail: usize,
    pub recorded_discrepancy: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub checks: Vec<CheckResult>,
    pub summary: Summary,
}

impl VerificationReport {
    pub fn new(checks: Vec<CheckResult>) -> Self {
        let mut summary = Summary::default();
        for c in &checks {
            match c.status {
                CheckStatus::Pass => summary.pass += 1,
                CheckStatus::Fail => summary.fail += 1,
                CheckStatus::RecordedDiscrepancy => summary.recorded_discrepancy += 1,
            }
        }
        Self { checks, summary }
    }

    pub fn passed(&self) -> bool {
        self.summary.fail == 0
    }

    pub fn by_name<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a CheckResult> + 'a {
        self.checks.iter().filter(move |c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| c.status == CheckStatus::Fail)
    }

    pub fn max_residual(&self) -> f64 {
        self.checks.iter().map(|c| c.residual).fold(0.0, f64::max)
    }
}

/// Where a check is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckScope {
    /// Once per probe time, any model.
    Pointwise,
    /// Once per model, along trajectories over the window.
    Trajectory,
    /// Once per toy parameter point.
    ToyStatic,
    /// Once per toy parameter point and probe time.
    ToyPointwise,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tolerance {
    /// The configurable residual tolerance.
    Algebraic,
    /// The configurable trajectory tolerance.
    Trajectory,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckSpec {
    pub name: &'static str,
    pub scope: CheckScope,
    pub tolerance: Tolerance,
}

const fn spec(name: &'static str, scope: CheckScope, tolerance: Tolerance) -> CheckSpec {
    CheckSpec { name, scope, tolerance }
}

use CheckScope::{Pointwise, ToyPointwise, ToyStatic, Trajectory as Traj};
use Tolerance::{Algebraic, Fixed};

/// Every check, in report order.
pub const REGISTRY: &[CheckSpec] = &[
    spec("matrix.adjoint_involution", Pointwise, Fixed(0.0)),
    spec("matrix.similarity_spectrum", Pointwise, Fixed(1e-8)),
    spec("matrix.gram_positive", Pointwise, Fixed(0.0)),
    spec("matrix.expm_inverse", Pointwise, Fixed(1e-10)),
    spec("matrix.triangular_spectrum", Pointwise, Fixed(0.0)),
    spec("poly.eval_homomorphism", Pointwise, Fixed(1e-12)),
    spec("poly.leibniz", Pointwise, Algebraic),
    spec("poly.inverse_identity", Pointwise, Algebraic),
    spec("pictures.metric_factorization", Pointwise, Fixed(1e-12)),
    spec("pictures.coriolis_composition", Pointwise, Algebraic),
    spec("pictures.metric_compatibility", Pointwise, Algebraic),
    spec("pictures.quasi_hermiticity", Pointwise, Algebraic),
    spec("pictures.quasi_hermiticity_transport", Pointwise, Algebraic),
    spec("pictures.omega21_identity", Pointwise, Algebraic),
    spec("pictures.textbook_hermiticity", Pointwise, Algebraic),
    spec("pictures.isospectrality", Pointwise, Algebraic),
    spec("pictures.hip_observable_rule", Pointwise, Fixed(1e-11)),
    spec("pictures.observable_quasi_hermiticity", Pointwise, Algebraic),
    spec("evolution.norm_conservation", Traj, Tolerance::Trajectory),
    spec("evolution.dual_overlap", Traj, Tolerance::Trajectory),
    spec("evolution.dual_consistency", Traj, Tolerance::Trajectory),
    spec("evolution.picture_equivalence", Traj, Tolerance::Trajectory),
    spec("evolution.heisenberg_transport", Traj, Tolerance::Trajectory),
    spec("evolution.integrator_order", ToyStatic, Fixed(0.3)),
    spec("toy.printed_theta", ToyStatic, Fixed(1e-12)),
    spec("toy.printed_theta2", ToyStatic, Fixed(1e-12)),
    spec("toy.printed_h1", ToyStatic, Fixed(1e-12)),
    spec("toy.printed_sigma2", ToyStatic, Fixed(1e-12)),
    spec("toy.printed_g1", ToyStatic, Fixed(1e-12)),
    spec("toy.printed_sigma", ToyStatic, Fixed(1e-12)),
    spec("toy.printed_doublet", ToyPointwise, Fixed(1e-10)),
    spec("toy.printed_doublet_self_consistency", ToyPointwise, Fixed(1e-10)),
    spec("toy.g1_spectrum", ToyPointwise, Fixed(1e-12)),
    spec("toy.hamiltonian_spectrum", ToyPointwise, Fixed(1e-10)),
    spec("toy.metric_positivity", ToyPointwise, Fixed(1e-12)),
];

/// Comparisons against printed formulas known to disagree away from `r = 1`.
pub const DISCREPANCY_FAMILY: &[&str] = &["toy.printed_sigma", "toy.printed_doublet"];

/// Step ladder and reference step for the integrator order check.
pub const ORDER_LADDER: [f64; 4] = [0.1, 0.05, 0.025, 0.0125];
pub const ORDER_REFERENCE_STEP: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct SuiteOptions {
    /// Tolerance for algebraic identities.
    pub tol: f64,
    /// Tolerance for trajectory invariants.
    pub trajectory_tol: f64,
    pub integrator: IntegratorSpec,
    /// Auxiliary-space initial ket; `None` means the first basis vector.
    pub psi0: Option<Vec<C64>>,
    /// Schrödinger-picture observable; `None` means `diag(1, 0, …)`.
    pub observable: Option<CMatrix>,
    /// Sample intervals along trajectories.
    pub trajectory_samples: usize,
    /// Worker threads; 0 or 1 runs on the calling thread.
    pub parallel: usize,
    /// Restricts the run to checks whose name starts with one of these prefixes.
    pub only: Option<Vec<String>>,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_RESIDUAL_TOL,
            trajectory_tol: 1e-7,
            integrator: IntegratorSpec::rk4(1e-3),
            psi0: None,
            observable: None,
            trajectory_samples: 20,
            parallel: 0,
            only: None,
        }
    }
}

impl SuiteOptions {
    fn tolerance(&self, t: Tolerance) -> f64 {
        match t {
            Algebraic => self.tol,
            Tolerance::Trajectory => self.trajectory_tol,
            Fixed(v) => v,
        }
    }

    fn selects(&self, name: &str) -> bool {
        self.only.as_ref().is_none_or(|prefixes| prefixes.iter().any(|p| name.starts_with(p.as_str())))
    }

    fn psi0(&self, n: usize) -> Vec<C64> {
        self.psi0.clone().unwrap_or_else(|| basis(n, 0))
    }

    fn observable(&self, n: usize) -> CMatrix {
        self.observable.clone().unwrap_or_else(|| {
            let mut d = vec![C64::new(0.0, 0.0); n];
            d[0] = C64::new(1.0, 0.0);
            CMatrix::from_diag(&d)
        })
    }
}

fn basis(n: usize, k: usize) -> Vec<C64> {
    let mut v = vec![C64::new(0.0, 0.0); n];
    v[k] = C64::new(1.0, 0.0);
    v
}

fn with_pool<T: Send>(parallel: usize, f: impl FnOnce() -> T + Send) -> T {
    if parallel <= 1 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(parallel).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

/// Derived operators of one model, built once and shared by all checks.
struct Derived<'a> {
    model: &'a PictureModel,
    omega: TimeMatrixFn,
    theta: TimeMatrixFn,
    theta2: TimeMatrixFn,
    sigma: TimeMatrixFn,
    sigma1: TimeMatrixFn,
    sigma2: TimeMatrixFn,
    h1: TimeMatrixFn,
    g1: TimeMatrixFn,
    g: TimeMatrixFn,
    omega21: TimeMatrixFn,
    h_s: TimeMatrixFn,
    product: Result<TimeMatrixFn>,
}

impl<'a> Derived<'a> {
    fn new(model: &'a PictureModel) -> Self {
        let d = model.dyson();
        let omega = model.omega();
        Self {
            model,
            omega,
            theta: model.theta(),
            theta2: model.theta2(),
            sigma: model.sigma(),
            sigma1: model.sigma1(),
            sigma2: model.sigma2(),
            h1: model.hamiltonian_h1(),
            g1: model.generator(PictureTag::HipKphysical),
            g: model.generator(PictureTag::NipAuxiliary),
            omega21: model.omega21(),
            h_s: model.textbook_hamiltonian(),
            product: d.omega2().mul(d.omega1()),
        }
    }
}

/// Fixed unit-lower-triangular similarity transform.
fn similarity_probe(n: usize) -> CMatrix {
    let mut p = CMatrix::identity(n);
    for j in 0..n {
        for k in 0..j {
            p[(j, k)] = C64::new(0.5 * ((j + 2 * k) as f64).cos(), 0.25 * ((j * k + 1) as f64).sin());
        }
    }
    p
}

fn spectral_scale(s: &Spectrum) -> f64 {
    s.values().iter().map(|z| z.norm()).fold(1.0, f64::max)
}

fn pointwise_residual(name: &str, d: &Derived<'_>, a_s: &CMatrix, t: f64) -> Result<f64> {
    let model = d.model;
    let n = model.dim();
    let h = model.hamiltonian().eval(t)?;
    Ok(match name {
        "matrix.adjoint_involution" => h.conj_transpose().conj_transpose().max_abs_diff(&h),
        "matrix.similarity_spectrum" => {
            let p = similarity_probe(n);
            let sim = &(&p * &h) * &p.inverse()?;
            let (a, b) = (h.eigenvalues()?, sim.eigenvalues()?);
            a.distance(&b) / spectral_scale(&a)
        }
        "matrix.gram_positive" => {
            if d.theta.eval(t)?.is_positive_definite()?.is_positive() {
                0.0
            } else {
                f64::INFINITY
            }
        }
        "matrix.expm_inverse" => {
            let g = d.g.eval(t)?;
            let norm = g.fro_norm();
            let tau = if norm > 5.0 { 5.0 / norm } else { 1.0 };
            let m = g.scale(C64::new(0.0, -tau));
            (&m.expm() * &(-&m).expm()).max_abs_diff(&CMatrix::identity(n))
        }
        "matrix.triangular_spectrum" => {
            let mut u = h.clone();
            for j in 0..n {
                for k in 0..j {
                    u[(j, k)] = C64::new(0.0, 0.0);
                }
            }
            u.eigenvalues()?.distance(&Spectrum::new(u.diagonal()))
        }
        "poly.eval_homomorphism" => {
            let dy = model.dyson();
            let direct = &dy.omega2().eval(t)? * &dy.omega1().eval(t)?;
            relative_residual(&d.product.clone()?.eval(t)?, &direct)
        }
        "poly.leibniz" => {
            let dy = model.dyson();
            let (o2, o1) = (dy.omega2(), dy.omega1());
            let rule = &(&o2.derivative_at(t)? * &o1.eval(t)?) + &(&o2.eval(t)? * &o1.derivative_at(t)?);
            relative_residual(&d.product.clone()?.derivative_at(t)?, &rule)
        }
        "poly.inverse_identity" => {
            let dy = model.dyson();
            let id = CMatrix::identity(n);
            let mut worst: f64 = 0.0;
            for f in [dy.omega1(), dy.omega2(), &d.omega] {
                worst = worst.max((&f.inverse().eval(t)? * &f.eval(t)?).max_abs_diff(&id));
            }
            worst
        }
        "pictures.metric_factorization" => {
            let o1 = model.dyson().omega1().eval(t)?;
            let rhs = &(&o1.conj_transpose() * &d.theta2.eval(t)?) * &o1;
            relative_residual(&d.theta.eval(t)?, &rhs)
        }
        "pictures.coriolis_composition" => {
            let o1 = model.dyson().omega1().eval(t)?;
            let rhs = &(&(&o1.inverse()? * &d.sigma2.eval(t)?) * &o1) + &d.sigma1.eval(t)?;
            relative_residual(&d.sigma.eval(t)?, &rhs)
        }
        "pictures.metric_compatibility" => {
            let th2 = d.theta2.eval(t)?;
            let g1 = d.g1.eval(t)?;
            let lhs = d.theta2.derivative_at(t)?.scale(C64::new(0.0, 1.0));
            let rhs = &(&g1.conj_transpose() * &th2) - &(&th2 * &g1);
            // Both sides vanish for a stationary reduced metric.
            let scale = (&g1.conj_transpose() * &th2).fro_norm().max(lhs.fro_norm());
            let diff = (&lhs - &rhs).fro_norm();
            if scale > 0.0 {
                diff / scale
            } else {
                diff
            }
        }
        "pictures.quasi_hermiticity" => quasi_hermiticity_residual(&h, &d.theta.eval(t)?),
        "pictures.quasi_hermiticity_transport" => quasi_hermiticity_residual(&d.h1.eval(t)?, &d.theta2.eval(t)?),
        "pictures.omega21_identity" => {
            let dy = model.dyson();
            let o2 = dy.omega2().eval(t)?;
            relative_residual(&(&d.omega21.eval(t)? * &o2), &(&o2 * &dy.omega1().eval(t)?))
        }
        "pictures.textbook_hermiticity" => {
            let hs = d.h_s.eval(t)?;
            let scale = hs.fro_norm();
            let dev = hs.hermitian_deviation();
            if scale > 0.0 {
                dev / scale
            } else {
                dev
            }
        }
        "pictures.isospectrality" => {
            let sh = h.eigenvalues()?;
            let s1 = d.h1.eval(t)?.eigenvalues()?;
            let ss = d.h_s.eval(t)?.eigenvalues()?;
            sh.distance(&s1).max(sh.distance(&ss)) / spectral_scale(&sh)
        }
        "pictures.hip_observable_rule" => {
            let a1 = model.observable_hip(a_s)?.eval(t)?;
            let o2 = model.dyson().omega2().eval(t)?;
            let rule = relative_residual(&(&o2 * &a1), &(a_s * &o2));
            rule.max(quasi_hermiticity_residual(&a1, &d.theta2.eval(t)?))
        }
        "pictures.observable_quasi_hermiticity" => {
            let at = model.observable_tilde(a_s)?.eval(t)?;
            quasi_hermiticity_residual(&at, &d.theta.eval(t)?)
        }
        other => return Err(HipError::InvalidArgument(format!("not a pointwise check: {other}"))),
    })
}

/// Trajectories shared by the trajectory-scope checks.
struct Trajectories {
    residuals: BTreeMap<&'static str, f64>,
}

fn max_vec_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn run_trajectories(d: &Derived<'_>, opts: &SuiteOptions) -> Result<Trajectories> {
    let model = d.model;
    let n = model.dim();
    let (t0, t1) = model.window();
    let times = uniform_times(t0, t1, opts.trajectory_samples);
    let psi_aux = opts.psi0(n);
    if psi_aux.len() != n {
        return Err(HipError::DimMismatch { left: n, right: psi_aux.len() });
    }
    let a_s = opts.observable(n);
    let spec = &opts.integrator;

    let sp = evolve_ket(model, PictureTag::SpTextbook, &model.map_state(PictureTag::SpTextbook, &psi_aux, t0)?, spec, &times)?;
    let nip = evolve_ket(model, PictureTag::NipAuxiliary, &psi_aux, spec, &times)?;
    let hip = evolve_hip_with_dual(model, &model.map_state(PictureTag::HipKphysical, &psi_aux, t0)?, spec, &times)?;

    let mut out = BTreeMap::new();
    out.insert("evolution.norm_conservation", sp.norm_drift().max(nip.norm_drift()).max(hip.norm_drift()));

    let ov = hip.dual_overlaps().expect("dual kets present");
    out.insert("evolution.dual_overlap", ov.iter().map(|z| (z - ov[0]).norm()).fold(0.0, f64::max));

    let duals = hip.dual_kets.as_ref().expect("dual kets present");
    let mut consistency: f64 = 0.0;
    for ((&t, k), dual) in times.iter().zip(&hip.kets).zip(duals) {
        consistency = consistency.max(max_vec_diff(&d.theta2.eval(t)?.mul_vec(k), dual));
    }
    out.insert("evolution.dual_consistency", consistency);

    let mut equivalence: f64 = 0.0;
    for &t in &times {
        let e_sp = sp.expectation_at(model, &a_s, t)?.value;
        let e_nip = nip.expectation_at(model, &a_s, t)?.value;
        let e_hip = hip.expectation_at(model, &a_s, t)?;
        equivalence = equivalence
            .max((e_sp - e_nip).norm())
            .max((e_sp - e_hip.value).norm())
            .max(e_hip.discrepancy().unwrap_or(0.0));
    }
    out.insert("evolution.picture_equivalence", equivalence);

    let mut transport: f64 = 0.0;
    for (tag, algebraic) in [
        (PictureTag::NipAuxiliary, model.observable_tilde(&a_s)?),
        (PictureTag::HipKphysical, model.observable_hip(&a_s)?),
    ] {
        let traj = evolve_observable(model, tag, &algebraic.eval(t0)?, spec, &times)?;
        for (&t, m) in times.iter().zip(&traj.matrices) {
            transport = transport.max(m.max_abs_diff(&algebraic.eval(t)?));
        }
    }
    out.insert("evolution.heisenberg_transport", transport);
    Ok(Trajectories { residuals: out })
}

/// Least-squares slope of `ys` against `xs`; 0 when fewer than two points.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len().min(ys.len());
    if n < 2 {
        return 0.0;
    }
    let mx = xs[..n].iter().sum::<f64>() / n as f64;
    let my = ys[..n].iter().sum::<f64>() / n as f64;
    let sxy: f64 = xs[..n].iter().zip(&ys[..n]).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs[..n].iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx > 0.0 {
        sxy / sxx
    } else {
        0.0
    }
}

/// RK4 global errors at the window end for each step of `ladder`, measured
/// against a fine-step reference, and the fitted log-log slope.
pub fn integrator_order(model: &PictureModel, tag: PictureTag, psi0: &[C64], ladder: &[f64], reference_step: f64) -> Result<(Vec<f64>, f64)> {
    let t1 = model.window().1;
    let reference = evolve_ket(model, tag, psi0, &IntegratorSpec::rk4(reference_step), &[t1])?;
    let mut errors = Vec::with_capacity(ladder.len());
    for &h in ladder {
        let traj = evolve_ket(model, tag, psi0, &IntegratorSpec::rk4(h), &[t1])?;
        let diff: Vec<C64> = traj.kets[0].iter().zip(&reference.kets[0]).map(|(a, b)| a - b).collect();
        errors.push(vnorm(&diff));
    }
    let xs: Vec<f64> = ladder.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    Ok((errors, ls_slope(&xs, &ys)))
}

fn exact(f: &TimeMatrixFn, what: &str) -> Result<PolyMatrix> {
    f.as_exact().cloned().ok_or_else(|| HipError::InvalidArgument(format!("{what} is not an exact polynomial")))
}

fn toy_static_residual(name: &str, d: &Derived<'_>, printed: &ToyPrinted, opts: &SuiteOptions) -> Result<f64> {
    Ok(match name {
        "evolution.integrator_order" => {
            let psi0 = d.model.map_state(PictureTag::HipKphysical, &opts.psi0(2), d.model.window().0)?;
            let (_, slope) = integrator_order(d.model, PictureTag::HipKphysical, &psi0, &ORDER_LADDER, ORDER_REFERENCE_STEP)?;
            (slope - 4.0).abs()
        }
        "toy.printed_theta" => exact(&d.theta, "theta")?.max_coeff_diff(&printed.theta),
        "toy.printed_theta2" => exact(&d.theta2, "theta2")?.max_coeff_diff(&printed.theta2),
        "toy.printed_h1" => exact(&d.h1, "H1")?.max_coeff_diff(&printed.h1),
        "toy.printed_sigma2" => exact(&d.sigma2, "sigma2")?.max_coeff_diff(&printed.sigma2),
        "toy.printed_g1" => exact(&d.g1, "G1")?.max_coeff_diff(&printed.g1),
        "toy.printed_sigma" => exact(&d.sigma, "sigma")?.max_coeff_diff(&printed.sigma),
        other => return Err(HipError::InvalidArgument(format!("not a toy check: {other}"))),
    })
}

fn toy_pointwise_residual(name: &str, d: &Derived<'_>, printed: &ToyPrinted, t: f64) -> Result<f64> {
    let energies = Spectrum::new(toy_energies(t).to_vec());
    Ok(match name {
        "toy.printed_doublet" => d.g.eval(t)?.eigenvalues()?.distance(&Spectrum::new(printed.doublet(t).to_vec())),
        "toy.printed_doublet_self_consistency" => {
            printed.g_printed().eval(t)?.eigenvalues()?.distance(&Spectrum::new(printed.doublet(t).to_vec()))
        }
        "toy.g1_spectrum" => d.g1.eval(t)?.eigenvalues()?.distance(&energies),
        "toy.hamiltonian_spectrum" => d.model.hamiltonian().eval(t)?.eigenvalues()?.distance(&energies),
        "toy.metric_positivity" => {
            let theta = d.theta.eval(t)?;
            let positive = theta.is_positive_definite()?.is_positive() && d.theta2.eval(t)?.is_positive_definite()?.is_positive();
            if positive {
                (theta.det() - C64::new(1.0, 0.0)).norm()
            } else {
                f64::INFINITY
            }
        }
        other => return Err(HipError::InvalidArgument(format!("not a toy check: {other}"))),
    })
}

fn judge(spec: &CheckSpec, outcome: Result<f64>, tolerance: f64, context: BTreeMap<String, f64>, recorded: bool) -> CheckResult {
    let (residual, error) = match outcome {
        Ok(r) if r.is_nan() => (f64::INFINITY, Some("residual is NaN".to_string())),
        Ok(r) => (r, None),
        Err(e) => (f64::INFINITY, Some(e.to_string())),
    };
    let status = if recorded && error.is_none() {
        CheckStatus::RecordedDiscrepancy
    } else if residual <= tolerance {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    };
    CheckResult { name: spec.name.to_string(), status, residual, tolerance, context, error }
}

fn window_context(model: &PictureModel, base: &BTreeMap<String, f64>) -> BTreeMap<String, f64> {
    let mut c = base.clone();
    let (t0, t1) = model.window();
    c.insert("t0".into(), t0);
    c.insert("t1".into(), t1);
    c
}

fn at_time(base: &BTreeMap<String, f64>, t: f64) -> BTreeMap<String, f64> {
    let mut c = base.clone();
    c.insert("t".into(), t);
    c
}

fn check_times(model: &PictureModel, times: &[f64]) -> Result<()> {
    let (t0, t1) = model.window();
    if times.is_empty() {
        return Err(HipError::InvalidArgument("probe grid is empty".into()));
    }
    if let Some(&t) = times.iter().find(|&&t| !(t >= t0 && t <= t1)) {
        return Err(HipError::InvalidArgument(format!("probe time {t} outside window [{t0}, {t1}]")));
    }
    Ok(())
}

/// Runs the model-generic checks (pointwise and trajectory scopes).
fn model_checks(model: &PictureModel, times: &[f64], opts: &SuiteOptions, base: &BTreeMap<String, f64>, toy: Option<&ToyParams>) -> Vec<CheckResult> {
    let d = Derived::new(model);
    let a_s = opts.observable(model.dim());
    let printed = toy.map(toy_printed);
    let consistent_point = toy.is_none_or(|p| (p.r - 1.0).abs() <= 1e-12);
    let selected: Vec<&CheckSpec> = REGISTRY.iter().filter(|s| opts.selects(s.name)).collect();
    let trajectories = if selected.iter().any(|s| s.scope == CheckScope::Trajectory) {
        Some(run_trajectories(&d, opts))
    } else {
        None
    };

    let per_check: Vec<Vec<CheckResult>> = selected
        .par_iter()
        .map(|spec| {
            let tol = opts.tolerance(spec.tolerance);
            let recorded = !consistent_point && DISCREPANCY_FAMILY.contains(&spec.name);
            match spec.scope {
                CheckScope::Pointwise => times
                    .iter()
                    .map(|&t| judge(spec, pointwise_residual(spec.name, &d, &a_s, t), tol, at_time(base, t), false))
                    .collect(),
                CheckScope::Trajectory => {
                    let outcome = match trajectories.as_ref().expect("computed above") {
                        Ok(tr) => Ok(tr.residuals[spec.name]),
                        Err(e) => Err(e.clone()),
                    };
                    vec![judge(spec, outcome, tol, window_context(model, base), false)]
                }
                CheckScope::ToyStatic => match &printed {
                    Some(p) => vec![judge(spec, toy_static_residual(spec.name, &d, p, opts), tol, window_context(model, base), recorded)],
                    None => Vec::new(),
                },
                CheckScope::ToyPointwise => match &printed {
                    Some(p) => times
                        .iter()
                        .map(|&t| judge(spec, toy_pointwise_residual(spec.name, &d, p, t), tol, at_time(base, t), recorded))
                        .collect(),
                    None => Vec::new(),
                },
            }
        })
        .collect();
    per_check.into_iter().flatten().collect()
}

/// Runs every model-generic check on `model` at each probe time.
pub fn run_identity_suite(model: &PictureModel, times: &[f64], opts: &SuiteOptions) -> Result<VerificationReport> {
    check_times(model, times)?;
    let checks = with_pool(opts.parallel, || model_checks(model, times, opts, &BTreeMap::new(), None));
    Ok(VerificationReport::new(checks))
}

/// Runs the full suite, including the toy-specific checks, at every
/// parameter point and probe time.
pub fn run_toy_suite(params: &[ToyParams], times: &[f64], opts: &SuiteOptions) -> Result<VerificationReport> {
    let models = params
        .iter()
        .map(|p| {
            p.validate()?;
            let m = toy_model(p)?;
            check_times(&m, times)?;
            Ok((p, m))
        })
        .collect::<Result<Vec<_>>>()?;
    let per_point: Vec<Vec<CheckResult>> = with_pool(opts.parallel, || {
        models
            .par_iter()
            .map(|(p, m)| {
                let base = BTreeMap::from([("r".to_string(), p.r), ("a".to_string(), p.a), ("b".to_string(), p.b)]);
                model_checks(m, times, opts, &base, Some(p))
            })
            .collect()
    });
    Ok(VerificationReport::new(per_point.into_iter().flatten().collect()))
}

/// The toy suite over the default parameter and time grid.
pub fn run_default_toy_suite(opts: &SuiteOptions) -> Result<VerificationReport> {
    run_toy_suite(&ToyParams::default_grid(), &GRID_T, opts)
}

/// Spectral and propagator-growth diagnostics of one generator.
#[derive(Debug, Clone, Serialize)]
pub struct VariantConditioning {
    pub label: String,
    pub spectra: Vec<Spectrum>,
    pub max_abs_imag: f64,
    pub fro_norms: Vec<f64>,
    pub op_norms: Vec<f64>,
    /// Least-squares slope of `ln‖U‖_F` over the second half of the grid.
    pub growth_fro: f64,
    /// Same for the operator 2-norm estimate.
    pub growth_op: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditioningReport {
    pub times: Vec<f64>,
    pub variants: Vec<VariantConditioning>,
}

impl ConditioningReport {
    pub fn variant(&self, label: &str) -> Option<&VariantConditioning> {
        self.variants.iter().find(|v| v.label == label)
    }
}

/// Derived NIP generator `G` and HIP generator `G₁`, labelled by picture tag.
pub fn standard_variants(model: &PictureModel) -> Vec<(String, TimeMatrixFn)> {
    vec![
        (PictureTag::NipAuxiliary.name().to_string(), model.generator(PictureTag::NipAuxiliary)),
        (PictureTag::HipKphysical.name().to_string(), model.generator(PictureTag::HipKphysical)),
    ]
}

/// Label of the toy NIP generator built from the printed Coriolis operator.
pub const NIP_PRINTED: &str = "NIP_printed";

/// Spectra and propagator norms of each generator on a common grid.
///
/// Propagators start at the window's left edge; `times` must lie in the window.
pub fn conditioning_compare(model: &PictureModel, variants: &[(String, TimeMatrixFn)], spec: &IntegratorSpec, times: &[f64]) -> Result<ConditioningReport> {
    let (t0, t1) = model.window();
    if !(t1 > t0) {
        return Err(HipError::InvalidArgument("window must be nondegenerate".into()));
    }
    check_times(model, times)?;
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(HipError::InvalidArgument("grid must be strictly increasing".into()));
    }
    let mid = 0.5 * (times[0] + times[times.len() - 1]);
    let out = variants
        .par_iter()
        .map(|(label, g)| {
            let spectra = times.iter().map(|&t| g.eval(t)?.eigenvalues()).collect::<Result<Vec<_>>>()?;
            let max_abs_imag = spectra.iter().map(Spectrum::max_abs_imag).fold(0.0, f64::max);
            let us = propagator_series(g, spec, t0, times)?;
            let fro_norms: Vec<f64> = us.iter().map(CMatrix::fro_norm).collect();
            let op_norms: Vec<f64> = us.iter().map(CMatrix::op_norm_estimate).collect();
            let fit = |norms: &[f64]| {
                let (xs, ys): (Vec<f64>, Vec<f64>) = times.iter().zip(norms).filter(|(&t, _)| t >= mid).map(|(&t, &v)| (t, v.ln())).unzip();
                ls_slope(&xs, &ys)
            };
            Ok(VariantConditioning {
                label: label.clone(),
                spectra,
                max_abs_imag,
                growth_fro: fit(&fro_norms),
                growth_op: fit(&op_norms),
                fro_norms,
                op_norms,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConditioningReport { times: times.to_vec(), variants: out })
}

/// Conditioning comparison of the toy model: derived `G`, printed `G`, and `G₁`.
pub fn toy_conditioning(p: &ToyParams, spec: &IntegratorSpec, times: &[f64]) -> Result<ConditioningReport> {
    let model = toy_model(p)?;
    let mut variants = standard_variants(&model);
    variants.insert(1, (NIP_PRINTED.to_string(), toy_printed(p).g_printed()));
    conditioning_compare(&model, &variants, spec, times)
}

/// `‖Ω₁(t) − I‖_F`.
pub fn omega1_distance(model: &PictureModel, t: f64) -> Result<f64> {
    let o1 = model.dyson().omega1().eval(t)?;
    Ok((&o1 - &CMatrix::identity(model.dim())).fro_norm())
}
