//! Propagation of kets, dual kets, observables and propagators.
//!
//! Every equation is written as `i dy/dt = F(t, y)` and integrated with
//! either classic fixed-step RK4 or the Dormand–Prince 5(4) embedded pair.
//! Generators are evaluated exactly at stage times. Integration always
//! starts at the left edge of the model window.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{HipError, Result};
use crate::matrix::{vdot, vnorm, CMatrix};
use crate::pictures::{PictureModel, PictureTag};
use crate::poly::TimeMatrixFn;

const MINUS_I: C64 = C64 { re: 0.0, im: -1.0 };

/// Integrator choice and its controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method")]
pub enum IntegratorSpec {
    #[serde(rename = "RK4_fixed")]
    Rk4 {
        step: f64,
        #[serde(default = "default_rk4_steps")]
        max_steps: usize,
    },
    #[serde(rename = "DP54_adaptive")]
    Dp54 {
        rtol: f64,
        atol: f64,
        #[serde(default = "default_dp54_steps")]
        max_steps: usize,
    },
}

fn default_rk4_steps() -> usize {
    10_000_000
}

fn default_dp54_steps() -> usize {
    1_000_000
}

impl IntegratorSpec {
    pub fn rk4(step: f64) -> Self {
        IntegratorSpec::Rk4 { step, max_steps: default_rk4_steps() }
    }

    pub fn dp54(rtol: f64, atol: f64) -> Self {
        IntegratorSpec::Dp54 { rtol, atol, max_steps: default_dp54_steps() }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            IntegratorSpec::Rk4 { step, max_steps } => step > 0.0 && step.is_finite() && max_steps >= 1,
            IntegratorSpec::Dp54 { rtol, atol, max_steps } => {
                rtol > 0.0 && atol > 0.0 && rtol.is_finite() && atol.is_finite() && max_steps >= 1
            }
        };
        if ok {
            Ok(())
        } else {
            Err(HipError::InvalidArgument(format!("invalid integrator settings {self:?}")))
        }
    }
}

/// Step bookkeeping for one integration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct IntegrationStats {
    pub steps: usize,
    pub rejected: usize,
    /// Largest accepted local error estimate (adaptive mode only).
    pub max_local_error: Option<f64>,
}

/// Integrates `i dy/dt = f(t, y)` from `t0`, returning `y` at each of `times`.
///
/// `times` must be nondecreasing and not earlier than `t0`.
pub fn integrate<F>(rhs: F, y0: &[C64], t0: f64, times: &[f64], spec: &IntegratorSpec) -> Result<(Vec<Vec<C64>>, IntegrationStats)>
where
    F: Fn(f64, &[C64]) -> Result<Vec<C64>>,
{
    spec.validate()?;
    check_times(t0, times)?;
    // dy/dt = -i f(t, y)
    let deriv = |t: f64, y: &[C64]| -> Result<Vec<C64>> { Ok(rhs(t, y)?.into_iter().map(|z| z * MINUS_I).collect()) };
    match *spec {
        IntegratorSpec::Rk4 { step, max_steps } => rk4(&deriv, y0, t0, times, step, max_steps),
        IntegratorSpec::Dp54 { rtol, atol, max_steps } => dp54(&deriv, y0, t0, times, rtol, atol, max_steps),
    }
}

fn check_times(t0: f64, times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !t.is_finite()) {
        return Err(HipError::InvalidArgument("sample times must be finite".into()));
    }
    if let Some(&first) = times.first() {
        if first < t0 {
            return Err(HipError::InvalidArgument(format!("sample time {first} precedes start {t0}")));
        }
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(HipError::InvalidArgument("sample times must be ascending".into()));
    }
    Ok(())
}

fn axpy(y: &[C64], k: &[C64], h: f64) -> Vec<C64> {
    y.iter().zip(k).map(|(a, b)| a + b * h).collect()
}

fn combo(y: &[C64], h: f64, terms: &[(f64, &[C64])]) -> Vec<C64> {
    let mut out = y.to_vec();
    for (w, k) in terms {
        if *w == 0.0 {
            continue;
        }
        for (o, z) in out.iter_mut().zip(k.iter()) {
            *o += z * (h * w);
        }
    }
    out
}

fn rk4<D>(deriv: &D, y0: &[C64], t0: f64, times: &[f64], step: f64, max_steps: usize) -> Result<(Vec<Vec<C64>>, IntegrationStats)>
where
    D: Fn(f64, &[C64]) -> Result<Vec<C64>>,
{
    let mut stats = IntegrationStats::default();
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        let span = target - t;
        if span > 0.0 {
            // Uniform sub-steps landing exactly on the sample time.
            let n = ((span / step) - 1e-9).ceil().max(1.0) as usize;
            let h = span / n as f64;
            for i in 0..n {
                stats.steps += 1;
                if stats.steps > max_steps {
                    return Err(HipError::StepLimitExceeded { max_steps });
                }
                let ts = t + h * i as f64;
                let k1 = deriv(ts, &y)?;
                let k2 = deriv(ts + h / 2.0, &axpy(&y, &k1, h / 2.0))?;
                let k3 = deriv(ts + h / 2.0, &axpy(&y, &k2, h / 2.0))?;
                let k4 = deriv(ts + h, &axpy(&y, &k3, h))?;
                for j in 0..y.len() {
                    y[j] += (k1[j] + (k2[j] + k3[j]) * 2.0 + k4[j]) * (h / 6.0);
                }
            }
            t = target;
        }
        out.push(y.clone());
    }
    Ok((out, stats))
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// 5th minus 4th order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn dp54<D>(
    deriv: &D,
    y0: &[C64],
    t0: f64,
    times: &[f64],
    rtol: f64,
    atol: f64,
    max_steps: usize,
) -> Result<(Vec<Vec<C64>>, IntegrationStats)>
where
    D: Fn(f64, &[C64]) -> Result<Vec<C64>>,
{
    let mut stats = IntegrationStats { max_local_error: Some(0.0), ..Default::default() };
    let mut y = y0.to_vec();
    let mut t = t0;
    let t_end = times.last().copied().unwrap_or(t0);
    let mut h = if t_end > t0 { (t_end - t0) / 100.0 } else { 0.0 };
    let mut out = Vec::with_capacity(times.len());
    let mut k1 = deriv(t, &y)?;
    for &target in times {
        while t < target {
            if stats.steps + stats.rejected >= max_steps {
                return Err(HipError::StepLimitExceeded { max_steps });
            }
            let remaining = target - t;
            let last = h >= remaining * (1.0 - 1e-12);
            let hs = if last { remaining } else { h };
            let k2 = deriv(t + C2 * hs, &combo(&y, hs, &[(A21, &k1)]))?;
            let k3 = deriv(t + C3 * hs, &combo(&y, hs, &[(A31, &k1), (A32, &k2)]))?;
            let k4 = deriv(t + C4 * hs, &combo(&y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]))?;
            let k5 = deriv(t + C5 * hs, &combo(&y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]))?;
            let k6 = deriv(t + hs, &combo(&y, hs, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]))?;
            let y_new = combo(&y, hs, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
            let k7 = deriv(t + hs, &y_new)?;
            let mut err_norm: f64 = 0.0;
            let mut err_abs: f64 = 0.0;
            for j in 0..y.len() {
                let e = (k1[j] * E1 + k3[j] * E3 + k4[j] * E4 + k5[j] * E5 + k6[j] * E6 + k7[j] * E7) * hs;
                let scale = atol + rtol * y[j].norm().max(y_new[j].norm());
                err_norm = err_norm.max(e.norm() / scale);
                err_abs = err_abs.max(e.norm());
            }
            let factor = if err_norm == 0.0 { 5.0 } else { (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0) };
            if err_norm <= 1.0 {
                stats.steps += 1;
                stats.max_local_error = stats.max_local_error.map(|m| m.max(err_abs));
                t = if last { target } else { t + hs };
                y = y_new;
                k1 = k7;
                // Keep the proposed step when the accepted one was clipped short.
                h = if last { h.max(hs * factor) } else { hs * factor };
            } else {
                stats.rejected += 1;
                h = hs * factor;
            }
            if !(h > 0.0) || h < 1e-14 * t.abs().max(1.0) {
                return Err(HipError::StepLimitExceeded { max_steps });
            }
        }
        out.push(y.clone());
    }
    Ok((out, stats))
}

/// Time-sampled kets with physical norms and observable series.
#[derive(Debug, Clone)]
pub struct StateTrajectory {
    pub tag: PictureTag,
    pub times: Vec<f64>,
    pub kets: Vec<Vec<C64>>,
    /// Independently integrated dual kets `|ψ⟫ = Θ₂|ψ]` (HIP only).
    pub dual_kets: Option<Vec<Vec<C64>>>,
    /// `ψ† M ψ` with `M` the metric of the active picture.
    pub physical_norms: Vec<f64>,
    pub expectations: Vec<ObservableSeries>,
    pub stats: IntegrationStats,
}

/// Expectation values of one registered observable along a trajectory.
#[derive(Debug, Clone)]
pub struct ObservableSeries {
    pub observable: CMatrix,
    /// Metric-inserted form.
    pub values: Vec<C64>,
    /// Dual-ket form, when dual kets are present.
    pub dual_values: Option<Vec<C64>>,
}

/// Time-sampled operator `Ã(t)`.
#[derive(Debug, Clone)]
pub struct OperatorTrajectory {
    pub times: Vec<f64>,
    pub matrices: Vec<CMatrix>,
    pub stats: IntegrationStats,
}

fn check_samples(model: &PictureModel, times: &[f64]) -> Result<()> {
    let (t0, t1) = model.window();
    if times.is_empty() {
        return Err(HipError::InvalidArgument("at least one sample time is required".into()));
    }
    if times.iter().any(|&t| !(t >= t0 && t <= t1)) {
        return Err(HipError::InvalidArgument(format!("sample times must lie in the window [{t0}, {t1}]")));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(HipError::InvalidArgument("sample times must be strictly increasing".into()));
    }
    Ok(())
}

fn check_state(model: &PictureModel, psi: &[C64]) -> Result<()> {
    if psi.len() != model.dim() {
        return Err(HipError::DimMismatch { left: model.dim(), right: psi.len() });
    }
    if !(vnorm(psi) > 0.0) {
        return Err(HipError::InvalidArgument("initial state must be nonzero".into()));
    }
    Ok(())
}

/// Integrates `i dψ/dt = G(t) ψ` for an arbitrary generator.
pub fn evolve_with(generator: &TimeMatrixFn, psi0: &[C64], t0: f64, times: &[f64], spec: &IntegratorSpec) -> Result<(Vec<Vec<C64>>, IntegrationStats)> {
    if psi0.len() != generator.dim() {
        return Err(HipError::DimMismatch { left: generator.dim(), right: psi0.len() });
    }
    integrate(|t, y| Ok(generator.eval(t)?.mul_vec(y)), psi0, t0, times, spec)
}

fn physical_norms(metric: &TimeMatrixFn, times: &[f64], kets: &[Vec<C64>]) -> Result<Vec<f64>> {
    times
        .iter()
        .zip(kets)
        .map(|(&t, psi)| Ok(vdot(psi, &metric.eval(t)?.mul_vec(psi)).re))
        .collect()
}

/// Evolves `psi0` (already in the representation of `tag`) from the window start.
pub fn evolve_ket(model: &PictureModel, tag: PictureTag, psi0: &[C64], spec: &IntegratorSpec, sample_times: &[f64]) -> Result<StateTrajectory> {
    check_state(model, psi0)?;
    check_samples(model, sample_times)?;
    let generator = model.generator(tag);
    let (kets, stats) = evolve_with(&generator, psi0, model.window().0, sample_times, spec)?;
    let physical_norms = physical_norms(&model.picture_metric(tag), sample_times, &kets)?;
    Ok(StateTrajectory {
        tag,
        times: sample_times.to_vec(),
        kets,
        dual_kets: None,
        physical_norms,
        expectations: Vec::new(),
        stats,
    })
}

/// HIP ket `|ψ]` under `G₁` together with its dual `|ψ⟫` under `G₁†`,
/// integrated independently from `Θ₂(t₀)|ψ(t₀)]`.
pub fn evolve_hip_with_dual(model: &PictureModel, psi0: &[C64], spec: &IntegratorSpec, sample_times: &[f64]) -> Result<StateTrajectory> {
    let mut traj = evolve_ket(model, PictureTag::HipKphysical, psi0, spec, sample_times)?;
    let t0 = model.window().0;
    let dual0 = model.theta2().eval(t0)?.mul_vec(psi0);
    let (duals, dstats) = evolve_with(&model.generator(PictureTag::HipDual), &dual0, t0, sample_times, spec)?;
    traj.dual_kets = Some(duals);
    traj.stats.steps += dstats.steps;
    traj.stats.rejected += dstats.rejected;
    traj.stats.max_local_error = match (traj.stats.max_local_error, dstats.max_local_error) {
        (Some(a), Some(b)) => Some(a.max(b)),
        (a, b) => a.or(b),
    };
    Ok(traj)
}

/// Expectation value in one picture, with the dual-ket form when available.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Expectation {
    pub value: C64,
    pub dual_form: Option<C64>,
}

impl Expectation {
    /// `|metric form − dual form|`, if both were computed.
    pub fn discrepancy(&self) -> Option<f64> {
        self.dual_form.map(|d| (d - self.value).norm())
    }
}

/// Picture-appropriate sesquilinear form `⟨bra| · A · |ket⟩` at time `t`.
///
/// `a_s` is the Schrödinger-picture observable. For the textbook picture this
/// is `bra† A_S ket`; for the auxiliary pictures `bra† Θ Ã ket`; for HIP
/// `bra† Θ₂ Ã₁ ket` and, given `bra_dual`, also `bra_dual† Ã₁ ket`. For
/// `HIP_dual` both arguments are dual kets and the form is `bra† Ã₁ Θ₂⁻¹ ket`.
pub fn expectation(
    model: &PictureModel,
    tag: PictureTag,
    bra: &[C64],
    bra_dual: Option<&[C64]>,
    a_s: &CMatrix,
    ket: &[C64],
    t: f64,
) -> Result<Expectation> {
    for v in [bra, ket] {
        if v.len() != model.dim() {
            return Err(HipError::DimMismatch { left: model.dim(), right: v.len() });
        }
    }
    let obs = model.observable_for(tag, a_s)?.eval(t)?;
    let a_ket = match tag {
        PictureTag::HipDual => obs.mul_vec(&model.theta2().eval(t)?.solve(ket)?),
        _ => obs.mul_vec(ket),
    };
    let value = match tag {
        PictureTag::SpTextbook | PictureTag::HipDual => vdot(bra, &a_ket),
        PictureTag::NspAuxiliary | PictureTag::NipAuxiliary => vdot(bra, &model.theta().eval(t)?.mul_vec(&a_ket)),
        PictureTag::HipKphysical => vdot(bra, &model.theta2().eval(t)?.mul_vec(&a_ket)),
    };
    let dual_form = match (tag, bra_dual) {
        (PictureTag::HipKphysical, Some(d)) => Some(vdot(d, &a_ket)),
        _ => None,
    };
    Ok(Expectation { value, dual_form })
}

impl StateTrajectory {
    fn index_of(&self, t: f64) -> Result<usize> {
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-12 * t.abs().max(1.0))
            .ok_or(HipError::MissingSample { t })
    }

    pub fn ket_at(&self, t: f64) -> Result<&[C64]> {
        Ok(&self.kets[self.index_of(t)?])
    }

    /// Diagonal expectation `⟨ψ(t)|A|ψ(t)⟩` at a sampled time.
    pub fn expectation_at(&self, model: &PictureModel, a_s: &CMatrix, t: f64) -> Result<Expectation> {
        let i = self.index_of(t)?;
        let dual = self.dual_kets.as_ref().map(|d| d[i].as_slice());
        expectation(model, self.tag, &self.kets[i], dual, a_s, &self.kets[i], t)
    }

    /// Computes and stores the expectation series of `a_s`.
    pub fn register_observable(&mut self, model: &PictureModel, a_s: &CMatrix) -> Result<&ObservableSeries> {
        let mut values = Vec::with_capacity(self.times.len());
        let mut dual_values = self.dual_kets.as_ref().map(|_| Vec::with_capacity(self.times.len()));
        for &t in &self.times {
            let e = self.expectation_at(model, a_s, t)?;
            values.push(e.value);
            if let (Some(dv), Some(d)) = (dual_values.as_mut(), e.dual_form) {
                dv.push(d);
            }
        }
        self.expectations.push(ObservableSeries { observable: a_s.clone(), values, dual_values });
        Ok(self.expectations.last().expect("just pushed"))
    }

    /// `max_t |norm(t) − norm(t₀)|`.
    pub fn norm_drift(&self) -> f64 {
        let first = self.physical_norms.first().copied().unwrap_or(0.0);
        self.physical_norms.iter().map(|n| (n - first).abs()).fold(0.0, f64::max)
    }

    /// Overlaps `⟨ψ_dual(t)|ψ(t)]` of dual and ordinary kets.
    pub fn dual_overlaps(&self) -> Option<Vec<C64>> {
        self.dual_kets.as_ref().map(|d| d.iter().zip(&self.kets).map(|(a, b)| vdot(a, b)).collect())
    }
}

fn mat_to_vec(m: &CMatrix) -> Vec<C64> {
    m.as_slice().to_vec()
}

fn vec_to_mat(n: usize, v: Vec<C64>) -> Result<CMatrix> {
    CMatrix::new(n, v)
}

/// Integrates `i dA/dt = A X − X A` with `X` the tag's Coriolis generator.
///
/// The textbook picture uses `X = H_S(t)`, the Heisenberg baseline for a
/// stationary `H_S`.
pub fn evolve_observable(model: &PictureModel, tag: PictureTag, a0: &CMatrix, spec: &IntegratorSpec, sample_times: &[f64]) -> Result<OperatorTrajectory> {
    if a0.dim() != model.dim() {
        return Err(HipError::DimMismatch { left: model.dim(), right: a0.dim() });
    }
    check_samples(model, sample_times)?;
    let n = a0.dim();
    let x = model.observable_generator(tag);
    let rhs = |t: f64, y: &[C64]| -> Result<Vec<C64>> {
        let a = vec_to_mat(n, y.to_vec())?;
        let xt = x.eval(t)?;
        Ok(mat_to_vec(&a.commutator(&xt)?))
    };
    let (states, stats) = integrate(rhs, &mat_to_vec(a0), model.window().0, sample_times, spec)?;
    let matrices = states.into_iter().map(|v| vec_to_mat(n, v)).collect::<Result<Vec<_>>>()?;
    Ok(OperatorTrajectory { times: sample_times.to_vec(), matrices, stats })
}

/// Propagators `U(t, t₀)` of `i dU/dt = G U` at each time, column by column.
pub fn propagator_series(generator: &TimeMatrixFn, spec: &IntegratorSpec, t0: f64, times: &[f64]) -> Result<Vec<CMatrix>> {
    let n = generator.dim();
    let mut out = vec![CMatrix::zeros(n); times.len()];
    for col in 0..n {
        let mut e = vec![C64::new(0.0, 0.0); n];
        e[col] = C64::new(1.0, 0.0);
        let (states, _) = evolve_with(generator, &e, t0, times, spec)?;
        for (u, psi) in out.iter_mut().zip(states) {
            for (row, z) in psi.into_iter().enumerate() {
                u[(row, col)] = z;
            }
        }
    }
    Ok(out)
}

/// `U_tag(t1, t0)` for the model's generator in picture `tag`.
pub fn propagator(model: &PictureModel, tag: PictureTag, spec: &IntegratorSpec, t0: f64, t1: f64) -> Result<CMatrix> {
    let (w0, w1) = model.window();
    if !(t0 >= w0 && t1 <= w1 && t0 <= t1) {
        return Err(HipError::InvalidArgument(format!("need {w0} <= t0 <= t1 <= {w1}, got t0={t0}, t1={t1}")));
    }
    if t1 == t0 {
        return Ok(CMatrix::identity(model.dim()));
    }
    let mut us = propagator_series(&model.generator(tag), spec, t0, &[t1])?;
    Ok(us.pop().expect("one sample"))
}

/// `n + 1` evenly spaced times covering `[t0, t1]`.
pub fn uniform_times(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    let n = n.max(1);
    (0..=n).map(|k| if k == n { t1 } else { t0 + (t1 - t0) * k as f64 / n as f64 }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::minus_i_t;
    use crate::pictures::DysonFactorization;
    use crate::toy::{toy_model, ToyParams};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn stationary(h: CMatrix, window: (f64, f64)) -> PictureModel {
        let n = h.dim();
        PictureModel::new(DysonFactorization::identity(n), TimeMatrixFn::constant(h), window).unwrap()
    }

    #[test]
    fn spec_validation() {
        assert!(IntegratorSpec::rk4(0.0).validate().is_err());
        assert!(IntegratorSpec::Rk4 { step: 0.1, max_steps: 0 }.validate().is_err());
        assert!(IntegratorSpec::dp54(-1.0, 1e-9).validate().is_err());
        assert!(IntegratorSpec::dp54(1e-9, 1e-12).validate().is_ok());
    }

    #[test]
    fn zero_generator_keeps_state() {
        let model = stationary(CMatrix::zeros(2), (0.0, 1.0));
        let psi0 = vec![c(0.6, 0.0), c(0.0, 0.8)];
        for spec in [IntegratorSpec::rk4(0.01), IntegratorSpec::dp54(1e-10, 1e-12)] {
            let traj = evolve_ket(&model, PictureTag::NipAuxiliary, &psi0, &spec, &[0.0, 0.5, 1.0]).unwrap();
            for k in &traj.kets {
                assert_eq!(k, &psi0);
            }
        }
    }

    #[test]
    fn stationary_textbook_phase() {
        let pi = std::f64::consts::PI;
        let model = stationary(CMatrix::from_real_rows(&[[1.0, 0.0], [0.0, 2.0]]), (0.0, pi));
        let psi0 = vec![c(1.0, 0.0), c(0.0, 0.0)];
        for spec in [IntegratorSpec::rk4(1e-3), IntegratorSpec::dp54(1e-12, 1e-14)] {
            let traj = evolve_ket(&model, PictureTag::SpTextbook, &psi0, &spec, &[pi]).unwrap();
            assert!((traj.kets[0][0] - c(-1.0, 0.0)).norm() < 1e-9);
            assert!(traj.kets[0][1].norm() < 1e-15);
        }
    }

    #[test]
    fn rk4_self_convergence_on_toy_hip() {
        let model = toy_model(&ToyParams::new(1.0, 1.0, 0.0)).unwrap();
        let psi0 = vec![c(1.0, 0.0), c(0.0, 0.0)];
        let times = uniform_times(0.0, 1.0, 10);
        let coarse = evolve_ket(&model, PictureTag::HipKphysical, &psi0, &IntegratorSpec::rk4(1e-3), &times).unwrap();
        let fine = evolve_ket(&model, PictureTag::HipKphysical, &psi0, &IntegratorSpec::rk4(1e-4), &times).unwrap();
        for (a, b) in coarse.kets.iter().zip(&fine.kets) {
            assert!(vnorm(&a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>()) < 1e-8);
        }
    }

    #[test]
    fn adaptive_matches_fixed_and_reports_error() {
        let model = toy_model(&ToyParams::new(0.5, 1.0, 0.5)).unwrap();
        let psi0 = vec![c(1.0, 0.0), c(0.0, 0.0)];
        let times = uniform_times(0.0, 1.0, 4);
        let fixed = evolve_ket(&model, PictureTag::NipAuxiliary, &psi0, &IntegratorSpec::rk4(1e-4), &times).unwrap();
        let adapt = evolve_ket(&model, PictureTag::NipAuxiliary, &psi0, &IntegratorSpec::dp54(1e-11, 1e-13), &times).unwrap();
        let err = adapt.stats.max_local_error.unwrap();
        assert!(err > 0.0 && err < 1e-9);
        for (a, b) in fixed.kets.iter().zip(&adapt.kets) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn step_limit_is_enforced() {
        let model = toy_model(&ToyParams::new(0.5, 1.0, 0.5)).unwrap();
        let psi0 = vec![c(1.0, 0.0), c(0.0, 0.0)];
        let spec = IntegratorSpec::Rk4 { step: 1e-3, max_steps: 10 };
        let e = evolve_ket(&model, PictureTag::HipKphysical, &psi0, &spec, &[1.0]);
        assert!(matches!(e, Err(HipError::StepLimitExceeded { max_steps: 10 })));
        let spec = IntegratorSpec::Dp54 { rtol: 1e-12, atol: 1e-14, max_steps: 3 };
        let e = evolve_ket(&model, PictureTag::HipKphysical, &psi0, &spec, &[1.0]);
        assert!(matches!(e, Err(HipError::StepLimitExceeded { .. })));
    }

    #[test]
    fn bad_inputs_rejected() {
        let model = toy_model(&ToyParams::new(0.5, 1.0, 0.5)).unwrap();
        let spec = IntegratorSpec::rk4(1e-2);
        let zero = vec![c(0.0, 0.0); 2];
        assert!(evolve_ket(&model, PictureTag::SpTextbook, &zero, &spec, &[0.5]).is_err());
        let psi = vec![c(1.0, 0.0), c(0.0, 0.0)];
        assert!(evolve_ket(&model, PictureTag::SpTextbook, &psi, &spec, &[1.5]).is_err());
        assert!(evolve_ket(&model, PictureTag::SpTextbook, &psi, &spec, &[0.5, 0.2]).is_err());
        assert!(evolve_ket(&model, PictureTag::SpTextbook, &psi[..1], &spec, &[0.5]).is_err());
    }

    #[test]
    fn observable_examples() {
        let model = stationary(CMatrix::zeros(2), (0.0, 1.0));
        let a0 = CMatrix::from_real_rows(&[[0.3, 1.0], [1.0, -0.5]]);
        let traj = evolve_observable(&model, PictureTag::NipAuxiliary, &a0, &IntegratorSpec::rk4(0.1), &[1.0]).unwrap();
        assert_eq!(traj.matrices[0], a0);

        let toy = toy_model(&ToyParams::new(0.5, 1.0, 0.5)).unwrap();
        let id = CMatrix::identity(2);
        let traj = evolve_observable(&toy, PictureTag::HipKphysical, &id, &IntegratorSpec::rk4(1e-2), &[0.5, 1.0]).unwrap();
        for m in &traj.matrices {
            assert!(m.max_abs_diff(&id) < 1e-15);
        }
    }

    #[test]
    fn heisenberg_transport_matches_algebraic_hip_rule() {
        let model = toy_model(&ToyParams::new(0.5, 1.0, 0.5)).unwrap();
        let a_s = CMatrix::from_real_rows(&[[1.0, 0.0], [0.0, 0.0]]);
        let a10 = model.observable_hip(&a_s).unwrap().eval(0.0).unwrap();
        let times = uniform_times(0.0, 1.0, 20);
        let traj = evolve_observable(&model, PictureTag::HipKphysical, &a10, &IntegratorSpec::rk4(1e-3), &times).unwrap();
        for (&t, m) in times.iter().zip(&traj.matrices) {
            let o2 = model.dyson().omega2().eval(t).unwrap();
            let algebraic = &(&o2.inverse().unwrap() * &a_s) * &o2;
            assert!(m.max_abs_diff(&algebraic) < 1e-7, "t={t}");
        }
    }

    #[test]
    fn expectation_examples() {
        let model = toy_model(&ToyParams::new(0.5, 1.0, 0.5)).unwrap();
        let psi = vec![c(0.6, 0.1), c(-0.2, 0.7)];
        let id = CMatrix::identity(2);
        let e = expectation(&model, PictureTag::SpTextbook, &psi, None, &id, &psi, 0.3).unwrap();
        assert!((e.value - c(vnorm(&psi).powi(2), 0.0)).norm() < 1e-15);

        // Degenerate factorization Θ₂ = I, Ω₁ = I reduces to the auxiliary form.
        let trivial = PictureModel::new(DysonFactorization::identity(2), model.hamiltonian().clone(), (0.0, 1.0)).unwrap();
        let a_s = CMatrix::from_real_rows(&[[1.0, 0.2], [0.2, -1.0]]);
        let hip = expectation(&trivial, PictureTag::HipKphysical, &psi, Some(&psi), &a_s, &psi, 0.4).unwrap();
        let nip = expectation(&trivial, PictureTag::NipAuxiliary, &psi, None, &a_s, &psi, 0.4).unwrap();
        assert_eq!(hip.value, nip.value);
        assert_eq!(hip.discrepancy(), Some(0.0));
    }

    #[test]
    fn dual_picture_expectation_matches_hip() {
        let model = toy_model(&ToyParams::new(0.5, 1.0, 0.5)).unwrap();
        let spec = IntegratorSpec::rk4(1e-3);
        let times = uniform_times(0.0, 1.0, 10);
        let psi_aux = [c(0.6, 0.0), c(0.0, 0.8)];
        let a_s = CMatrix::from_real_rows(&[[1.0, 0.3], [0.3, -1.0]]);
        let hip0 = model.map_state(PictureTag::HipKphysical, &psi_aux, 0.0).unwrap();
        let dual0 = model.map_state(PictureTag::HipDual, &psi_aux, 0.0).unwrap();
        let hip = evolve_ket(&model, PictureTag::HipKphysical, &hip0, &spec, &times).unwrap();
        let dual = evolve_ket(&model, PictureTag::HipDual, &dual0, &spec, &times).unwrap();
        for &t in &times {
            let a = hip.expectation_at(&model, &a_s, t).unwrap().value;
            let b = dual.expectation_at(&model, &a_s, t).unwrap().value;
            assert!((a - b).norm() < 1e-9, "t={t}");
        }
        assert!(dual.norm_drift() < 1e-9);
    }

    #[test]
    fn missing_sample_is_reported() {
        let model = toy_model(&ToyParams::new(0.5, 1.0, 0.5)).unwrap();
        let psi0 = vec![c(1.0, 0.0), c(0.0, 0.0)];
        let traj = evolve_ket(&model, PictureTag::HipKphysical, &psi0, &IntegratorSpec::rk4(1e-2), &[0.5]).unwrap();
        let a_s = CMatrix::identity(2);
        assert!(matches!(traj.expectation_at(&model, &a_s, 0.25), Err(HipError::MissingSample { .. })));
        assert!(traj.expectation_at(&model, &a_s, 0.5).is_ok());
    }

    #[test]
    fn propagator_examples() {
        let model = toy_model(&ToyParams::new(0.5, 1.0, 0.5)).unwrap();
        let spec = IntegratorSpec::rk4(1e-3);
        assert_eq!(propagator(&model, PictureTag::NipAuxiliary, &spec, 0.3, 0.3).unwrap(), CMatrix::identity(2));

        let g = CMatrix::from_rows(&[[c(1.0, 0.0), c(0.5, 0.2)], [c(0.1, -0.3), c(2.0, 0.0)]]);
        let st = stationary(g.clone(), (0.0, 2.0));
        let u = propagator(&st, PictureTag::NipAuxiliary, &spec, 0.0, 1.5).unwrap();
        assert!(u.max_abs_diff(&minus_i_t(&g, 1.5).expm()) < 1e-8);
        assert!(propagator(&st, PictureTag::NipAuxiliary, &spec, 1.0, 0.5).is_err());
    }

    #[test]
    fn propagator_norms_nip_versus_hip() {
        let spec = IntegratorSpec::rk4(1e-3);
        // r = 0: Ω₁ = I, so the NIP and HIP generators coincide.
        let m0 = toy_model(&ToyParams::new(0.0, 1.0, 0.0).with_window(0.0, 2.0)).unwrap();
        let nip = propagator(&m0, PictureTag::NipAuxiliary, &spec, 0.0, 2.0).unwrap();
        let hip = propagator(&m0, PictureTag::HipKphysical, &spec, 0.0, 2.0).unwrap();
        assert_eq!(nip.op_norm_estimate(), hip.op_norm_estimate());
        // r = 2: the NIP propagator grows strictly faster.
        let m2 = toy_model(&ToyParams::new(2.0, 1.0, 0.0).with_window(0.0, 2.0)).unwrap();
        let nip = propagator(&m2, PictureTag::NipAuxiliary, &spec, 0.0, 2.0).unwrap();
        let hip = propagator(&m2, PictureTag::HipKphysical, &spec, 0.0, 2.0).unwrap();
        assert!(nip.op_norm_estimate() > hip.op_norm_estimate());
        assert!(nip.fro_norm() > hip.fro_norm());
    }

    #[test]
    fn norms_are_conserved_in_every_picture() {
        let model = toy_model(&ToyParams::new(0.5, 1.0, 0.5)).unwrap();
        let spec = IntegratorSpec::rk4(1e-3);
        let times = uniform_times(0.0, 1.0, 50);
        let psi_aux = vec![c(1.0, 0.0), c(0.0, 0.0)];
        for tag in PictureTag::ALL {
            let psi0 = model.map_state(tag, &psi_aux, 0.0).unwrap();
            let traj = evolve_ket(&model, tag, &psi0, &spec, &times).unwrap();
            assert!(traj.norm_drift() < 1e-9, "{tag}: drift {}", traj.norm_drift());
        }
    }

    #[test]
    fn dual_ket_machinery() {
        let model = toy_model(&ToyParams::new(0.5, 1.0, 0.5)).unwrap();
        let spec = IntegratorSpec::rk4(1e-3);
        let times = uniform_times(0.0, 1.0, 20);
        let psi0 = model.map_state(PictureTag::HipKphysical, &[c(1.0, 0.0), c(0.0, 0.0)], 0.0).unwrap();
        let traj = evolve_hip_with_dual(&model, &psi0, &spec, &times).unwrap();
        let ov = traj.dual_overlaps().unwrap();
        assert!(ov.iter().all(|z| (z - ov[0]).norm() < 1e-9));
        let duals = traj.dual_kets.as_ref().unwrap();
        for ((&t, k), d) in times.iter().zip(&traj.kets).zip(duals) {
            let implied = model.theta2().eval(t).unwrap().mul_vec(k);
            assert!(implied.iter().zip(d).all(|(x, y)| (x - y).norm() < 1e-9));
        }
    }
}
