//! Acceptance gate: one line per criterion, non-zero exit if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use hipdyn::evolution::{evolve_hip_with_dual, evolve_ket, uniform_times, IntegratorSpec};
use hipdyn::matrix::Spectrum;
use hipdyn::pictures::{DysonFactorization, PictureModel, PictureTag};
use hipdyn::poly::{CPoly, PolyMatrix, TimeMatrixFn};
use hipdyn::toy::{toy_dyson, toy_model, toy_printed, ToyParams, GRID_T};
use hipdyn::verify::{integrator_order, run_toy_suite, toy_conditioning, CheckStatus, SuiteOptions, NIP_PRINTED};
use hipdyn::{CMatrix, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = (bool, String);

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn energies(t: f64) -> Spectrum {
    Spectrum::new(vec![c(1.0 + t, 0.0), c(2.0, 0.0)])
}

fn fro_rel(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).fro_norm() / a.fro_norm().max(b.fro_norm()).max(f64::MIN_POSITIVE)
}

fn exact(f: &TimeMatrixFn) -> &PolyMatrix {
    f.as_exact().expect("toy operators are exact polynomials")
}

fn c1_printed_objects() -> Outcome {
    let mut worst: f64 = 0.0;
    for p in ToyParams::default_grid() {
        let m = toy_model(&p).unwrap();
        let pr = toy_printed(&p);
        for (derived, printed) in [
            (m.theta(), &pr.theta),
            (m.theta2(), &pr.theta2),
            (m.hamiltonian_h1(), &pr.h1),
            (m.sigma2(), &pr.sigma2),
            (m.generator(PictureTag::HipKphysical), &pr.g1),
        ] {
            worst = worst.max(exact(&derived).max_coeff_diff(printed));
        }
    }
    (worst <= 1e-12, format!("max coefficient difference {worst:.3e} (tol 1e-12)"))
}

fn c2_quasi_hermiticity() -> Outcome {
    let mut worst: f64 = 0.0;
    for p in ToyParams::default_grid() {
        let m = toy_model(&p).unwrap();
        for &t in &GRID_T {
            let h = m.hamiltonian().eval(t).unwrap();
            let theta = m.theta().eval(t).unwrap();
            let lhs = &h.conj_transpose() * &theta;
            let rhs = &theta * &h;
            worst = worst.max((&lhs - &rhs).fro_norm() / rhs.fro_norm());
        }
    }
    (worst < 1e-12, format!("max relative residual {worst:.3e} (tol 1e-12)"))
}

fn c3_isospectrality() -> Outcome {
    let p = ToyParams::new(0.5, 1.0, 0.5);
    let m = toy_model(&p).unwrap();
    let (mut spec_err, mut herm_err): (f64, f64) = (0.0, 0.0);
    for t in uniform_times(0.0, 1.0, 19) {
        let h = m.hamiltonian().eval(t).unwrap();
        let h1 = m.hamiltonian_h1().eval(t).unwrap();
        let omega = m.omega().eval(t).unwrap();
        let hs = &(&omega * &h) * &omega.inverse().unwrap();
        for op in [&h, &h1, &hs] {
            spec_err = spec_err.max(op.eigenvalues().unwrap().distance(&energies(t)));
        }
        herm_err = herm_err.max((&hs - &hs.conj_transpose()).max_abs());
    }
    (
        spec_err <= 1e-10 && herm_err <= 1e-10,
        format!("spectrum error {spec_err:.3e}, H_S Hermiticity error {herm_err:.3e} over 20 probes (tol 1e-10)"),
    )
}

fn c4_metric_positivity() -> Outcome {
    let mut all_positive = true;
    let mut det_err: f64 = 0.0;
    for p in ToyParams::default_grid() {
        let m = toy_model(&p).unwrap();
        for &t in &GRID_T {
            let theta = m.theta().eval(t).unwrap();
            let theta2 = m.theta2().eval(t).unwrap();
            all_positive &= theta.is_positive_definite().unwrap().is_positive();
            all_positive &= theta2.is_positive_definite().unwrap().is_positive();
            // 2x2 determinant written out.
            let det = theta[(0, 0)] * theta[(1, 1)] - theta[(0, 1)] * theta[(1, 0)];
            det_err = det_err.max((det - c(1.0, 0.0)).norm());
        }
    }
    (all_positive && det_err <= 1e-12, format!("all positive: {all_positive}, max |det Θ − 1| {det_err:.3e} (tol 1e-12)"))
}

fn c5_consistency_point() -> Outcome {
    let grid = ToyParams::default_grid();
    let mut sigma_err: f64 = 0.0;
    let mut doublet_err: f64 = 0.0;
    for p in grid.iter().filter(|p| p.r == 1.0) {
        let m = toy_model(p).unwrap();
        let pr = toy_printed(p);
        for &t in &GRID_T {
            let derived = m.sigma().eval(t).unwrap();
            sigma_err = sigma_err.max(derived.max_abs_diff(&pr.sigma.eval(t)));
            let g = m.generator(PictureTag::NipAuxiliary).eval(t).unwrap();
            doublet_err = doublet_err.max(g.eigenvalues().unwrap().distance(&Spectrum::new(pr.doublet(t).to_vec())));
        }
    }
    let off: Vec<ToyParams> = grid.iter().copied().filter(|p| [0.0, 0.5, 2.0].contains(&p.r)).collect();
    let opts = SuiteOptions { only: Some(vec!["toy.printed_sigma".into(), "toy.printed_doublet".into()]), ..Default::default() };
    let report = run_toy_suite(&off, &GRID_T, &opts).unwrap();
    let family: Vec<_> = report.checks.iter().filter(|c| c.name == "toy.printed_sigma" || c.name == "toy.printed_doublet").collect();
    let all_recorded = !family.is_empty() && family.iter().all(|c| c.status == CheckStatus::RecordedDiscrepancy);
    (
        sigma_err <= 1e-12 && doublet_err <= 1e-12 && all_recorded,
        format!(
            "r=1: Σ error {sigma_err:.3e}, doublet error {doublet_err:.3e}; r≠1: {} of {} comparisons recorded_discrepancy",
            family.iter().filter(|c| c.status == CheckStatus::RecordedDiscrepancy).count(),
            family.len()
        ),
    )
}

struct Matched {
    model: PictureModel,
    times: Vec<f64>,
    sp: hipdyn::StateTrajectory,
    nip: hipdyn::StateTrajectory,
    hip: hipdyn::StateTrajectory,
}

fn matched_trajectories() -> Matched {
    let p = ToyParams::new(0.5, 1.0, 0.5);
    let model = toy_model(&p).unwrap();
    let spec = IntegratorSpec::rk4(1e-3);
    let times = uniform_times(0.0, 1.0, 100);
    let psi = vec![c(1.0, 0.0), c(0.0, 0.0)];
    // Initial kets related by Ω(0) and Ω₁(0), written out for the toy factors.
    let d = toy_dyson(&p);
    let omega0 = &d.omega2().eval(0.0).unwrap() * &d.omega1().eval(0.0).unwrap();
    let sp = evolve_ket(&model, PictureTag::SpTextbook, &omega0.mul_vec(&psi), &spec, &times).unwrap();
    let nip = evolve_ket(&model, PictureTag::NipAuxiliary, &psi, &spec, &times).unwrap();
    let hip = evolve_hip_with_dual(&model, &d.omega1().eval(0.0).unwrap().mul_vec(&psi), &spec, &times).unwrap();
    Matched { model, times, sp, nip, hip }
}

fn c6_picture_equivalence(m: &Matched) -> Outcome {
    let a_s = CMatrix::from_real_rows(&[[1.0, 0.0], [0.0, 0.0]]);
    let mut worst: f64 = 0.0;
    for &t in &m.times {
        let sp = m.sp.expectation_at(&m.model, &a_s, t).unwrap().value;
        let nip = m.nip.expectation_at(&m.model, &a_s, t).unwrap().value;
        let hip = m.hip.expectation_at(&m.model, &a_s, t).unwrap();
        // The textbook form needs no metric: ⟨ψ_S|A_S|ψ_S⟩ directly.
        let k = m.sp.ket_at(t).unwrap();
        let direct = c(k[0].norm_sqr(), 0.0);
        for v in [nip, hip.value, hip.dual_form.unwrap(), direct] {
            worst = worst.max((v - sp).norm());
        }
    }
    (worst <= 1e-7, format!("max pairwise expectation difference {worst:.3e} over {} samples (tol 1e-7)", m.times.len()))
}

fn c7_unitarity(m: &Matched) -> Outcome {
    let drifts = [m.sp.norm_drift(), m.nip.norm_drift(), m.hip.norm_drift()];
    let worst = drifts.iter().copied().fold(0.0, f64::max);
    (worst < 1e-7, format!("norm drift SP {:.3e}, NIP {:.3e}, HIP {:.3e} (tol 1e-7)", drifts[0], drifts[1], drifts[2]))
}

fn c8_dual_kets(m: &Matched) -> Outcome {
    let ov = m.hip.dual_overlaps().unwrap();
    let overlap_drift = ov.iter().map(|z| (z - ov[0]).norm()).fold(0.0, f64::max);
    let mut consistency: f64 = 0.0;
    let d = toy_dyson(&ToyParams::new(0.5, 1.0, 0.5));
    for ((&t, k), dual) in m.times.iter().zip(&m.hip.kets).zip(m.hip.dual_kets.as_ref().unwrap()) {
        let o2 = d.omega2().eval(t).unwrap();
        let implied = (&o2.conj_transpose() * &o2).mul_vec(k);
        for (x, y) in implied.iter().zip(dual) {
            consistency = consistency.max((x - y).norm());
        }
    }
    (
        overlap_drift < 1e-7 && consistency < 1e-7,
        format!("overlap drift {overlap_drift:.3e}, Θ₂ψ vs dual ket {consistency:.3e} (tol 1e-7)"),
    )
}

fn random_poly_matrix(rng: &mut ChaCha8Rng, n: usize, degree: usize, scale: f64, plus_identity: bool) -> PolyMatrix {
    let rows = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let mut coeffs: Vec<C64> = (0..=degree).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale).collect();
                    if plus_identity && i == j {
                        coeffs[0] += c(1.0, 0.0);
                    }
                    CPoly::new(coeffs)
                })
                .collect()
        })
        .collect();
    PolyMatrix::from_rows(rows)
}

fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> PolyMatrix {
    let m = random_poly_matrix(rng, n, 1, 1.0, false);
    m.add(&m.conj_transpose()).unwrap()
}

fn c9_random_properties() -> Outcome {
    let mut worst = [0.0f64; 4];
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 1 + (seed % 4) as usize;
        // Perturbations bounded so both factors stay well conditioned on [0, 1].
        let scale = 0.15 / n as f64;
        let o1 = random_poly_matrix(&mut rng, n, 2, scale, true);
        let o2 = random_poly_matrix(&mut rng, n, 2, scale, true);
        let h_herm = random_hermitian(&mut rng, n);
        let omega = o2.mul(&o1).unwrap();
        let omega_fn = TimeMatrixFn::Exact(omega.clone());
        let h = omega_fn.inverse().mul(&TimeMatrixFn::Exact(h_herm)).unwrap().mul(&omega_fn).unwrap();
        let dyson = DysonFactorization::new(TimeMatrixFn::Exact(o1.clone()), TimeMatrixFn::Exact(o2.clone())).unwrap();
        let model = PictureModel::new(dyson, h, (0.0, 1.0)).unwrap();
        let (do1, do2) = (o1.derivative(), o2.derivative());
        let i = c(0.0, 1.0);
        for &t in &GRID_T {
            let (w1, w2) = (o1.eval(t), o2.eval(t));
            let (w1i, w2i) = (w1.inverse().unwrap(), w2.inverse().unwrap());
            let theta2 = &w2.conj_transpose() * &w2;
            // Θ = Ω₁†Θ₂Ω₁
            worst[0] = worst[0].max(fro_rel(&model.theta().eval(t).unwrap(), &(&(&w1.conj_transpose() * &theta2) * &w1)));
            // Σ = Ω₁⁻¹Σ₂Ω₁ + Σ₁ with Σ_k = iΩ_k⁻¹Ω̇_k
            let s1 = (&w1i * &do1.eval(t)).scale(i);
            let s2 = (&w2i * &do2.eval(t)).scale(i);
            let composed = &(&(&w1i * &s2) * &w1) + &s1;
            worst[1] = worst[1].max(fro_rel(&model.sigma().eval(t).unwrap(), &composed));
            // iΘ̇₂ = G₁†Θ₂ − Θ₂G₁
            let theta2_dot = &(&do2.eval(t).conj_transpose() * &w2) + &(&w2.conj_transpose() * &do2.eval(t));
            let g1 = model.generator(PictureTag::HipKphysical).eval(t).unwrap();
            let rhs = &(&g1.conj_transpose() * &theta2) - &(&theta2 * &g1);
            let lhs = theta2_dot.scale(i);
            let scale = (&g1.conj_transpose() * &theta2).fro_norm().max(lhs.fro_norm()).max(f64::MIN_POSITIVE);
            worst[2] = worst[2].max((&lhs - &rhs).fro_norm() / scale);
            // H₁ = Ω₁HΩ₁⁻¹ is quasi-Hermitian with respect to Θ₂.
            let h1 = &(&w1 * &model.hamiltonian().eval(t).unwrap()) * &w1i;
            let qh = &(&h1.conj_transpose() * &theta2) - &(&theta2 * &h1);
            worst[3] = worst[3].max(qh.fro_norm() / (&theta2 * &h1).fro_norm());
        }
    }
    let max = worst.iter().copied().fold(0.0, f64::max);
    (
        max < 1e-9,
        format!(
            "100 seeds, n≤4: factorization {:.2e}, Coriolis composition {:.2e}, metric compatibility {:.2e}, transport {:.2e} (tol 1e-9)",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

fn c10_conditioning() -> Outcome {
    let spec = IntegratorSpec::rk4(1e-3);
    let mut g1_imag: f64 = 0.0;
    let mut doublet_err: f64 = 0.0;
    for p in ToyParams::default_grid() {
        let times = uniform_times(0.0, 1.0, 10);
        let m = toy_model(&p).unwrap();
        let pr = toy_printed(&p);
        for &t in &times {
            g1_imag = g1_imag.max(m.generator(PictureTag::HipKphysical).eval(t).unwrap().eigenvalues().unwrap().max_abs_imag());
            let expected = ((p.a + p.b * t) * (1.0 - p.r)).abs();
            let got = pr.g_printed().eval(t).unwrap().eigenvalues().unwrap().max_abs_imag();
            doublet_err = doublet_err.max((got - expected).abs());
        }
    }
    let p = ToyParams::new(0.0, 1.0, 0.0).with_window(0.0, 2.0);
    let report = toy_conditioning(&p, &spec, &uniform_times(0.0, 2.0, 40)).unwrap();
    let hip = report.variant("HIP_Kphysical").unwrap().growth_op;
    let nip = report.variant("NIP_auxiliary").unwrap().growth_op;
    let printed = report.variant(NIP_PRINTED).unwrap().growth_op;
    (
        g1_imag == 0.0 && doublet_err <= 1e-12 && hip <= nip,
        format!(
            "max|Im λ(G₁)| = {g1_imag:e}, printed doublet error {doublet_err:.2e}; growth HIP {hip:.4} ≤ NIP {nip:.4} (printed-Σ NIP {printed:.4})"
        ),
    )
}

fn c11_integrator_order() -> Outcome {
    let p = ToyParams::new(0.5, 1.0, 0.5);
    let m = toy_model(&p).unwrap();
    let psi0 = m.map_state(PictureTag::HipKphysical, &[c(1.0, 0.0), c(0.0, 0.0)], 0.0).unwrap();
    let ladder = [0.1, 0.05, 0.025, 0.0125];
    let (errors, slope) = integrator_order(&m, PictureTag::HipKphysical, &psi0, &ladder, 1e-4).unwrap();
    let errs: Vec<String> = errors.iter().map(|e| format!("{e:.2e}")).collect();
    ((slope - 4.0).abs() <= 0.3, format!("slope {slope:.3} (4 ± 0.3), errors [{}]", errs.join(", ")))
}

fn run(id: u32, title: &str, budget: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let (ok, detail) = f();
    let elapsed = start.elapsed();
    let in_time = elapsed <= budget;
    let pass = ok && in_time;
    println!(
        "[{}] criterion {id:>2}: {title}: {detail}; {:.3} s (budget {} s)",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
    pass
}

fn main() -> ExitCode {
    let s = Duration::from_secs;
    let mut results = vec![
        run(1, "printed toy objects", s(1), c1_printed_objects),
        run(2, "quasi-Hermiticity", s(1), c2_quasi_hermiticity),
        run(3, "isospectrality", s(1), c3_isospectrality),
        run(4, "metric positivity", s(1), c4_metric_positivity),
        run(5, "consistency point", s(1), c5_consistency_point),
    ];
    // Criteria 6-8 share one set of matched trajectories; its cost is charged to each.
    let start = Instant::now();
    let matched = matched_trajectories();
    let setup = start.elapsed();
    let charged = |budget: u64| Duration::from_secs(budget).saturating_sub(setup);
    results.push(run(6, "picture equivalence", charged(10), || c6_picture_equivalence(&matched)));
    results.push(run(7, "unitarity", charged(10), || c7_unitarity(&matched)));
    results.push(run(8, "dual kets", charged(10), || c8_dual_kets(&matched)));
    results.push(run(9, "random-model identities", s(60), c9_random_properties));
    results.push(run(10, "conditioning direction", s(30), c10_conditioning));
    results.push(run(11, "integrator order", s(30), c11_integrator_order));
    let passed = results.iter().filter(|&&r| r).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
