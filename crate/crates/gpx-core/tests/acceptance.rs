//! Acceptance suite: runs the eleven acceptance criteria at their required
//! tolerances and prints one PASS/FAIL line per criterion. Exits non-zero if
//! any criterion fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use gpx_core::conserved::{angle_distance, energy, h1, mass, momentum, theta, winding_theta};
use gpx_core::eigen::{default_band, eigen_report, lax_eigs, PAIRING_TOLERANCE};
use gpx_core::energies::{
    amplitude_slope, contour_identity_check, contour_suite, script_e0, script_es, script_es_high,
    verify_energy_bound, EnergyQuadratureConfig,
};
use gpx_core::evolve::{drift_ratio, l2_distance, run, EvolveConfig};
use gpx_core::grid::{e_s_tau, Grid, GridField};
use gpx_core::profiles::Profile;
use gpx_core::regularize::{nonvanishing_reference, verify_regularity_bounds, RegularityConstants};
use gpx_core::scattering::{
    jost_transmission_direct, renormalized_transmission, renormalized_transmission_with, TransmissionConfig,
};
use gpx_core::Result;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Result<Verdict> {
    Ok(Verdict { passed, detail })
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

const SOLITON_CS: [f64; 7] = [0.0, 0.3, -0.3, 0.5, -0.5, 0.9, -0.9];

/// Asymmetric complex bump with non-zero mass, momentum and odd scattering part.
fn skewed_bump(g: Grid, b: f64) -> GridField {
    GridField::from_fn(g, 0.0, |x| c(1.0, 0.0) + b * c(0.6 + 0.3 * x, 0.5 - 0.8 * x) * (-(x - 0.3f64).powi(2)).exp())
        .unwrap()
}

fn criterion_1() -> Result<Verdict> {
    let g = Grid::new(40.0, 4096)?;
    let (mut target, mut corrected, mut others): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for cc in SOLITON_CS {
        let q = Profile::Soliton { c: cc }.sample(g, 0.0)?;
        let s = (1.0 - cc * cc).sqrt();
        let m = mass(&q);
        target = target.max((m + 2.0 * (1.0 - cc * cc)).abs());
        corrected = corrected.max((m + 2.0 * s).abs());
        others = others
            .max((momentum(&q) - 2.0 * cc * s).abs())
            .max((energy(&q) - 8.0 / 3.0 * s.powi(3)).abs())
            .max(angle_distance(theta(&q, 4.0)?.value, (2.0 * cc.acos()).rem_euclid(2.0 * PI)));
    }
    verdict(
        target <= 1e-6 && others <= 1e-6,
        format!(
            "max |M − (−2(1−c²))| = {target:.2e}, max |M − (−2√(1−c²))| = {corrected:.2e}, \
             max error of P, E, Θ = {others:.2e} (tol 1e-6)"
        ),
    )
}

fn h1_profiles() -> Vec<Profile> {
    let mut v: Vec<Profile> = [(0.1, 0.05, 0.0), (0.2, -0.1, 0.7), (0.3, 0.2, -1.3), (-0.2, 0.1, 2.5), (0.15, 0.3, 4.0)]
        .into_iter()
        .map(|(beta_re, beta_im, phase_ramp)| Profile::PerturbedBackground { beta_re, beta_im, width: 1.5, phase_ramp })
        .collect();
    v.extend([0.5, 0.9, -0.7].map(|c| Profile::Soliton { c }));
    v.push(Profile::SolitonPlusBump { c: 0.6, beta_re: 0.1, beta_im: 0.05, width: 1.0 });
    v.push(Profile::SolitonPair { c1: 0.5, c2: 0.8, separation: 12.0 });
    v
}

fn criterion_2() -> Result<Verdict> {
    let g = Grid::new(40.0, 4096)?;
    let mut worst: f64 = 0.0;
    let profiles = h1_profiles();
    for p in &profiles {
        let q = p.sample(g, 0.0)?;
        let lhs = h1(&q, 4.0)?.value;
        let rhs = (momentum(&q) - theta(&q, 4.0)?.natural()).rem_euclid(2.0 * PI);
        worst = worst.max(angle_distance(lhs, rhs));
    }
    verdict(worst <= 1e-7, format!("{} profiles, max |H₁ − (P − Θ)| mod 2π = {worst:.2e} (tol 1e-7)", profiles.len()))
}

fn criterion_3() -> Result<Verdict> {
    let g = Grid::new(10.0, 128)?;
    let q = GridField::constant(g, c(1.0, 0.0));
    let one = c(1.0, 0.0);
    let mut worst: f64 = 0.0;
    for l in [c(0.0, 2.0), c(0.5, 1.0), c(-1.5, 0.3), c(0.3, -0.7), c(0.0, 0.5)] {
        let r = renormalized_transmission(&q, l, 2.0)?;
        worst = worst
            .max((r.tc_inv - one).norm())
            .max((r.t_inv.unwrap() - one).norm())
            .max((r.t_inv_renormalized - one).norm())
            .max((jost_transmission_direct(&q, l)? - one).norm())
            .max(r.phi.norm())
            .max(r.t2n.iter().skip(1).map(|t| t.norm()).fold(0.0, f64::max));
    }
    let cfg = EnergyQuadratureConfig::default();
    for tau in [2.0, 4.0, 8.0] {
        worst = worst.max(script_e0(&q, tau)?.abs());
        worst = worst.max(script_es(&q, 0.5, tau, &cfg)?.value.abs());
        worst = worst.max(script_es_high(&q, 1.0, tau, &cfg)?.value.abs());
        worst = worst.max(script_es_high(&q, 1.5, tau, &cfg)?.value.abs());
        worst = worst.max(e_s_tau(&q, 0.5, tau)?);
    }
    worst = worst.max(mass(&q).abs()).max(energy(&q).abs());
    let eigs = lax_eigs(&q, (-1.0 + 1e-6, 1.0 - 1e-6))?;
    verdict(
        worst <= 1e-12 && eigs.is_empty(),
        format!("max deviation {worst:.2e} (tol 1e-12), {} eigenvalue(s) in (−1, 1)", eigs.len()),
    )
}

fn criterion_4() -> Result<Verdict> {
    let g = Grid::new(30.0, 2048)?;
    let profiles = [
        Profile::Soliton { c: 0.5 },
        Profile::PerturbedBackground { beta_re: 0.3, beta_im: 0.2, width: 1.2, phase_ramp: 0.8 },
        Profile::SolitonPlusBump { c: 0.7, beta_re: 0.1, beta_im: -0.1, width: 1.0 },
    ];
    let lambdas = [c(0.0, 0.9), c(0.0, 2.0), c(0.5, 1.0), c(-0.7, 0.4), c(0.3, -0.8), c(0.2, 0.0)];
    let mut worst: f64 = 0.0;
    for p in &profiles {
        let q = p.sample(g, 0.0)?;
        for &l in &lambdas {
            let r = renormalized_transmission_with(&q, l, &TransmissionConfig { ab: false, ..Default::default() })?;
            let d = r.t_inv.unwrap();
            worst = worst.max((d - r.t_inv_renormalized).norm() / d.norm().max(1.0));
        }
    }
    verdict(worst <= 1e-6, format!("3 profiles × 6 λ, max |T⁻¹_direct − e^(−∫q₁)ΣT₂ₙ| = {worst:.2e} (tol 1e-6)"))
}

fn criterion_5() -> Result<Verdict> {
    let g = Grid::new(20.0, 1024)?;
    let q = Profile::PerturbedBackground { beta_re: 0.3, beta_im: 0.25, width: 1.0, phase_ramp: 0.0 }.sample(g, 0.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let l = c(rng.gen_range(-2.0..2.0), rng.gen_range(0.2..3.0));
        let a = jost_transmission_direct(&q, l)?;
        let b = jost_transmission_direct(&q, l.conj())?;
        worst = worst.max((a - b.conj()).norm());
    }
    verdict(worst <= 1e-8, format!("10 random λ, max |T⁻¹(λ̄) − conj T⁻¹(λ)| = {worst:.2e} (tol 1e-8)"))
}

fn criterion_6() -> Result<Verdict> {
    let mut worst: f64 = 0.0;
    let mut passed = 0;
    let suite = contour_suite();
    for &(s, xi, t0) in &suite {
        let (l, r) = contour_identity_check(s, xi, t0)?;
        let rel = (l - r).abs() / r.abs();
        worst = worst.max(rel);
        passed += usize::from(rel <= 1e-6);
    }
    verdict(passed == suite.len(), format!("{passed}/{} identities, max relative error {worst:.2e} (tol 1e-6)", suite.len()))
}

fn criterion_7() -> Result<Verdict> {
    let amps = [0.02, 0.04, 0.08];
    let g = Grid::new(20.0, 1024)?;
    let mut e0_res = Vec::new();
    let mut even = Vec::new();
    let mut odd = Vec::new();
    let mut odd_displayed = Vec::new();
    for &b in &amps {
        let q = skewed_bump(g, b);
        e0_res.push((script_e0(&q, 8.0)? - e_s_tau(&q, 0.0, 8.0)?.powi(2)).abs());
        let rep = verify_energy_bound(&q, c(0.0, 2.0))?;
        even.push(rep.even_residual);
        odd.push(rep.odd_residual_consistent);
        odd_displayed.push(rep.odd_residual);
    }
    let slopes = [amplitude_slope(&amps, &e0_res), amplitude_slope(&amps, &even), amplitude_slope(&amps, &odd)];
    verdict(
        slopes.iter().all(|s| (s - 3.0).abs() <= 0.2),
        format!(
            "slopes: 𝓔⁰₈ vs (E⁰₈)² {:.3}, even part {:.3}, odd part {:.3} (target 3 ± 0.2); \
             odd part with the displayed coefficient {:.3}",
            slopes[0],
            slopes[1],
            slopes[2],
            amplitude_slope(&amps, &odd_displayed)
        ),
    )
}

fn criterion_8() -> Result<Verdict> {
    let g = Grid::new(40.0, 4096)?;
    let sol = Profile::Soliton { c: 0.5 };
    let q0 = sol.sample(g, 0.0)?;
    let cfg = EvolveConfig { dt: 1e-3, t_final: 1.0, report_every: 100, probe_lambdas: vec![], ..Default::default() };
    let rep = run(&q0, &cfg)?;
    let q1 = GridField::new(g, rep.final_samples.clone(), q0.twist())?;
    let l2 = l2_distance(&q1, &sol.sample(g, 1.0)?);

    let gb = Grid::new(40.0, 2048)?;
    let bump = Profile::PerturbedBackground { beta_re: 0.1, beta_im: 0.05, width: 1.0, phase_ramp: 0.0 }.sample(gb, 0.0)?;
    let bcfg = EvolveConfig { dt: 5e-4, t_final: 1.0, report_every: 200, ..Default::default() };
    let brep = run(&bump, &bcfg)?;
    let r_energy = drift_ratio(&bump, 0.02, 1.0, |q| Ok(energy(q)))?;
    let r_e0 = drift_ratio(&bump, 0.02, 1.0, |q| script_e0(q, 8.0))?;
    let r_tc = drift_ratio(&bump, 0.02, 1.0, |q| {
        Ok(renormalized_transmission_with(q, c(0.0, 2.0), &TransmissionConfig { direct: false, ab: false, ..Default::default() })?
            .tc_inv
            .re)
    })?;
    let ratios_ok = [r_energy, r_e0, r_tc].iter().all(|r| (3.5..=4.5).contains(r));
    let passed = rep.drifts.mass <= 1e-8
        && rep.drifts.energy <= 1e-7
        && l2 <= 1e-5
        && brep.drifts.e0_tau <= 1e-5
        && brep.drifts.tc_inv[0] <= 1e-5
        && ratios_ok
        && !rep.boundary_flag
        && !brep.boundary_flag;
    verdict(
        passed,
        format!(
            "soliton: mass drift {:.2e}, energy drift {:.2e}, L² error {l2:.2e}; bump: 𝓔⁰₈ drift {:.2e}, \
             T_c⁻¹(2i) drift {:.2e}; drift ratios E {r_energy:.3}, 𝓔⁰₈ {r_e0:.3}, T_c⁻¹ {r_tc:.3}",
            rep.drifts.mass, rep.drifts.energy, brep.drifts.e0_tau, brep.drifts.tc_inv[0]
        ),
    )
}

fn criterion_9() -> Result<Verdict> {
    let single = Profile::Soliton { c: 0.5 }.sample(Grid::new(20.0, 512)?, 0.0)?;
    let pair = Profile::SolitonPair { c1: 0.3, c2: 0.6, separation: 16.0 }.sample(Grid::new(32.0, 1024)?, 0.0)?;
    let a = eigen_report(&single, default_band(), 1e-10)?;
    let b = eigen_report(&pair, default_band(), 1e-10)?;
    let passed = a.consistent() && b.consistent() && a.operator_eigs.len() == 1 && b.operator_eigs.len() == 2;
    verdict(
        passed,
        format!(
            "soliton(0.5): eigs {:?}, zeros {:?}, d_H {:.1e}; pair: eigs {:?}, zeros {:?}, d_H {:.1e} (tol {PAIRING_TOLERANCE:.0e})",
            a.operator_eigs, a.tc_zeros, a.hausdorff, b.operator_eigs, b.tc_zeros, b.hausdorff
        ),
    )
}

/// Least-squares fit of real coefficients `a_k` in `y ≈ Σ a_k f_k` over complex samples.
fn real_fit(samples: &[(Vec<C64>, C64)]) -> Vec<f64> {
    let k = samples[0].0.len();
    let mut a = DMatrix::<f64>::zeros(2 * samples.len(), k);
    let mut b = DVector::<f64>::zeros(2 * samples.len());
    for (j, (f, y)) in samples.iter().enumerate() {
        for (m, v) in f.iter().enumerate() {
            a[(2 * j, m)] = v.re;
            a[(2 * j + 1, m)] = v.im;
        }
        b[2 * j] = y.re;
        b[2 * j + 1] = y.im;
    }
    a.svd(true, true).solve(&b, 1e-14).expect("least-squares solve").iter().copied().collect()
}

fn criterion_10() -> Result<Verdict> {
    let g = Grid::new(20.0, 2048)?;
    let q = skewed_bump(g, 0.3);
    let (m, p) = (mass(&q), momentum(&q));
    let i = c(0.0, 1.0);
    let mut two = Vec::new();
    let mut three = Vec::new();
    for r in [8.0, 16.0, 32.0] {
        for dir in [c(0.0, 1.0), C64::from_polar(1.0, 0.25 * PI)] {
            let l = r * dir;
            let z = (l * l - 1.0).sqrt();
            let z = if z.im < 0.0 { -z } else { z };
            let y = jost_transmission_direct(&q, l)?.ln();
            let (f1, f2) = (i / (2.0 * z), i / (2.0 * z * (l + z)));
            two.push((vec![f1, f2], y));
            // The next two orders of the expansion enter as i·c₃/z³ and i·c₄/z⁴
            // and are fitted as nuisance terms.
            three.push((vec![f1, f2, i / z.powi(3), i / z.powi(4)], y));
        }
    }
    let naive = real_fit(&two);
    let fit = real_fit(&three);
    let (em, ep) = ((fit[0] - m).abs() / m.abs(), (fit[1] - p).abs() / p.abs());
    verdict(
        em <= 0.01 && ep <= 0.02,
        format!(
            "fitted M {:.6} vs {m:.6} (rel {em:.1e}, tol 1e-2); fitted P {:.6} vs {p:.6} (rel {ep:.1e}, tol 2e-2); \
             nuisance coefficients {:.4}, {:.4}; two-term fit without it: M {:.6}, P {:.6}",
            fit[0], fit[1], fit[2], fit[3], naive[0], naive[1]
        ),
    )
}

fn criterion_11() -> Result<Verdict> {
    let g = Grid::new(40.0, 4096)?;
    let constants = RegularityConstants::default();
    let mut fitted: f64 = 0.0;
    let mut all_passed = true;
    let (mut unimodular, mut winding): (f64, f64) = (0.0, 0.0);
    for cc in SOLITON_CS {
        let q = Profile::Soliton { c: cc }.sample(g, 0.0)?;
        for tau in [2.0, 4.0, 8.0] {
            let r = verify_regularity_bounds(&q, tau, 2.0, constants)?;
            all_passed &= r.passed;
            fitted = fitted.max(r.ratio_upper).max(r.ratio_lower).max(r.ratio_sup).max(r.ratio_density);
            let pair = nonvanishing_reference(&q, tau)?;
            unimodular = unimodular.max(pair.q_tilde.samples().iter().map(|v| (v.norm() - 1.0).abs()).fold(0.0, f64::max));
            let th = winding_theta(&pair.q_tilde).rem_euclid(2.0 * PI);
            winding = winding.max(angle_distance(th, (2.0 * cc.acos()).rem_euclid(2.0 * PI)));
        }
    }
    let bound = constants.c_equivalence.max(constants.c_sup).max(constants.c_density);
    verdict(
        all_passed && fitted <= bound && unimodular <= 1e-10 && winding <= 1e-6,
        format!(
            "largest ratio {fitted:.3} (stored constants {constants:?}), max ||q̃| − 1| = {unimodular:.1e}, \
             max winding − Θ = {winding:.1e}"
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Result<Verdict>, Duration); 11] = [
        ("soliton invariants", criterion_1, Duration::from_secs(5)),
        ("H₁ identity", criterion_2, Duration::from_secs(10)),
        ("trivial background", criterion_3, Duration::MAX),
        ("pipeline equivalence", criterion_4, Duration::from_secs(60)),
        ("Schwarz symmetry", criterion_5, Duration::MAX),
        ("contour identity suite", criterion_6, Duration::from_secs(5)),
        ("energy equivalence scaling", criterion_7, Duration::from_secs(300)),
        ("conservation under flow", criterion_8, Duration::from_secs(600)),
        ("zero/eigenvalue coincidence", criterion_9, Duration::from_secs(300)),
        ("expansion diagnostics", criterion_10, Duration::MAX),
        ("regularization bounds", criterion_11, Duration::MAX),
    ];
    let mut failed = 0;
    for (k, (name, f, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let elapsed = start.elapsed();
        let (passed, detail) = match outcome {
            Ok(v) => (v.passed && elapsed <= *limit, v.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let time_note = if elapsed > *limit { format!(", over the {:?} limit", limit) } else { String::new() };
        println!(
            "criterion {:>2} {} — {name}: {detail} [{:.2}s{time_note}]",
            k + 1,
            if passed { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
        failed += usize::from(!passed);
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
