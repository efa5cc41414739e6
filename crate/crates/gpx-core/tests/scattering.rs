//! End-to-end checks of the scattering pipeline on representative fields.

use gpx_core::conserved::mass;
use gpx_core::grid::{Grid, GridField};
use gpx_core::profiles::Profile;
use gpx_core::scattering::{
    jost_transmission_direct, make_params, renormalized_sweep, renormalized_transmission_with, Route,
    TransmissionConfig,
};
use gpx_core::GpxError;
use num_complex::Complex64 as C64;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[test]
fn background_transmission_is_one_in_both_half_planes() {
    let q = GridField::constant(Grid::new(10.0, 128).unwrap(), c(1.0, 0.0));
    for l in [c(0.0, 2.0), c(0.7, 0.2), c(-2.0, 1.0), c(0.4, -0.6), c(-1.5, -0.1)] {
        let r = renormalized_transmission_with(&q, l, &TransmissionConfig::default()).unwrap();
        assert!((r.tc_inv - 1.0).norm() < 1e-12, "λ = {l}: {}", r.tc_inv);
        assert!((r.t_inv.unwrap() - 1.0).norm() < 1e-12);
        assert_eq!(r.route, Route::SingleRegion);
    }
}

#[test]
fn twisted_schwarz_symmetry_of_a_soliton() {
    let q = Profile::Soliton { c: 0.5 }.sample(Grid::new(30.0, 2048).unwrap(), 0.0).unwrap();
    let phase = C64::from_polar(1.0, q.twist());
    for l in [c(0.3, 0.7), c(-1.2, 0.4), c(2.0, 3.0)] {
        let a = jost_transmission_direct(&q, l).unwrap();
        let b = jost_transmission_direct(&q, l.conj()).unwrap();
        assert!((b - phase * a.conj()).norm() < 1e-10, "λ = {l}: {b} vs {}", phase * a.conj());
    }
}

#[test]
fn renormalized_route_reproduces_direct_solve_on_twisted_fields() {
    let g = Grid::new(30.0, 2048).unwrap();
    let fields = [
        Profile::SolitonPlusBump { c: 0.4, beta_re: 0.15, beta_im: 0.1, width: 1.0 },
        Profile::PerturbedBackground { beta_re: -0.2, beta_im: 0.3, width: 1.5, phase_ramp: 1.1 },
    ];
    for p in fields {
        let q = p.sample(g, 0.0).unwrap();
        for l in [c(0.0, 1.5), c(0.6, 0.3), c(-0.4, -0.9)] {
            let r = renormalized_transmission_with(&q, l, &TransmissionConfig { ab: false, ..Default::default() })
                .unwrap();
            let d = r.t_inv.unwrap();
            assert!((d - r.t_inv_renormalized).norm() < 1e-8 * d.norm().max(1.0), "{p:?} at {l}");
        }
    }
}

#[test]
fn transmission_approaches_one_far_from_the_cut() {
    let q = Profile::Soliton { c: 0.3 }.sample(Grid::new(30.0, 2048).unwrap(), 0.0).unwrap();
    let m = mass(&q);
    let l = c(0.0, 200.0);
    let p = make_params(l).unwrap();
    let t = jost_transmission_direct(&q, l).unwrap();
    // Leading large-λ behaviour: ln T⁻¹ ≈ iM/(2z).
    let lead = c(0.0, 1.0) * m / (2.0 * p.z);
    assert!((t.ln() - lead).norm() < 1e-3 * lead.norm(), "{} vs {lead}", t.ln());
}

#[test]
fn sweep_matches_pointwise_evaluation() {
    let q = Profile::PerturbedBackground { beta_re: 0.2, beta_im: 0.1, width: 1.0, phase_ramp: 0.0 }
        .sample(Grid::new(20.0, 512).unwrap(), 0.0)
        .unwrap();
    let cfg = TransmissionConfig { direct: false, ab: false, ..Default::default() };
    let lambdas = [c(0.0, 2.0), c(0.5, 0.5), c(1.0, 0.0)];
    let sweep = renormalized_sweep(&q, &lambdas, &cfg);
    for (l, s) in lambdas.iter().zip(&sweep).take(2) {
        let one = renormalized_transmission_with(&q, *l, &cfg).unwrap();
        assert_eq!(s.as_ref().unwrap().tc_inv, one.tc_inv);
    }
    assert!(matches!(sweep[2], Err(GpxError::Branch(_))));
}
