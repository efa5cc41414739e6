//! Self-verification suites run by `gpx verify`.

use std::f64::consts::PI;

use gpx_core::conserved::{angle_distance, energy, h1, mass, momentum, theta};
use gpx_core::eigen::{default_band, lax_eigs};
use gpx_core::energies::{contour_identity_check, contour_suite, script_e0, script_es, EnergyQuadratureConfig};
use gpx_core::grid::{Grid, GridField};
use gpx_core::profiles::Profile;
use gpx_core::scattering::{jost_transmission_direct, renormalized_transmission};
use gpx_core::Result;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Suites selectable with `--suite`.
pub const SUITES: [&str; 5] = ["contour", "trivial", "invariants", "symmetry", "h1"];

/// One verified statement.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub suite: String,
    pub name: String,
    pub error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

fn check(suite: &str, name: String, error: f64, tolerance: f64) -> Check {
    Check { suite: suite.into(), name, error, tolerance, passed: error <= tolerance }
}

fn contour() -> Result<Vec<Check>> {
    contour_suite()
        .into_iter()
        .map(|(s, xi, t0)| {
            let (l, r) = contour_identity_check(s, xi, t0)?;
            Ok(check("contour", format!("s̃={s} ξ={xi} τ₀={t0}"), (l - r).abs() / r.abs(), 1e-6))
        })
        .collect()
}

fn trivial() -> Result<Vec<Check>> {
    let g = Grid::new(10.0, 128)?;
    let q = GridField::constant(g, C64::new(1.0, 0.0));
    let one = C64::new(1.0, 0.0);
    let mut out = Vec::new();
    for l in [C64::new(0.0, 2.0), C64::new(0.5, 1.0), C64::new(-0.3, -0.7)] {
        let res = renormalized_transmission(&q, l, 2.0)?;
        out.push(check("trivial", format!("T_c⁻¹({l}) = 1"), (res.tc_inv - one).norm(), 1e-12));
        out.push(check("trivial", format!("T⁻¹({l}) = 1"), (jost_transmission_direct(&q, l)? - one).norm(), 1e-12));
        let t2n = res.t2n.iter().skip(1).map(|t| t.norm()).fold(0.0, f64::max);
        out.push(check("trivial", format!("T₂ₙ({l}) = 0"), t2n, 1e-12));
        out.push(check("trivial", format!("Φ({l}) = 0"), res.phi.norm(), 1e-12));
    }
    out.push(check("trivial", "mass = 0".into(), mass(&q).abs(), 1e-12));
    out.push(check("trivial", "energy = 0".into(), energy(&q).abs(), 1e-12));
    out.push(check("trivial", "𝓔⁰₄ = 0".into(), script_e0(&q, 4.0)?.abs(), 1e-12));
    let cfg = EnergyQuadratureConfig::from_env();
    out.push(check("trivial", "𝓔^{1/2}₂ = 0".into(), script_es(&q, 0.5, 2.0, &cfg)?.value.abs(), 1e-12));
    out.push(check("trivial", "no eigenvalues".into(), lax_eigs(&q, default_band())?.len() as f64, 0.0));
    Ok(out)
}

fn invariants() -> Result<Vec<Check>> {
    let g = Grid::new(40.0, 4096)?;
    let mut out = Vec::new();
    for c in [0.0, 0.3, -0.3, 0.5, -0.5, 0.9, -0.9] {
        let p = Profile::Soliton { c };
        let q = p.sample(g, 0.0)?;
        let ex = p.exact_invariants()?;
        out.push(check("invariants", format!("mass c={c}"), (mass(&q) - ex.mass).abs(), 1e-6));
        out.push(check("invariants", format!("momentum c={c}"), (momentum(&q) - ex.momentum).abs(), 1e-6));
        out.push(check("invariants", format!("energy c={c}"), (energy(&q) - ex.energy).abs(), 1e-6));
        out.push(check("invariants", format!("Θ c={c}"), angle_distance(theta(&q, 4.0)?.value, ex.theta), 1e-6));
    }
    Ok(out)
}

fn symmetry(seed: u64) -> Result<Vec<Check>> {
    let g = Grid::new(20.0, 1024)?;
    let q = Profile::PerturbedBackground { beta_re: 0.3, beta_im: 0.25, width: 1.0, phase_ramp: 0.0 }.sample(g, 0.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..10)
        .map(|_| {
            let l = C64::new(rng.gen_range(-2.0..2.0), rng.gen_range(0.2..3.0));
            let a = jost_transmission_direct(&q, l)?;
            let b = jost_transmission_direct(&q, l.conj())?;
            Ok(check("symmetry", format!("T⁻¹(λ̄) = conj T⁻¹(λ) at {l:.4}"), (a - b.conj()).norm(), 1e-8))
        })
        .collect()
}

fn h1_identity() -> Result<Vec<Check>> {
    let g = Grid::new(30.0, 2048)?;
    let mut out = Vec::new();
    for (k, ramp) in [0.0, 0.7, -1.3, 2.5, 4.0].into_iter().enumerate() {
        let beta = 0.1 + 0.05 * k as f64;
        let q = Profile::PerturbedBackground { beta_re: beta, beta_im: -0.5 * beta, width: 1.5, phase_ramp: ramp }
            .sample(g, 0.0)?;
        let lhs = h1(&q, 4.0)?.value;
        let rhs = (momentum(&q) - theta(&q, 4.0)?.natural()).rem_euclid(2.0 * PI);
        out.push(check("h1", format!("H₁ = P − Θ, ramp {ramp}"), angle_distance(lhs, rhs), 1e-7));
    }
    Ok(out)
}

/// Runs the named suite (`all` runs every suite).
pub fn run(suite: &str, seed: u64) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for name in SUITES {
        if suite != "all" && suite != name {
            continue;
        }
        out.extend(match name {
            "contour" => contour()?,
            "trivial" => trivial()?,
            "invariants" => invariants()?,
            "symmetry" => symmetry(seed)?,
            _ => h1_identity()?,
        });
    }
    Ok(out)
}
