//! Classical and renormalised conserved functionals: mass `M`, momentum `P`,
//! asymptotic phase change `Θ`, renormalised momentum `H₁` and the `H₃`
//! expansion diagnostic.
//!
//! `Θ` and `H₁` are only defined modulo `2π`; both are returned as a value
//! reduced to `[0, 2π)` together with the branch integer `k` such that the
//! unreduced (natural) value equals `value + 2πk`.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{GpxError, Result};
use crate::grid::GridField;
use crate::regularize::{nonvanishing_reference, phase_increments, RegularizationPair};

/// A quantity defined modulo `2π`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Angle {
    /// Value reduced to `[0, 2π)`.
    pub value: f64,
    /// Branch integer: the natural value is `value + 2π·branch`.
    pub branch: i64,
}

impl Angle {
    /// Reduces a natural value to `[0, 2π)` and records the branch integer.
    pub fn from_natural(natural: f64) -> Angle {
        let turns = (natural / (2.0 * PI)).floor();
        let mut value = natural - 2.0 * PI * turns;
        let mut branch = turns as i64;
        if value >= 2.0 * PI {
            value -= 2.0 * PI;
            branch += 1;
        }
        Angle { value, branch }
    }

    /// Unreduced value `value + 2π·branch`.
    pub fn natural(&self) -> f64 {
        self.value + 2.0 * PI * self.branch as f64
    }
}

/// Distance between two angles on the circle, in `[0, π]`.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

/// `𝓜 = ∫(|q|² − 1) dx`.
pub fn mass(q: &GridField) -> f64 {
    q.grid().integrate(&q.density_deviation())
}

/// `𝓟 = Im ∫ q ∂_x q̄ dx = −Im ∫ q̄ ∂_x q dx`.
///
/// The derivative is spectral on the twisted representation, so the phase
/// ramp of a twisted field is differentiated exactly. Meaningful for fields
/// whose derivative is resolved on the grid.
pub fn momentum(q: &GridField) -> f64 {
    let dq = q.derivative();
    let s: C64 = q.samples().iter().zip(dq.samples()).map(|(a, b)| a.conj() * b).sum();
    -s.im * q.grid().dx()
}

/// `E¹(q)² = ∫(|∂_x q|² + (|q|² − 1)²) dx`, the Ginzburg–Landau energy.
pub fn energy(q: &GridField) -> f64 {
    let dq = q.derivative();
    let dens: Vec<f64> = q
        .samples()
        .iter()
        .zip(dq.samples())
        .map(|(a, b)| b.norm_sqr() + (a.norm_sqr() - 1.0).powi(2))
        .collect();
    q.grid().integrate(&dens)
}

/// Natural (unreduced) phase change `−Σ arg(q̃_{j+1}/q̃_j)` of a unimodular
/// reference field around the twisted ring.
pub fn winding_theta(q_tilde: &GridField) -> f64 {
    -phase_increments(q_tilde).iter().sum::<f64>()
}

/// `Θ(q)` from the reference field at scale `τ`.
pub fn theta(q: &GridField, tau: f64) -> Result<Angle> {
    let pair = nonvanishing_reference(q, tau)?;
    Ok(Angle::from_natural(winding_theta(&pair.q_tilde)))
}

/// Natural value of
/// `H₁ = −Im ∫((q̄ − q̃̄)∂_x q − ∂_x q̃̄ (q − q̃) + (|q̃|² − 1) ∂_x q̃ / q̃) dx`
/// and the largest modulus of the last integrand term (zero for unimodular `q̃`).
pub fn h1_natural(q: &GridField, q_tilde: &GridField) -> (f64, f64) {
    let dq = q.derivative();
    let dqt = q_tilde.derivative();
    let mut sum = C64::new(0.0, 0.0);
    let mut third_max: f64 = 0.0;
    for j in 0..q.samples().len() {
        let (a, at) = (q.samples()[j], q_tilde.samples()[j]);
        let third = (at.norm_sqr() - 1.0) * dqt.samples()[j] / at;
        third_max = third_max.max(third.norm());
        sum += (a - at).conj() * dq.samples()[j] - dqt.samples()[j].conj() * (a - at) + third;
    }
    (-sum.im * q.grid().dx(), third_max)
}

/// `H₁(q)` with `q̃` constructed at scale `τ`.
pub fn h1(q: &GridField, tau: f64) -> Result<Angle> {
    let pair = nonvanishing_reference(q, tau)?;
    let (nat, third) = h1_natural(q, &pair.q_tilde);
    if third > 1e-10 {
        return Err(GpxError::Internal(format!("|q̃|² − 1 term of H₁ is {third:.2e}")));
    }
    Ok(Angle::from_natural(nat))
}

/// `𝓗₃ = Im ∫(∂_x q ∂_xx q̄ + 3(|q|² − 1) q ∂_x q̄) dx − 𝓟` for smooth
/// compactly perturbed backgrounds.
pub fn h3_diagnostic(q: &GridField) -> f64 {
    let dq = q.derivative();
    let ddq = dq.derivative();
    let s: C64 = (0..q.samples().len())
        .map(|j| {
            let a = q.samples()[j];
            dq.samples()[j] * ddq.samples()[j].conj() + 3.0 * (a.norm_sqr() - 1.0) * a * dq.samples()[j].conj()
        })
        .sum();
    s.im * q.grid().dx() - momentum(q)
}

/// Conserved quantities of one field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConservedReport {
    pub mass: f64,
    pub momentum: Option<f64>,
    pub energy: f64,
    pub theta: Angle,
    pub h1: Angle,
    /// `τ` used for the reference field.
    pub tau: f64,
    pub notes: Vec<String>,
}

/// Evaluates all conserved quantities; `τ` is the scale of the reference field.
pub fn report(q: &GridField, tau: f64) -> Result<ConservedReport> {
    let pair: RegularizationPair = nonvanishing_reference(q, tau)?;
    let th = winding_theta(&pair.q_tilde);
    let (h, third) = h1_natural(q, &pair.q_tilde);
    let mut notes = vec![format!(
        "reference field built at tau = {tau} with {} interpolation interval(s)",
        pair.intervals.len()
    )];
    if third > 1e-10 {
        notes.push(format!("|q̃|² − 1 term of H₁ reached {third:.2e}"));
    }
    let vanishing = q.samples().iter().any(|v| v.norm() < 0.25);
    if vanishing {
        notes.push("q comes close to zero; momentum is reported but is not a continuous functional there".into());
    }
    Ok(ConservedReport {
        mass: mass(q),
        momentum: Some(momentum(q)),
        energy: energy(q),
        theta: Angle::from_natural(th),
        h1: Angle::from_natural(h),
        tau,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::profiles::Profile;

    #[test]
    fn angle_reduction() {
        let a = Angle::from_natural(-2.0 * PI / 3.0);
        assert!((a.value - 4.0 * PI / 3.0).abs() < 1e-15);
        assert_eq!(a.branch, -1);
        assert!((a.natural() + 2.0 * PI / 3.0).abs() < 1e-15);
        assert_eq!(Angle::from_natural(0.0), Angle { value: 0.0, branch: 0 });
        assert!(angle_distance(0.1, 2.0 * PI - 0.1) < 0.2 + 1e-15);
    }

    #[test]
    fn constant_background() {
        let g = Grid::new(10.0, 64).unwrap();
        let q = GridField::constant(g, C64::new(1.0, 0.0));
        assert_eq!(mass(&q), 0.0);
        assert_eq!(momentum(&q), 0.0);
        assert_eq!(theta(&q, 2.0).unwrap().value, 0.0);
        assert_eq!(h1(&q, 2.0).unwrap().value, 0.0);
        assert_eq!(h3_diagnostic(&q), 0.0);
    }

    #[test]
    fn soliton_values() {
        let g = Grid::new(40.0, 4096).unwrap();
        for c in [-0.5, 0.0, 0.5] {
            let p = Profile::Soliton { c };
            let q = p.sample(g, 0.0).unwrap();
            let exact = p.exact_invariants().unwrap();
            assert!((mass(&q) - exact.mass).abs() < 1e-8, "c={c}");
            assert!((momentum(&q) - exact.momentum).abs() < 1e-7, "c={c}");
            assert!((energy(&q) - exact.energy).abs() < 1e-8, "c={c}");
            assert!(angle_distance(theta(&q, 4.0).unwrap().value, exact.theta) < 1e-6, "c={c}");
        }
    }

    #[test]
    fn ramp_theta_is_minus_phi0() {
        let g = Grid::new(30.0, 1024).unwrap();
        let phi0 = 1.7;
        let p = Profile::PerturbedBackground { beta_re: 0.0, beta_im: 0.0, width: 1.0, phase_ramp: phi0 };
        let q = p.sample(g, 0.0).unwrap();
        let t = theta(&q, 2.0).unwrap();
        assert!((t.natural() + phi0).abs() < 1e-10);
    }

    #[test]
    fn real_bump_has_zero_h3() {
        let g = Grid::new(20.0, 512).unwrap();
        let q = Profile::PerturbedBackground { beta_re: 0.3, beta_im: 0.0, width: 1.5, phase_ramp: 0.0 }
            .sample(g, 0.0)
            .unwrap();
        assert!(h3_diagnostic(&q).abs() < 1e-12);
    }
}
