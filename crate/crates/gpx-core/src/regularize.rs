//! The two regularisation maps: the low-pass field `r = τ² D_τ^{−2} q` and the
//! unimodular, non-vanishing reference field `q̃`.
//!
//! `q̃` equals `r/|r|` away from the dips of `r`. Each dip (a component of
//! `{|r| < 1/2}` containing a point with `|r| < 1/4`) is enclosed in a
//! grid-aligned interval `(a, b)` whose outer thirds satisfy `|r| ≥ 1/2`;
//! inside it modulus and phase of `r` are interpolated separately with the
//! cutoffs `φ` (monotone `0 → 1` across the inner third) and `η` (supported
//! in `(0, 1)`, equal to one on the inner third), the phase increment
//! `θ(b) − θ(a)` being taken in `[0, 2π)`. The result is normalised to
//! modulus one.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{GpxError, Result};
use crate::grid::{check_tau, e_s_tau, w_minus1_p_norm, GridField};
use crate::numerics::smooth_step;

/// `|r|` threshold delimiting dips.
const DIP_LEVEL: f64 = 0.5;
/// `|r|` threshold that forces an interpolation interval.
const DEEP_LEVEL: f64 = 0.25;
/// Largest admissible phase increment of `q̃` between neighbouring nodes.
pub const MAX_PHASE_STEP: f64 = 0.5 * PI;

/// `r = τ² (τ² − ∂_x²)^{−1} q`, i.e. the multiplier `τ²/(ξ² + τ²)`.
pub fn regularize(q: &GridField, tau: f64) -> Result<GridField> {
    check_tau(tau)?;
    let t2 = tau * tau;
    Ok(q.apply_multiplier(|k| C64::new(t2 / (k * k + t2), 0.0)))
}

/// Interpolation interval `(a, b)` in grid indices and coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipInterval {
    pub start: usize,
    pub end: usize,
    pub a: f64,
    pub b: f64,
}

/// Regularised field, unimodular reference and the interpolation intervals.
#[derive(Debug, Clone)]
pub struct RegularizationPair {
    pub r: GridField,
    pub q_tilde: GridField,
    pub tau_used: f64,
    pub intervals: Vec<DipInterval>,
}

/// Index ranges `[i0, i1]` of the maximal components of `{|r| < 1/2}`.
fn low_components(modulus: &[f64]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut j = 0;
    while j < modulus.len() {
        if modulus[j] < DIP_LEVEL {
            let i0 = j;
            while j + 1 < modulus.len() && modulus[j + 1] < DIP_LEVEL {
                j += 1;
            }
            out.push((i0, j));
        }
        j += 1;
    }
    out
}

/// Interpolation intervals of `r` (see the module documentation).
///
/// Every component of `{|r| < 1/2}` that dips below `1/4` is extended
/// symmetrically by the least number of nodes `e > i1 − i0` that places it
/// strictly inside the inner third; components met by an outer third are
/// merged into the core and the extension is recomputed. A core or interval
/// reaching the first or last node raises [`GpxError::UnboundedDip`].
pub fn find_dip_intervals(r: &GridField) -> Result<Vec<DipInterval>> {
    let modulus: Vec<f64> = r.samples().iter().map(|v| v.norm()).collect();
    let n = modulus.len();
    let grid = *r.grid();
    let components = low_components(&modulus);
    if components.iter().any(|&(i0, i1)| i0 == 0 || i1 == n - 1) {
        return Err(GpxError::UnboundedDip("|r| < 1/2 persists to the domain boundary".into()));
    }
    let deep: Vec<(usize, usize)> = components
        .iter()
        .copied()
        .filter(|&(i0, i1)| modulus[i0..=i1].iter().any(|&m| m < DEEP_LEVEL))
        .collect();
    let mut intervals: Vec<(usize, usize)> = Vec::new();
    for (mut c0, mut c1) in deep {
        loop {
            let len = c1 - c0;
            let e = len + 1;
            if c0 < e || c1 + e > n - 1 {
                return Err(GpxError::UnboundedDip(format!(
                    "interval around [{:.3}, {:.3}] does not fit into the domain",
                    grid.x(c0),
                    grid.x(c1)
                )));
            }
            let (a, b) = (c0 - e, c1 + e);
            let third = (b - a) as f64 / 3.0;
            // absorb any low node met by an outer third and retry
            let mut grown = false;
            for j in a..=b {
                let t = (j - a) as f64;
                let outer = t <= third || t >= 2.0 * third;
                if outer && modulus[j] < DIP_LEVEL {
                    let comp = components.iter().find(|&&(i0, i1)| i0 <= j && j <= i1).copied().unwrap_or((j, j));
                    c0 = c0.min(comp.0);
                    c1 = c1.max(comp.1);
                    grown = true;
                }
            }
            if !grown {
                intervals.push((a, b));
                break;
            }
        }
    }
    // merge overlapping intervals; a merged interval is re-extended from its union core
    intervals.sort();
    let mut merged: Vec<(usize, usize)> = Vec::new();
    for iv in intervals {
        match merged.last_mut() {
            Some(last) if iv.0 <= last.1 => last.1 = last.1.max(iv.1),
            _ => merged.push(iv),
        }
    }
    for &(a, b) in &merged {
        let third = (b - a) as f64 / 3.0;
        for j in a..=b {
            let t = (j - a) as f64;
            if (t <= third || t >= 2.0 * third) && modulus[j] < DIP_LEVEL {
                return Err(GpxError::UnboundedDip(format!(
                    "merged interval [{:.3}, {:.3}] has |r| < 1/2 in an outer third",
                    grid.x(a),
                    grid.x(b)
                )));
            }
        }
    }
    Ok(merged
        .into_iter()
        .map(|(a, b)| DipInterval { start: a, end: b, a: grid.x(a), b: grid.x(b) })
        .collect())
}

/// Cutoff `φ(t)`: 0 on `(−∞, 1/3]`, 1 on `[2/3, ∞)`, monotone and smooth.
pub fn cutoff_phi(t: f64) -> f64 {
    smooth_step(3.0 * t - 1.0)
}

/// Cutoff `η(t)`: supported in `(0, 1)`, equal to 1 on `[1/3, 2/3]`.
pub fn cutoff_eta(t: f64) -> f64 {
    if t <= 0.5 {
        smooth_step(3.0 * t)
    } else {
        smooth_step(3.0 * (1.0 - t))
    }
}

/// Builds `r` and the unimodular reference `q̃` at scale `τ`.
pub fn nonvanishing_reference(q: &GridField, tau: f64) -> Result<RegularizationPair> {
    let r = regularize(q, tau)?;
    let intervals = find_dip_intervals(&r)?;
    let rs = r.samples();
    let mut qt: Vec<C64> = rs.iter().map(|v| v / v.norm()).collect();
    for iv in &intervals {
        let (a, b) = (iv.start, iv.end);
        let width = (b - a) as f64;
        let t_of = |j: usize| (j - a) as f64 / width;
        // continuous phase on the outer thirds, anchored at a and at b
        let theta_a = rs[a].arg();
        let delta = (rs[b].arg() - theta_a).rem_euclid(2.0 * PI);
        let theta_b = theta_a + delta;
        let mut theta = vec![0.0; b - a + 1];
        theta[0] = theta_a;
        let mut j = a + 1;
        while j <= b && t_of(j) <= 1.0 / 3.0 + 1e-12 {
            let step = (rs[j] / rs[j - 1]).arg();
            theta[j - a] = theta[j - 1 - a] + step;
            j += 1;
        }
        theta[b - a] = theta_b;
        let mut j = b - 1;
        while j > a && t_of(j) >= 2.0 / 3.0 - 1e-12 {
            let step = (rs[j] / rs[j + 1]).arg();
            theta[j - a] = theta[j + 1 - a] + step;
            j -= 1;
        }
        let (rho_a, rho_b) = (rs[a].norm(), rs[b].norm());
        for j in a..=b {
            let t = t_of(j);
            let eta = cutoff_eta(t);
            let phi = cutoff_phi(t);
            let rho = rs[j].norm();
            // η = 1 on the inner third, so the (undefined) inner polar data never enter
            let (rho_in, theta_in) = if eta < 1.0 { (rho, theta[j - a]) } else { (0.0, 0.0) };
            let modulus = (1.0 - eta) * rho_in + eta * (rho_a + phi * (rho_b - rho_a));
            let phase = (1.0 - eta) * theta_in + eta * (theta_a + phi * (theta_b - theta_a));
            let v = C64::from_polar(modulus, phase);
            qt[j] = v / v.norm();
        }
    }
    let q_tilde = r.with_samples(qt);
    check_phase_resolution(&q_tilde)?;
    Ok(RegularizationPair { r, q_tilde, tau_used: tau, intervals })
}

/// Principal phase increments `arg(q̃_{j+1}/q̃_j)` around the ring, the last
/// one closing through the twisted continuation `q̃_N = e^{iθ} q̃_0`.
pub fn phase_increments(q_tilde: &GridField) -> Vec<f64> {
    let s = q_tilde.samples();
    let n = s.len();
    let wrap = s[0] * C64::from_polar(1.0, q_tilde.twist());
    (0..n)
        .map(|j| {
            let next = if j + 1 < n { s[j + 1] } else { wrap };
            (next / s[j]).arg()
        })
        .collect()
}

fn check_phase_resolution(q_tilde: &GridField) -> Result<()> {
    let worst = phase_increments(q_tilde).iter().map(|d| d.abs()).fold(0.0, f64::max);
    if worst > MAX_PHASE_STEP {
        return Err(GpxError::UnresolvedPhase(format!(
            "phase of q̃ changes by {worst:.3} rad between neighbouring nodes (limit {MAX_PHASE_STEP:.3})"
        )));
    }
    Ok(())
}

/// Constants against which the three regularity estimates are checked.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularityConstants {
    /// Two-sided constant of the `‖q − r‖ + τ^{−1}‖r′‖ ∼ ‖q′‖_{W^{−1,p}}` equivalence.
    pub c_equivalence: f64,
    /// Constant of the `L^∞` bound.
    pub c_sup: f64,
    /// Constant of the `‖|r|² − 1‖_{L^p}` bound.
    pub c_density: f64,
}

impl Default for RegularityConstants {
    /// Fitted once over the soliton family `c ∈ {0, 0.5, 0.9}`, `τ ∈ {2, 4, 8}`
    /// and Gaussian bumps, with a safety factor of two.
    fn default() -> Self {
        RegularityConstants { c_equivalence: 4.0, c_sup: 1.0, c_density: 2.0 }
    }
}

/// Measured sides and ratios of the three regularity estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub tau: f64,
    pub p: f64,
    /// `‖q − r‖_{L^p} + τ^{−1}‖r′‖_{L^p}`.
    pub lhs_equivalence: f64,
    /// `‖q′‖_{W^{−1,p}_τ}`.
    pub w_norm_derivative: f64,
    /// `lhs / ‖q′‖_W` (upper line); `0` when both vanish.
    pub ratio_upper: f64,
    /// `‖q′‖_W / lhs` (lower line); `0` when both vanish.
    pub ratio_lower: f64,
    /// `‖r‖_{L^∞} / (τ(1 + τ^{−1/2} E⁰_τ))`.
    pub ratio_sup: f64,
    /// `‖|r|²−1‖_{L^p} / (τ(1 + τ^{−1/2}E⁰_τ) ‖(|q|²−1, q′)‖_{W^{−1,p}_τ})`.
    pub ratio_density: f64,
    pub passed: bool,
}

fn lp_norm(grid_dx: f64, values: impl Iterator<Item = f64>, p: f64) -> f64 {
    (values.map(|v| v.abs().powf(p)).sum::<f64>() * grid_dx).powf(1.0 / p)
}

fn safe_ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 && den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Evaluates both sides of the three regularity estimates for `r = τ²D_τ^{−2}q`.
pub fn verify_regularity_bounds(
    q: &GridField,
    tau: f64,
    p: f64,
    constants: RegularityConstants,
) -> Result<RegularityReport> {
    check_tau(tau)?;
    if !(p >= 2.0 && p.is_finite()) {
        return Err(GpxError::Domain(format!("exponent p must lie in [2, ∞), got {p}")));
    }
    let r = regularize(q, tau)?;
    let dx = q.grid().dx();
    let diff = lp_norm(dx, q.samples().iter().zip(r.samples()).map(|(a, b)| (a - b).norm()), p);
    let dr = lp_norm(dx, r.derivative().samples().iter().map(|v| v.norm()), p);
    let lhs = diff + dr / tau;
    let dq = q.derivative();
    let w_dq = w_minus1_p_norm(&dq, tau, p)?;
    let ratio_upper = safe_ratio(lhs, w_dq);
    let ratio_lower = safe_ratio(w_dq, lhs);

    let e0 = e_s_tau(q, 0.0, tau)?;
    let scale = tau * (1.0 + e0 / tau.sqrt());
    let sup = r.samples().iter().map(|v| v.norm()).fold(0.0, f64::max);
    let ratio_sup = sup / scale;

    let density = lp_norm(dx, r.samples().iter().map(|v| v.norm_sqr() - 1.0), p);
    let m = GridField::new(*q.grid(), q.density_deviation().iter().map(|v| C64::new(*v, 0.0)).collect(), 0.0)?;
    let w_pair = w_minus1_p_norm(&m, tau, p)?.hypot(w_dq);
    let ratio_density = safe_ratio(density, scale * w_pair);

    let passed = ratio_upper <= constants.c_equivalence
        && ratio_lower <= constants.c_equivalence
        && ratio_sup <= constants.c_sup
        && ratio_density <= constants.c_density;
    Ok(RegularityReport {
        tau,
        p,
        lhs_equivalence: lhs,
        w_norm_derivative: w_dq,
        ratio_upper,
        ratio_lower,
        ratio_sup,
        ratio_density,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{apply_fractional, Grid, SobolevWeight};
    use crate::profiles::Profile;

    #[test]
    fn constant_background_is_fixed() {
        let g = Grid::new(10.0, 128).unwrap();
        let q = GridField::constant(g, C64::new(1.0, 0.0));
        let pair = nonvanishing_reference(&q, 2.0).unwrap();
        for (a, b) in pair.r.samples().iter().zip(pair.q_tilde.samples()) {
            assert!((a - 1.0).norm() < 1e-15 && (b - 1.0).norm() < 1e-15);
        }
        assert!(pair.intervals.is_empty());
        assert!(regularize(&q, 1.0).is_err());
    }

    #[test]
    fn regularization_is_the_fractional_multiplier() {
        let g = Grid::new(20.0, 512).unwrap();
        let q = Profile::Soliton { c: 0.3 }.sample(g, 0.0).unwrap();
        let tau = 3.0;
        let r = regularize(&q, tau).unwrap();
        let f = apply_fractional(&q, SobolevWeight::new(-2.0, tau).unwrap()).unwrap();
        for (a, b) in r.samples().iter().zip(f.samples()) {
            assert!((a - b * tau * tau).norm() < 1e-12);
        }
    }

    #[test]
    fn single_mode_regularization() {
        let g = Grid::new(5.0, 64).unwrap();
        let xi = g.dxi();
        let q = GridField::from_fn(g, 0.0, |x| C64::from_polar(1.0, xi * x)).unwrap();
        let tau = 2.0;
        let r = regularize(&q, tau).unwrap();
        let factor = tau * tau / (xi * xi + tau * tau);
        for (a, b) in q.samples().iter().zip(r.samples()) {
            assert!((a * factor - b).norm() < 1e-13);
        }
    }

    #[test]
    fn black_soliton_has_one_interval_with_phase_jump_pi() {
        let g = Grid::new(30.0, 2048).unwrap();
        let q = Profile::Soliton { c: 0.0 }.sample(g, 0.0).unwrap();
        let pair = nonvanishing_reference(&q, 4.0).unwrap();
        assert_eq!(pair.intervals.len(), 1);
        let iv = pair.intervals[0];
        assert!(iv.a < 0.0 && iv.b > 0.0);
        assert!(pair.q_tilde.samples().iter().all(|v| (v.norm() - 1.0).abs() < 1e-12));
        let jump: f64 = phase_increments(&pair.q_tilde)[iv.start..iv.end].iter().sum();
        assert!((jump - PI).abs() < 1e-12, "{jump}");
    }

    #[test]
    fn two_separated_dips_give_two_intervals() {
        let g = Grid::new(40.0, 2048).unwrap();
        let q = Profile::SolitonPair { c1: 0.0, c2: 0.1, separation: 20.0 }.sample(g, 0.0).unwrap();
        let r = regularize(&q, 4.0).unwrap();
        let iv = find_dip_intervals(&r).unwrap();
        assert_eq!(iv.len(), 2);
        assert!(iv[0].b < iv[1].a);
        assert!(iv[0].a < -10.0 && iv[0].b > -10.0);
        assert!(iv[1].a < 10.0 && iv[1].b > 10.0);
    }

    #[test]
    fn shallow_field_has_no_intervals_and_q_tilde_is_r_over_modulus() {
        let g = Grid::new(20.0, 512).unwrap();
        let q = Profile::Soliton { c: 0.5 }.sample(g, 0.0).unwrap();
        let pair = nonvanishing_reference(&q, 2.0).unwrap();
        assert!(pair.intervals.is_empty());
        for (r, t) in pair.r.samples().iter().zip(pair.q_tilde.samples()) {
            assert!((r / r.norm() - t).norm() < 1e-15);
        }
    }

    #[test]
    fn dip_touching_boundary_is_rejected() {
        let g = Grid::new(10.0, 256).unwrap();
        let q = GridField::from_fn(g, 0.0, |x| C64::new(0.1 + 0.0 * x, 0.0)).unwrap();
        assert!(matches!(find_dip_intervals(&q), Err(GpxError::UnboundedDip(_))));
    }

    #[test]
    fn cutoffs_have_the_required_shape() {
        assert_eq!(cutoff_phi(0.2), 0.0);
        assert_eq!(cutoff_phi(0.8), 1.0);
        assert_eq!(cutoff_eta(0.0), 0.0);
        assert_eq!(cutoff_eta(1.0), 0.0);
        assert_eq!(cutoff_eta(0.5), 1.0);
        assert_eq!(cutoff_eta(0.34), 1.0);
        let mut prev = 0.0;
        for k in 0..=100 {
            let v = cutoff_phi(k as f64 / 100.0);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn single_mode_equivalence_line_is_exact() {
        // For q = e^{iξx}: ‖q−r‖ + τ^{−1}‖r′‖ = (ξ² + ξτ)/(ξ² + τ²) · (2L)^{1/p}, and
        // the trapezoid sweep of e^{iξy} e^{−τ(y−x)} has the closed form
        // (dx/2)(1 + w)/(1 − w), w = e^{(iξ−τ)dx}, times e^{iξx}.
        let g = Grid::new(4.0, 64).unwrap();
        let xi = 3.0 * g.dxi();
        let tau = 2.0;
        let p = 2.0;
        let q = GridField::from_fn(g, 0.0, |x| C64::from_polar(1.0, xi * x)).unwrap();
        let rep = verify_regularity_bounds(&q, tau, p, RegularityConstants::default()).unwrap();
        let len = (2.0 * g.half_length()).powf(1.0 / p);
        let lhs = (xi * xi + xi * tau) / (xi * xi + tau * tau) * len;
        let w = C64::new(-tau * g.dx(), xi * g.dx()).exp();
        let conv = (0.5 * g.dx() * (1.0 + w) / (1.0 - w)).norm() * xi * len;
        assert!((rep.lhs_equivalence - lhs).abs() <= 1e-10 * lhs);
        assert!((rep.ratio_upper - lhs / conv).abs() <= 1e-10 * lhs / conv);
    }
}
