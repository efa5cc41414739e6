//! Zakharov–Shabat scattering for fields with unimodular asymptotes.
//!
//! The Lax system `u′ = [[−iλ, q], [q̄, iλ]] u` is solved in two independent
//! ways:
//!
//! * **direct**: the growth-normalised variable `U = e^{izx}u` is integrated
//!   from `−L` to `L` with a fourth-order Magnus scheme (Gauss nodes, values of
//!   `q` between grid nodes by trigonometric interpolation), step halving and
//!   Richardson extrapolation. The left data is the Jost asymptote
//!   `(1, iηe^{−iα₋})`, and `T⁻¹` is the coefficient of the transmitted
//!   asymptote `(1, iηe^{−iα₊})` at `L`.
//! * **renormalised**: the system is diagonalised with the regularisation
//!   `r = τ²D_τ^{−2}q`; the resulting `w`-system is solved by the Picard series
//!   `Σ T_{2n}` (each term one exponential-kernel sweep), optionally split into
//!   exterior Picard regions and a central direct region. Multiplying by
//!   `e^Φ` gives the renormalised coefficient `T_c⁻¹`.
//!
//! Throughout, `z = √(λ²−1)` with `Im z > 0`, `ζ = λ + z`, `η = λ − z = 1/ζ`
//! and `α₋ = arg q(−L)`, `α₊ = α₋ + θ` with `θ` the twist of the field.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::conserved::{winding_theta, Angle};
use crate::error::{GpxError, Result};
use crate::grid::{e_s_tau, GridField};
use crate::numerics::{cumulative, cumulative_exp, expm2, ln_1p, mat2_mul, mat2_vec};
use crate::regularize::nonvanishing_reference;

const I: C64 = C64::new(0.0, 1.0);
const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Smallest admissible `Im z`; closer to the cut the problem is ill-conditioned.
pub const CUT_TOLERANCE: f64 = 1e-6;
/// Relative change below which step halving of the direct solver stops.
pub const STEP_TOLERANCE: f64 = 1e-9;
/// Finest Magnus level (`2^level` substeps per grid cell).
const MAX_LEVEL: u32 = 7;
/// Default number of Picard terms returned by [`picard_terms`].
pub const DEFAULT_N_MAX: usize = 8;
/// Relative size of a Picard term below which the series is truncated.
pub const SERIES_TOLERANCE: f64 = 1e-14;
/// Default smallness level used for the multi-region split and for `τ_reg`.
pub const DEFAULT_DELTA0: f64 = 0.05;
/// Lower bound on the measured denominator constant of the coefficient set.
const KAPPA_MIN: f64 = 1e-8;
/// Largest regularisation scale tried by the small-`τ` rule.
const TAU_REG_MAX: f64 = 256.0;

/// Spectral parameter on the sheet `Im z > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralParams {
    pub lambda: C64,
    pub z: C64,
    pub zeta: C64,
    /// `η = λ − z = 1/ζ`.
    pub eta: C64,
    /// `τ = 2 Im z`.
    pub tau: f64,
}

/// Half-plane variant of the diagonalisation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// `Im λ ≥ 0`, diagonaliser `[[−iζ, r], [r̄, iζ]]`.
    Plus,
    /// `Im λ < 0`, diagonaliser `[[−iη, r], [r̄, iη]]`.
    Minus,
}

impl SpectralParams {
    /// Variant selected by the sign of `Im λ`.
    pub fn variant(&self) -> Variant {
        if self.lambda.im >= 0.0 {
            Variant::Plus
        } else {
            Variant::Minus
        }
    }
}

/// `z = √(λ²−1)` with `Im z > 0`, `ζ = λ + z`, `η = 1/ζ`.
///
/// `ζ` and `η` are formed from whichever of `λ ± z` is larger in modulus, so
/// `ζη = 1` holds to rounding even when one of them is tiny.
pub fn make_params(lambda: C64) -> Result<SpectralParams> {
    if !(lambda.re.is_finite() && lambda.im.is_finite()) {
        return Err(GpxError::InvalidInput(format!("non-finite spectral parameter {lambda}")));
    }
    let mut z = (lambda * lambda - 1.0).sqrt();
    if z.im < 0.0 {
        z = -z;
    }
    if z.im < CUT_TOLERANCE {
        return Err(GpxError::Branch(format!(
            "λ = {lambda} lies on or next to the cut (−∞,−1] ∪ [1,∞) (Im z = {:.2e})",
            z.im
        )));
    }
    let (plus, minus) = (lambda + z, lambda - z);
    let (zeta, eta) = if plus.norm() >= minus.norm() { (plus, 1.0 / plus) } else { (1.0 / minus, minus) };
    Ok(SpectralParams { lambda, z, zeta, eta, tau: 2.0 * z.im })
}

/// Samples extended by the twisted continuation `f(L) = e^{iθ} f(−L)`, so
/// that cumulative sweeps cover the full interval `[−L, L]`.
fn extended(f: &GridField) -> Vec<C64> {
    let mut v = f.samples().to_vec();
    v.push(f.samples()[0] * C64::from_polar(1.0, f.twist()));
    v
}

fn check_compatible(a: &GridField, b: &GridField, what: &str) -> Result<()> {
    if a.grid() != b.grid() || (a.twist() - b.twist()).abs() > 1e-12 {
        return Err(GpxError::InvalidInput(format!("{what}: fields live on different grids or twists")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Diagonalised coefficients
// ---------------------------------------------------------------------------

/// Coefficients `q₁ … q₄` of the diagonalised system.
///
/// Plus variant: `w₁′ = q₂w₂`, `w₂′ = (2iz + q₄)w₂ + q₃w₁`.
/// Minus variant: `w₁′ = (2iz + q₄)w₁ + q₂w₂`, `w₂′ = q₃w₁`.
/// In both cases `q₁` is the scalar factor removed by `e^{∫q₁}`.
#[derive(Debug, Clone)]
pub struct CoefficientSet {
    pub q1: GridField,
    pub q2: GridField,
    pub q3: GridField,
    pub q4: GridField,
    pub variant: Variant,
    /// Measured `min_j ||r|² − w²| / (|w|² + |r|²)` with `w = ζ` (plus) or `η` (minus).
    pub kappa: f64,
}

/// Coefficients of the diagonalised system for the pair `(q, r)`.
pub fn coefficients(q: &GridField, r: &GridField, params: &SpectralParams) -> Result<CoefficientSet> {
    check_compatible(q, r, "coefficients")?;
    let dr = r.derivative();
    let variant = params.variant();
    let w = match variant {
        Variant::Plus => params.zeta,
        Variant::Minus => params.eta,
    };
    let n = q.samples().len();
    let (mut c1, mut c2, mut c3, mut c4) =
        (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    let mut kappa = f64::INFINITY;
    for j in 0..n {
        let (qj, rj, drj) = (q.samples()[j], r.samples()[j], dr.samples()[j]);
        let rr = rj.norm_sqr();
        let d = rr - w * w;
        kappa = kappa.min(d.norm() / (w.norm_sqr() + rr));
        let dev = qj - rj;
        let f = rr - 1.0 + 2.0 * (rj.conj() * dev).re;
        let im_rdr = (rj * drj.conj()).im;
        let b2 = (rj * f + I * w * drj) / d - dev;
        let b3 = (rj.conj() * f - I * w * drj.conj()) / d - dev.conj();
        let (b1, b4) = match variant {
            Variant::Plus => ((I * w * f - rj.conj() * drj) / d, (2.0 * I * w * f + 2.0 * I * im_rdr) / d),
            Variant::Minus => ((-I * w * f - rj * drj.conj()) / d, (-2.0 * I * w * f - 2.0 * I * im_rdr) / d),
        };
        c1.push(b1);
        c2.push(b2);
        c3.push(b3);
        c4.push(b4);
    }
    if !(kappa >= KAPPA_MIN) {
        return Err(GpxError::SingularCoefficient(format!(
            "min ||r|² − w²|/(|w|² + |r|²) = {kappa:.2e} at λ = {}",
            params.lambda
        )));
    }
    let (g, th) = (*q.grid(), q.twist());
    Ok(CoefficientSet {
        q1: GridField::new(g, c1, 0.0)?,
        q2: GridField::new(g, c2, th)?,
        q3: GridField::new(g, c3, -th)?,
        q4: GridField::new(g, c4, 0.0)?,
        variant,
        kappa,
    })
}

/// Coefficient arrays on the `N + 1` nodes `x_0 … x_N = L`.
struct ExtendedCoefficients {
    q1: Vec<C64>,
    q2: Vec<C64>,
    q3: Vec<C64>,
    q4: Vec<C64>,
    variant: Variant,
}

impl ExtendedCoefficients {
    fn new(c: &CoefficientSet) -> Self {
        ExtendedCoefficients {
            q1: extended(&c.q1),
            q2: extended(&c.q2),
            q3: extended(&c.q3),
            q4: extended(&c.q4),
            variant: c.variant,
        }
    }

    /// `(α, β, γ)` of the generic system `f′ = αg`, `g′ = (2iz + β)g + γf`,
    /// where `f` is the non-oscillating component.
    fn generic(&self) -> (&[C64], &[C64], &[C64]) {
        match self.variant {
            Variant::Plus => (&self.q2, &self.q4, &self.q3),
            Variant::Minus => (&self.q3, &self.q4, &self.q2),
        }
    }

    /// `e^{‖q₄‖²/(4 Im z)} ‖q₂‖‖q₃‖ / Im z` over the nodes `a..=b`.
    fn smallness(&self, a: usize, b: usize, dx: f64, im_z: f64) -> f64 {
        let norm = |v: &[C64]| (v[a..=b].iter().map(|c| c.norm_sqr()).sum::<f64>() * dx).sqrt();
        let n4 = norm(&self.q4);
        (n4 * n4 / (4.0 * im_z)).exp() * norm(&self.q2) * norm(&self.q3) / im_z
    }
}

// ---------------------------------------------------------------------------
// Picard series
// ---------------------------------------------------------------------------

/// Result of one Picard solve of the generic system on a node range.
struct SweepOutcome {
    /// `f_n` at the right end for `n = 0, 1, …`.
    terms: Vec<C64>,
    /// `Σ_n f_n` and `Σ_n g_n` at the right end.
    flat: C64,
    osc: C64,
    /// Modulus of the last computed term relative to the sum.
    tail: f64,
}

/// Picard iteration for `f′ = αg`, `g′ = (μ + β)g + γf` on the given nodes
/// with data `(f_s, g_s)` at the first node:
/// `g₀ = e^{μ(x−x_s)+Q}g_s`, `f₀ = f_s + ∫αg₀`,
/// `g_n = e^{Q} ∫ e^{μ(x−y)−Q(y)} γ f_{n−1} dy`, `f_n = ∫ α g_n`, `Q = ∫β`.
#[allow(clippy::too_many_arguments)]
fn picard_sweep(
    alpha: &[C64],
    beta: &[C64],
    gamma: &[C64],
    h: f64,
    mu: C64,
    f_s: C64,
    g_s: C64,
    n_max: usize,
) -> SweepOutcome {
    let n = alpha.len();
    let q = cumulative(beta, h);
    let eq: Vec<C64> = q.iter().map(|v| v.exp()).collect();
    let g0: Vec<C64> = (0..n).map(|j| (mu * (j as f64 * h) + q[j]).exp() * g_s).collect();
    let ag: Vec<C64> = alpha.iter().zip(&g0).map(|(a, g)| a * g).collect();
    let mut f: Vec<C64> = cumulative(&ag, h).into_iter().map(|v| v + f_s).collect();
    let mut terms = vec![f[n - 1]];
    let (mut flat, mut osc) = (f[n - 1], g0[n - 1]);
    let mut tail = 0.0;
    for _ in 0..n_max {
        let src: Vec<C64> = (0..n).map(|j| gamma[j] * f[j] / eq[j]).collect();
        let g: Vec<C64> = cumulative_exp(&src, h, mu).iter().zip(&eq).map(|(v, e)| v * e).collect();
        let ag: Vec<C64> = alpha.iter().zip(&g).map(|(a, g)| a * g).collect();
        f = cumulative(&ag, h);
        let term = f[n - 1];
        terms.push(term);
        flat += term;
        osc += g[n - 1];
        tail = term.norm() / flat.norm().max(f64::MIN_POSITIVE);
        if term.norm() <= SERIES_TOLERANCE * flat.norm() {
            break;
        }
    }
    SweepOutcome { terms, flat, osc, tail }
}

/// `T₀ = 1` and the Picard terms `T_{2n}`, `n = 1 … n_max` (fewer if the
/// series has converged to `SERIES_TOLERANCE`).
///
/// Fails with a regime error when the measured ratio
/// `ρ = e^{‖q₄‖²/(4 Im z)}‖q₂‖‖q₃‖/Im z` is not below one; use
/// [`renormalized_transmission`], which then switches to the multi-region solve.
pub fn picard_terms(coeffs: &CoefficientSet, params: &SpectralParams, n_max: usize) -> Result<Vec<C64>> {
    let ext = ExtendedCoefficients::new(coeffs);
    let dx = coeffs.q1.grid().dx();
    let last = ext.q1.len() - 1;
    let rho = ext.smallness(0, last, dx, params.z.im);
    if rho >= 1.0 {
        return Err(GpxError::Regime(format!(
            "Picard smallness ratio {rho:.3} ≥ 1 at λ = {}; use the multi-region solve",
            params.lambda
        )));
    }
    let (a, b, g) = ext.generic();
    Ok(picard_sweep(a, b, g, dx, 2.0 * I * params.z, ONE, ZERO, n_max).terms)
}

/// The measured Picard ratio `ρ` of a coefficient set over the whole domain.
pub fn picard_ratio(coeffs: &CoefficientSet, params: &SpectralParams) -> f64 {
    let ext = ExtendedCoefficients::new(coeffs);
    ext.smallness(0, ext.q1.len() - 1, coeffs.q1.grid().dx(), params.z.im)
}

// ---------------------------------------------------------------------------
// Direct Magnus solve
// ---------------------------------------------------------------------------

/// Trigonometric interpolation of `q` at arbitrary offsets from the nodes.
struct Interpolant {
    field: GridField,
    spec: Vec<C64>,
    kappa: Vec<f64>,
}

impl Interpolant {
    fn new(q: &GridField) -> Self {
        Interpolant { field: q.clone(), spec: q.spectrum(), kappa: q.wavenumbers() }
    }

    fn shifted(&self, delta: f64) -> Vec<C64> {
        let s: Vec<C64> = self.spec.iter().zip(&self.kappa).map(|(v, k)| v * C64::from_polar(1.0, k * delta)).collect();
        GridField::from_spectrum(*self.field.grid(), self.field.twist(), &s)
            .expect("interpolation of finite samples is finite")
            .samples()
            .to_vec()
    }
}

/// One Magnus sweep of `U′ = [[−iλ + iz, q], [q̄, iλ + iz]] U` over the cells
/// `j0 .. j1` with `2^level` substeps per cell.
fn magnus_propagate(
    interp: &Interpolant,
    p: &SpectralParams,
    j0: usize,
    j1: usize,
    u0: [C64; 2],
    level: u32,
) -> [C64; 2] {
    let sub = 1usize << level;
    let h = interp.field.grid().dx() / sub as f64;
    let c = [0.5 - 3f64.sqrt() / 6.0, 0.5 + 3f64.sqrt() / 6.0];
    let nodes: Vec<[Vec<C64>; 2]> = (0..sub)
        .map(|k| [interp.shifted((k as f64 + c[0]) * h), interp.shifted((k as f64 + c[1]) * h)])
        .collect();
    let d0 = -I * p.lambda + I * p.z;
    let d1 = I * p.lambda + I * p.z;
    let comm_scale = 3f64.sqrt() / 12.0 * h * h;
    let mut u = u0;
    for j in j0..j1 {
        for node in &nodes {
            let (qa, qb) = (node[0][j], node[1][j]);
            let b1 = [[d0, qa], [qa.conj(), d1]];
            let b2 = [[d0, qb], [qb.conj(), d1]];
            let p21 = mat2_mul(b2, b1);
            let p12 = mat2_mul(b1, b2);
            let mut omega = [[ZERO; 2]; 2];
            for a in 0..2 {
                for b in 0..2 {
                    omega[a][b] = 0.5 * h * (b1[a][b] + b2[a][b]) + comm_scale * (p21[a][b] - p12[a][b]);
                }
            }
            u = mat2_vec(expm2(omega), u);
        }
    }
    u
}

/// Magnus solve with step halving until the relative change is at most
/// [`STEP_TOLERANCE`], followed by one Richardson extrapolation.
/// Returns the state, the last relative change and the level reached.
fn magnus_refined(
    interp: &Interpolant,
    p: &SpectralParams,
    j0: usize,
    j1: usize,
    u0: [C64; 2],
) -> Result<([C64; 2], f64, u32)> {
    let mut prev: Option<[C64; 2]> = None;
    let mut change = f64::INFINITY;
    for level in 0..=MAX_LEVEL {
        let u = magnus_propagate(interp, p, j0, j1, u0, level);
        if let Some(pv) = prev {
            let scale = (u[0].norm() + u[1].norm()).max(1.0);
            change = ((u[0] - pv[0]).norm() + (u[1] - pv[1]).norm()) / scale;
            if change <= STEP_TOLERANCE {
                let rich = [u[0] + (u[0] - pv[0]) / 15.0, u[1] + (u[1] - pv[1]) / 15.0];
                return Ok((rich, change, level));
            }
        }
        prev = Some(u);
    }
    Err(GpxError::Integrator(format!(
        "Magnus step halving stalled at relative change {change:.2e} (level {MAX_LEVEL}, λ = {})",
        p.lambda
    )))
}

/// Direct solution of the Lax system with diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectSolution {
    /// `T⁻¹(λ)`.
    pub t_inv: C64,
    /// Relative change at the last step halving.
    pub step_refine: f64,
    /// Deviation of `q` from its constant asymptotes at `±L`.
    pub boundary: f64,
    /// Magnus level reached (`2^level` substeps per cell).
    pub level: u32,
}

/// `T⁻¹(λ)` from the direct Magnus solve, with diagnostics.
pub fn jost_direct(q: &GridField, params: &SpectralParams) -> Result<DirectSolution> {
    let n = q.samples().len();
    let alpha_minus = q.samples()[0].arg();
    let alpha_plus = alpha_minus + q.twist();
    let u0 = [ONE, I * params.eta * C64::from_polar(1.0, -alpha_minus)];
    let interp = Interpolant::new(q);
    let (u, step_refine, level) = magnus_refined(&interp, params, 0, n, u0)?;
    let e_plus = C64::from_polar(1.0, -alpha_plus);
    let t_inv = (u[1] - I * params.zeta * e_plus * u[0]) / (-2.0 * I * params.z * e_plus);
    Ok(DirectSolution { t_inv, step_refine, boundary: q.boundary_residual(), level })
}

/// `T⁻¹(λ)` by direct integration of the Lax system.
pub fn jost_transmission_direct(q: &GridField, lambda: C64) -> Result<C64> {
    let p = make_params(lambda)?;
    Ok(jost_direct(q, &p)?.t_inv)
}

// ---------------------------------------------------------------------------
// Φ and the A + B decomposition
// ---------------------------------------------------------------------------

/// `Φ(λ)` with its branch bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiCorrection {
    /// Value on the canonical branch (`Θ` reduced to `[0, 2π)`).
    pub value: C64,
    /// Value with the natural (unreduced) `Θ` of the reference field.
    pub natural: C64,
    /// Branch integer `k` of `Θ_natural = Θ_canonical + 2πk`.
    pub branch: i64,
    /// `Θ` on the canonical branch.
    pub theta: f64,
}

/// `Im ∫((r̄ − q̃̄)r′ − q̃̄′(r − q̃) + (q̃′/q̃)(|q̃|² − 1)) dx`, the regularised
/// form of `Im ∫(r̄r′ − q̃′/q̃)`.
pub(crate) fn regularized_phase_integral(r: &GridField, q_tilde: &GridField) -> f64 {
    let dr = r.derivative();
    let dqt = q_tilde.derivative();
    let s: C64 = (0..r.samples().len())
        .map(|j| {
            let (rj, tj) = (r.samples()[j], q_tilde.samples()[j]);
            let (drj, dtj) = (dr.samples()[j], dqt.samples()[j]);
            (rj - tj).conj() * drj - dtj.conj() * (rj - tj) + dtj / tj * (tj.norm_sqr() - 1.0)
        })
        .sum();
    s.im * r.grid().dx()
}

/// `Φ(λ)` from the regularised (`q̃`) form:
///
/// plus (`Im λ ≥ 0`):
/// `−(i/2z)∫(|q|²−1)(|r|²−1)/(|r|²−ζ²) + iζ∫|q−r|²/(|r|²−ζ²) − (i/2zζ)I + (1/2zζ)∫(|r|²−1)r̄r′/(|r|²−ζ²)`;
///
/// minus (`Im λ < 0`), the continuation of the same primitive
/// `−∫q₁ − iM/2z − iζΘ/2z`:
/// `−(i/2z)∫(|q|²−1)(|r|²−1)/(|r|²−η²) − iη∫|q−r|²/(|r|²−η²) − (iζ/2z)I − (ζ/2z)∫(|r|²−1)r r̄′/(|r|²−η²)`,
///
/// with `I` the regularised phase integral. The canonical branch reduces the
/// `Θ` implied by `q̃` to `[0, 2π)`.
pub fn phi_correction(
    q: &GridField,
    r: &GridField,
    q_tilde: &GridField,
    params: &SpectralParams,
) -> Result<PhiCorrection> {
    check_compatible(q, r, "phi_correction")?;
    check_compatible(q, q_tilde, "phi_correction")?;
    let dr = r.derivative();
    let (z, zeta, eta) = (params.z, params.zeta, params.eta);
    let variant = params.variant();
    let w = match variant {
        Variant::Plus => zeta,
        Variant::Minus => eta,
    };
    let (mut s1, mut s2, mut s4) = (ZERO, ZERO, ZERO);
    for j in 0..q.samples().len() {
        let (qj, rj, drj) = (q.samples()[j], r.samples()[j], dr.samples()[j]);
        let rr = rj.norm_sqr();
        let d = rr - w * w;
        s1 += (qj.norm_sqr() - 1.0) * (rr - 1.0) / d;
        s2 += (qj - rj).norm_sqr() / d;
        s4 += match variant {
            Variant::Plus => (rr - 1.0) * rj.conj() * drj / d,
            Variant::Minus => (rr - 1.0) * rj * drj.conj() / d,
        };
    }
    let dx = q.grid().dx();
    let (s1, s2, s4) = (s1 * dx, s2 * dx, s4 * dx);
    let reg = regularized_phase_integral(r, q_tilde);
    let natural = match variant {
        Variant::Plus => {
            -I / (2.0 * z) * s1 + I * zeta * s2 - I / (2.0 * z * zeta) * reg + s4 / (2.0 * z * zeta)
        }
        Variant::Minus => -I / (2.0 * z) * s1 - I * eta * s2 - I * zeta / (2.0 * z) * reg - zeta / (2.0 * z) * s4,
    };
    let theta = Angle::from_natural(winding_theta(q_tilde));
    let k = theta.branch as f64;
    let shift = match variant {
        Variant::Plus => I / (2.0 * z * zeta) * (2.0 * PI * k),
        Variant::Minus => I * zeta / (2.0 * z) * (2.0 * PI * k),
    };
    Ok(PhiCorrection { value: natural + shift, natural, branch: theta.branch, theta: theta.value })
}

/// `Φ` from its primitive definition `−∫q₁ − (i/2z)M − (i/2zζ)Θ` (plus) or
/// `−∫q₁ − (i/2z)M − (iζ/2z)Θ` (minus), with `Θ` reduced to `[0, 2π)`.
/// Used to cross-check [`phi_correction`].
pub fn phi_primitive(q: &GridField, coeffs: &CoefficientSet, theta: f64, params: &SpectralParams) -> C64 {
    let int_q1 = cumulative(&extended(&coeffs.q1), q.grid().dx())[q.samples().len()];
    let mass = crate::conserved::mass(q);
    let (z, zeta) = (params.z, params.zeta);
    let theta_term = match coeffs.variant {
        Variant::Plus => I / (2.0 * z * zeta) * theta,
        Variant::Minus => I * zeta / (2.0 * z) * theta,
    };
    -int_q1 - I / (2.0 * z) * mass - theta_term
}

/// `∫_{x<y} e^{2iz(y−x)} f(x) g(y) dx dy` by one exponential sweep.
pub(crate) fn double_integral(f: &[C64], g: &[C64], h: f64, mu: C64) -> C64 {
    let inner = cumulative_exp(f, h, mu);
    let n = f.len() - 1;
    (0..n).map(|j| g[j] * inner[j]).sum::<C64>() * h
}

/// `A(λ)` and `B(λ)` in real space (`Im λ ≥ 0`):
///
/// `A = (i/4z²)∫Im(q q̄′ − r r̄′) + (1/4z²)∫∫_{x<y} e^{2iz(y−x)}(q̄′(x)q′(y) + m(x)m(y))`,
///
/// `B = −(i/2zζ)I − (i/4z²ζ²)∫(|r|²−1)Im(r̄r′)
///   + (1/4z²ζ)∫∫(m(x)Im[r r̄′](y) + Im[r r̄′](x)m(y))
///   + (i/2zζ)∫∫(m(x)Im[r̄(q−r)](y) + Im[r(q−r)‾](x)m(y))`,
///
/// where `m = |q|² − 1` and `I` is the regularised phase integral.
pub fn ab_decomposition(
    q: &GridField,
    r: &GridField,
    q_tilde: &GridField,
    params: &SpectralParams,
) -> Result<(C64, C64)> {
    if params.variant() != Variant::Plus {
        return Err(GpxError::Domain("the A + B decomposition is defined for Im λ ≥ 0".into()));
    }
    check_compatible(q, r, "ab_decomposition")?;
    check_compatible(q, q_tilde, "ab_decomposition")?;
    let g = q.grid();
    let (h, n) = (g.dx(), q.samples().len());
    let (z, zeta) = (params.z, params.zeta);
    let mu = 2.0 * I * z;
    let dq = q.derivative();
    let dr = r.derivative();
    let dq_ext = extended(&dq);
    let dq_bar: Vec<C64> = dq_ext.iter().map(|v| v.conj()).collect();
    let real_ext = |f: &dyn Fn(usize) -> f64| -> Vec<C64> {
        let mut v: Vec<C64> = (0..n).map(|j| C64::new(f(j), 0.0)).collect();
        v.push(v[0]);
        v
    };
    let (qs, rs, drs, dqs) = (q.samples(), r.samples(), dr.samples(), dq.samples());
    let m = real_ext(&|j| qs[j].norm_sqr() - 1.0);
    let im_rdr = real_ext(&|j| (rs[j] * drs[j].conj()).im);
    let im_rdev = real_ext(&|j| (rs[j].conj() * (qs[j] - rs[j])).im);
    let im_rdev_c = real_ext(&|j| (rs[j] * (qs[j] - rs[j]).conj()).im);

    let a_local: f64 = (0..n).map(|j| (qs[j] * dqs[j].conj()).im - (rs[j] * drs[j].conj()).im).sum::<f64>() * h;
    let a = I / (4.0 * z * z) * a_local
        + (double_integral(&dq_bar, &dq_ext, h, mu) + double_integral(&m, &m, h, mu)) / (4.0 * z * z);

    let reg = regularized_phase_integral(r, q_tilde);
    let b_local: f64 = (0..n).map(|j| (rs[j].norm_sqr() - 1.0) * (rs[j].conj() * drs[j]).im).sum::<f64>() * h;
    let b = -I / (2.0 * z * zeta) * reg - I / (4.0 * z * z * zeta * zeta) * b_local
        + (double_integral(&m, &im_rdr, h, mu) + double_integral(&im_rdr, &m, h, mu)) / (4.0 * z * z * zeta)
        + I / (2.0 * z * zeta) * (double_integral(&m, &im_rdev, h, mu) + double_integral(&im_rdev_c, &m, h, mu));
    Ok((a, b))
}

/// Frequency-side parts of `A`:
/// the even part `−(i/2z)∫(|q̂′|² + |m̂|²)/(ξ² − 4z²) dξ` and the odd part
/// `(1/4z²)∫ ξ(τ⁴ + 4z²(2τ² + ξ²))/((τ² + ξ²)²(ξ² − 4z²)) |q̂′|² dξ`
/// for `r = τ²D_τ^{−2}q`.
pub fn a_frequency_parts(q: &GridField, tau_r: f64, params: &SpectralParams) -> (C64, C64) {
    let g = q.grid();
    let z = params.z;
    let four_z2 = 4.0 * z * z;
    let kappa = q.wavenumbers();
    let dq_hat = q.derivative().spectrum();
    let m: Vec<C64> = q.density_deviation().into_iter().map(|v| C64::new(v, 0.0)).collect();
    let m_hat = g.forward(&m);
    let xi = g.wavenumbers();
    let dxi = g.dxi();
    let mut even = ZERO;
    let mut odd = ZERO;
    let t2 = tau_r * tau_r;
    for k in 0..kappa.len() {
        let (kk, xk) = (kappa[k], xi[k]);
        let pq = dq_hat[k].norm_sqr();
        even += pq / (kk * kk - four_z2) + m_hat[k].norm_sqr() / (xk * xk - four_z2);
        odd += kk * (t2 * t2 + four_z2 * (2.0 * t2 + kk * kk)) / ((t2 + kk * kk).powi(2) * (kk * kk - four_z2)) * pq;
    }
    (-I / (2.0 * z) * even * dxi, odd * dxi / four_z2)
}

// ---------------------------------------------------------------------------
// Renormalised transmission coefficient
// ---------------------------------------------------------------------------

/// How the `w`-system was solved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Route {
    /// One Picard series over the whole domain.
    SingleRegion,
    /// Picard on `|x| ≥ R`, direct solve on `[−R, R]`.
    MultiRegion { split: f64 },
}

/// Numerical residuals attached to a scattering evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Residuals {
    /// Deviation of `q` from constant unimodular asymptotes at `±L`.
    pub boundary: f64,
    /// Relative size of the last Picard term.
    pub series_tail: f64,
    /// Relative change at the last Magnus step halving (zero if unused).
    pub step_refine: f64,
}

/// Options of [`renormalized_transmission_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmissionConfig {
    /// Scale of the regularisation `r`; `None` selects it by [`choose_tau_reg`].
    pub tau_reg: Option<f64>,
    /// Maximal number of Picard terms.
    pub n_max: usize,
    /// Smallness level for the multi-region split and the small-`τ` rule.
    pub delta0: f64,
    /// Also run the direct Magnus solve.
    pub direct: bool,
    /// Also evaluate `A` and `B` (only for `Im λ ≥ 0`).
    pub ab: bool,
}

impl Default for TransmissionConfig {
    fn default() -> Self {
        TransmissionConfig { tau_reg: None, n_max: 64, delta0: DEFAULT_DELTA0, direct: true, ab: true }
    }
}

/// Everything computed for one `(q, λ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatteringResult {
    pub lambda: C64,
    pub z: C64,
    /// Scale of the regularisation used.
    pub tau_reg: f64,
    pub route: Route,
    /// Picard smallness ratio over the whole domain.
    pub smallness: f64,
    /// `T⁻¹` from the direct solve (if requested).
    pub t_inv: Option<C64>,
    /// `T⁻¹` recovered from the renormalised route, `e^{−∫q₁}` times the
    /// limit of the flat `w` component (times `e^{iθ}` for `Im λ < 0`).
    pub t_inv_renormalized: C64,
    /// `T₀ = 1, T₂, T₄, …` (single-region route only).
    pub t2n: Vec<C64>,
    /// Limit of the flat `w` component, `Σ T_{2n}` in the single-region route.
    pub series: C64,
    /// `∫q₁`.
    pub q1_integral: C64,
    pub phi: C64,
    pub tc_inv: C64,
    /// `ln T_c⁻¹ = Φ + ln Σ T_{2n}` on the canonical branch.
    pub ln_tc_inv: C64,
    pub a_term: Option<C64>,
    pub b_term: Option<C64>,
    /// Branch integer of `Θ` (natural = canonical + 2π·branch).
    pub branch: i64,
    pub residuals: Residuals,
}

/// Regularisation scale: `τ = 2 Im z` when that is at least 2; otherwise the
/// first `τ₀ ∈ {2, 2√2, 4, …}` with `E⁰_{τ₀}(q) ≤ δ₀` (capped at 256).
pub fn choose_tau_reg(q: &GridField, params: &SpectralParams, delta0: f64) -> Result<f64> {
    if params.tau >= 2.0 {
        return Ok(params.tau);
    }
    let mut t = 2.0;
    while t < TAU_REG_MAX && e_s_tau(q, 0.0, t)? > delta0 {
        t *= SQRT_2;
    }
    Ok(t.min(TAU_REG_MAX))
}

/// `T_c⁻¹(λ)` with regularisation scale `τ_reg`.
pub fn renormalized_transmission(q: &GridField, lambda: C64, tau_reg: f64) -> Result<ScatteringResult> {
    renormalized_transmission_with(q, lambda, &TransmissionConfig { tau_reg: Some(tau_reg), ..Default::default() })
}

/// `T_c⁻¹(λ)` with explicit options.
pub fn renormalized_transmission_with(
    q: &GridField,
    lambda: C64,
    cfg: &TransmissionConfig,
) -> Result<ScatteringResult> {
    let p = make_params(lambda)?;
    let tau_reg = match cfg.tau_reg {
        Some(t) => t,
        None => choose_tau_reg(q, &p, cfg.delta0)?,
    };
    let pair = nonvanishing_reference(q, tau_reg)?;
    let coeffs = coefficients(q, &pair.r, &p)?;
    let ext = ExtendedCoefficients::new(&coeffs);
    let g = q.grid();
    let (dx, n) = (g.dx(), q.samples().len());
    let q1_integral = cumulative(&ext.q1, dx)[n];
    let smallness = ext.smallness(0, n, dx, p.z.im);
    let (alpha, beta, gamma) = ext.generic();
    let mu = 2.0 * I * p.z;

    let mut residuals = Residuals { boundary: q.boundary_residual(), ..Default::default() };
    let (series, ln_series, t2n, route) = if smallness < 0.5 {
        let out = picard_sweep(alpha, beta, gamma, dx, mu, ONE, ZERO, cfg.n_max);
        residuals.series_tail = out.tail;
        let rest: C64 = out.terms[1..].iter().sum();
        (out.flat, ln_1p(rest), out.terms, Route::SingleRegion)
    } else {
        let mr = multi_region(q, &pair.r, &p, &ext, cfg)?;
        residuals.series_tail = mr.tail;
        residuals.step_refine = mr.step_refine;
        (mr.flat, mr.flat.ln(), Vec::new(), Route::MultiRegion { split: mr.split })
    };
    if residuals.series_tail > 1e-10 {
        return Err(GpxError::Regime(format!(
            "Picard series not converged after {} terms (tail {:.2e}, ratio {smallness:.3})",
            cfg.n_max, residuals.series_tail
        )));
    }
    let mut t_inv_renormalized = (-q1_integral).exp() * series;
    if p.variant() == Variant::Minus {
        t_inv_renormalized *= C64::from_polar(1.0, q.twist());
    }
    let phi = phi_correction(q, &pair.r, &pair.q_tilde, &p)?;
    let ln_tc_inv = phi.value + ln_series;
    let t_inv = if cfg.direct {
        let d = jost_direct(q, &p)?;
        residuals.step_refine = residuals.step_refine.max(d.step_refine);
        Some(d.t_inv)
    } else {
        None
    };
    let (a_term, b_term) = if cfg.ab && p.variant() == Variant::Plus {
        let (a, b) = ab_decomposition(q, &pair.r, &pair.q_tilde, &p)?;
        (Some(a), Some(b))
    } else {
        (None, None)
    };
    Ok(ScatteringResult {
        lambda,
        z: p.z,
        tau_reg,
        route,
        smallness,
        t_inv,
        t_inv_renormalized,
        t2n,
        series,
        q1_integral,
        phi: phi.value,
        tc_inv: ln_tc_inv.exp(),
        ln_tc_inv,
        a_term,
        b_term,
        branch: phi.branch,
        residuals,
    })
}

struct MultiRegionOutcome {
    flat: C64,
    split: f64,
    tail: f64,
    step_refine: f64,
}

/// Left exterior Picard, central Magnus solve, right exterior Picard.
///
/// `R` is the smallest grid-aligned half width such that on `|x| ≥ R`
/// `‖|r|²−1‖ + τ‖r−q‖ + ‖r′‖ ≤ δ₀τ/2` and both exterior Picard ratios are
/// below 1/2; if no such `R < L` exists the whole domain is solved directly.
fn multi_region(
    q: &GridField,
    r: &GridField,
    p: &SpectralParams,
    ext: &ExtendedCoefficients,
    cfg: &TransmissionConfig,
) -> Result<MultiRegionOutcome> {
    let g = q.grid();
    let (dx, n) = (g.dx(), q.samples().len());
    let half = n / 2;
    let dr = extended(&r.derivative());
    let (qe, re) = (extended(q), extended(r));
    let prefix = |dens: &dyn Fn(usize) -> f64| -> Vec<f64> {
        let mut s = vec![0.0; n + 2];
        for j in 0..=n {
            s[j + 1] = s[j] + dens(j);
        }
        s
    };
    let sa = prefix(&|j| (re[j].norm_sqr() - 1.0).powi(2));
    let sb = prefix(&|j| (re[j] - qe[j]).norm_sqr());
    let sc = prefix(&|j| dr[j].norm_sqr());
    // L² norm over nodes 0..=jl and jr..=n
    let ext_norm = |s: &[f64], jl: usize, jr: usize| ((s[jl + 1] + s[n + 1] - s[jr]) * dx).sqrt();
    let tau = p.tau;
    let mut k = half;
    for cand in 1..half {
        let (jl, jr) = (half - cand, half + cand);
        let display = ext_norm(&sa, jl, jr) + tau * ext_norm(&sb, jl, jr) + ext_norm(&sc, jl, jr);
        if display <= cfg.delta0 * tau / 2.0
            && ext.smallness(0, jl, dx, p.z.im) < 0.5
            && ext.smallness(jr, n, dx, p.z.im) < 0.5
        {
            k = cand;
            break;
        }
    }
    let (jl, jr) = (half - k, half + k);
    let (alpha, beta, gamma) = ext.generic();
    let mu = 2.0 * I * p.z;
    let q1_cum = cumulative(&ext.q1, dx);
    let alpha_minus = q.samples()[0].arg();
    let variant = p.variant();
    let w = match variant {
        Variant::Plus => p.zeta,
        Variant::Minus => p.eta,
    };
    // w = c e^{Q₁} M U
    let c = match variant {
        Variant::Plus => -1.0 / (2.0 * I * p.z),
        Variant::Minus => 1.0 / ((1.0 - p.eta * p.eta) * C64::from_polar(1.0, -alpha_minus)),
    };
    let diag = |j: usize| [[-I * w, re[j]], [re[j].conj(), I * w]];
    let to_pair = |flat: C64, osc: C64| match variant {
        Variant::Plus => [flat, osc],
        Variant::Minus => [osc, flat],
    };
    let from_pair = |v: [C64; 2]| match variant {
        Variant::Plus => (v[0], v[1]),
        Variant::Minus => (v[1], v[0]),
    };

    let mut tail: f64 = 0.0;
    let left = if jl > 0 {
        let out = picard_sweep(&alpha[..=jl], &beta[..=jl], &gamma[..=jl], dx, mu, ONE, ZERO, cfg.n_max);
        tail = tail.max(out.tail);
        to_pair(out.flat, out.osc)
    } else {
        to_pair(ONE, ZERO)
    };
    // w → U at x_{jl}
    let mj = diag(jl);
    let d = re[jl].norm_sqr() - w * w;
    let scale = c * q1_cum[jl].exp();
    let v = [left[0] / scale, left[1] / scale];
    let mut u = mat2_vec(mj, v);
    u = [u[0] / d, u[1] / d];

    let interp = Interpolant::new(q);
    let (u_r, step_refine, _) = magnus_refined(&interp, p, jl, jr, u)?;

    // U → w at x_{jr}
    let v = mat2_vec(diag(jr), u_r);
    let scale = c * q1_cum[jr].exp();
    let (f_s, g_s) = from_pair([v[0] * scale, v[1] * scale]);
    let flat = if jr < n {
        let out = picard_sweep(&alpha[jr..], &beta[jr..], &gamma[jr..], dx, mu, f_s, g_s, cfg.n_max);
        tail = tail.max(out.tail);
        out.flat
    } else {
        f_s
    };
    Ok(MultiRegionOutcome { flat, split: k as f64 * dx, tail, step_refine })
}

/// `T_c⁻¹(λ)` evaluated on a list of spectral parameters in parallel.
pub fn renormalized_sweep(q: &GridField, lambdas: &[C64], cfg: &TransmissionConfig) -> Vec<Result<ScatteringResult>> {
    use rayon::prelude::*;
    lambdas.par_iter().map(|&l| renormalized_transmission_with(q, l, cfg)).collect()
}
