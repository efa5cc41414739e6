//! Discrete eigenvalues of the Lax operator
//!
//! ```text
//! L = ( i∂_x   −iq  )
//!     ( i q̄   −i∂_x )
//! ```
//!
//! in the gap `(−1, 1)` of its essential spectrum, and the real zeros of
//! `T_c⁻¹` there, which coincide with them.
//!
//! The operator acts on pairs with `ψ₁(x + 2L) = e^{iθ/2}ψ₁(x)` and
//! `ψ₂(x + 2L) = e^{−iθ/2}ψ₂(x)` for a field of twist `θ`. Writing
//! `ψ₁ = e^{isx}φ₁`, `ψ₂ = e^{−isx}φ₂` with `s = θ/4L` leaves periodic `φ`,
//! derivative symbols `−(ξ + s)` and `ξ − s`, and the off-diagonal entries
//! `−i q_u`, `i q̄_u` with the untwisted field `q_u = e^{−iθx/2L}q`. The
//! resulting `2N × 2N` matrix is Hermitian.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GpxError, Result};
use crate::grid::GridField;
use crate::scattering::{renormalized_transmission_with, TransmissionConfig};

/// Default distance kept from the band edges `±1`.
pub const DEFAULT_BAND_MARGIN: f64 = 1e-3;

/// Largest admissible `|A − A*|` entry of the assembled matrix.
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;

/// Imaginary part of `T_c⁻¹` on the real axis above which sampling fails.
pub const REALITY_TOLERANCE: f64 = 1e-6;

/// Default number of samples of `T_c⁻¹` across the band.
pub const DEFAULT_SAMPLES: usize = 161;

/// Default bisection resolution for the zeros.
pub const DEFAULT_RESOLUTION: f64 = 1e-10;

/// Largest pairing gap accepted by [`EigenReport::consistent`].
pub const PAIRING_TOLERANCE: f64 = 1e-4;

/// The default band `(−1 + m, 1 − m)`.
pub fn default_band() -> (f64, f64) {
    (-1.0 + DEFAULT_BAND_MARGIN, 1.0 - DEFAULT_BAND_MARGIN)
}

fn check_band(band: (f64, f64)) -> Result<()> {
    if !(band.0 > -1.0 && band.1 < 1.0 && band.0 < band.1) {
        return Err(GpxError::Domain(format!("band must satisfy −1 < a < b < 1, got {band:?}")));
    }
    Ok(())
}

/// Dense circulant matrix of the Fourier multiplier `symbol(ξ)` on the grid.
fn circulant(q: &GridField, symbol: impl Fn(f64) -> f64) -> Vec<C64> {
    let g = q.grid();
    let n = g.len();
    let mut delta = vec![C64::new(0.0, 0.0); n];
    delta[0] = C64::new(1.0, 0.0);
    let spec: Vec<C64> = g.forward(&delta).iter().zip(g.wavenumbers()).map(|(v, k)| v * symbol(k)).collect();
    g.inverse(&spec)
}

/// Assembles the Hermitian `2N × 2N` discretisation of the Lax operator.
pub fn lax_matrix(q: &GridField) -> DMatrix<C64> {
    let n = q.grid().len();
    let s = q.twist() / (4.0 * q.grid().half_length());
    let d1 = circulant(q, |k| -(k + s));
    let d2 = circulant(q, |k| k - s);
    let qu = q.untwisted();
    let i = C64::new(0.0, 1.0);
    let mut a = DMatrix::<C64>::zeros(2 * n, 2 * n);
    for j in 0..n {
        for l in 0..n {
            let m = (j + n - l) % n;
            a[(j, l)] = d1[m];
            a[(n + j, n + l)] = d2[m];
        }
        a[(j, n + j)] = -i * qu[j];
        a[(n + j, j)] = i * qu[j].conj();
    }
    a
}

/// Largest entry of `|A − A*|`.
pub fn hermitian_defect(a: &DMatrix<C64>) -> f64 {
    let n = a.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for l in j..n {
            worst = worst.max((a[(j, l)] - a[(l, j)].conj()).norm());
        }
    }
    worst
}

/// Sorted eigenvalues of the discretised Lax operator inside `band`.
pub fn lax_eigs(q: &GridField, band: (f64, f64)) -> Result<Vec<f64>> {
    check_band(band)?;
    let mut a = lax_matrix(q);
    let defect = hermitian_defect(&a);
    if defect > HERMITIAN_TOLERANCE {
        return Err(GpxError::Internal(format!("Lax matrix is not Hermitian: defect {defect:.2e}")));
    }
    // Remove the rounding-level asymmetry before the Hermitian solve.
    let n = a.nrows();
    for j in 0..n {
        a[(j, j)] = C64::new(a[(j, j)].re, 0.0);
        for l in j + 1..n {
            let v = 0.5 * (a[(j, l)] + a[(l, j)].conj());
            a[(j, l)] = v;
            a[(l, j)] = v.conj();
        }
    }
    let mut eigs: Vec<f64> =
        a.symmetric_eigenvalues().iter().copied().filter(|&e| e > band.0 && e < band.1).collect();
    eigs.sort_by(f64::total_cmp);
    Ok(eigs)
}

/// `T_c⁻¹(λ)` at real `λ`, checked to be real.
pub fn tc_real(q: &GridField, lambda: f64) -> Result<f64> {
    let cfg = TransmissionConfig { direct: false, ab: false, ..Default::default() };
    let v = renormalized_transmission_with(q, C64::new(lambda, 0.0), &cfg)?.tc_inv;
    if v.im.abs() > REALITY_TOLERANCE * v.norm().max(1.0) {
        return Err(GpxError::Regime(format!("T_c⁻¹({lambda}) = {v} is not real")));
    }
    Ok(v.re)
}

/// A zero of `T_c⁻¹` on the real axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TcZero {
    pub lambda: f64,
    /// Centred difference quotient of `T_c⁻¹` at the zero.
    pub slope: f64,
}

/// Zeros of `T_c⁻¹` in `band`: sign changes on `samples` equispaced points,
/// refined by bisection to `resolution`.
pub fn tc_zeros_detailed(q: &GridField, band: (f64, f64), samples: usize, resolution: f64) -> Result<Vec<TcZero>> {
    check_band(band)?;
    if samples < 2 || !(resolution > 0.0) {
        return Err(GpxError::InvalidInput("need at least two samples and a positive resolution".into()));
    }
    let xs: Vec<f64> =
        (0..samples).map(|k| band.0 + (band.1 - band.0) * k as f64 / (samples - 1) as f64).collect();
    let vals = xs.par_iter().map(|&x| tc_real(q, x)).collect::<Result<Vec<_>>>()?;
    let brackets: Vec<(f64, f64, f64)> = (0..samples - 1)
        .filter(|&k| vals[k] == 0.0 || vals[k] * vals[k + 1] < 0.0)
        .map(|k| (xs[k], xs[k + 1], vals[k]))
        .collect();
    brackets
        .par_iter()
        .map(|&(mut a, mut b, mut fa)| {
            if fa != 0.0 {
                while b - a > resolution {
                    let m = 0.5 * (a + b);
                    let fm = tc_real(q, m)?;
                    if fm == 0.0 {
                        a = m;
                        b = m;
                        break;
                    }
                    if fa * fm < 0.0 {
                        b = m;
                    } else {
                        a = m;
                        fa = fm;
                    }
                }
            } else {
                b = a;
            }
            let lambda = 0.5 * (a + b);
            let h = 1e-5;
            let slope = (tc_real(q, lambda + h)? - tc_real(q, lambda - h)?) / (2.0 * h);
            Ok(TcZero { lambda, slope })
        })
        .collect()
}

/// Zeros of `T_c⁻¹` in `band`, bisected to `resolution`.
pub fn tc_zeros(q: &GridField, band: (f64, f64), resolution: f64) -> Result<Vec<f64>> {
    Ok(tc_zeros_detailed(q, band, DEFAULT_SAMPLES, resolution)?.into_iter().map(|z| z.lambda).collect())
}

/// Hausdorff distance between two finite sets (`0` if both are empty,
/// infinite if exactly one is).
pub fn hausdorff(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    let one = |p: &[f64], r: &[f64]| {
        p.iter().map(|x| r.iter().map(|y| (x - y).abs()).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max)
    };
    one(a, b).max(one(b, a))
}

/// An operator eigenvalue matched with its nearest zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pairing {
    pub eigenvalue: f64,
    pub zero: f64,
    pub gap: f64,
}

/// Eigenvalues, zeros and their pairing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenReport {
    pub band: (f64, f64),
    pub operator_eigs: Vec<f64>,
    pub tc_zeros: Vec<f64>,
    /// `dT_c⁻¹/dλ` at each zero; non-zero for simple zeros.
    pub zero_slopes: Vec<f64>,
    pub pairing: Vec<Pairing>,
    pub hausdorff: f64,
    /// `max |A − A*|` of the assembled matrix.
    pub hermitian_defect: f64,
}

impl EigenReport {
    /// Same number of eigenvalues and zeros, every zero simple, Hausdorff
    /// distance at most [`PAIRING_TOLERANCE`].
    pub fn consistent(&self) -> bool {
        self.operator_eigs.len() == self.tc_zeros.len()
            && self.hausdorff <= PAIRING_TOLERANCE
            && self.zero_slopes.iter().all(|s| s.abs() > 1e-8)
    }
}

/// Computes both spectra on `band` and pairs them.
pub fn eigen_report(q: &GridField, band: (f64, f64), resolution: f64) -> Result<EigenReport> {
    let defect = hermitian_defect(&lax_matrix(q));
    let operator_eigs = lax_eigs(q, band)?;
    let zeros = tc_zeros_detailed(q, band, DEFAULT_SAMPLES, resolution)?;
    let tc_zeros: Vec<f64> = zeros.iter().map(|z| z.lambda).collect();
    let pairing = operator_eigs
        .iter()
        .filter_map(|&e| {
            tc_zeros
                .iter()
                .copied()
                .min_by(|a, b| (a - e).abs().total_cmp(&(b - e).abs()))
                .map(|z| Pairing { eigenvalue: e, zero: z, gap: (z - e).abs() })
        })
        .collect();
    Ok(EigenReport {
        band,
        hausdorff: hausdorff(&operator_eigs, &tc_zeros),
        zero_slopes: zeros.iter().map(|z| z.slope).collect(),
        operator_eigs,
        tc_zeros,
        pairing,
        hermitian_defect: defect,
    })
}
