//! Low-level numerical kernels shared by the field modules.
//!
//! * cumulative integrals with an exponential kernel on a uniform grid
//!   (Filon-type: the integrand is replaced by a local degree-5 interpolant
//!   and integrated against `e^{μ(x−y)}` exactly, so the scheme is sixth order
//!   and unconditionally stable for `Re μ ≤ 0`);
//! * Gauss–Jacobi rules from the Golub–Welsch eigenvalue problem;
//! * small complex helpers (`ln(1+x)` without cancellation, 2×2 exponentials).

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use statrs::function::gamma::ln_gamma;

/// Maximal degree of the local interpolant used by [`cumulative_exp`].
const SWEEP_DEGREE: usize = 5;

/// `m_k(a) = ∫_0^1 e^{a(1−t)} t^k dt` for `k = 0..=kmax`.
///
/// Uses the power series for `|a| < 1` and the (then stable) upward recursion
/// `m_k = −1/a + (k/a) m_{k−1}` otherwise.
pub fn exp_moments(a: C64, kmax: usize) -> Vec<C64> {
    let mut m = vec![C64::new(0.0, 0.0); kmax + 1];
    if a.norm() < 1.0 {
        for (k, mk) in m.iter_mut().enumerate() {
            // Σ_n a^n k!/(n+k+1)!, term ratio a/(n+k+2).
            let mut term = C64::new(1.0 / (k as f64 + 1.0), 0.0);
            let mut sum = term;
            for n in 0..40 {
                term *= a / (n as f64 + k as f64 + 2.0);
                sum += term;
                if term.norm() < 1e-18 * sum.norm() {
                    break;
                }
            }
            *mk = sum;
        }
    } else {
        m[0] = (a.exp() - 1.0) / a;
        for k in 1..=kmax {
            m[k] = (-1.0 + k as f64 * m[k - 1]) / a;
        }
    }
    m
}

/// Monomial coefficients of the Lagrange basis polynomials on the nodes `t`.
fn lagrange_monomials(t: &[f64]) -> Vec<Vec<f64>> {
    let d = t.len();
    (0..d)
        .map(|m| {
            let mut poly = vec![1.0];
            let mut denom = 1.0;
            for (l, &tl) in t.iter().enumerate() {
                if l == m {
                    continue;
                }
                let mut next = vec![0.0; poly.len() + 1];
                for (k, &c) in poly.iter().enumerate() {
                    next[k + 1] += c;
                    next[k] -= c * tl;
                }
                poly = next;
                denom *= t[m] - tl;
            }
            poly.iter().map(|c| c / denom).collect()
        })
        .collect()
}

/// Precomputed one-step weights of the exponential sweep for a fixed `μh`.
struct SweepWeights {
    decay: C64,
    degree: usize,
    /// `weights[o][m]` for stencil offset `−o` (stencil starts at `j − o`).
    weights: Vec<Vec<C64>>,
}

impl SweepWeights {
    fn new(mu: C64, h: f64, degree: usize) -> Self {
        let a = mu * h;
        let moments = exp_moments(a, degree);
        let weights = (0..=degree)
            .map(|o| {
                let nodes: Vec<f64> = (0..=degree).map(|m| m as f64 - o as f64).collect();
                lagrange_monomials(&nodes)
                    .iter()
                    .map(|coef| {
                        coef.iter()
                            .zip(&moments)
                            .map(|(c, mk)| mk * *c)
                            .sum::<C64>()
                            * h
                    })
                    .collect()
            })
            .collect();
        SweepWeights { decay: a.exp(), degree, weights }
    }
}

/// Running integral `J_j = ∫_{x_0}^{x_j} e^{μ(x_j − y)} f(y) dy` on a uniform
/// grid of spacing `h`, for `j = 0..f.len()`.
///
/// `Re μ ≤ 0` is required for stability. With `μ = 0` this is a sixth-order
/// cumulative quadrature.
pub fn cumulative_exp(f: &[C64], h: f64, mu: C64) -> Vec<C64> {
    let n = f.len();
    let mut out = vec![C64::new(0.0, 0.0); n];
    if n < 2 {
        return out;
    }
    let degree = SWEEP_DEGREE.min(n - 1);
    let w = SweepWeights::new(mu, h, degree);
    let centred = (w.degree - 1) / 2;
    for j in 0..n - 1 {
        // stencil start s = j − o with 0 ≤ s and s + degree ≤ n − 1
        let o = centred.min(j).max((j + w.degree).saturating_sub(n - 1));
        let s = j - o;
        let inc: C64 = w.weights[o]
            .iter()
            .zip(&f[s..=s + w.degree])
            .map(|(wm, fm)| wm * fm)
            .sum();
        out[j + 1] = w.decay * out[j] + inc;
    }
    out
}

/// Sixth-order cumulative integral `∫_{x_0}^{x_j} f` on a uniform grid.
pub fn cumulative(f: &[C64], h: f64) -> Vec<C64> {
    cumulative_exp(f, h, C64::new(0.0, 0.0))
}

/// Gauss–Jacobi rule on `[−1, 1]` for the weight `(1−x)^α (1+x)^β`.
///
/// Returns `(nodes, weights)` in increasing node order.
pub fn gauss_jacobi(n: usize, alpha: f64, beta: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1 && alpha > -1.0 && beta > -1.0);
    let ab = alpha + beta;
    let mut jm = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let k = i as f64;
        let diag = if i == 0 {
            (beta - alpha) / (ab + 2.0)
        } else {
            (beta * beta - alpha * alpha) / ((2.0 * k + ab) * (2.0 * k + ab + 2.0))
        };
        jm[(i, i)] = diag;
        if i + 1 < n {
            let m = k + 1.0;
            let off = if i == 0 {
                (4.0 * (1.0 + alpha) * (1.0 + beta) / ((2.0 + ab).powi(2) * (3.0 + ab))).sqrt()
            } else {
                (4.0 * m * (m + alpha) * (m + beta) * (m + ab)
                    / ((2.0 * m + ab).powi(2) * (2.0 * m + ab + 1.0) * (2.0 * m + ab - 1.0)))
                    .sqrt()
            };
            jm[(i, i + 1)] = off;
            jm[(i + 1, i)] = off;
        }
    }
    let mu0 = ((ab + 1.0) * std::f64::consts::LN_2 + ln_gamma(alpha + 1.0) + ln_gamma(beta + 1.0)
        - ln_gamma(ab + 2.0))
        .exp();
    let eig = SymmetricEigen::new(jm);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], mu0 * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pairs.into_iter().unzip()
}

/// Gauss–Jacobi rule on `[0, 1]` for the weight `u^β`.
pub fn gauss_jacobi_left(n: usize, beta: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_jacobi(n, 0.0, beta);
    let scale = 2f64.powf(-beta - 1.0);
    (
        x.iter().map(|xi| 0.5 * (1.0 + xi)).collect(),
        w.iter().map(|wi| wi * scale).collect(),
    )
}

/// C^∞ step: 0 for `u ≤ 0`, 1 for `u ≥ 1`, `f(u)/(f(u)+f(1−u))` with
/// `f(u) = e^{−1/u}` in between. Monotone, with all derivatives vanishing at
/// both ends.
pub fn smooth_step(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / u).exp();
        let b = (-1.0 / (1.0 - u)).exp();
        a / (a + b)
    }
}

/// `ln(1 + x)` for complex `x` without cancellation when `x` is small.
pub fn ln_1p(x: C64) -> C64 {
    let re = 0.5 * (2.0 * x.re + x.norm_sqr()).ln_1p();
    let im = x.im.atan2(1.0 + x.re);
    C64::new(re, im)
}

/// Exponential of a complex 2×2 matrix `[[a, b], [c, d]]` in closed form.
pub fn expm2(m: [[C64; 2]; 2]) -> [[C64; 2]; 2] {
    let t = (m[0][0] + m[1][1]) * 0.5;
    let n00 = m[0][0] - t;
    let n11 = m[1][1] - t;
    // N² = δ·I with δ = n00² + b c
    let delta = n00 * n00 + m[0][1] * m[1][0];
    let (ch, sh_over_s) = if delta.norm() < 1e-6 {
        // series in δ: cosh √δ = Σ δ^k/(2k)!, sinh √δ/√δ = Σ δ^k/(2k+1)!
        let mut c = C64::new(1.0, 0.0);
        let mut s = C64::new(1.0, 0.0);
        let mut tc = C64::new(1.0, 0.0);
        let mut ts = C64::new(1.0, 0.0);
        for k in 1..6 {
            let kf = k as f64;
            tc *= delta / ((2.0 * kf - 1.0) * (2.0 * kf));
            ts *= delta / ((2.0 * kf) * (2.0 * kf + 1.0));
            c += tc;
            s += ts;
        }
        (c, s)
    } else {
        let s = delta.sqrt();
        (s.cosh(), s.sinh() / s)
    };
    let e = t.exp();
    [
        [e * (ch + sh_over_s * n00), e * sh_over_s * m[0][1]],
        [e * sh_over_s * m[1][0], e * (ch + sh_over_s * n11)],
    ]
}

/// 2×2 complex matrix product.
pub fn mat2_mul(a: [[C64; 2]; 2], b: [[C64; 2]; 2]) -> [[C64; 2]; 2] {
    [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]
}

/// 2×2 complex matrix applied to a vector.
pub fn mat2_vec(a: [[C64; 2]; 2], v: [C64; 2]) -> [C64; 2] {
    [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]]
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn moments_series_and_recursion_agree_near_switch() {
        for a in [C64::new(-0.999, 0.0), C64::new(-1.001, 0.0), C64::new(0.3, -0.99)] {
            let m = exp_moments(a, 5);
            // direct Simpson reference with many panels
            let n = 20000;
            for (k, mk) in m.iter().enumerate() {
                let mut s = C64::new(0.0, 0.0);
                for i in 0..=n {
                    let t = i as f64 / n as f64;
                    let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                    s += (a * (1.0 - t)).exp() * t.powi(k as i32) * w;
                }
                s /= 3.0 * n as f64;
                assert!((s - mk).norm() < 1e-12, "k={k} a={a}: {s} vs {mk}");
            }
        }
    }

    #[test]
    fn cumulative_integrates_polynomials_exactly() {
        let h = 0.1;
        let f: Vec<C64> = (0..40).map(|j| c((j as f64 * h).powi(4) - 2.0 * j as f64 * h)).collect();
        let cum = cumulative(&f, h);
        for (j, v) in cum.iter().enumerate() {
            let x = j as f64 * h;
            let exact = x.powi(5) / 5.0 - x * x;
            assert!((v.re - exact).abs() < 1e-11, "{j}: {} vs {exact}", v.re);
        }
    }

    #[test]
    fn exponential_sweep_matches_closed_form() {
        // ∫_0^x e^{μ(x−y)} cos(y) dy for a stiff and a mild μ
        for mu in [C64::new(-40.0, 3.0), C64::new(-0.5, 1.0)] {
            let h = 0.01;
            let f: Vec<C64> = (0..1001).map(|j| c((j as f64 * h).cos())).collect();
            let out = cumulative_exp(&f, h, mu);
            for j in [10usize, 500, 1000] {
                let x = j as f64 * h;
                // closed form of ∫_0^x e^{μ(x−y)} e^{±iy} dy
                let part = |s: f64| {
                    let k = C64::new(0.0, s);
                    ((k * x).exp() - (mu * x).exp()) / (k - mu)
                };
                let exact = (part(1.0) + part(-1.0)) * 0.5;
                assert!((out[j] - exact).norm() < 1e-11, "mu={mu} j={j}");
            }
        }
    }

    #[test]
    fn gauss_jacobi_integrates_weighted_monomials() {
        let (x, w) = gauss_jacobi_left(12, -0.5);
        // ∫_0^1 u^{-1/2} u^k du = 1/(k + 1/2)
        for k in 0..20 {
            let q: f64 = x.iter().zip(&w).map(|(u, wi)| wi * u.powi(k)).sum();
            assert!((q - 1.0 / (k as f64 + 0.5)).abs() < 1e-13, "k={k}");
        }
        let (x, w) = gauss_jacobi(10, 0.3, -0.7);
        let total: f64 = w.iter().sum();
        let exact = (0.6f64 * std::f64::consts::LN_2 + ln_gamma(1.3) + ln_gamma(0.3) - ln_gamma(1.6)).exp();
        assert!((total - exact).abs() < 1e-12 * exact);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn expm2_matches_series() {
        let m = [[C64::new(0.3, -1.0), C64::new(0.2, 0.5)], [C64::new(-0.7, 0.1), C64::new(-0.2, 0.4)]];
        let e = expm2(m);
        // Taylor series reference
        let mut term = [[c(1.0), c(0.0)], [c(0.0), c(1.0)]];
        let mut sum = term;
        for k in 1..40 {
            term = mat2_mul(term, m);
            for r in 0..2 {
                for s in 0..2 {
                    term[r][s] /= k as f64;
                }
            }
            for r in 0..2 {
                for s in 0..2 {
                    sum[r][s] += term[r][s];
                }
            }
        }
        for r in 0..2 {
            for s in 0..2 {
                assert!((e[r][s] - sum[r][s]).norm() < 1e-14);
            }
        }
        // nilpotent direction exercises the series branch
        let nil = [[c(0.0), c(1.0)], [c(0.0), c(0.0)]];
        let e = expm2(nil);
        assert!((e[0][1] - 1.0).norm() < 1e-15 && (e[0][0] - 1.0).norm() < 1e-15);
    }

    #[test]
    fn ln_1p_is_accurate_for_tiny_arguments() {
        let x = C64::new(1e-13, -3e-14);
        let l = ln_1p(x);
        assert!((l - x).norm() < 1e-25);
    }
}
