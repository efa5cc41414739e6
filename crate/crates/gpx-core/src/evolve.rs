//! Strang split-step integrator for
//!
//! ```text
//! i ∂_t q + ∂_xx q = 2 q (|q|² − 1)
//! ```
//!
//! on twisted-periodic fields, with drift instrumentation for the conserved
//! quantities.
//!
//! One step is `N(dt/2) ∘ L(dt) ∘ N(dt/2)`:
//!
//! * `N(h)`: the exact flow of `i ∂_t q = 2q(|q|² − 1)`, which keeps `|q|`
//!   fixed, so `q ← q·exp(−2i·h·(|q|² − 1))`; for `h = dt/2` the exponent is
//!   `−i·dt·(|q|² − 1)`;
//! * `L(dt)`: the exact flow of `∂_t q = i ∂_xx q`, the multiplier
//!   `exp(−iκ²dt)` at the effective wavenumbers `κ = ξ + θ/2L` of the
//!   untwisted representation, so the twist is preserved exactly.

use std::path::Path;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::conserved::{energy, h1_natural, mass, winding_theta, Angle};
use crate::energies::script_e0;
use crate::error::{GpxError, Result};
use crate::grid::{Grid, GridField};
use crate::regularize::nonvanishing_reference;
use crate::scattering::{renormalized_transmission_with, TransmissionConfig};

/// Default ratio `dt / dx²` above which a run is annotated (not rejected).
pub const DEFAULT_SAFETY: f64 = 2.0;

/// Fraction of the domain at each end watched by the boundary-energy monitor.
pub const BOUNDARY_FRACTION: f64 = 0.1;

/// Boundary energy above which a run is flagged as reaching the boundary.
pub const BOUNDARY_ENERGY_LIMIT: f64 = 1e-8;

/// Time-stepping and instrumentation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolveConfig {
    pub dt: f64,
    pub t_final: f64,
    /// Spectral parameters at which `T_c⁻¹` is tracked.
    pub probe_lambdas: Vec<C64>,
    /// Number of steps between records (the final time is always recorded).
    pub report_every: usize,
    /// `dt ≤ safety·dx²` is the advisory step bound.
    pub safety: f64,
    /// Scale `τ` of `𝓔⁰_τ`.
    pub e0_tau: f64,
    /// Scale `τ` of the reference field used for `Θ` and `H₁`.
    pub reference_tau: f64,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        EvolveConfig {
            dt: 1e-3,
            t_final: 1.0,
            probe_lambdas: vec![C64::new(0.0, 2.0)],
            report_every: 100,
            safety: DEFAULT_SAFETY,
            e0_tau: 8.0,
            reference_tau: 4.0,
        }
    }
}

impl EvolveConfig {
    /// Number of steps, requiring `t_final` to be an integer multiple of `dt`.
    pub fn n_steps(&self) -> Result<usize> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(GpxError::InvalidInput(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final.is_finite() && self.t_final >= 0.0) {
            return Err(GpxError::InvalidInput(format!("t_final must be non-negative, got {}", self.t_final)));
        }
        if self.report_every == 0 {
            return Err(GpxError::InvalidInput("report_every must be at least 1".into()));
        }
        if !(self.e0_tau > 0.0 && self.reference_tau > 0.0 && self.safety > 0.0) {
            return Err(GpxError::InvalidInput("e0_tau, reference_tau and safety must be positive".into()));
        }
        let n = (self.t_final / self.dt).round();
        if (n * self.dt - self.t_final).abs() > 1e-9 * self.t_final.max(self.dt) {
            return Err(GpxError::InvalidInput(format!(
                "t_final = {} is not a multiple of dt = {}",
                self.t_final, self.dt
            )));
        }
        Ok(n as usize)
    }
}

/// Precomputed split-step propagator for one grid, twist and `dt`.
pub struct Stepper {
    grid: Grid,
    twist: f64,
    dt: f64,
    ramp: Vec<C64>,
    linear: Vec<C64>,
}

impl Stepper {
    pub fn new(grid: Grid, twist: f64, dt: f64) -> Self {
        let s = twist / (2.0 * grid.half_length());
        let ramp = (0..grid.len()).map(|j| C64::from_polar(1.0, s * grid.x(j))).collect();
        let linear = grid
            .wavenumbers()
            .into_iter()
            .map(|k| C64::from_polar(1.0, -(k + s) * (k + s) * dt))
            .collect();
        Stepper { grid, twist, dt, ramp, linear }
    }

    /// Half nonlinear substep `q ← q·exp(−i·dt·(|q|² − 1))`.
    pub fn nonlinear_half(&self, v: &mut [C64]) {
        for a in v.iter_mut() {
            *a *= C64::from_polar(1.0, -self.dt * (a.norm_sqr() - 1.0));
        }
    }

    /// Full linear substep `exp(−iκ²dt)` on the untwisted field.
    pub fn linear(&self, v: &mut [C64]) {
        let untw: Vec<C64> = v.iter().zip(&self.ramp).map(|(a, r)| a * r.conj()).collect();
        let mut hat = self.grid.forward(&untw);
        for (a, m) in hat.iter_mut().zip(&self.linear) {
            *a *= m;
        }
        for ((out, a), r) in v.iter_mut().zip(self.grid.inverse(&hat)).zip(&self.ramp) {
            *out = a * r;
        }
    }

    /// One Strang step in place.
    pub fn advance(&self, v: &mut [C64]) {
        self.nonlinear_half(v);
        self.linear(v);
        self.nonlinear_half(v);
    }

    /// Wraps samples back into a field with the stepper's twist.
    pub fn field(&self, v: Vec<C64>) -> Result<GridField> {
        GridField::new(self.grid, v, self.twist)
    }
}

/// One Strang step of size `dt`.
pub fn step(q: &GridField, dt: f64) -> Result<GridField> {
    let st = Stepper::new(*q.grid(), q.twist(), dt);
    let mut v = q.samples().to_vec();
    st.advance(&mut v);
    if v.iter().any(|a| !(a.re.is_finite() && a.im.is_finite())) {
        return Err(GpxError::BlowUp { step: 0, message: "non-finite sample after one step".into() });
    }
    st.field(v)
}

/// `∫(|∂_x q|² + (|q|² − 1)²)` over the outer `BOUNDARY_FRACTION` of the domain.
pub fn boundary_energy(q: &GridField) -> f64 {
    let g = q.grid();
    let dq = q.derivative();
    let edge = (1.0 - 2.0 * BOUNDARY_FRACTION) * g.half_length();
    (0..g.len())
        .filter(|&j| g.x(j).abs() >= edge)
        .map(|j| dq.samples()[j].norm_sqr() + (q.samples()[j].norm_sqr() - 1.0).powi(2))
        .sum::<f64>()
        * g.dx()
}

/// Quantities recorded at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub step: usize,
    pub t: f64,
    pub mass: f64,
    /// `E¹(q)²`, the Ginzburg–Landau energy.
    pub energy: f64,
    /// `Θ` and `H₁`, absent when the reference field cannot be built.
    pub theta: Option<Angle>,
    pub h1: Option<Angle>,
    /// `𝓔⁰_τ` at `τ = e0_tau`.
    pub e0_tau: f64,
    /// `T_c⁻¹` at the probe spectral parameters.
    pub tc_inv: Vec<C64>,
    pub boundary_energy: f64,
}

/// Largest deviation from the initial record along a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Drifts {
    pub mass: f64,
    pub energy: f64,
    pub e0_tau: f64,
    /// Circle distance of `H₁` from its initial value (`None` when never available).
    pub h1: Option<f64>,
    /// Circle distance of `Θ`.
    pub theta: Option<f64>,
    /// `|T_c⁻¹(t) − T_c⁻¹(0)|` per probe.
    pub tc_inv: Vec<f64>,
}

/// Result of [`run`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryReport {
    pub config: EvolveConfig,
    pub records: Vec<TrajectoryRecord>,
    pub drifts: Drifts,
    /// Set when the boundary-energy monitor exceeded [`BOUNDARY_ENERGY_LIMIT`].
    pub boundary_flag: bool,
    /// Blow-up message when the run aborted early.
    pub aborted: Option<String>,
    pub notes: Vec<String>,
    /// Field at the last completed step (not serialised).
    #[serde(skip)]
    pub final_samples: Vec<C64>,
}

impl TrajectoryReport {
    /// Writes the records as CSV with the columns
    /// `t,mass,energy,theta,theta_branch,h1,h1_branch,e0_tau,re_tc_l1,im_tc_l1,…`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| GpxError::Parse(e.to_string()))?;
        let mut header: Vec<String> =
            ["t", "mass", "energy", "theta", "theta_branch", "h1", "h1_branch", "e0_tau"].map(String::from).to_vec();
        for k in 1..=self.config.probe_lambdas.len() {
            header.push(format!("re_tc_l{k}"));
            header.push(format!("im_tc_l{k}"));
        }
        header.push("boundary_energy".into());
        w.write_record(&header).map_err(|e| GpxError::Parse(e.to_string()))?;
        let angle = |a: &Option<Angle>| match a {
            Some(a) => (format!("{:e}", a.value), a.branch.to_string()),
            None => (String::new(), String::new()),
        };
        for r in &self.records {
            let (th, thb) = angle(&r.theta);
            let (h, hb) = angle(&r.h1);
            let mut row =
                vec![format!("{:e}", r.t), format!("{:e}", r.mass), format!("{:e}", r.energy), th, thb, h, hb];
            row.push(format!("{:e}", r.e0_tau));
            for v in &r.tc_inv {
                row.push(format!("{:e}", v.re));
                row.push(format!("{:e}", v.im));
            }
            row.push(format!("{:e}", r.boundary_energy));
            w.write_record(&row).map_err(|e| GpxError::Parse(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn record(q: &GridField, step: usize, t: f64, cfg: &EvolveConfig) -> Result<TrajectoryRecord> {
    let (theta, h1) = match nonvanishing_reference(q, cfg.reference_tau) {
        Ok(pair) => (
            Some(Angle::from_natural(winding_theta(&pair.q_tilde))),
            Some(Angle::from_natural(h1_natural(q, &pair.q_tilde).0)),
        ),
        Err(_) => (None, None),
    };
    let tcfg = TransmissionConfig { direct: false, ab: false, ..Default::default() };
    let tc_inv = cfg
        .probe_lambdas
        .iter()
        .map(|&l| renormalized_transmission_with(q, l, &tcfg).map(|r| r.tc_inv))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrajectoryRecord {
        step,
        t,
        mass: mass(q),
        energy: energy(q),
        theta,
        h1,
        e0_tau: script_e0(q, cfg.e0_tau)?,
        tc_inv,
        boundary_energy: boundary_energy(q),
    })
}

fn circle_drift(first: Option<Angle>, rest: impl Iterator<Item = Option<Angle>>) -> Option<f64> {
    let a0 = first?;
    Some(rest.flatten().map(|a| crate::conserved::angle_distance(a.value, a0.value)).fold(0.0, f64::max))
}

fn drifts(records: &[TrajectoryRecord]) -> Drifts {
    let r0 = &records[0];
    let max = |f: &dyn Fn(&TrajectoryRecord) -> f64| records.iter().map(|r| (f(r) - f(r0)).abs()).fold(0.0, f64::max);
    Drifts {
        mass: max(&|r| r.mass),
        energy: max(&|r| r.energy),
        e0_tau: max(&|r| r.e0_tau),
        h1: circle_drift(r0.h1, records.iter().map(|r| r.h1)),
        theta: circle_drift(r0.theta, records.iter().map(|r| r.theta)),
        tc_inv: (0..r0.tc_inv.len())
            .map(|k| records.iter().map(|r| (r.tc_inv[k] - r0.tc_inv[k]).norm()).fold(0.0, f64::max))
            .collect(),
    }
}

/// Evolves `q0` to `t_final`, recording every `report_every` steps and at the end.
///
/// A non-finite field aborts the run; the report then holds the records up to
/// the last finite state and the blow-up message.
pub fn run(q0: &GridField, cfg: &EvolveConfig) -> Result<TrajectoryReport> {
    let n = cfg.n_steps()?;
    let g = *q0.grid();
    let mut notes = Vec::new();
    let ratio = cfg.dt / (g.dx() * g.dx());
    if ratio > cfg.safety {
        notes.push(format!(
            "dt/dx² = {ratio:.3} exceeds the advisory bound {}; the linear step is exact, so only the splitting error grows",
            cfg.safety
        ));
    }
    let st = Stepper::new(g, q0.twist(), cfg.dt);
    let mut v = q0.samples().to_vec();
    let mut records = vec![record(q0, 0, 0.0, cfg)?];
    let mut aborted = None;
    for k in 1..=n {
        let prev = v.clone();
        st.advance(&mut v);
        if v.iter().any(|a| !(a.re.is_finite() && a.im.is_finite())) {
            aborted = Some(GpxError::BlowUp { step: k, message: "non-finite sample".into() }.to_string());
            v = prev;
            break;
        }
        if k % cfg.report_every == 0 || k == n {
            let q = st.field(v.clone())?;
            records.push(record(&q, k, k as f64 * cfg.dt, cfg)?);
        }
    }
    let boundary_flag = records.iter().any(|r| r.boundary_energy > BOUNDARY_ENERGY_LIMIT);
    if boundary_flag {
        notes.push("energy reached the outer tenth of the domain; radiation may have wrapped around".into());
    }
    Ok(TrajectoryReport {
        config: cfg.clone(),
        drifts: drifts(&records),
        records,
        boundary_flag,
        aborted,
        notes,
        final_samples: v,
    })
}

/// Evolves without instrumentation and returns the final field.
pub fn evolve_to(q0: &GridField, dt: f64, t_final: f64) -> Result<GridField> {
    let cfg = EvolveConfig { dt, t_final, report_every: 1, ..Default::default() };
    let n = cfg.n_steps()?;
    let st = Stepper::new(*q0.grid(), q0.twist(), dt);
    let mut v = q0.samples().to_vec();
    for k in 1..=n {
        st.advance(&mut v);
        if v.iter().any(|a| !(a.re.is_finite() && a.im.is_finite())) {
            return Err(GpxError::BlowUp { step: k, message: "non-finite sample".into() });
        }
    }
    st.field(v)
}

/// Discrete `‖p − q‖_{L²}`.
pub fn l2_distance(p: &GridField, q: &GridField) -> f64 {
    let d: Vec<f64> = p.samples().iter().zip(q.samples()).map(|(a, b)| (a - b).norm_sqr()).collect();
    p.grid().integrate(&d).sqrt()
}

/// `drift(dt)/drift(dt/2)` for a scalar functional evaluated at `t_final`.
pub fn drift_ratio(q0: &GridField, dt: f64, t_final: f64, f: impl Fn(&GridField) -> Result<f64>) -> Result<f64> {
    let f0 = f(q0)?;
    let coarse = (f(&evolve_to(q0, dt, t_final)?)? - f0).abs();
    let fine = (f(&evolve_to(q0, dt / 2.0, t_final)?)? - f0).abs();
    Ok(coarse / fine)
}
