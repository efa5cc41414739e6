//! Spectral-transform and conservation-law toolkit for the one-dimensional
//! Gross–Pitaevskii equation
//!
//! ```text
//! i ∂_t q + ∂_xx q = 2 q (|q|² − 1),   |q(x)| → 1 as |x| → ∞.
//! ```
//!
//! The crate is organised bottom-up:
//!
//! * [`grid`] — uniform grids, twisted-periodic fields, FFT-based fractional
//!   operators and the norms `E^s_τ`, `H^s_τ`, `W^{−1,p}_τ`, `d^s`;
//! * [`profiles`] — dark solitons and perturbed backgrounds with closed-form
//!   invariants;
//! * [`regularize`] — the low-pass regularisation `r = τ² D_τ^{−2} q` and the
//!   unimodular reference field `q̃`;
//! * [`conserved`] — mass, momentum, phase change `Θ`, renormalised momentum
//!   `H₁` and the `H₃` diagnostic;
//! * [`scattering`] — Jost solutions, the transmission coefficient `T⁻¹`, the
//!   diagonalised system, Picard terms, the correction `Φ` and the
//!   renormalised transmission coefficient `T_c⁻¹`;
//! * [`energies`] — the conserved energies `𝓔^s_τ` and their quadrature
//!   self-tests;
//! * [`evolve`] — a Strang split-step integrator with drift instrumentation;
//! * [`eigen`] — discrete eigenvalues of the Lax operator and zeros of `T_c⁻¹`.

pub mod conserved;
pub mod eigen;
pub mod energies;
pub mod error;
pub mod evolve;
pub mod grid;
pub mod numerics;
pub mod profiles;
pub mod regularize;
pub mod scattering;

pub use error::{GpxError, Result};
pub use grid::{Grid, GridField, SobolevWeight};
