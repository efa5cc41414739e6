//! `gpx` — command-line front end for the Gross–Pitaevskii scattering toolkit.
//!
//! Every subcommand prints (or writes with `--out`) one JSON document holding
//! the parsed configuration, its SHA-256 hash and the result. Exit codes:
//! `0` success, `1` verification failure, `2` usage or input error, `3`
//! numerical-regime failure.

mod parse;
mod verify;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gpx_core::conserved::{h3_diagnostic, report};
use gpx_core::eigen::{eigen_report, DEFAULT_RESOLUTION};
use gpx_core::energies::{script_energy, AxisCache, EnergyQuadratureConfig};
use gpx_core::evolve::{run, EvolveConfig, DEFAULT_SAFETY};
use gpx_core::grid::e_s_tau;
use gpx_core::scattering::{renormalized_sweep, TransmissionConfig, DEFAULT_DELTA0};
use gpx_core::GpxError;
use num_complex::Complex64 as C64;
use serde::Serialize;
use sha2::{Digest, Sha256};

use parse::{FieldSource, GridSpec};

#[derive(Parser, Debug)]
#[command(name = "gpx", version, about = "Scattering transform and conserved energies for the 1-D Gross-Pitaevskii equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Write the JSON report to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(tag = "command", rename_all = "snake_case")]
enum Command {
    /// Mass, momentum, energy, Θ, H₁ and the E^s_τ table.
    Invariants(InvariantsArgs),
    /// T⁻¹ and T_c⁻¹ at a list or grid of spectral parameters.
    Transmission(TransmissionArgs),
    /// The conserved energies 𝓔^s_τ on a ladder of s and τ₀.
    Energy(EnergyArgs),
    /// Split-step evolution with conservation monitoring.
    Evolve(EvolveArgs),
    /// Lax eigenvalues in (−1, 1) and zeros of T_c⁻¹.
    Eigs(EigsArgs),
    /// Runs the built-in identity suites.
    Verify(VerifyArgs),
}

#[derive(Args, Debug, Serialize)]
struct FieldArgs {
    /// Inline JSON profile, `constant_one`, a JSON profile file or a CSV field file.
    #[arg(long)]
    profile: String,
    /// Grid as `L=<half length>,N=<points>` (ignored for CSV fields).
    #[arg(long, value_parser = parse::grid_spec, default_value = "L=40,N=4096")]
    grid: GridSpec,
}

#[derive(Args, Debug, Serialize)]
struct InvariantsArgs {
    #[command(flatten)]
    field: FieldArgs,
    /// Scale of the reference field and of the E^s_τ table.
    #[arg(long, default_value_t = 4.0)]
    tau: f64,
    /// Regularity indices of the E^s_τ table.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0,0.5,1,1.5")]
    s: Vec<f64>,
}

#[derive(Args, Debug, Serialize)]
struct TransmissionArgs {
    #[command(flatten)]
    field: FieldArgs,
    /// Comma-separated spectral parameters, e.g. `2i,0.5+1i`.
    #[arg(long, value_parser = parse::complex, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "lambda_grid")]
    lambda: Vec<C64>,
    /// Rectangular grid `re0:re1:n,im0:im1:n`.
    #[arg(long, allow_hyphen_values = true)]
    lambda_grid: Option<String>,
    /// Regularisation scale (chosen automatically when absent).
    #[arg(long)]
    tau_reg: Option<f64>,
    /// Maximal number of Picard terms.
    #[arg(long, default_value_t = 64)]
    n_max: usize,
    /// Skip the direct Jost solve.
    #[arg(long)]
    no_direct: bool,
}

#[derive(Args, Debug, Serialize)]
struct EnergyArgs {
    #[command(flatten)]
    field: FieldArgs,
    #[arg(long, value_delimiter = ',', default_value = "0,0.5,1,1.5")]
    s: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "2,4,8")]
    tau0: Vec<f64>,
}

#[derive(Args, Debug, Serialize)]
struct EvolveArgs {
    #[command(flatten)]
    field: FieldArgs,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = 1.0)]
    t_final: f64,
    #[arg(long, default_value_t = 100)]
    report_every: usize,
    /// Spectral parameters at which T_c⁻¹ is tracked.
    #[arg(long, value_parser = parse::complex, value_delimiter = ',', allow_hyphen_values = true, default_value = "2i")]
    probe: Vec<C64>,
    #[arg(long, default_value_t = 8.0)]
    e0_tau: f64,
    /// Also write the trajectory as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct EigsArgs {
    #[command(flatten)]
    field: FieldArgs,
    /// Distance kept from the band edges ±1.
    #[arg(long, default_value_t = gpx_core::eigen::DEFAULT_BAND_MARGIN)]
    band_margin: f64,
    #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
    resolution: f64,
}

#[derive(Args, Debug, Serialize)]
struct VerifyArgs {
    /// One of `all`, `contour`, `trivial`, `invariants`, `symmetry`, `h1`.
    #[arg(long, default_value = "all")]
    suite: String,
    /// Seed of the randomised checks.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Envelope of every report.
#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    config: &'a Command,
    config_hash: String,
    result: T,
}

enum Failure {
    Verification(String),
    Error(GpxError),
}

impl From<GpxError> for Failure {
    fn from(e: GpxError) -> Self {
        Failure::Error(e)
    }
}

type Outcome = std::result::Result<(), Failure>;

fn emit<T: Serialize>(cli: &Cli, result: T) -> Outcome {
    let config_json = serde_json::to_string(&cli.command).map_err(|e| GpxError::Internal(e.to_string()))?;
    let config_hash = hex::encode(Sha256::digest(config_json.as_bytes()));
    let doc = Report { config: &cli.command, config_hash, result };
    let text = serde_json::to_string_pretty(&doc).map_err(|e| GpxError::Internal(e.to_string()))?;
    match &cli.out {
        Some(p) => std::fs::write(p, text + "\n").map_err(GpxError::from)?,
        None => {
            // A closed pipe (e.g. `gpx … | head`) is not an error of the computation.
            if let Err(e) = writeln!(std::io::stdout().lock(), "{text}") {
                if e.kind() != std::io::ErrorKind::BrokenPipe {
                    return Err(GpxError::from(e).into());
                }
            }
        }
    }
    Ok(())
}

fn source(f: &FieldArgs) -> gpx_core::Result<FieldSource> {
    FieldSource::resolve(&f.profile, f.grid)
}

#[derive(Serialize)]
struct InvariantsResult {
    source: FieldSource,
    conserved: gpx_core::conserved::ConservedReport,
    /// `H₁ − (P − Θ)` reduced to `(−π, π]`.
    h1_identity_defect: f64,
    h3: f64,
    e_s_tau: Vec<(f64, f64)>,
}

fn invariants(cli: &Cli, a: &InvariantsArgs) -> Outcome {
    let src = source(&a.field)?;
    let q = src.field()?;
    let conserved = report(&q, a.tau)?;
    let p = conserved.momentum.unwrap_or(0.0);
    let defect = conserved.h1.natural() - (p - conserved.theta.natural());
    let defect = defect - 2.0 * std::f64::consts::PI * (defect / (2.0 * std::f64::consts::PI)).round();
    let table = a.s.iter().map(|&s| Ok((s, e_s_tau(&q, s, a.tau)?))).collect::<gpx_core::Result<Vec<_>>>()?;
    emit(cli, InvariantsResult { source: src, conserved, h1_identity_defect: defect, h3: h3_diagnostic(&q), e_s_tau: table })
}

#[derive(Serialize)]
struct PointResult {
    lambda: C64,
    #[serde(skip_serializing_if = "Option::is_none")]
    value: Option<gpx_core::scattering::ScatteringResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn transmission(cli: &Cli, a: &TransmissionArgs) -> Outcome {
    let lambdas = match &a.lambda_grid {
        Some(text) => parse::lambda_grid(text).map_err(GpxError::InvalidInput)?,
        None if !a.lambda.is_empty() => a.lambda.clone(),
        None => return Err(GpxError::InvalidInput("one of --lambda or --lambda-grid is required".into()).into()),
    };
    let q = source(&a.field)?.field()?;
    let cfg = TransmissionConfig { tau_reg: a.tau_reg, n_max: a.n_max, delta0: DEFAULT_DELTA0, direct: !a.no_direct, ab: true };
    let results = renormalized_sweep(&q, &lambdas, &cfg);
    let mut regime = None;
    let points: Vec<PointResult> = lambdas
        .iter()
        .zip(results)
        .map(|(&lambda, r)| match r {
            Ok(v) => PointResult { lambda, value: Some(v), error: None },
            Err(e) => {
                let msg = e.to_string();
                regime.get_or_insert(e);
                PointResult { lambda, value: None, error: Some(msg) }
            }
        })
        .collect();
    emit(cli, points)?;
    match regime {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

fn energy(cli: &Cli, a: &EnergyArgs) -> Outcome {
    let q = source(&a.field)?.field()?;
    let cfg = EnergyQuadratureConfig::from_env();
    let cache = AxisCache::new(&q);
    let mut ladder = Vec::new();
    for &t0 in &a.tau0 {
        for &s in &a.s {
            ladder.push(script_energy(&cache, s, t0, &cfg)?);
        }
    }
    emit(cli, ladder)
}

fn evolve(cli: &Cli, a: &EvolveArgs) -> Outcome {
    let q = source(&a.field)?.field()?;
    let cfg = EvolveConfig {
        dt: a.dt,
        t_final: a.t_final,
        probe_lambdas: a.probe.clone(),
        report_every: a.report_every,
        safety: DEFAULT_SAFETY,
        e0_tau: a.e0_tau,
        reference_tau: 4.0,
    };
    let rep = run(&q, &cfg)?;
    if let Some(p) = &a.csv {
        rep.write_csv(p)?;
    }
    let aborted = rep.aborted.clone();
    emit(cli, rep)?;
    match aborted {
        Some(msg) => Err(GpxError::Regime(msg).into()),
        None => Ok(()),
    }
}

fn eigs(cli: &Cli, a: &EigsArgs) -> Outcome {
    let q = source(&a.field)?.field()?;
    let band = (-1.0 + a.band_margin, 1.0 - a.band_margin);
    emit(cli, eigen_report(&q, band, a.resolution)?)
}

#[derive(Serialize)]
struct VerifyResult {
    passed: usize,
    total: usize,
    checks: Vec<verify::Check>,
}

fn verify_cmd(cli: &Cli, a: &VerifyArgs) -> Outcome {
    if a.suite != "all" && !verify::SUITES.contains(&a.suite.as_str()) {
        return Err(GpxError::InvalidInput(format!("unknown suite '{}'", a.suite)).into());
    }
    let checks = verify::run(&a.suite, a.seed)?;
    let passed = checks.iter().filter(|c| c.passed).count();
    let total = checks.len();
    emit(cli, VerifyResult { passed, total, checks })?;
    if passed == total {
        Ok(())
    } else {
        Err(Failure::Verification(format!("{passed}/{total} checks passed")))
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("GPX_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            // Only fails if a pool already exists, which cannot happen this early.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    let outcome = match &cli.command {
        Command::Invariants(a) => invariants(&cli, a),
        Command::Transmission(a) => transmission(&cli, a),
        Command::Energy(a) => energy(&cli, a),
        Command::Evolve(a) => evolve(&cli, a),
        Command::Eigs(a) => eigs(&cli, a),
        Command::Verify(a) => verify_cmd(&cli, a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification(msg)) => {
            eprintln!("gpx: verification failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Error(e)) => {
            eprintln!("gpx: {e}");
            if e.is_regime() {
                ExitCode::from(3)
            } else if matches!(e, GpxError::Internal(_)) {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
