//! Parsers for the flag grammar: grids, complex numbers, lists and profiles.

use std::path::Path;

use gpx_core::grid::{Grid, GridField};
use gpx_core::profiles::Profile;
use gpx_core::{GpxError, Result};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

/// `L=<half length>,N=<points>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub half_length: f64,
    pub n_points: usize,
}

impl GridSpec {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.half_length, self.n_points)
    }
}

pub fn grid_spec(text: &str) -> std::result::Result<GridSpec, String> {
    let mut half_length = None;
    let mut n_points = None;
    for part in text.split(',') {
        let (k, v) = part.split_once('=').ok_or_else(|| format!("expected KEY=VALUE, got '{part}'"))?;
        match k.trim() {
            "L" => half_length = Some(v.trim().parse::<f64>().map_err(|e| format!("L: {e}"))?),
            "N" => n_points = Some(v.trim().parse::<usize>().map_err(|e| format!("N: {e}"))?),
            other => return Err(format!("unknown grid key '{other}'")),
        }
    }
    Ok(GridSpec {
        half_length: half_length.ok_or("missing L")?,
        n_points: n_points.ok_or("missing N")?,
    })
}

/// Parses `a`, `bi`, `a+bi`, `a-bi`, `i`, `-i` (and `j` for `i`).
pub fn complex(text: &str) -> std::result::Result<C64, String> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect::<String>().replace('j', "i");
    if s.is_empty() {
        return Err("empty complex number".into());
    }
    let bad = || format!("cannot parse complex number '{text}'");
    let imag = |t: &str| -> std::result::Result<f64, String> {
        match t {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            _ => t.parse::<f64>().map_err(|_| bad()),
        }
    };
    let Some(body) = s.strip_suffix('i') else {
        return s.parse::<f64>().map(|re| C64::new(re, 0.0)).map_err(|_| bad());
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len()).rev().find(|&k| {
        (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E')
    });
    match split {
        Some(k) => {
            let re = body[..k].parse::<f64>().map_err(|_| bad())?;
            Ok(C64::new(re, imag(&body[k..])?))
        }
        None => Ok(C64::new(0.0, imag(body)?)),
    }
}

/// `re0:re1:n_re,im0:im1:n_im`, a rectangular λ-grid.
pub fn lambda_grid(text: &str) -> std::result::Result<Vec<C64>, String> {
    let axes: Vec<&str> = text.split(',').collect();
    if axes.len() != 2 {
        return Err("expected re0:re1:n,im0:im1:n".into());
    }
    let axis = |t: &str| -> std::result::Result<Vec<f64>, String> {
        let p: Vec<&str> = t.split(':').collect();
        if p.len() != 3 {
            return Err(format!("expected lo:hi:n, got '{t}'"));
        }
        let lo = p[0].parse::<f64>().map_err(|e| e.to_string())?;
        let hi = p[1].parse::<f64>().map_err(|e| e.to_string())?;
        let n = p[2].parse::<usize>().map_err(|e| e.to_string())?;
        if n == 0 {
            return Err("axis needs at least one point".into());
        }
        Ok((0..n).map(|k| if n == 1 { lo } else { lo + (hi - lo) * k as f64 / (n - 1) as f64 }).collect())
    };
    let (re, im) = (axis(axes[0])?, axis(axes[1])?);
    Ok(im.iter().flat_map(|&y| re.iter().map(move |&x| C64::new(x, y))).collect())
}

/// Where a field comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum FieldSource {
    Profile { profile: Profile, grid: GridSpec },
    Csv { path: String },
}

impl FieldSource {
    /// Inline JSON, `constant_one`, a JSON profile file or a CSV field file.
    pub fn resolve(text: &str, grid: GridSpec) -> Result<FieldSource> {
        let t = text.trim();
        if t.starts_with('{') || t == "constant_one" {
            return Ok(FieldSource::Profile { profile: Profile::from_json(t)?, grid });
        }
        let path = Path::new(t);
        if !path.exists() {
            return Err(GpxError::InvalidInput(format!("'{t}' is neither a profile nor an existing file")));
        }
        if path.extension().is_some_and(|e| e == "json") {
            let text = std::fs::read_to_string(path)?;
            return Ok(FieldSource::Profile { profile: Profile::from_json(&text)?, grid });
        }
        Ok(FieldSource::Csv { path: t.to_string() })
    }

    pub fn field(&self) -> Result<GridField> {
        match self {
            FieldSource::Profile { profile, grid } => profile.sample(grid.grid()?, 0.0),
            FieldSource::Csv { path } => GridField::read_csv(Path::new(path)),
        }
    }
}
