//! Run configuration read from a TOML file.
//!
//! ```toml
//! seed = 7
//! output_dir = "runs/ref"
//!
//! [family]
//! p = 6
//! speeds = [1.0, 2.0]
//! shifts = [-20.0, 0.0]
//!
//! [grid]
//! num_points = 4096
//! domain_length = 200.0
//! origin = -100.0
//!
//! [horizons]
//! S = 12.0
//! t0 = 5.0
//! ```
//!
//! `[evolve]` and `[tolerances]` are optional; see [`EvolveSection`] and
//! [`Tolerances`] for their defaults.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::constructor::ShootConfig;
use crate::error::{Error, Result};
use crate::evolver::EvolveConfig;
use crate::grid::GridSpec;
use crate::profiles::{self, SolitonFamily};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySection {
    pub p: u32,
    pub speeds: Vec<f64>,
    pub shifts: Vec<f64>,
    /// Allows `p <= 5` for comparison runs.
    #[serde(default)]
    pub allow_subcritical: bool,
}

/// Time stepping shared by forward runs and backward shooting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveSection {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub t_start: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_stride")]
    pub record_stride: usize,
    #[serde(default = "default_true")]
    pub dealias: bool,
}

fn default_dt() -> f64 {
    1.25e-4
}
fn default_t_end() -> f64 {
    5.0
}
fn default_stride() -> usize {
    80
}
fn default_true() -> bool {
    true
}

impl Default for EvolveSection {
    fn default() -> Self {
        EvolveSection {
            dt: default_dt(),
            t_start: 0.0,
            t_end: default_t_end(),
            record_stride: default_stride(),
            dealias: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Horizons {
    #[serde(rename = "S")]
    pub s: f64,
    pub t0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_shoot_tol")]
    pub shoot_tol: f64,
    /// Defaults to `10 shoot_tol e^{e_N t0}` once `e_N` is known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_class: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_eff_override: Option<f64>,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Noise level used for the reported horizon cap.
    #[serde(default = "default_noise")]
    pub noise_floor: f64,
    /// Secant corrections per recovered parameter in `classify`.
    #[serde(default = "default_refine")]
    pub refine_steps: usize,
    /// Rounding level of projections, bounding the usable plateau window.
    #[serde(default = "default_projection_noise")]
    pub projection_noise: f64,
}

fn default_shoot_tol() -> f64 {
    1e-10
}
fn default_max_iter() -> usize {
    15
}
fn default_noise() -> f64 {
    1e-12
}
fn default_refine() -> usize {
    1
}
fn default_projection_noise() -> f64 {
    1e-14
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            shoot_tol: default_shoot_tol(),
            tol_class: None,
            gamma_eff_override: None,
            max_iter: default_max_iter(),
            noise_floor: default_noise(),
            refine_steps: default_refine(),
            projection_noise: default_projection_noise(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    pub family: FamilySection,
    pub grid: GridSpec,
    #[serde(default)]
    pub evolve: EvolveSection,
    pub horizons: Horizons,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn prefixed(e: Error, prefix: &str) -> Error {
    match e {
        Error::Config { path, message } => Error::Config {
            path: format!("{prefix}.{path}"),
            message,
        },
        other => other,
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Parses and validates a configuration, filling defaults.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| line_of(text, s.start));
        let msg = e.message().to_string();
        match line {
            Some(l) => Error::config(format!("line {l}"), msg),
            None => Error::config("<document>", msg),
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config is always representable in TOML")
    }

    /// SHA-256 of the canonical TOML, ignoring where outputs go.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        hex::encode(Sha256::digest(c.to_toml().as_bytes()))
    }

    pub fn soliton_family(&self) -> Result<SolitonFamily> {
        let f = &self.family;
        let fam = if f.allow_subcritical {
            SolitonFamily::new_comparison(f.p, &f.speeds, &f.shifts)
        } else {
            SolitonFamily::new(f.p, &f.speeds, &f.shifts)
        };
        fam.map_err(|e| prefixed(e, "family"))
    }

    pub fn evolve_config(&self) -> EvolveConfig {
        let e = &self.evolve;
        EvolveConfig {
            dt: e.dt,
            t_start: e.t_start,
            t_end: e.t_end,
            record_stride: e.record_stride,
            dealias: e.dealias,
        }
    }

    pub fn shoot_config(&self, gamma_eff: f64) -> ShootConfig {
        ShootConfig {
            s: self.horizons.s,
            t0: self.horizons.t0,
            dt: self.evolve.dt.abs(),
            record_stride: self.evolve.record_stride,
            dealias: self.evolve.dealias,
            tol: self.tolerances.shoot_tol,
            max_iter: self.tolerances.max_iter,
            gamma_eff,
            noise_floor: self.tolerances.noise_floor,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fam = self.soliton_family()?;
        self.grid.validate()?;
        for m in fam.members() {
            profiles::check_box_width(fam.p(), m.speed, &self.grid)?;
        }
        self.evolve_config().validate()?;
        let h = self.horizons;
        if !(h.t0.is_finite() && h.s.is_finite() && h.s > h.t0) {
            return Err(Error::config("horizons.S", "S must be finite and exceed t0"));
        }
        for &t in &[h.t0, h.s] {
            for m in fam.members() {
                profiles::check_window(m, t, &self.grid).map_err(|e| match e {
                    Error::Window(msg) => Error::config("horizons", msg),
                    other => other,
                })?;
            }
        }
        let t = &self.tolerances;
        if !(t.shoot_tol > 0.0 && t.shoot_tol.is_finite()) {
            return Err(Error::config("tolerances.shoot_tol", "must be positive"));
        }
        if let Some(v) = t.tol_class {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config("tolerances.tol_class", "must be positive"));
            }
        }
        if !(t.projection_noise > 0.0 && t.projection_noise.is_finite()) {
            return Err(Error::config("tolerances.projection_noise", "must be positive"));
        }
        if let Some(v) = t.gamma_eff_override {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config("tolerances.gamma_eff_override", "must be positive"));
            }
        }
        if t.max_iter == 0 {
            return Err(Error::config("tolerances.max_iter", "must be at least 1"));
        }
        if !(t.noise_floor > 0.0) {
            return Err(Error::config("tolerances.noise_floor", "must be positive"));
        }
        Ok(())
    }
}
