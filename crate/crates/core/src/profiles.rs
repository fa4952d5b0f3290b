//! Closed-form soliton profiles and multi-soliton sums.
//!
//! `Q(x) = ((p+1) / (2 cosh^2((p-1) x / 2)))^(1/(p-1))` solves
//! `Q'' + Q^p = Q`, and `Q_c(x) = c^(1/(p-1)) Q(sqrt(c) x)` solves
//! `Q_c'' + Q_c^p = c Q_c`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec};

/// Relative size of a profile at the antipode of its center below which the
/// periodic box is considered wide enough.
pub const PROFILE_WRAP_TOL: f64 = 1e-13;

/// Minimum distance from a soliton center to the box edges, in decay lengths.
pub const WINDOW_DECAY_LENGTHS: f64 = 10.0;

fn ln_cosh(a: f64) -> f64 {
    let a = a.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// `Q_c(x)` evaluated without overflow far in the tails.
pub fn q_value(p: u32, c: f64, x: f64) -> f64 {
    let pm1 = (p - 1) as f64;
    let a = 0.5 * pm1 * c.sqrt() * x;
    let ln_q = (((p + 1) as f64 / 2.0).ln() - 2.0 * ln_cosh(a)) / pm1;
    c.powf(1.0 / pm1) * ln_q.exp()
}

/// `Q_c'(x) = -sqrt(c) tanh((p-1) sqrt(c) x / 2) Q_c(x)`.
pub fn q_prime(p: u32, c: f64, x: f64) -> f64 {
    let pm1 = (p - 1) as f64;
    -c.sqrt() * (0.5 * pm1 * c.sqrt() * x).tanh() * q_value(p, c, x)
}

/// `Q_c'' = c Q_c - Q_c^p`.
pub fn q_second(p: u32, c: f64, x: f64) -> f64 {
    let q = q_value(p, c, x);
    c * q - q.powi(p as i32)
}

/// `Q_c''' = (c - p Q_c^(p-1)) Q_c'`.
pub fn q_third(p: u32, c: f64, x: f64) -> f64 {
    let q = q_value(p, c, x);
    (c - p as f64 * q.powi(p as i32 - 1)) * q_prime(p, c, x)
}

/// Distance at which `Q_c` has fallen to `rel` times its peak.
pub fn decay_distance(p: u32, c: f64, rel: f64) -> f64 {
    let pm1 = (p - 1) as f64;
    // Q_c(d) / Q_c(0) = cosh(a)^(-2/(p-1)) with a = (p-1) sqrt(c) d / 2.
    let ln_cosh_target = -0.5 * pm1 * rel.ln();
    // acosh(e^y) = y + ln(1 + sqrt(1 - e^{-2y}))
    let a = ln_cosh_target + (1.0 + (1.0 - (-2.0 * ln_cosh_target).exp()).sqrt()).ln();
    2.0 * a / (pm1 * c.sqrt())
}

/// Which closed-form derivative to sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileDerivative {
    Value,
    First,
    Second,
    Third,
}

/// Samples `Q_c^{(k)}(x - center)` using the nearest periodic image.
pub fn sample_profile(
    p: u32,
    c: f64,
    grid: &GridSpec,
    center: f64,
    which: ProfileDerivative,
) -> Field {
    let f = match which {
        ProfileDerivative::Value => q_value,
        ProfileDerivative::First => q_prime,
        ProfileDerivative::Second => q_second,
        ProfileDerivative::Third => q_third,
    };
    Field::from_fn(*grid, |x| f(p, c, grid.wrapped_offset(x, center)))
}

/// Checks that the periodic box is wide enough for `Q_c`.
pub fn check_box_width(p: u32, c: f64, grid: &GridSpec) -> Result<()> {
    let ratio = q_value(p, c, 0.5 * grid.domain_length) / q_value(p, c, 0.0);
    if ratio >= PROFILE_WRAP_TOL {
        return Err(Error::config(
            "grid.domain_length",
            format!(
                "box of length {} too narrow for Q_c with c = {c}: need at least {:.3}",
                grid.domain_length,
                2.0 * decay_distance(p, c, PROFILE_WRAP_TOL)
            ),
        ));
    }
    Ok(())
}

/// `Q_c(. - center)` on `grid`.
pub fn q_profile(p: u32, c: f64, grid: &GridSpec, center: f64) -> Result<Field> {
    if p < 2 {
        return Err(Error::config("p", "exponent must be an integer >= 2"));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::config("speeds", format!("speed must be positive, got {c}")));
    }
    check_box_width(p, c, grid)?;
    Ok(sample_profile(p, c, grid, center, ProfileDerivative::Value))
}

/// One soliton `R_{c, x0}(t, x) = Q_c(x - c t - x0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolitonParams {
    pub speed: f64,
    pub shift: f64,
}

impl SolitonParams {
    pub fn new(speed: f64, shift: f64) -> Result<Self> {
        if !(speed > 0.0 && speed.is_finite()) {
            return Err(Error::config("speeds", format!("speed must be positive, got {speed}")));
        }
        if !shift.is_finite() {
            return Err(Error::config("shifts", "shift must be finite"));
        }
        Ok(SolitonParams { speed, shift })
    }

    pub fn position(&self, t: f64) -> f64 {
        self.shift + self.speed * t
    }

    pub fn decay_length(&self) -> f64 {
        1.0 / self.speed.sqrt()
    }
}

/// Exponent plus an ordered list of solitons with increasing speeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolitonFamily {
    p: u32,
    members: Vec<SolitonParams>,
}

impl SolitonFamily {
    /// Supercritical family: requires `p >= 6`.
    pub fn new(p: u32, speeds: &[f64], shifts: &[f64]) -> Result<Self> {
        if p < 6 {
            return Err(Error::config(
                "p",
                format!("p = {p} is not supercritical; an integer p > 5 is required"),
            ));
        }
        Self::new_comparison(p, speeds, shifts)
    }

    /// Same as [`SolitonFamily::new`] but also accepts `2 <= p <= 5`, for
    /// comparison runs against the subcritical and critical cases.
    pub fn new_comparison(p: u32, speeds: &[f64], shifts: &[f64]) -> Result<Self> {
        if p < 2 {
            return Err(Error::config("p", "exponent must be an integer >= 2"));
        }
        if speeds.is_empty() {
            return Err(Error::config("speeds", "at least one soliton is required"));
        }
        if speeds.len() != shifts.len() {
            return Err(Error::config(
                "shifts",
                format!("{} speeds but {} shifts", speeds.len(), shifts.len()),
            ));
        }
        if speeds.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::config("speeds", "speeds must be strictly increasing"));
        }
        let members = speeds
            .iter()
            .zip(shifts)
            .map(|(&c, &x)| SolitonParams::new(c, x))
            .collect::<Result<Vec<_>>>()?;
        Ok(SolitonFamily { p, members })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn members(&self) -> &[SolitonParams] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn speeds(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.speed).collect()
    }

    pub fn shifts(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.shift).collect()
    }

    /// Same speeds with every shift moved by `dx`.
    pub fn translated(&self, dx: f64) -> Self {
        SolitonFamily {
            p: self.p,
            members: self
                .members
                .iter()
                .map(|m| SolitonParams {
                    speed: m.speed,
                    shift: m.shift + dx,
                })
                .collect(),
        }
    }
}

/// `R_{c, x0}(t, .)` on `grid`.
pub fn soliton_field(s: &SolitonParams, p: u32, t: f64, grid: &GridSpec) -> Result<Field> {
    let center = s.position(t);
    check_window(s, t, grid)?;
    q_profile(p, s.speed, grid, center)
}

pub(crate) fn check_window(s: &SolitonParams, t: f64, grid: &GridSpec) -> Result<()> {
    let center = s.position(t);
    let need = WINDOW_DECAY_LENGTHS * s.decay_length();
    let have = grid.edge_distance(center);
    if have < need {
        return Err(Error::Window(format!(
            "soliton with c = {} sits at x = {center:.3} at t = {t}, {have:.3} from the box \
             edge; at least {need:.3} is required",
            s.speed
        )));
    }
    Ok(())
}

/// `R(t) = sum_j R_j(t)`.
pub fn multisoliton_sum(fam: &SolitonFamily, t: f64, grid: &GridSpec) -> Result<Field> {
    let mut sum = Field::zeros(*grid);
    for m in fam.members() {
        sum.axpy(1.0, &soliton_field(m, fam.p(), t, grid)?);
    }
    Ok(sum)
}

/// Interaction constants built from the speeds and the spectral data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteractionConstants {
    pub sigma0: f64,
    pub gamma_paper: f64,
    pub gamma_eff: f64,
    pub eta0: f64,
    pub e0: f64,
}

impl InteractionConstants {
    /// Replaces the working rate; it may not go below `gamma_paper`.
    pub fn with_gamma_eff(mut self, gamma_eff: f64) -> Result<Self> {
        if !(gamma_eff >= self.gamma_paper && gamma_eff.is_finite()) {
            return Err(Error::config(
                "tolerances.gamma_eff_override",
                format!("must be >= gamma_paper = {:e}", self.gamma_paper),
            ));
        }
        self.gamma_eff = gamma_eff;
        Ok(self)
    }
}

/// `sigma0 = min{eta0^(2/3) c_1, e0^(2/3) c_1, c_1, c_2 - c_1, ...}`,
/// `gamma_paper = sigma0^(3/2) / 1e6`, `gamma_eff = sigma0^(3/2) / 16`.
pub fn interaction_constants(
    fam: &SolitonFamily,
    e0: f64,
    eta0: f64,
) -> Result<InteractionConstants> {
    if !(e0 > 0.0 && eta0 > 0.0) {
        return Err(Error::Argument(format!(
            "e0 and eta0 must be positive, got {e0} and {eta0}"
        )));
    }
    let speeds = fam.speeds();
    let c1 = speeds[0];
    let mut sigma0 = (eta0.powf(2.0 / 3.0) * c1)
        .min(e0.powf(2.0 / 3.0) * c1)
        .min(c1);
    for w in speeds.windows(2) {
        sigma0 = sigma0.min(w[1] - w[0]);
    }
    let s32 = sigma0.powf(1.5);
    Ok(InteractionConstants {
        sigma0,
        gamma_paper: s32 / 1e6,
        gamma_eff: s32 / 16.0,
        eta0,
        e0,
    })
}
