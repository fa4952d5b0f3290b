//! Exponential-rate fits and the residual of the projected dynamics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::ProjectionSeries;

/// Least-squares fit of `log v = log prefactor - rate t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// Decay exponent; positive means decaying.
    pub rate: f64,
    pub prefactor: f64,
    pub r_squared: f64,
    pub points: usize,
}

pub const MIN_FIT_POINTS: usize = 10;

/// Fits the samples with `t` in `window` (inclusive).
pub fn fit_rate(series: &[(f64, f64)], window: (f64, f64)) -> Result<RateFit> {
    let (ta, tb) = window;
    let pts: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|(t, _)| *t >= ta && *t <= tb)
        .collect();
    if pts.len() < MIN_FIT_POINTS {
        return Err(Error::Domain(format!(
            "{} samples in [{ta}, {tb}], at least {MIN_FIT_POINTS} needed",
            pts.len()
        )));
    }
    if let Some((t, v)) = pts.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::Domain(format!("non-positive value {v:e} at t = {t}")));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ml = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let mut stt = 0.0;
    let mut stl = 0.0;
    let mut sll = 0.0;
    for &(t, v) in &pts {
        let dt = t - mt;
        let dl = v.ln() - ml;
        stt += dt * dt;
        stl += dt * dl;
        sll += dl * dl;
    }
    if stt == 0.0 {
        return Err(Error::Domain("all samples at the same time".into()));
    }
    let slope = stl / stt;
    let intercept = ml - slope * mt;
    // A flat series has nothing left to explain once rounding is discounted.
    let flat = sll <= 1e-26 * n * ml.abs().max(1.0).powi(2);
    let r_squared = if flat { 1.0 } else { stl * stl / (stt * sll) };
    Ok(RateFit {
        rate: -slope,
        prefactor: intercept.exp(),
        r_squared,
        points: pts.len(),
    })
}

/// Successive fits over windows `[t_a + i * step, t_b]` until fewer than
/// [`MIN_FIT_POINTS`] samples remain, as a ladder of late-time rates.
pub fn rate_ladder(series: &[(f64, f64)], window: (f64, f64), step: f64) -> Vec<((f64, f64), RateFit)> {
    let mut out = Vec::new();
    let mut ta = window.0;
    while ta < window.1 {
        match fit_rate(series, (ta, window.1)) {
            Ok(f) => out.push(((ta, window.1), f)),
            Err(_) => break,
        }
        ta += step;
    }
    out
}

/// `max_t |d/dt alpha_k^pm -/+ e_k alpha_k^pm|` per member, each divided by
/// `max_t ||z||_H1` (or left raw if `z` vanishes identically).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaResidual {
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
    pub z_max: f64,
}

impl AlphaResidual {
    pub fn worst(&self) -> f64 {
        self.plus.iter().chain(&self.minus).fold(0.0, |m, v| m.max(*v))
    }
}

fn uniform_step(times: &[f64]) -> Result<f64> {
    let dt = times[1] - times[0];
    for w in times.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.abs() {
            return Err(Error::Domain("alpha residual needs uniform time sampling".into()));
        }
    }
    Ok(dt)
}

/// Fourth-order central differences at the interior samples.
pub fn central_derivative(values: &[f64], dt: f64) -> Vec<f64> {
    (2..values.len() - 2)
        .map(|i| (values[i - 2] - 8.0 * values[i - 1] + 8.0 * values[i + 1] - values[i + 2]) / (12.0 * dt))
        .collect()
}

pub fn alpha_ode_residual(series: &ProjectionSeries, rates: &[f64]) -> Result<AlphaResidual> {
    let t = &series.times;
    if t.len() < 5 {
        return Err(Error::Domain(format!(
            "{} samples, at least 5 needed for the fourth-order stencil",
            t.len()
        )));
    }
    if rates.len() != series.alpha_plus.len() {
        return Err(Error::Argument("one rate per member expected".into()));
    }
    let dt = uniform_step(t)?;
    let z_max = series.z_norms.iter().fold(0.0f64, |m, v| m.max(*v));
    let scale = if z_max > 0.0 { z_max } else { 1.0 };
    let worst = |alpha: &[f64], sign: f64, e: f64| {
        let d = central_derivative(alpha, dt);
        d.iter()
            .enumerate()
            .map(|(i, di)| (di - sign * e * alpha[i + 2]).abs())
            .fold(0.0, f64::max)
            / scale
    };
    let plus = series
        .alpha_plus
        .iter()
        .zip(rates)
        .map(|(a, &e)| worst(a, 1.0, e))
        .collect();
    let minus = series
        .alpha_minus
        .iter()
        .zip(rates)
        .map(|(a, &e)| worst(a, -1.0, e))
        .collect();
    Ok(AlphaResidual { plus, minus, z_max })
}
