//! Measurements on trajectories: modulation, projections, weights and local
//! quantities, rate fits, and classification of family members.

mod classify;
mod energy;
mod modulation;
mod rates;
mod weights;

pub use classify::{
    classify, plateau_estimate, stage_projection, uniqueness_residual, Classification, ClassifyConfig,
    Plateau,
};
pub use energy::{functional_h, local_linearized_energy, local_quantities, nonlinear_remainder, LocalQuantities};
pub use modulation::{modulate, ModulationState};
pub use rates::{
    alpha_ode_residual, central_derivative, fit_rate, rate_ladder, AlphaResidual, RateFit, MIN_FIT_POINTS,
};
pub use weights::{midpoint, psi, psi_prime, psi_third, weights, Weights};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolver::Trajectory;
use crate::frame::MovingFrame;
use crate::grid::Field;
use crate::profiles::{sample_profile, ProfileDerivative};

/// Projections of one perturbation on the fixed soliton paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projections {
    pub alpha_plus: Vec<f64>,
    pub alpha_minus: Vec<f64>,
    /// `a_k = -int z R_kx / int (Q'_{c_k})^2`.
    pub a: Vec<f64>,
}

/// `alpha_k^pm(t) = int z Z_k^pm(t)` and the translation coefficients.
pub fn project(z: &Field, frame: &MovingFrame, t: f64) -> Result<Projections> {
    if z.grid() != frame.grid() {
        return Err(Error::Argument("projection on a different grid".into()));
    }
    let n = frame.len();
    let mut out = Projections {
        alpha_plus: Vec::with_capacity(n),
        alpha_minus: Vec::with_capacity(n),
        a: Vec::with_capacity(n),
    };
    for k in 0..n {
        out.alpha_plus.push(z.dot(&frame.z_plus(k, t)));
        out.alpha_minus.push(z.dot(&frame.z_minus(k, t)));
        let rx = frame.r_x(k, t);
        out.a.push(-z.dot(&rx) / rx.dot(&rx));
    }
    Ok(out)
}

/// Projections along a trajectory; every array is indexed `[k][time]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionSeries {
    pub times: Vec<f64>,
    pub alpha_plus: Vec<Vec<f64>>,
    pub alpha_minus: Vec<Vec<f64>>,
    pub a: Vec<Vec<f64>>,
    /// `||z(t)||_H1`.
    pub z_norms: Vec<f64>,
}

/// Projects `z_of(i, t, u_i)` for every record of `traj`.
pub fn projection_series<F>(frame: &MovingFrame, traj: &Trajectory, mut z_of: F) -> Result<ProjectionSeries>
where
    F: FnMut(usize, f64, &Field) -> Result<Field>,
{
    let n = frame.len();
    let mut s = ProjectionSeries {
        times: Vec::with_capacity(traj.len()),
        alpha_plus: vec![Vec::with_capacity(traj.len()); n],
        alpha_minus: vec![Vec::with_capacity(traj.len()); n],
        a: vec![Vec::with_capacity(traj.len()); n],
        z_norms: Vec::with_capacity(traj.len()),
    };
    for (i, (&t, u)) in traj.times.iter().zip(&traj.snapshots).enumerate() {
        let z = z_of(i, t, u)?;
        let p = project(&z, frame, t)?;
        s.times.push(t);
        s.z_norms.push(z.h1_norm());
        for k in 0..n {
            s.alpha_plus[k].push(p.alpha_plus[k]);
            s.alpha_minus[k].push(p.alpha_minus[k]);
            s.a[k].push(p.a[k]);
        }
    }
    Ok(s)
}

/// Almost-monotonicity of the mass left of each cut-off.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    /// Number of members summed (1-based `j`).
    pub j: usize,
    /// `max_t max_{t' >= t} [S_j(t) - S_j(t')]` with `S_j = sum_{k<=j} M_k`.
    pub worst_violation: f64,
    /// Decay rate and prefactor of the smallest exponential above
    /// `|S_j(t) - sum_{k<=j} int Q_{c_k}^2|`.
    pub tail_rate: f64,
    pub tail_prefactor: f64,
    /// Largest `violation(t) / tail(t)`; at most 1 when the check holds.
    pub worst_ratio: f64,
    pub pass: bool,
}

/// Checks, for `j = 1..N`, that `S_j(t)` decreases after any time `t` by no
/// more than the fitted exponential tail of `S_j - sum int Q^2` at `t`.
pub fn mass_monotonicity(frame: &MovingFrame, traj: &Trajectory, sigma0: f64) -> Result<Vec<MonotonicityReport>> {
    let fam = frame.family();
    let grid = *frame.grid();
    let soliton_mass: Vec<f64> = fam
        .members()
        .iter()
        .map(|m| {
            let q = sample_profile(fam.p(), m.speed, &grid, grid.center(), ProfileDerivative::Value);
            q.dot(&q)
        })
        .collect();
    let masses: Vec<Vec<f64>> = traj
        .times
        .iter()
        .zip(&traj.snapshots)
        .map(|(&t, u)| local_quantities(u, fam, t, sigma0).mass)
        .collect();
    let mut reports = Vec::with_capacity(fam.len());
    for j in 1..=fam.len() {
        let s: Vec<f64> = masses.iter().map(|m| m[..j].iter().sum()).collect();
        let target: f64 = soliton_mass[..j].iter().sum();
        let dev: Vec<(f64, f64)> = traj
            .times
            .iter()
            .zip(&s)
            .map(|(&t, &v)| (t, (v - target).abs()))
            .collect();
        let window = (traj.times[0], *traj.times.last().unwrap());
        let fit = fit_rate(&dev, window)?;
        let k = dev
            .iter()
            .map(|(t, d)| d * (fit.rate * t).exp())
            .fold(0.0f64, f64::max);
        // Running minimum of S from the end gives max_{t' >= t} [S(t) - S(t')].
        let mut later_min = f64::INFINITY;
        let mut worst = 0.0f64;
        let mut worst_ratio = 0.0f64;
        for i in (0..s.len()).rev() {
            later_min = later_min.min(s[i]);
            let v = (s[i] - later_min).max(0.0);
            let tail = k * (-fit.rate * traj.times[i]).exp();
            worst = worst.max(v);
            if v > 0.0 {
                worst_ratio = worst_ratio.max(v / tail);
            }
        }
        reports.push(MonotonicityReport {
            j,
            worst_violation: worst,
            tail_rate: fit.rate,
            tail_prefactor: k,
            worst_ratio,
            pass: worst_ratio <= 1.0,
        });
    }
    Ok(reports)
}
