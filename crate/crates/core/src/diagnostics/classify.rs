//! Recovery of the family parameters `A_j` from a trajectory, and the
//! residual against the reconstructed family member.

use serde::{Deserialize, Serialize};

use crate::constructor::FamilyBuilder;
use crate::error::{Error, Result};
use crate::evolver::Trajectory;
use crate::frame::MovingFrame;

use super::rates::{fit_rate, rate_ladder, RateFit};

/// Below this `max ||u - R||_H1` on the fit window the trajectory counts as
/// converged without a rate test.
const CONVERGED_RESIDUAL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyConfig {
    pub gamma_eff: f64,
    /// Components with `max |e^{e_j t} alpha| < tol_class` are zero.
    pub tol_class: f64,
    /// Fraction of the record span, at the late end, used for plateaus.
    pub fit_fraction: f64,
    /// Secant corrections from the plateau of `u` to the construction
    /// parameter; each one builds a family member.
    #[serde(default = "default_refine")]
    pub refine_steps: usize,
    /// Rounding level of a projection `alpha_j`. Multiplied by `e^{e_j t}`
    /// it bounds the noise in `P_j`; plateau windows end where that bound
    /// reaches `tol_class / 10`.
    #[serde(default = "default_projection_noise")]
    pub projection_noise: f64,
}

fn default_projection_noise() -> f64 {
    1e-14
}

fn default_refine() -> usize {
    1
}

impl ClassifyConfig {
    /// `tol_class = 10 tol e^{e_N t0}`.
    pub fn new(gamma_eff: f64, shoot_tol: f64, e_max: f64, t0: f64) -> Self {
        ClassifyConfig {
            gamma_eff,
            tol_class: 10.0 * shoot_tol * (e_max * t0).exp(),
            fit_fraction: 1.0 / 3.0,
            refine_steps: default_refine(),
            projection_noise: default_projection_noise(),
        }
    }

    /// Plateau window for a member with rate `e_j`: the late `fit_fraction`
    /// of the records before amplified rounding reaches `tol_class / 10`.
    pub fn plateau_window(&self, times: &[f64], e_j: f64) -> (f64, f64) {
        let trusted = (self.tol_class / (10.0 * self.projection_noise)).ln() / e_j;
        let t1 = times.last().unwrap().min(trusted);
        (t1 - self.fit_fraction * (t1 - times[0]), t1)
    }
}

/// Plateau estimate of `lim e^{e_j t} alpha(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plateau {
    pub j: usize,
    /// The construction parameter: `raw`, corrected so that the member built
    /// with it has the same plateau as the trajectory.
    pub value: f64,
    /// Plateau of the trajectory itself.
    pub raw: f64,
    /// Size of the last secant correction.
    pub correction: f64,
    /// Fitted slope of `log |e^{e_j t} alpha|`; zero when the component is
    /// below `tol_class`.
    pub slope: f64,
    pub window: (f64, f64),
    pub max_abs: f64,
    pub zero: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub a: Vec<f64>,
    pub plateaus: Vec<Plateau>,
    /// Fit of `||u - R||_H1` on the plateau window, if it is not already
    /// negligible.
    pub convergence: Option<RateFit>,
    /// Rates on shrinking late windows, per stage.
    pub ladders: Vec<Vec<((f64, f64), RateFit)>>,
}

fn fit_window(times: &[f64], fraction: f64) -> (f64, f64) {
    let t0 = times[0];
    let t1 = *times.last().unwrap();
    (t1 - fraction * (t1 - t0), t1)
}

/// `(t, int (u - phi_prev) Z_j^-(t))` for the 1-based member `j`.
pub fn stage_projection(
    traj: &Trajectory,
    phi_prev: &Trajectory,
    frame: &MovingFrame,
    j: usize,
) -> Result<Vec<(f64, f64)>> {
    if traj.len() != phi_prev.len()
        || traj
            .times
            .iter()
            .zip(&phi_prev.times)
            .any(|(a, b)| (a - b).abs() > 1e-9 * a.abs().max(1.0))
    {
        return Err(Error::Argument(
            "trajectory and family member are recorded at different times".into(),
        ));
    }
    traj.times
        .iter()
        .zip(traj.snapshots.iter().zip(&phi_prev.snapshots))
        .map(|(&t, (u, phi))| {
            let eps = u - phi;
            Ok((t, eps.dot(&frame.z_minus(j - 1, t))))
        })
        .collect()
}

/// Plateau of `P(t) = e^{e_j t} alpha(t)` on `window`. The value is the
/// constant term of a least-squares fit `P = A + B e^{-e_j t}`, the shape of
/// the leading correction.
pub fn plateau_estimate(
    series: &[(f64, f64)],
    j: usize,
    e_j: f64,
    window: (f64, f64),
    cfg: &ClassifyConfig,
) -> Result<Plateau> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(t, _)| *t >= window.0 && *t <= window.1)
        .map(|&(t, a)| (t, (e_j * t).exp() * a))
        .collect();
    if pts.len() < super::MIN_FIT_POINTS {
        return Err(Error::Domain(format!("{} samples in the plateau window", pts.len())));
    }
    let max_abs = pts.iter().fold(0.0f64, |m, p| m.max(p.1.abs()));
    if max_abs < cfg.tol_class {
        return Ok(Plateau {
            j,
            value: 0.0,
            raw: 0.0,
            correction: 0.0,
            slope: 0.0,
            window,
            max_abs,
            zero: true,
        });
    }
    let uncertain = |msg: String| Error::ClassificationUncertain {
        component: j,
        partial: Vec::new(),
        message: msg,
    };
    let sign = pts[0].1.signum();
    if pts.iter().any(|p| p.1.signum() != sign || p.1 == 0.0) {
        return Err(uncertain(format!(
            "e^(e_{j} t) alpha changes sign on [{}, {}]",
            window.0, window.1
        )));
    }
    let abs: Vec<(f64, f64)> = pts.iter().map(|&(t, v)| (t, v.abs())).collect();
    let slope = -fit_rate(&abs, window)?.rate;
    if slope.abs() > cfg.gamma_eff / 10.0 {
        return Err(uncertain(format!(
            "no plateau for member {j}: log slope {slope:.3e} exceeds gamma_eff/10 = {:.3e}",
            cfg.gamma_eff / 10.0
        )));
    }
    // Normal equations for P = A + B g with g = e^{-e_j t}.
    let n = pts.len() as f64;
    let (mut sg, mut sgg, mut sp, mut sgp) = (0.0, 0.0, 0.0, 0.0);
    for &(t, p) in &pts {
        let g = (-e_j * t).exp();
        sg += g;
        sgg += g * g;
        sp += p;
        sgp += g * p;
    }
    let det = n * sgg - sg * sg;
    let value = if det.abs() > 1e-300 {
        (sgg * sp - sg * sgp) / det
    } else {
        sp / n
    };
    Ok(Plateau {
        j,
        value,
        raw: value,
        correction: 0.0,
        slope,
        window,
        max_abs,
        zero: false,
    })
}

/// With a finite horizon the final data fix `alpha_j^-(S)` exactly, which
/// shifts the late plateau by a second-order amount `O(A_j^2 e^{-e_j S})`.
/// The parameter that reproduces the trajectory is therefore found by
/// matching the plateau of the rebuilt member to that of `u`.
fn refine(
    mut p: Plateau,
    prefix: &[f64],
    phi: &Trajectory,
    frame: &MovingFrame,
    builder: &mut dyn FamilyBuilder,
    window: (f64, f64),
    cfg: &ClassifyConfig,
) -> Result<Plateau> {
    if p.zero {
        return Ok(p);
    }
    let e_j = frame.basis(p.j - 1).e_c;
    for _ in 0..cfg.refine_steps {
        let mut trial = prefix.to_vec();
        trial.push(p.value);
        let member = builder.phi(&trial)?;
        let series = stage_projection(&member, phi, frame, p.j)?;
        let q = plateau_estimate(&series, p.j, e_j, window, cfg)?;
        p.correction = q.raw - p.raw;
        p.value -= p.correction;
    }
    Ok(p)
}

/// Recovers `A_1, ..., A_N` one member at a time, each from the trajectory
/// minus the family member built from the components found so far.
pub fn classify(
    traj: &Trajectory,
    frame: &MovingFrame,
    builder: &mut dyn FamilyBuilder,
    cfg: &ClassifyConfig,
) -> Result<Classification> {
    if traj.len() < super::MIN_FIT_POINTS {
        return Err(Error::Domain(format!("trajectory has only {} records", traj.len())));
    }
    let window = fit_window(&traj.times, cfg.fit_fraction);

    let mut residual = Vec::new();
    for (&t, u) in traj.times.iter().zip(&traj.snapshots) {
        if t >= window.0 {
            residual.push((t, (u - &frame.multisoliton(t)?).h1_norm()));
        }
    }
    let worst = residual.iter().fold(0.0f64, |m, r| m.max(r.1));
    let convergence = if worst < CONVERGED_RESIDUAL {
        None
    } else {
        let fit = fit_rate(&residual, window)?;
        if fit.rate < cfg.gamma_eff {
            return Err(Error::OutOfBasin(format!(
                "||u - R||_H1 decays at rate {:.3e} < gamma_eff = {:.3e} (max {worst:.3e})",
                fit.rate, cfg.gamma_eff
            )));
        }
        Some(fit)
    };

    let n = frame.len();
    let mut a = Vec::with_capacity(n);
    let mut plateaus = Vec::with_capacity(n);
    let mut ladders = Vec::with_capacity(n);
    for j in 1..=n {
        let phi = builder.phi(&a)?;
        let series = stage_projection(traj, &phi, frame, j)?;
        let e_j = frame.basis(j - 1).e_c;
        let eps_norm: Vec<(f64, f64)> = traj
            .times
            .iter()
            .zip(traj.snapshots.iter().zip(&phi.snapshots))
            .map(|(&t, (u, f))| (t, (u - f).h1_norm()))
            .collect();
        let span = traj.times.last().unwrap() - traj.times[0];
        ladders.push(rate_ladder(&eps_norm, (traj.times[0], window.1), span / 6.0));
        let pw = cfg.plateau_window(&traj.times, e_j);
        match plateau_estimate(&series, j, e_j, pw, cfg).and_then(|p| refine(p, &a, &phi, frame, builder, pw, cfg)) {
            Ok(p) => {
                a.push(p.value);
                plateaus.push(p);
            }
            Err(Error::ClassificationUncertain { component, message, .. }) => {
                return Err(Error::ClassificationUncertain {
                    component,
                    partial: a,
                    message,
                })
            }
            Err(e) => return Err(e),
        }
    }
    Ok(Classification {
        a,
        plateaus,
        convergence,
        ladders,
    })
}

/// `theta(t) = sup_{t' >= t} e^{e_N t'} ||u(t') - phi_A(t')||_H1`.
pub fn uniqueness_residual(
    traj: &Trajectory,
    a: &[f64],
    builder: &mut dyn FamilyBuilder,
    frame: &MovingFrame,
) -> Result<Vec<(f64, f64)>> {
    if traj.is_empty() {
        return Ok(Vec::new());
    }
    let phi = builder.phi(a)?;
    if phi.len() != traj.len() {
        return Err(Error::Argument(
            "trajectory and family member are recorded at different times".into(),
        ));
    }
    let e_n = frame.basis(frame.len() - 1).e_c;
    let mut theta = vec![(0.0, 0.0); traj.len()];
    let mut sup = 0.0f64;
    for i in (0..traj.len()).rev() {
        let t = traj.times[i];
        let d = (&traj.snapshots[i] - &phi.snapshots[i]).h1_norm();
        sup = sup.max((e_n * t).exp() * d);
        theta[i] = (t, sup);
    }
    Ok(theta)
}
