//! Final-data shooting for multi-solitons and their unstable-direction family.
//!
//! Stage `j` starts from `phi(S) + A_j e^{-e_j S} Y_j^+(S) + sum_{k>j} b_k
//! Y_k^+(S)`, solves backward to `t0`, and adjusts `b` until the components
//! along the backward-growing directions `alpha_k^-(t0)` vanish. Stage 0 is
//! the base multi-soliton around `R(t)` with every member free.

use std::collections::HashMap;
use std::sync::Arc;

use faer::prelude::*;
use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolver::{evolve, evolve_observed, EvolveConfig, Trajectory};
use crate::frame::MovingFrame;
use crate::grid::Field;

/// Everything a stage needs besides the frame and the background.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShootConfig {
    /// Final time `S`.
    pub s: f64,
    pub t0: f64,
    pub dt: f64,
    pub record_stride: usize,
    #[serde(default = "default_true")]
    pub dealias: bool,
    /// Target for `max_k |alpha_k^-(t0)|`.
    pub tol: f64,
    pub max_iter: usize,
    pub gamma_eff: f64,
    /// Noise level assumed for the horizon cap.
    #[serde(default = "default_noise")]
    pub noise_floor: f64,
}

fn default_true() -> bool {
    true
}

fn default_noise() -> f64 {
    1e-12
}

impl ShootConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.s > self.t0) {
            return Err(Error::config("horizons.S", "S must exceed t0"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::config("tolerances.shoot_tol", "must be positive"));
        }
        if !(self.gamma_eff > 0.0) {
            return Err(Error::config("tolerances.gamma_eff_override", "must be positive"));
        }
        self.backward().validate()
    }

    /// The backward solve shared by every stage, so their records line up.
    pub fn backward(&self) -> EvolveConfig {
        EvolveConfig {
            dt: -self.dt.abs(),
            t_start: self.s,
            t_end: self.t0,
            record_stride: self.record_stride,
            dealias: self.dealias,
        }
    }

    /// Ascending record times on `[t0, S]`.
    pub fn record_times(&self) -> Vec<f64> {
        let mut t = self.backward().record_times();
        t.reverse();
        t
    }

    /// Longest `S - t0` for which noise at `noise_floor`, amplified at rate
    /// `e_max`, stays below `tol / 10`.
    pub fn horizon_cap(&self, e_max: f64) -> f64 {
        (self.tol / 10.0 / self.noise_floor).ln() / e_max
    }
}

/// Final data of one stage. `j` is 1-based for the perturbed member, `0` for
/// the base stage; `b[i]` multiplies member `j + i` (0-based).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalDataSpec {
    pub j: usize,
    pub a_j: f64,
    pub s: f64,
    pub b: Vec<f64>,
}

/// Square matrix indexed by the free members of a stage.
pub type Matrix = Vec<Vec<f64>>;

/// `Phi[k][l] = int Y_l^+(S) Z_k^-(S)` for the free members `k, l >= j`
/// (0-based).
pub fn gram_matrix(frame: &MovingFrame, j: usize, s: f64) -> Result<Matrix> {
    check_stage(frame, j)?;
    frame.multisoliton(s)?;
    let free: Vec<usize> = (j..frame.len()).collect();
    let ys: Vec<Field> = free.iter().map(|&l| frame.y_plus(l, s)).collect();
    let zs: Vec<Field> = free.iter().map(|&k| frame.z_minus(k, s)).collect();
    Ok(zs.iter().map(|z| ys.iter().map(|y| y.dot(z)).collect()).collect())
}

fn check_stage(frame: &MovingFrame, j: usize) -> Result<()> {
    if j > frame.len() {
        return Err(Error::Argument(format!(
            "stage {j} out of range for {} solitons",
            frame.len()
        )));
    }
    Ok(())
}

fn to_mat(m: &Matrix) -> Mat<f64> {
    Mat::from_fn(m.len(), m.len(), |i, j| m[i][j])
}

fn spectral_norm(m: &Mat<f64>) -> Result<f64> {
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    let s = m
        .singular_values()
        .map_err(|e| Error::Convergence(format!("svd failed: {e:?}")))?;
    Ok(s.iter().cloned().fold(0.0, f64::max))
}

fn euclid(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |s, x| s + x * x).sqrt()
}

/// `beta = Phi^{-1} a`, provided `||Phi - Id|| <= 1/2`.
pub fn modulated_beta(phi: &Matrix, a: &[f64]) -> Result<Vec<f64>> {
    let n = phi.len();
    if a.len() != n || phi.iter().any(|r| r.len() != n) {
        return Err(Error::Argument("dimension mismatch in modulated_beta".into()));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let m = to_mat(phi);
    let off = Mat::from_fn(n, n, |i, j| m[(i, j)] - if i == j { 1.0 } else { 0.0 });
    let norm = spectral_norm(&off)?;
    if norm > 0.5 {
        return Err(Error::HorizonTooSmall { norm });
    }
    let rhs = Mat::from_fn(n, 1, |i, _| a[i]);
    let sol = m.partial_piv_lu().solve(&rhs);
    let beta: Vec<f64> = (0..n).map(|i| sol[(i, 0)]).collect();
    // Guaranteed by the Neumann series when ||Phi - Id|| <= 1/2.
    debug_assert!(euclid(&beta) <= 2.0 * euclid(a) * (1.0 + 1e-12));
    Ok(beta)
}

/// `phi(S) + A_j e^{-e_j S} Y_j^+(S) + sum_k b_k Y_k^+(S)`.
pub fn assemble_final_data(
    spec: &FinalDataSpec,
    frame: &MovingFrame,
    phi_at_s: &Field,
) -> Result<Field> {
    check_stage(frame, spec.j)?;
    if phi_at_s.grid() != frame.grid() {
        return Err(Error::Argument("final data and bases live on different grids".into()));
    }
    if spec.b.len() != frame.len() - spec.j {
        return Err(Error::Argument(format!(
            "stage {} needs {} coefficients, got {}",
            spec.j,
            frame.len() - spec.j,
            spec.b.len()
        )));
    }
    let mut u = phi_at_s.clone();
    if spec.j > 0 && spec.a_j != 0.0 {
        let k = spec.j - 1;
        let amp = spec.a_j * (-frame.basis(k).e_c * spec.s).exp();
        u.axpy(amp, &frame.y_plus(k, spec.s));
    }
    for (i, &b) in spec.b.iter().enumerate() {
        if b != 0.0 {
            u.axpy(b, &frame.y_plus(spec.j + i, spec.s));
        }
    }
    Ok(u)
}

/// What the perturbation is measured against during a stage.
#[derive(Debug, Clone, Copy)]
pub enum Background<'a> {
    /// The sum of solitons `R(t)`.
    Multisoliton,
    /// A previous stage, recorded on the stage time grid.
    Trajectory(&'a Trajectory),
}

impl Background<'_> {
    fn at(&self, frame: &MovingFrame, idx: usize, t: f64) -> Result<Field> {
        match self {
            Background::Multisoliton => frame.multisoliton(t),
            Background::Trajectory(tr) => {
                if (tr.times[idx] - t).abs() > 1e-9 * t.abs().max(1.0) {
                    return Err(Error::Argument(format!(
                        "background record {idx} is at t = {}, expected {t}",
                        tr.times[idx]
                    )));
                }
                Ok(tr.snapshots[idx].clone())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShootExit {
    Converged,
    MaxIter,
    BlowUp,
}

/// `tube(t) = K e^{-(e_j + gamma_eff) t}`; `e_0 = 0` for the base stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tube {
    pub k: f64,
    pub rate: f64,
}

impl Tube {
    pub fn at(&self, t: f64) -> f64 {
        self.k * (-self.rate * t).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub a: Vec<f64>,
    pub alpha_t0: Vec<f64>,
    pub damping: f64,
}

#[derive(Debug, Clone)]
pub struct ShootingResult {
    pub j: usize,
    pub a_j: f64,
    /// Final-data coefficients `b*`.
    pub b_star: Vec<f64>,
    /// The prescribed `alpha^-(S)` that produced `b*`.
    pub a_star: Vec<f64>,
    pub alpha_t0: Vec<f64>,
    pub iterations: usize,
    pub exit: ShootExit,
    pub trajectory: Trajectory,
    /// `(t, ||u - phi - A_j e^{-e_j t} Y_j^+||_{H^1})`, ascending in `t`.
    pub residual_series: Vec<(f64, f64)>,
    pub tube: Tube,
    pub tube_ok: bool,
    pub history: Vec<IterationRecord>,
    /// `||b*||` against `2 e^{-(e_j + 2 gamma) S}` for `gamma_paper` and
    /// `gamma_eff`.
    pub budget_ratio_paper: f64,
    pub budget_ratio_eff: f64,
}

struct Evaluation {
    alpha_t0: Vec<f64>,
    tube_ok: bool,
    blow_up: bool,
    trajectory: Option<Trajectory>,
    residuals: Vec<(f64, f64)>,
    b: Vec<f64>,
}

struct Stage<'a> {
    frame: &'a MovingFrame,
    background: Background<'a>,
    j: usize,
    a_j: f64,
    cfg: &'a ShootConfig,
    phi_gram: Matrix,
    phi_s: Field,
    tube: Tube,
    times: Vec<f64>,
}

impl<'a> Stage<'a> {
    fn free(&self) -> std::ops::Range<usize> {
        self.j..self.frame.len()
    }

    fn e_j(&self) -> f64 {
        if self.j == 0 {
            0.0
        } else {
            self.frame.basis(self.j - 1).e_c
        }
    }

    fn evaluate(&self, a: &[f64], record: bool) -> Result<Evaluation> {
        let b = modulated_beta(&self.phi_gram, a)?;
        let spec = FinalDataSpec {
            j: self.j,
            a_j: self.a_j,
            s: self.cfg.s,
            b: b.clone(),
        };
        let u_s = assemble_final_data(&spec, self.frame, &self.phi_s)?;
        let n_rec = self.times.len();
        let mut tube_ok = true;
        let mut alpha_t0 = vec![0.0; self.free().len()];
        let mut residuals = Vec::with_capacity(n_rec);
        let mut rec = record.then(|| Trajectory {
            times: Vec::with_capacity(n_rec),
            snapshots: Vec::with_capacity(n_rec),
            mass_series: Vec::with_capacity(n_rec),
            energy_series: Vec::with_capacity(n_rec),
            kappa: 0.0,
        });
        let mut count = 0usize;
        let e_j = self.e_j();
        let p = self.frame.family().p();
        let outcome = evolve_observed(&u_s, p, &self.cfg.backward(), |t, u| {
            let idx = n_rec - 1 - count;
            count += 1;
            let mut z = u - &self.background.at(self.frame, idx, t)?;
            if self.j > 0 && self.a_j != 0.0 {
                let k = self.j - 1;
                z.axpy(-self.a_j * (-e_j * t).exp(), &self.frame.y_plus(k, t));
            }
            let r = z.h1_norm();
            if r > self.tube.at(t) {
                tube_ok = false;
            }
            residuals.push((t, r));
            if idx == 0 {
                for (slot, k) in alpha_t0.iter_mut().zip(self.free()) {
                    *slot = z.dot(&self.frame.z_minus(k, t));
                }
            }
            if let Some(tr) = rec.as_mut() {
                let (m, e) = crate::evolver::conserved_quantities(u, p);
                tr.times.push(t);
                tr.snapshots.push(u.clone());
                tr.mass_series.push(m);
                tr.energy_series.push(e);
            }
            Ok(true)
        });
        match outcome {
            Ok(kappa) => {
                if let Some(tr) = rec.as_mut() {
                    tr.kappa = kappa;
                }
            }
            Err(Error::BlowUp { .. }) => {
                return Ok(Evaluation {
                    alpha_t0,
                    tube_ok: false,
                    blow_up: true,
                    trajectory: None,
                    residuals,
                    b,
                })
            }
            Err(e) => return Err(e),
        }
        residuals.reverse();
        Ok(Evaluation {
            alpha_t0,
            tube_ok,
            blow_up: false,
            trajectory: rec.map(Trajectory::reversed),
            residuals,
            b,
        })
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Finds final data for stage `j` whose backward solution has
/// `max_k |alpha_k^-(t0)| <= tol` while staying inside the tube.
///
/// The unknowns are the prescribed `alpha^-(S)` values, mapped to `b`
/// through the Gram matrix. Iterations use a centered finite-difference
/// Jacobian computed at the first iterate and refreshed whenever a step
/// fails to reduce the residual; steps are halved on tube exit, blow-up or
/// lack of decrease.
pub fn shoot(
    frame: &MovingFrame,
    background: Background<'_>,
    j: usize,
    a_j: f64,
    cfg: &ShootConfig,
) -> Result<ShootingResult> {
    cfg.validate()?;
    check_stage(frame, j)?;
    if j == 0 && a_j != 0.0 {
        return Err(Error::Argument("the base stage takes no A".into()));
    }
    let times = cfg.record_times();
    if let Background::Trajectory(tr) = background {
        if tr.len() != times.len() {
            return Err(Error::Argument(format!(
                "background has {} records, the stage grid has {}",
                tr.len(),
                times.len()
            )));
        }
    }
    for &t in &[cfg.t0, cfg.s] {
        frame.multisoliton(t)?;
    }
    let phi_s = background.at(frame, times.len() - 1, cfg.s)?;
    let phi_gram = gram_matrix(frame, j, cfg.s)?;
    let e_j = if j == 0 { 0.0 } else { frame.basis(j - 1).e_c };
    let y_sum: f64 = (j..frame.len()).map(|k| frame.basis(k).y_plus.h1_norm()).sum();
    let tube = Tube {
        k: (2.0 * (-cfg.gamma_eff * cfg.s).exp() * y_sum).max(1.0),
        rate: e_j + cfg.gamma_eff,
    };
    let stage = Stage {
        frame,
        background,
        j,
        a_j,
        cfg,
        phi_gram,
        phi_s,
        tube,
        times,
    };
    let m = stage.free().len();
    let mut history = Vec::new();
    let mut a = vec![0.0; m];
    let mut exit = ShootExit::MaxIter;
    let mut iterations = 0;

    let mut current = stage.evaluate(&a, m == 0)?;
    history.push(IterationRecord {
        a: a.clone(),
        alpha_t0: current.alpha_t0.clone(),
        damping: 0.0,
    });
    if current.blow_up {
        exit = ShootExit::BlowUp;
    } else if m == 0 || (max_abs(&current.alpha_t0) <= cfg.tol && current.tube_ok) {
        exit = ShootExit::Converged;
    }

    let fd_scale = 1e-7 * (-(e_j + 2.0 * cfg.gamma_eff) * cfg.s).exp();
    let mut jac: Option<Mat<f64>> = None;
    while exit == ShootExit::MaxIter && iterations < cfg.max_iter {
        iterations += 1;
        if jac.is_none() {
            let mut jm = Mat::<f64>::zeros(m, m);
            for col in 0..m {
                let mut ap = a.clone();
                let mut am = a.clone();
                ap[col] += fd_scale;
                am[col] -= fd_scale;
                let fp = stage.evaluate(&ap, false)?;
                let fm = stage.evaluate(&am, false)?;
                if fp.blow_up || fm.blow_up {
                    return Err(Error::BlowUp {
                        last_valid_time: cfg.t0,
                        message: "blow-up while building the shooting Jacobian".into(),
                    });
                }
                for row in 0..m {
                    jm[(row, col)] = (fp.alpha_t0[row] - fm.alpha_t0[row]) / (2.0 * fd_scale);
                }
            }
            jac = Some(jm);
        }
        let jm = jac.as_ref().unwrap();
        let rhs = Mat::from_fn(m, 1, |i, _| -current.alpha_t0[i]);
        let step = jm.partial_piv_lu().solve(&rhs);
        let step: Vec<f64> = (0..m).map(|i| step[(i, 0)]).collect();
        if step.iter().any(|s| !s.is_finite()) {
            return Err(Error::Convergence("singular shooting Jacobian".into()));
        }
        let f_now = max_abs(&current.alpha_t0);
        let mut accepted = false;
        let mut lambda = 1.0;
        for _ in 0..10 {
            let trial: Vec<f64> = a.iter().zip(&step).map(|(x, d)| x + lambda * d).collect();
            let ev = stage.evaluate(&trial, false)?;
            if !ev.blow_up && ev.tube_ok && max_abs(&ev.alpha_t0) < f_now {
                a = trial;
                current = ev;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        history.push(IterationRecord {
            a: a.clone(),
            alpha_t0: current.alpha_t0.clone(),
            damping: if accepted { lambda } else { 0.0 },
        });
        if max_abs(&current.alpha_t0) <= cfg.tol && current.tube_ok {
            exit = ShootExit::Converged;
            break;
        }
        if !accepted {
            // A stale Jacobian is the usual culprit; one refresh, then give up.
            if history.len() >= 2 && history[history.len() - 2].damping == -1.0 {
                break;
            }
            jac = None;
            history.last_mut().unwrap().damping = -1.0;
        }
    }

    let final_eval = if current.trajectory.is_some() {
        current
    } else {
        stage.evaluate(&a, true)?
    };
    if final_eval.blow_up {
        exit = ShootExit::BlowUp;
    }
    let trajectory = final_eval.trajectory.unwrap_or(Trajectory {
        times: Vec::new(),
        snapshots: Vec::new(),
        mass_series: Vec::new(),
        energy_series: Vec::new(),
        kappa: 0.0,
    });
    let b_norm = euclid(&final_eval.b);
    let budget = |gamma: f64| b_norm / (2.0 * (-(e_j + 2.0 * gamma) * cfg.s).exp());
    let gamma_paper = cfg.gamma_eff * 16.0 / 1e6;
    Ok(ShootingResult {
        j,
        a_j,
        b_star: final_eval.b,
        a_star: a,
        alpha_t0: final_eval.alpha_t0,
        iterations,
        exit,
        trajectory,
        residual_series: final_eval.residuals,
        tube,
        tube_ok: final_eval.tube_ok,
        history,
        budget_ratio_paper: budget(gamma_paper),
        budget_ratio_eff: budget(cfg.gamma_eff),
    })
}

fn require_converged(r: ShootingResult, stage: usize) -> Result<ShootingResult> {
    match r.exit {
        ShootExit::Converged => Ok(r),
        ShootExit::BlowUp => Err(Error::BlowUp {
            last_valid_time: r.residual_series.first().map_or(f64::NAN, |x| x.0),
            message: "shooting iterate blew up".into(),
        }
        .at_stage(stage)),
        ShootExit::MaxIter => Err(Error::Convergence(format!(
            "no convergence after {} iterations, max |alpha^-(t0)| = {:e}",
            r.iterations,
            max_abs(&r.alpha_t0)
        ))
        .at_stage(stage)),
    }
}

/// Builds stages `0..=N` for the parameters `a`: stage 0 is the base
/// multi-soliton, stage `j` perturbs stage `j - 1` along `Y_j^+`.
pub fn build_family(frame: &MovingFrame, a: &[f64], cfg: &ShootConfig) -> Result<Vec<ShootingResult>> {
    let mut builder = FamilyCache::new(frame, cfg.clone());
    builder.stages(a)
}

/// Source of the trajectories `phi_{A_1, ..., A_j}` used by classification.
pub trait FamilyBuilder {
    /// The stage-`prefix.len()` trajectory with parameters `prefix`.
    fn phi(&mut self, prefix: &[f64]) -> Result<Arc<Trajectory>>;
}

/// Builds stages on demand and keeps every stage it has built, keyed by its
/// parameter prefix.
pub struct FamilyCache<'a> {
    frame: &'a MovingFrame,
    cfg: ShootConfig,
    cache: HashMap<Vec<u64>, Arc<ShootingResult>>,
    seeded: HashMap<Vec<u64>, Arc<Trajectory>>,
}

fn prefix_key(prefix: &[f64]) -> Vec<u64> {
    prefix.iter().map(|x| x.to_bits()).collect()
}

impl<'a> FamilyCache<'a> {
    pub fn new(frame: &'a MovingFrame, cfg: ShootConfig) -> Self {
        FamilyCache {
            frame,
            cfg,
            cache: HashMap::new(),
            seeded: HashMap::new(),
        }
    }

    /// Registers a stored trajectory for `prefix`, used in place of shooting
    /// whenever only the trajectory is needed.
    pub fn seed(&mut self, prefix: &[f64], trajectory: Trajectory) {
        self.seeded.insert(prefix_key(prefix), Arc::new(trajectory));
    }

    /// The trajectory for `prefix`: seeded, cached, or freshly shot.
    pub fn trajectory(&mut self, prefix: &[f64]) -> Result<Arc<Trajectory>> {
        if let Some(t) = self.seeded.get(&prefix_key(prefix)) {
            return Ok(t.clone());
        }
        let t = Arc::new(self.stage(prefix)?.trajectory.clone());
        self.seeded.insert(prefix_key(prefix), t.clone());
        Ok(t)
    }

    pub fn frame(&self) -> &MovingFrame {
        self.frame
    }

    pub fn config(&self) -> &ShootConfig {
        &self.cfg
    }

    /// Stage result for `prefix` (stage `prefix.len()`).
    pub fn stage(&mut self, prefix: &[f64]) -> Result<Arc<ShootingResult>> {
        if prefix.len() > self.frame.len() {
            return Err(Error::Argument(format!(
                "{} parameters for {} solitons",
                prefix.len(),
                self.frame.len()
            )));
        }
        let key = prefix_key(prefix);
        if let Some(r) = self.cache.get(&key) {
            return Ok(r.clone());
        }
        let j = prefix.len();
        let result = if j == 0 {
            shoot(self.frame, Background::Multisoliton, 0, 0.0, &self.cfg)
        } else {
            let prev = self.trajectory(&prefix[..j - 1])?;
            shoot(self.frame, Background::Trajectory(&prev), j, prefix[j - 1], &self.cfg)
        }
        .map_err(|e| e.at_stage(j))?;
        let result = Arc::new(require_converged(result, j)?);
        self.cache.insert(key, result.clone());
        Ok(result)
    }

    /// All stages `0..=N` for the full parameter vector `a`.
    pub fn stages(&mut self, a: &[f64]) -> Result<Vec<ShootingResult>> {
        if a.len() != self.frame.len() {
            return Err(Error::Argument(format!(
                "{} parameters for {} solitons",
                a.len(),
                self.frame.len()
            )));
        }
        (0..=a.len())
            .map(|j| self.stage(&a[..j]).map(|r| (*r).clone()))
            .collect()
    }
}

impl FamilyBuilder for FamilyCache<'_> {
    fn phi(&mut self, prefix: &[f64]) -> Result<Arc<Trajectory>> {
        self.trajectory(prefix)
    }
}

/// Largest `||phi_j(t) - phi_{j-1}(t) - A_j e^{-e_j t} Y_j^+(t)||_{H^1}`
/// divided by `tube(t)` over the common records of two consecutive stages.
pub fn stage_difference_ratio(
    frame: &MovingFrame,
    prev: &Trajectory,
    next: &ShootingResult,
) -> Result<f64> {
    let j = next.j;
    if j == 0 {
        return Err(Error::Argument("the base stage has no predecessor".into()));
    }
    let e_j = frame.basis(j - 1).e_c;
    let mut worst = 0.0f64;
    for (i, &t) in next.trajectory.times.iter().enumerate() {
        let mut d = &next.trajectory.snapshots[i] - &prev.snapshots[i];
        d.axpy(-next.a_j * (-e_j * t).exp(), &frame.y_plus(j - 1, t));
        worst = worst.max(d.h1_norm() / next.tube.at(t));
    }
    Ok(worst)
}

/// Runs the plain backward solve from the assembled final data, without any
/// shooting; used for negative controls and diagnostics.
pub fn backward_solve(
    frame: &MovingFrame,
    spec: &FinalDataSpec,
    phi_at_s: &Field,
    cfg: &ShootConfig,
) -> Result<Trajectory> {
    let u = assemble_final_data(spec, frame, phi_at_s)?;
    Ok(evolve(&u, frame.family().p(), &cfg.backward())?.reversed())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_examples() {
        let id = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(modulated_beta(&id, &[0.3, -0.2]).unwrap(), vec![0.3, -0.2]);
        assert_eq!(modulated_beta(&id, &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        let phi = vec![vec![1.0, 0.1], vec![0.1, 1.0]];
        let b = modulated_beta(&phi, &[1.0, 0.0]).unwrap();
        assert!((b[0] - 1.0 / 0.99).abs() < 1e-14);
        assert!((b[1] + 0.1 / 0.99).abs() < 1e-14);
        assert!(euclid(&b) <= 2.0);
        let far = vec![vec![1.0, 0.8], vec![0.0, 1.0]];
        assert!(matches!(
            modulated_beta(&far, &[1.0, 0.0]),
            Err(Error::HorizonTooSmall { .. })
        ));
        assert!(modulated_beta(&Vec::new(), &[]).unwrap().is_empty());
    }

    #[test]
    fn horizon_cap_formula() {
        let cfg = ShootConfig {
            s: 12.0,
            t0: 5.0,
            dt: 1e-3,
            record_stride: 10,
            dealias: true,
            tol: 1e-8,
            max_iter: 15,
            gamma_eff: 0.05,
            noise_floor: 1e-12,
        };
        assert!((cfg.horizon_cap(2.0) - (1e3f64).ln() / 2.0).abs() < 1e-12);
        let t = cfg.record_times();
        assert_eq!(t.first(), Some(&5.0));
        assert_eq!(t.last(), Some(&12.0));
    }
}
