//! Pseudo-spectral time stepping for `u_t + u_xxx + (u^p)_x = 0`.
//!
//! Fourth-order exponential time differencing (ETDRK4): the dispersive term is
//! integrated exactly mode by mode, the nonlinear flux is evaluated in
//! physical space with optional 2/3-rule truncation. The phi-function
//! coefficients are computed by contour averages in the complex plane so
//! they stay accurate for small `|k^3 dt|`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec};
use crate::spectral::{self, derivative};

/// Sup-norm above which a run is declared a blow-up.
pub const BLOW_UP_SUP: f64 = 1e6;

/// Relative size of the top of the retained spectrum above which a run is
/// declared under-resolved.
pub const RESOLUTION_TAIL_TOL: f64 = 1e-7;

/// Relative modal tail that initial data may carry.
pub const INITIAL_TAIL_TOL: f64 = 1e-10;

const CONTOUR_POINTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveConfig {
    /// Time step; negative for backward solves.
    pub dt: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub record_stride: usize,
    #[serde(default = "default_dealias")]
    pub dealias: bool,
}

fn default_dealias() -> bool {
    true
}

impl EvolveConfig {
    pub fn new(dt: f64, t_start: f64, t_end: f64, record_stride: usize) -> Self {
        EvolveConfig {
            dt,
            t_start,
            t_end,
            record_stride,
            dealias: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt != 0.0) {
            return Err(Error::config("evolve.dt", "must be finite and nonzero"));
        }
        if !(self.t_start.is_finite() && self.t_end.is_finite()) {
            return Err(Error::config("evolve.t_end", "times must be finite"));
        }
        if (self.t_end - self.t_start) * self.dt <= 0.0 {
            return Err(Error::config(
                "evolve.dt",
                "sign of dt must match the direction from t_start to t_end",
            ));
        }
        if self.record_stride == 0 {
            return Err(Error::config("evolve.record_stride", "must be positive"));
        }
        Ok(())
    }

    /// Number of steps; the actual step is `(t_end - t_start) / steps`, never
    /// larger in magnitude than `dt`.
    pub fn steps(&self) -> usize {
        let r = ((self.t_end - self.t_start) / self.dt).abs();
        (r - 1e-9 * r.max(1.0)).ceil().max(1.0) as usize
    }

    pub fn step_size(&self) -> f64 {
        (self.t_end - self.t_start) / self.steps() as f64
    }

    /// The times at which snapshots are recorded.
    pub fn record_times(&self) -> Vec<f64> {
        let steps = self.steps();
        let h = self.step_size();
        let mut out: Vec<f64> = (0..=steps)
            .filter(|i| i % self.record_stride == 0)
            .map(|i| self.t_start + i as f64 * h)
            .collect();
        if !steps.is_multiple_of(self.record_stride) {
            out.push(self.t_end);
        }
        out
    }
}

/// Largest stable step for data whose sup norm is `u_sup`.
///
/// The dispersive part is integrated exactly, so the binding constraint is the
/// explicit treatment of the nonlinear flux: a wave speed of `p u^(p-1)` at
/// the largest retained wavenumber must stay inside the imaginary-axis
/// stability interval `|z| <= 2 sqrt(2)` of the fourth-order Runge-Kutta
/// stages.
pub fn dt_max(grid: &GridSpec, p: u32, u_sup: f64, dealias: bool) -> f64 {
    let k_max = if dealias { 2.0 / 3.0 } else { 1.0 } * grid.nyquist();
    let speed = p as f64 * u_sup.max(1e-3).powi(p as i32 - 1);
    2.0 * 2f64.sqrt() / (speed * k_max)
}

/// Recorded solution with conserved-quantity series.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub snapshots: Vec<Field>,
    pub mass_series: Vec<f64>,
    pub energy_series: Vec<f64>,
    /// `|dt| / dt_max` for the initial data.
    pub kappa: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn grid(&self) -> Option<&GridSpec> {
        self.snapshots.first().map(|f| f.grid())
    }

    /// The same records in the opposite time order.
    pub fn reversed(mut self) -> Self {
        self.times.reverse();
        self.snapshots.reverse();
        self.mass_series.reverse();
        self.energy_series.reverse();
        self
    }

    /// Index of the record at time `t`, within half a record spacing.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let tol = if self.times.len() > 1 {
            0.25 * (self.times[1] - self.times[0]).abs()
        } else {
            1e-12
        };
        self.times.iter().position(|&s| (s - t).abs() <= tol)
    }

    pub fn at(&self, t: f64) -> Option<&Field> {
        self.index_of(t).map(|i| &self.snapshots[i])
    }

    pub fn last(&self) -> Option<(f64, &Field)> {
        self.snapshots.last().map(|f| (*self.times.last().unwrap(), f))
    }

    /// Largest relative drift of mass and energy from their initial values.
    pub fn conservation_drift(&self) -> (f64, f64) {
        let rel = |s: &[f64]| {
            let s0 = s[0];
            let scale = s0.abs().max(1e-300);
            s.iter().map(|v| (v - s0).abs() / scale).fold(0.0, f64::max)
        };
        if self.is_empty() {
            return (0.0, 0.0);
        }
        (rel(&self.mass_series), rel(&self.energy_series))
    }
}

/// `(int u^2, 1/2 int u_x^2 - 1/(p+1) int u^(p+1))`.
pub fn conserved_quantities(u: &Field, p: u32) -> (f64, f64) {
    let mass = u.dot(u);
    let ux = derivative(u, 1);
    let pot: f64 = u.values().iter().map(|v| v.powi(p as i32 + 1)).sum::<f64>()
        * u.grid().spacing();
    (mass, 0.5 * ux.dot(&ux) - pot / (p as f64 + 1.0))
}

/// Precomputed ETDRK4 coefficients for one grid and step size, acting on the
/// half spectrum `m = 0..=n/2` of a real field.
struct Stepper {
    n: usize,
    p: u32,
    e: Vec<Complex64>,
    e2: Vec<Complex64>,
    q: Vec<Complex64>,
    f1: Vec<Complex64>,
    f2: Vec<Complex64>,
    f3: Vec<Complex64>,
    /// `-i k` times the dealiasing mask.
    flux: Vec<Complex64>,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    real: Vec<f64>,
    half: Vec<Complex64>,
}

impl Stepper {
    fn new(grid: GridSpec, p: u32, h: f64, dealias: bool) -> Self {
        let n = grid.num_points;
        let nh = n / 2 + 1;
        let cutoff = n / 3;
        let roots: Vec<Complex64> = (0..CONTOUR_POINTS)
            .map(|j| Complex64::from_polar(1.0, 2.0 * PI * (j as f64 + 0.5) / CONTOUR_POINTS as f64))
            .collect();
        let mut planner = RealFftPlanner::<f64>::new();
        let mut s = Stepper {
            n,
            p,
            e: Vec::with_capacity(nh),
            e2: Vec::with_capacity(nh),
            q: Vec::with_capacity(nh),
            f1: Vec::with_capacity(nh),
            f2: Vec::with_capacity(nh),
            f3: Vec::with_capacity(nh),
            flux: Vec::with_capacity(nh),
            r2c: planner.plan_fft_forward(n),
            c2r: planner.plan_fft_inverse(n),
            real: vec![0.0; n],
            half: vec![Complex64::default(); nh],
        };
        for m in 0..nh {
            let k = if m == n / 2 { 0.0 } else { grid.wavenumber(m) };
            // u_t = -u_xxx - (u^p)_x, so the linear symbol is -(ik)^3 = i k^3.
            let lh = Complex64::new(0.0, k * k * k * h);
            s.e.push(lh.exp());
            s.e2.push((lh * 0.5).exp());
            let zero = Complex64::default();
            let (mut q, mut f1, mut f2, mut f3) = (zero, zero, zero, zero);
            for r in &roots {
                let z = lh + r;
                let ez = z.exp();
                let z3 = z * z * z;
                q += ((z * 0.5).exp() - 1.0) / z;
                f1 += (-4.0 - z + ez * (4.0 - 3.0 * z + z * z)) / z3;
                f2 += (2.0 + z + ez * (z - 2.0)) / z3;
                f3 += (-4.0 - 3.0 * z - z * z + ez * (4.0 - z)) / z3;
            }
            let w = h / CONTOUR_POINTS as f64;
            s.q.push(q * w);
            s.f1.push(f1 * w);
            s.f2.push(f2 * w);
            s.f3.push(f3 * w);
            let keep = !dealias || m <= cutoff;
            s.flux.push(if keep { Complex64::new(0.0, -k) } else { zero });
        }
        s
    }

    fn to_half(&mut self, u: &[f64]) -> Vec<Complex64> {
        self.real.copy_from_slice(u);
        let mut out = vec![Complex64::default(); self.n / 2 + 1];
        self.r2c
            .process(&mut self.real, &mut out)
            .expect("buffer sizes match the plan");
        out
    }

    fn to_real(&mut self, v: &[Complex64]) -> Vec<f64> {
        self.inverse_into(v);
        self.real.clone()
    }

    /// Inverse transform of `v` into `self.real`, including the `1/n`.
    fn inverse_into(&mut self, v: &[Complex64]) {
        self.half.copy_from_slice(v);
        let last = self.half.len() - 1;
        self.half[0].im = 0.0;
        self.half[last].im = 0.0;
        self.c2r
            .process(&mut self.half, &mut self.real)
            .expect("buffer sizes match the plan");
        let scale = 1.0 / self.n as f64;
        self.real.iter_mut().for_each(|x| *x *= scale);
    }

    /// Nonlinear term `-(u^p)_x` in Fourier space.
    fn nonlinear(&mut self, v: &[Complex64], out: &mut [Complex64]) {
        self.inverse_into(v);
        let p = self.p as i32;
        self.real.iter_mut().for_each(|x| *x = x.powi(p));
        self.r2c
            .process(&mut self.real, out)
            .expect("buffer sizes match the plan");
        for (o, f) in out.iter_mut().zip(&self.flux) {
            *o *= f;
        }
    }

    fn step(&mut self, v: &mut [Complex64], work: &mut StepWork) {
        let n = v.len();
        let StepWork { nv, a, na, b, nb, c, nc } = work;
        self.nonlinear(v, nv);
        for m in 0..n {
            a[m] = self.e2[m] * v[m] + self.q[m] * nv[m];
        }
        self.nonlinear(a, na);
        for m in 0..n {
            b[m] = self.e2[m] * v[m] + self.q[m] * na[m];
        }
        self.nonlinear(b, nb);
        for m in 0..n {
            c[m] = self.e2[m] * a[m] + self.q[m] * (2.0 * nb[m] - nv[m]);
        }
        self.nonlinear(c, nc);
        for m in 0..n {
            v[m] = self.e[m] * v[m]
                + nv[m] * self.f1[m]
                + 2.0 * (na[m] + nb[m]) * self.f2[m]
                + nc[m] * self.f3[m];
        }
    }
}

struct StepWork {
    nv: Vec<Complex64>,
    a: Vec<Complex64>,
    na: Vec<Complex64>,
    b: Vec<Complex64>,
    nb: Vec<Complex64>,
    c: Vec<Complex64>,
    nc: Vec<Complex64>,
}

impl StepWork {
    fn new(len: usize) -> Self {
        let z = vec![Complex64::default(); len];
        StepWork {
            nv: z.clone(),
            a: z.clone(),
            na: z.clone(),
            b: z.clone(),
            nb: z.clone(),
            c: z.clone(),
            nc: z,
        }
    }
}

/// Largest modal amplitude in the top tenth of the retained band relative to
/// the largest amplitude overall, for a half spectrum.
fn retained_tail_ratio(half: &[Complex64], dealias: bool) -> f64 {
    let n = 2 * (half.len() - 1);
    let top = if dealias { n / 3 } else { n / 2 };
    let from = top - top / 10;
    let mut peak = 0.0f64;
    let mut tail = 0.0f64;
    for (m, s) in half.iter().enumerate() {
        let a = s.norm();
        peak = peak.max(a);
        if m >= from && m <= top {
            tail = tail.max(a);
        }
    }
    if peak == 0.0 {
        0.0
    } else {
        tail / peak
    }
}

/// Integrates from `u0` at `cfg.t_start` to `cfg.t_end` and records every
/// `record_stride` steps.
///
/// A negative `dt` solves backward in time: the equation is invariant under
/// `(t, x) -> (-t, -x)`, so the mirrored data is stepped forward and every
/// record is mirrored back.
pub fn evolve(u0: &Field, p: u32, cfg: &EvolveConfig) -> Result<Trajectory> {
    let mut traj = Trajectory {
        times: Vec::new(),
        snapshots: Vec::new(),
        mass_series: Vec::new(),
        energy_series: Vec::new(),
        kappa: 0.0,
    };
    traj.kappa = evolve_observed(u0, p, cfg, |t, u| {
        let (m, e) = conserved_quantities(u, p);
        traj.times.push(t);
        traj.snapshots.push(u.clone());
        traj.mass_series.push(m);
        traj.energy_series.push(e);
        Ok(true)
    })?;
    Ok(traj)
}

/// Like [`evolve`] but hands each record to `observe` instead of storing it.
/// `observe` returns `Ok(false)` to stop early. Returns `|dt| / dt_max`.
pub fn evolve_observed<F>(u0: &Field, p: u32, cfg: &EvolveConfig, mut observe: F) -> Result<f64>
where
    F: FnMut(f64, &Field) -> Result<bool>,
{
    cfg.validate()?;
    if !u0.is_finite() {
        return Err(Error::Argument("initial data is not finite".into()));
    }
    let grid = *u0.grid();
    let bound = dt_max(&grid, p, u0.sup_norm(), cfg.dealias);
    let kappa = cfg.dt.abs() / bound;
    if kappa > 1.0 {
        return Err(Error::config(
            "evolve.dt",
            format!("|dt| = {} exceeds the stability bound {bound:.3e}", cfg.dt.abs()),
        ));
    }
    if spectral::modal_tail_ratio(u0) > INITIAL_TAIL_TOL {
        return Err(Error::Resolution(format!(
            "initial data not resolved: modal tail ratio {:.2e}",
            spectral::modal_tail_ratio(u0)
        )));
    }

    let backward = cfg.dt < 0.0;
    let steps = cfg.steps();
    let h = cfg.step_size().abs();
    let mut stepper = Stepper::new(grid, p, h, cfg.dealias);
    let mut work = StepWork::new(grid.num_points / 2 + 1);
    let start = if backward { spectral::reflect(u0) } else { u0.clone() };
    let mut v = stepper.to_half(start.values());

    let time_at = |i: usize| cfg.t_start + i as f64 * cfg.step_size();
    let mut last_valid = cfg.t_start;
    let physical = |stepper: &mut Stepper, v: &[Complex64]| {
        let f = Field::from_vec(grid, stepper.to_real(v));
        if backward {
            spectral::reflect(&f)
        } else {
            f
        }
    };
    if !observe(cfg.t_start, u0)? {
        return Ok(kappa);
    }
    for i in 1..=steps {
        stepper.step(&mut v, &mut work);
        let record = i % cfg.record_stride == 0 || i == steps;
        if !record {
            continue;
        }
        let u = physical(&mut stepper, &v);
        let t = if i == steps { cfg.t_end } else { time_at(i) };
        let sup = u.sup_norm();
        if !u.is_finite() || sup > BLOW_UP_SUP {
            return Err(Error::BlowUp {
                last_valid_time: last_valid,
                message: format!("sup norm {sup:e} at t = {t}"),
            });
        }
        let tail = retained_tail_ratio(&v, cfg.dealias);
        if tail > RESOLUTION_TAIL_TOL {
            return Err(Error::Resolution(format!(
                "spectrum reached the top of the retained band at t = {t} (ratio {tail:.2e})"
            )));
        }
        last_valid = t;
        if !observe(t, &u)? {
            break;
        }
    }
    Ok(kappa)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::profiles::q_profile;

    #[test]
    fn zero_stays_zero() {
        let g = make_grid(64, 20.0, -10.0).unwrap();
        let tr = evolve(&Field::zeros(g), 6, &EvolveConfig::new(1e-2, 0.0, 1.0, 10)).unwrap();
        assert!(tr.snapshots.iter().all(|f| f.sup_norm() == 0.0));
        assert_eq!(tr.times.len(), 11);
        assert_eq!(conserved_quantities(&Field::zeros(g), 6), (0.0, 0.0));
    }

    #[test]
    fn config_validation() {
        assert!(EvolveConfig::new(-0.1, 0.0, 1.0, 1).validate().is_err());
        assert!(EvolveConfig::new(0.0, 0.0, 1.0, 1).validate().is_err());
        assert!(EvolveConfig::new(0.1, 0.0, 1.0, 0).validate().is_err());
        let c = EvolveConfig::new(0.3, 0.0, 1.0, 2);
        assert_eq!(c.steps(), 4);
        assert_eq!(c.record_times(), vec![0.0, 0.5, 1.0]);
        let c = EvolveConfig::new(-0.25, 2.0, 1.0, 3);
        assert_eq!(c.record_times(), vec![2.0, 1.25, 1.0]);
    }

    #[test]
    fn step_above_bound_rejected() {
        let g = make_grid(1024, 80.0, -40.0).unwrap();
        let q = q_profile(6, 1.0, &g, 0.0).unwrap();
        let bound = dt_max(&g, 6, q.sup_norm(), true);
        let err = evolve(&q, 6, &EvolveConfig::new(2.0 * bound, 0.0, 1.0, 1)).unwrap_err();
        assert!(matches!(err, Error::Config { .. }));
    }

    #[test]
    fn backward_then_forward_round_trip() {
        let g = make_grid(1024, 64.0, -32.0).unwrap();
        let q = q_profile(6, 1.0, &g, 0.0).unwrap();
        let back = evolve(&q, 6, &EvolveConfig::new(-2.5e-4, 1.0, 0.0, 400)).unwrap();
        let (t, u) = back.last().unwrap();
        assert_eq!(t, 0.0);
        let expect = q_profile(6, 1.0, &g, -1.0).unwrap();
        assert!((u - &expect).h1_norm() < 1e-7, "{}", (u - &expect).h1_norm());
        let fwd = evolve(u, 6, &EvolveConfig::new(2.5e-4, 0.0, 1.0, 400)).unwrap();
        let (_, w) = fwd.last().unwrap();
        assert!((w - &q).h1_norm() < 1e-7, "{}", (w - &q).h1_norm());
    }
}
