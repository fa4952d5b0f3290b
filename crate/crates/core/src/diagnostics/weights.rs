//! Cut-off weights separating the solitons.
//!
//! `psi(x) = (2/pi) arctan(exp(-b x))` with `b = sqrt(sigma0) / 2` steps from
//! 1 at `-inf` to 0 at `+inf`. Its derivatives are closed form:
//! `psi' = -(b/pi) sech(b x)` and `psi''' = -(b^3/pi) sech(b x) (1 - 2
//! sech^2(b x))`, so `|psi'''| <= b^2 |psi'| = (sigma0/4) |psi'|`.

use std::f64::consts::PI;

use crate::grid::{Field, GridSpec};
use crate::profiles::SolitonFamily;

fn rate(sigma0: f64) -> f64 {
    0.5 * sigma0.sqrt()
}

fn sech(y: f64) -> f64 {
    let a = y.abs();
    // 2 e^{-a} / (1 + e^{-2a}) stays finite for large |y|.
    2.0 * (-a).exp() / (1.0 + (-2.0 * a).exp())
}

pub fn psi(sigma0: f64, x: f64) -> f64 {
    let b = rate(sigma0);
    let y = b * x;
    // arctan(e^{-y}) = pi/2 - arctan(e^{y}); use the branch with the small
    // argument so both tails keep full relative precision.
    if y >= 0.0 {
        2.0 / PI * (-y).exp().atan()
    } else {
        1.0 - 2.0 / PI * y.exp().atan()
    }
}

pub fn psi_prime(sigma0: f64, x: f64) -> f64 {
    let b = rate(sigma0);
    -b / PI * sech(b * x)
}

pub fn psi_third(sigma0: f64, x: f64) -> f64 {
    let b = rate(sigma0);
    let s = sech(b * x);
    -b * b * b / PI * s * (1.0 - 2.0 * s * s)
}

/// Midpoint between consecutive solitons,
/// `m_k(t) = (c_k + c_{k+1}) t / 2 + (x_k + x_{k+1}) / 2` (0-based `k`).
pub fn midpoint(fam: &SolitonFamily, k: usize, t: f64) -> f64 {
    let a = fam.members()[k];
    let b = fam.members()[k + 1];
    0.5 * (a.speed + b.speed) * t + 0.5 * (a.shift + b.shift)
}

fn midpoint_speed(fam: &SolitonFamily, k: usize) -> f64 {
    0.5 * (fam.members()[k].speed + fam.members()[k + 1].speed)
}

/// All weights at one time.
///
/// The weights are step-like, not periodic: they are evaluated at the plain
/// node coordinate, so solitons must sit well inside the box.
#[derive(Debug, Clone)]
pub struct Weights {
    /// `psi_k = psi(x - m_k(t))` for `k = 1..N-1`.
    pub psi: Vec<Field>,
    pub h: Field,
    pub h_x: Field,
    pub h_t: Field,
    pub h_xxx: Field,
    /// `phi_1 = psi_1`, `phi_j = psi_j - psi_{j-1}`, `phi_N = 1 - psi_{N-1}`.
    pub phi: Vec<Field>,
}

/// `h(t, x) = 1/c_N + sum_k (1/c_k - 1/c_{k+1}) psi(x - m_k(t))` and the
/// partition `phi_j`, sampled on `grid`.
pub fn weights(fam: &SolitonFamily, sigma0: f64, t: f64, grid: &GridSpec) -> Weights {
    let n = fam.len();
    let speeds = fam.speeds();
    let mut psis = Vec::with_capacity(n.saturating_sub(1));
    let mut h = Field::constant(*grid, 1.0 / speeds[n - 1]);
    let mut h_x = Field::zeros(*grid);
    let mut h_t = Field::zeros(*grid);
    let mut h_xxx = Field::zeros(*grid);
    for k in 0..n - 1 {
        let m = midpoint(fam, k, t);
        let w = 1.0 / speeds[k] - 1.0 / speeds[k + 1];
        let v = midpoint_speed(fam, k);
        let ps = Field::from_fn(*grid, |x| psi(sigma0, x - m));
        let d1 = Field::from_fn(*grid, |x| psi_prime(sigma0, x - m));
        let d3 = Field::from_fn(*grid, |x| psi_third(sigma0, x - m));
        h.axpy(w, &ps);
        h_x.axpy(w, &d1);
        h_t.axpy(-w * v, &d1);
        h_xxx.axpy(w, &d3);
        psis.push(ps);
    }
    let mut phi = Vec::with_capacity(n);
    if n == 1 {
        phi.push(Field::constant(*grid, 1.0));
    } else {
        phi.push(psis[0].clone());
        for k in 1..n - 1 {
            phi.push(&psis[k] - &psis[k - 1]);
        }
        phi.push(psis[n - 2].map(|v| 1.0 - v));
    }
    Weights {
        psi: psis,
        h,
        h_x,
        h_t,
        h_xxx,
        phi,
    }
}
