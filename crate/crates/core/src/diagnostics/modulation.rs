//! Translation modulation: shifts `y_j(t)` making `w = u - sum_j R~_j`
//! orthogonal to every `(R~_j)_x`, with `R~_j = Q_{c_j}(x - c_j t - x_j -
//! y_j)`.

use faer::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::profiles::{sample_profile, ProfileDerivative, SolitonFamily};

const MAX_NEWTON: usize = 25;
const ORTHO_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulationState {
    pub t: f64,
    pub y: Vec<f64>,
    #[serde(skip)]
    pub w: Option<Field>,
    /// `int w (R~_j)_x`.
    pub ortho_residuals: Vec<f64>,
    pub iterations: usize,
}

struct Profiles {
    value: Vec<Field>,
    first: Vec<Field>,
    second: Vec<Field>,
}

fn profiles(fam: &SolitonFamily, t: f64, y: &[f64], u: &Field) -> Profiles {
    let grid = u.grid();
    let mut value = Vec::new();
    let mut first = Vec::new();
    let mut second = Vec::new();
    for (m, &yj) in fam.members().iter().zip(y) {
        let center = m.position(t) + yj;
        value.push(sample_profile(fam.p(), m.speed, grid, center, ProfileDerivative::Value));
        first.push(sample_profile(fam.p(), m.speed, grid, center, ProfileDerivative::First));
        second.push(sample_profile(fam.p(), m.speed, grid, center, ProfileDerivative::Second));
    }
    Profiles { value, first, second }
}

fn residual(u: &Field, pr: &Profiles) -> Field {
    let mut w = u.clone();
    for r in &pr.value {
        w.axpy(-1.0, r);
    }
    w
}

/// Relative rounding level of `u - sum R~_j`, below which `w` is noise.
const ROUNDING: f64 = 1e-14;

fn converged(g: &[f64], w: &Field, u: &Field, pr: &Profiles) -> bool {
    let scale = ORTHO_TOL * w.h1_norm() + ROUNDING * u.h1_norm();
    g.iter()
        .zip(&pr.first)
        .all(|(gj, rx)| gj.abs() <= scale * rx.l2_norm())
}

/// Newton solve of `int (u - R~) (R~_j)_x = 0` for the shifts, starting from
/// `guess` (zeros if empty).
pub fn modulate(u: &Field, fam: &SolitonFamily, t: f64, guess: &[f64]) -> Result<ModulationState> {
    let n = fam.len();
    let mut y = if guess.is_empty() {
        vec![0.0; n]
    } else if guess.len() == n {
        guess.to_vec()
    } else {
        return Err(Error::Argument(format!(
            "modulation guess has {} entries for {n} solitons",
            guess.len()
        )));
    };

    let r0 = crate::profiles::multisoliton_sum(fam, t, u.grid())?;
    let dist = (u - &r0).h1_norm();
    let min_mass = fam
        .members()
        .iter()
        .map(|m| {
            sample_profile(fam.p(), m.speed, u.grid(), m.position(t), ProfileDerivative::Value)
                .l2_norm()
                .powi(2)
        })
        .fold(f64::INFINITY, f64::min);
    if !(dist < 0.5 * min_mass) {
        return Err(Error::OutOfBasin(format!(
            "||u - R(t)||_H1 = {dist:.3e} at t = {t} exceeds half the smallest soliton mass {:.3e}",
            0.5 * min_mass
        )));
    }

    for it in 0..=MAX_NEWTON {
        let pr = profiles(fam, t, &y, u);
        let w = residual(u, &pr);
        let g: Vec<f64> = pr.first.iter().map(|rx| w.dot(rx)).collect();
        if converged(&g, &w, u, &pr) {
            return Ok(ModulationState {
                t,
                y,
                w: Some(w),
                ortho_residuals: g,
                iterations: it,
            });
        }
        if it == MAX_NEWTON {
            break;
        }
        // dG_j/dy_k = int (R~_k)_x (R~_j)_x - delta_jk int w (R~_j)_xx.
        let jac = faer::Mat::<f64>::from_fn(n, n, |j, k| {
            let mut v = pr.first[k].dot(&pr.first[j]);
            if j == k {
                v -= w.dot(&pr.second[j]);
            }
            v
        });
        let rhs = faer::Mat::<f64>::from_fn(n, 1, |j, _| -g[j]);
        let step = jac.partial_piv_lu().solve(&rhs);
        for (j, yj) in y.iter_mut().enumerate() {
            *yj += step[(j, 0)];
        }
        if y.iter().any(|v| !v.is_finite()) {
            break;
        }
    }
    Err(Error::OutOfBasin(format!(
        "modulation Newton did not converge in {MAX_NEWTON} iterations at t = {t}"
    )))
}
