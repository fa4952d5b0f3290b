//! Linearized operators around a soliton and their unstable eigenbasis.
//!
//! `L_c = -d^2/dx^2 + c - p Q_c^(p-1)` and `curly L_c = -d/dx L_c`. The
//! real spectrum of `curly L_c` is `{-e_c, 0, e_c}`; the eigenfunctions for
//! `+e_c` and `-e_c` are `y_plus` and `y_minus`, and `z_pm = L_c y_pm`.

pub mod evans;

use faer::prelude::*;
use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec};
use crate::profiles::{self, ProfileDerivative};
use crate::spectral::{self, derivative};

/// Minimum number of grid points per decay length `1/sqrt(c)`.
pub const MIN_POINTS_PER_DECAY_LENGTH: f64 = 12.0;

/// Largest matrix handed to the dense eigensolver.
pub const MAX_DENSE_SIZE: usize = 2048;

/// Largest grid on which the eigenvector is refined by inverse iteration
/// after the eigenvalue is found on a smaller grid.
pub const MAX_REFINE_SIZE: usize = 4096;

/// Half-width, in decay lengths, that the eigenfunction tails need.
const EIGEN_HALF_WIDTH: f64 = 48.0;

/// Spacing, in decay lengths, of the grid the eigenproblem is solved on.
pub const EIGEN_SPACING: f64 = 0.078125;

/// Which linearized operator to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Operator {
    /// `L_c`.
    L,
    /// `curly L_c = -d/dx L_c`.
    CurlyL,
}

fn potential(p: u32, c: f64, grid: &GridSpec, center: f64) -> Field {
    profiles::sample_profile(p, c, grid, center, ProfileDerivative::Value)
        .map(|q| p as f64 * q.powi(p as i32 - 1))
}

fn apply_l_with(pot: &Field, c: f64, v: &Field) -> Field {
    let vxx = derivative(v, 2);
    Field::from_vec(
        *v.grid(),
        v.values()
            .iter()
            .zip(vxx.values())
            .zip(pot.values())
            .map(|((&v, &vxx), &w)| -vxx + c * v - w * v)
            .collect(),
    )
}

/// Applies `L_c` or `curly L_c` built around `Q_c(. - q_center)`.
pub fn apply_operator(op: Operator, p: u32, c: f64, q_center: f64, v: &Field) -> Result<Field> {
    let s = profiles::SolitonParams::new(c, q_center)?;
    profiles::check_window(&s, 0.0, v.grid())?;
    let pot = potential(p, c, v.grid(), q_center);
    let lv = apply_l_with(&pot, c, v);
    Ok(match op {
        Operator::L => lv,
        Operator::CurlyL => -&derivative(&lv, 1),
    })
}

/// Spectral data of `curly L_c` for one speed, normalized so that
/// `(y_plus, z_minus) = (y_minus, z_plus) = 1` and `(Q_c', y_plus') > 0`.
///
/// All fields are centered at `center`, which is the middle node of the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedBasis {
    pub p: u32,
    pub c: f64,
    pub center: f64,
    pub e_c: f64,
    pub y_plus: Field,
    pub y_minus: Field,
    pub z_plus: Field,
    pub z_minus: Field,
    pub eta0: f64,
    pub eigen_residual: f64,
}

impl LinearizedBasis {
    pub fn grid(&self) -> &GridSpec {
        self.y_plus.grid()
    }

    /// `e_0 = e_c / c^(3/2)`.
    pub fn e0(&self) -> f64 {
        self.e_c / self.c.powf(1.5)
    }

    pub fn q_prime(&self) -> Field {
        profiles::sample_profile(self.p, self.c, self.grid(), self.center, ProfileDerivative::First)
    }

    /// The basis interpolated onto another grid with the same center, then
    /// renormalized there.
    pub fn resampled(&self, target: &GridSpec) -> Result<LinearizedBasis> {
        if (target.center() - self.center).abs() > 1e-12 * target.domain_length {
            return Err(Error::Argument(
                "resampling target must share the basis center".into(),
            ));
        }
        let raw = LinearizedBasis {
            y_plus: spectral::resample(&self.y_plus, target),
            y_minus: spectral::resample(&self.y_minus, target),
            z_plus: spectral::resample(&self.z_plus, target),
            z_minus: spectral::resample(&self.z_minus, target),
            ..self.clone()
        };
        normalize_basis(&raw)
    }

    /// Numerical certificate of the normalization and eigen identities.
    pub fn checks(&self) -> BasisChecks {
        let qp = self.q_prime();
        let dy = derivative(&self.y_plus, 1);
        let adj = |z: &Field, sign: f64| {
            let dz = derivative(z, 1);
            let pot = potential(self.p, self.c, self.grid(), self.center);
            let mut r = apply_l_with(&pot, self.c, &dz);
            r.axpy(sign * self.e_c, z);
            r.l2_norm()
        };
        let reflected = spectral::reflect(&self.z_plus);
        BasisChecks {
            y_plus_z_minus: self.y_plus.dot(&self.z_minus),
            y_minus_z_plus: self.y_minus.dot(&self.z_plus),
            y_plus_z_plus: self.y_plus.dot(&self.z_plus),
            y_minus_z_minus: self.y_minus.dot(&self.z_minus),
            z_plus_q_prime: self.z_plus.dot(&qp),
            z_minus_q_prime: self.z_minus.dot(&qp),
            sign_q_prime_dy_plus: qp.dot(&dy),
            adjoint_residual_plus: adj(&self.z_plus, 1.0),
            adjoint_residual_minus: adj(&self.z_minus, -1.0),
            reflection_error: (&reflected + &self.z_minus).sup_norm(),
            eigen_residual: self.eigen_residual,
        }
    }
}

/// Values behind the basis certificate; see [`BasisChecks::all_pass`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BasisChecks {
    pub y_plus_z_minus: f64,
    pub y_minus_z_plus: f64,
    pub y_plus_z_plus: f64,
    pub y_minus_z_minus: f64,
    pub z_plus_q_prime: f64,
    pub z_minus_q_prime: f64,
    pub sign_q_prime_dy_plus: f64,
    /// `||L_c (z_plus)' + e_c z_plus||`.
    pub adjoint_residual_plus: f64,
    /// `||L_c (z_minus)' - e_c z_minus||`.
    pub adjoint_residual_minus: f64,
    /// `sup |reflect(z_plus) + z_minus|`; `y_minus` is minus the mirror image.
    pub reflection_error: f64,
    pub eigen_residual: f64,
}

impl BasisChecks {
    pub fn flags(&self) -> Vec<(&'static str, bool)> {
        vec![
            ("normalization_plus", (self.y_plus_z_minus - 1.0).abs() < 1e-8),
            ("normalization_minus", (self.y_minus_z_plus - 1.0).abs() < 1e-8),
            ("orthogonality_plus", self.y_plus_z_plus.abs() < 1e-8),
            ("orthogonality_minus", self.y_minus_z_minus.abs() < 1e-8),
            ("kernel_orthogonality_plus", self.z_plus_q_prime.abs() < 1e-8),
            ("kernel_orthogonality_minus", self.z_minus_q_prime.abs() < 1e-8),
            ("sign_convention", self.sign_q_prime_dy_plus > 0.0),
            ("adjoint_identity_plus", self.adjoint_residual_plus < 1e-6),
            ("adjoint_identity_minus", self.adjoint_residual_minus < 1e-6),
            ("reflection", self.reflection_error < 1e-8),
            ("eigen_residual", self.eigen_residual < 1e-7),
        ]
    }

    pub fn all_pass(&self) -> bool {
        self.flags().iter().all(|(_, ok)| *ok)
    }
}

/// Rescales a raw eigenvector so the basis satisfies the normalization and
/// sign convention, rebuilding `y_minus` and both `z`.
///
/// Only `raw.y_plus`, `raw.e_c` and the metadata are read. `y_minus` is taken
/// as minus the mirror image of `y_plus`: with the plain mirror image the
/// pairing `(y_plus, L y_minus)` is never positive, so the unit
/// normalization would be unreachable.
pub fn normalize_basis(raw: &LinearizedBasis) -> Result<LinearizedBasis> {
    let grid = *raw.grid();
    let pot = potential(raw.p, raw.c, &grid, raw.center);
    let y = &raw.y_plus;
    let y_minus = -&spectral::reflect(y);
    let pairing = y.dot(&apply_l_with(&pot, raw.c, &y_minus));
    let scale = y.l2_norm().powi(2);
    if !(pairing > 1e-12 * scale) {
        return Err(Error::DegenerateBasis(format!(
            "(y_plus, z_minus) = {pairing:e} cannot be normalized to 1"
        )));
    }
    let mut s = 1.0 / pairing.sqrt();
    let qp = profiles::sample_profile(raw.p, raw.c, &grid, raw.center, ProfileDerivative::First);
    if qp.dot(&derivative(y, 1)) < 0.0 {
        s = -s;
    }
    let y_plus = y.scaled(s);
    let y_minus = y_minus.scaled(s);
    let z_plus = apply_l_with(&pot, raw.c, &y_plus);
    let z_minus = apply_l_with(&pot, raw.c, &y_minus);
    let mut resid = -&derivative(&z_plus, 1);
    resid.axpy(-raw.e_c, &y_plus);
    let eta0 = fit_eta0(&y_plus, raw.c, raw.center);
    Ok(LinearizedBasis {
        p: raw.p,
        c: raw.c,
        center: raw.center,
        e_c: raw.e_c,
        eigen_residual: resid.l2_norm(),
        eta0,
        y_plus,
        y_minus,
        z_plus,
        z_minus,
    })
}

/// Decay constant `eta0` from the slope of `log |y|` over `[5, 10]` decay
/// lengths on each side of the center, using the running maximum of `|y|`
/// taken from the far side so oscillating tails give a monotone envelope.
/// Returns the smaller of the two sides.
pub fn fit_eta0(y: &Field, c: f64, center: f64) -> f64 {
    let grid = y.grid();
    let sc = c.sqrt();
    let (a, b) = (5.0 / sc, 10.0 / sc);
    let mut best = f64::INFINITY;
    for side in [1.0, -1.0] {
        let mut pts: Vec<(f64, f64)> = grid
            .nodes()
            .zip(y.values())
            .map(|(x, &v)| (side * grid.wrapped_offset(x, center), v.abs()))
            .filter(|&(d, _)| d >= a && d <= b + 1.0 / sc)
            .collect();
        pts.sort_by(|l, r| l.0.total_cmp(&r.0));
        let mut env = 0.0f64;
        let mut series = Vec::with_capacity(pts.len());
        for &(d, v) in pts.iter().rev() {
            env = env.max(v);
            if d <= b && env > 0.0 {
                series.push((d, env.ln()));
            }
        }
        if series.len() < 2 {
            continue;
        }
        let slope = least_squares_slope(&series);
        best = best.min(-slope / sc);
    }
    best
}

fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Dense collocation matrix of `curly L_c` around `Q_c(. - center)`.
pub fn collocation_matrix(p: u32, c: f64, grid: &GridSpec, center: f64) -> Mat<f64> {
    let n = grid.num_points;
    let column = |order| {
        let mut delta = Field::zeros(*grid);
        delta.values_mut()[0] = 1.0;
        derivative(&delta, order).into_values()
    };
    let d1 = column(1);
    let d3 = column(3);
    let w = potential(p, c, grid, center);
    let w = w.values();
    Mat::from_fn(n, n, |i, j| {
        let k = (i + n - j) % n;
        d3[k] - c * d1[k] + d1[k] * w[j]
    })
}

/// Grid handed to the dense solver: centered like `grid`, no finer than
/// [`EIGEN_SPACING`]` / sqrt(c)` and at most [`MAX_DENSE_SIZE`] points.
///
/// Finer spacings buy nothing for `e_c` but amplify the rounding noise of
/// the eigenvector in the third- and fifth-order identities.
fn work_grid(c: f64, grid: &GridSpec) -> Result<GridSpec> {
    let h = grid.spacing();
    let len = grid.domain_length;
    let hw = h.max(EIGEN_SPACING / c.sqrt());
    let span = (2.0 * EIGEN_HALF_WIDTH / c.sqrt()).min(len);
    let pow2 = |x: f64| ((x * (1.0 - 1e-12)).ceil() as usize).next_power_of_two();
    let mut n = pow2(span / hw);
    let mut hw = hw;
    if n as f64 * hw > len {
        // Fill the whole box instead, slightly finer than asked.
        n = pow2(len / hw).min(grid.num_points);
        hw = len / n as f64;
    }
    if n > MAX_DENSE_SIZE {
        return Err(Error::Resolution(format!(
            "a dense solve at spacing {hw} over {span:.2} needs {n} points, more than \
             {MAX_DENSE_SIZE}"
        )));
    }
    if n == grid.num_points {
        return Ok(*grid);
    }
    let length = n as f64 * hw;
    crate::grid::make_grid(n, length, grid.center() - 0.5 * length)
}

/// Computes `e_c` and the normalized eigenbasis of `curly L_c` on `grid`,
/// with the soliton at the grid center.
///
/// Fine or large grids are solved on a coarser central window and the basis
/// is interpolated back onto `grid`.
pub fn solve_spectrum(p: u32, c: f64, grid: &GridSpec) -> Result<LinearizedBasis> {
    grid.validate()?;
    let per_decay = 1.0 / (c.sqrt() * grid.spacing());
    if per_decay < MIN_POINTS_PER_DECAY_LENGTH {
        return Err(Error::Resolution(format!(
            "only {per_decay:.1} grid points per decay length 1/sqrt(c); at least \
             {MIN_POINTS_PER_DECAY_LENGTH} are required"
        )));
    }
    profiles::q_profile(p, c, grid, grid.center())?;
    let work = work_grid(c, grid)?;
    let center = work.center();
    let m = collocation_matrix(p, c, &work, center);
    let eigs = m
        .eigenvalues()
        .map_err(|e| Error::Convergence(format!("dense eigensolver failed: {e:?}")))?;

    let scale = c.powf(1.5);
    let mut candidates: Vec<(f64, Field)> = Vec::new();
    for lam in eigs {
        if lam.re <= 1e-3 * scale || lam.im.abs() > 1e-6 * lam.re.max(1.0) {
            continue;
        }
        let (e, v) = inverse_iteration(&m, lam.re, &work, None)?;
        if tail_fraction(&v, center) < 1e-6 {
            candidates.push((e, v));
        }
    }
    candidates.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-9 * scale);
    let (e_c, y) = match candidates.len() {
        0 => {
            return Err(Error::Resolution(format!(
                "no localized real eigenvalue found for c = {c}; refine the grid or widen the box"
            )))
        }
        1 => candidates.pop().unwrap(),
        k => {
            let list: Vec<String> = candidates.iter().map(|c| format!("{:.10}", c.0)).collect();
            return Err(Error::Ambiguity(format!(
                "{k} localized positive real eigenvalues: {}",
                list.join(", ")
            )));
        }
    };

    // Interpolated eigenvectors carry rounding noise that the high-order
    // identities amplify, so on moderate grids the vector is recomputed there.
    let refined = work != *grid && grid.num_points <= MAX_REFINE_SIZE;
    let (e_c, y) = if refined {
        let start = spectral::resample(&y, grid);
        let full = collocation_matrix(p, c, grid, center);
        inverse_iteration(&full, e_c, grid, Some(&start))?
    } else {
        (e_c, y)
    };
    let raw = LinearizedBasis {
        p,
        c,
        center,
        e_c,
        y_minus: spectral::reflect(&y),
        z_plus: y.clone(),
        z_minus: y.clone(),
        y_plus: y,
        eta0: f64::NAN,
        eigen_residual: f64::NAN,
    };
    let basis = normalize_basis(&raw)?;
    if work == *grid || refined {
        Ok(basis)
    } else {
        basis.resampled(grid)
    }
}

/// Refines an approximate real eigenvalue of `m` and returns it with its
/// eigenvector, normalized to unit L2 norm. Without `start` the iteration
/// begins from a bump at the grid center.
fn inverse_iteration(
    m: &Mat<f64>,
    approx: f64,
    grid: &GridSpec,
    start: Option<&Field>,
) -> Result<(f64, Field)> {
    let n = m.nrows();
    let shift = approx * (1.0 + 1e-11);
    let shifted = Mat::from_fn(n, n, |i, j| m[(i, j)] - if i == j { shift } else { 0.0 });
    let lu = shifted.partial_piv_lu();
    let mut x = Mat::from_fn(n, 1, |i, _| match start {
        Some(f) => f.values()[i],
        None => {
            let d = grid.wrapped_offset(grid.node(i), grid.center());
            (-d * d / 4.0).exp() * (1.0 + 0.3 * d)
        }
    });
    for _ in 0..4 {
        x = lu.solve(&x);
        let norm = (0..n).map(|i| x[(i, 0)].powi(2)).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Convergence("inverse iteration broke down".into()));
        }
        x = Mat::from_fn(n, 1, |i, _| x[(i, 0)] / norm);
    }
    let mx = m * &x;
    let e = (0..n).map(|i| mx[(i, 0)] * x[(i, 0)]).sum::<f64>();
    let h = grid.spacing();
    let v = Field::from_vec(*grid, (0..n).map(|i| x[(i, 0)] / h.sqrt()).collect());
    Ok((e, v))
}

/// Fraction of `||v||^2` outside the central half of the box.
fn tail_fraction(v: &Field, center: f64) -> f64 {
    let g = v.grid();
    let quarter = 0.25 * g.domain_length;
    let (mut inner, mut outer) = (0.0, 0.0);
    for (x, &y) in g.nodes().zip(v.values()) {
        if g.wrapped_offset(x, center).abs() < quarter {
            inner += y * y;
        } else {
            outer += y * y;
        }
    }
    outer / (inner + outer)
}

/// `(L_c v, v) / ||v||_{H^1}^2`.
pub fn rayleigh_quotient(basis: &LinearizedBasis, v: &Field) -> f64 {
    let pot = potential(basis.p, basis.c, basis.grid(), basis.center);
    apply_l_with(&pot, basis.c, v).dot(v) / v.h1_norm().powi(2)
}

/// Removes from `v` its L2 component in the span of `z_plus`, `z_minus` and
/// `Q_c'`.
pub fn project_out_directions(basis: &LinearizedBasis, v: &Field) -> Field {
    let dirs = [basis.z_plus.clone(), basis.z_minus.clone(), basis.q_prime()];
    let gram = Mat::from_fn(3, 3, |i, j| dirs[i].dot(&dirs[j]));
    let rhs = Mat::from_fn(3, 1, |i, _| dirs[i].dot(v));
    let coef = gram.partial_piv_lu().solve(&rhs);
    let mut out = v.clone();
    for (i, d) in dirs.iter().enumerate() {
        out.axpy(-coef[(i, 0)], d);
    }
    out
}

/// Smallest Rayleigh quotient `(L_c v, v)/||v||_{H^1}^2` over random smooth
/// trial fields with the `z_plus`, `z_minus`, `Q_c'` directions removed.
/// A positive value is evidence of coercivity on that subspace.
pub fn coercivity_probe(basis: &LinearizedBasis, trials: usize, seed: u64) -> Result<f64> {
    if trials < 100 {
        return Err(Error::Argument(format!("need at least 100 trials, got {trials}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = *basis.grid();
    let ell = 1.0 / basis.c.sqrt();
    let mut worst = f64::INFINITY;
    for _ in 0..trials {
        let bumps: Vec<(f64, f64, f64, f64)> = (0..4)
            .map(|_| {
                (
                    rng.gen_range(-1.0..1.0),
                    basis.center + rng.gen_range(-4.0..4.0) * ell,
                    rng.gen_range(0.4..3.0) * ell,
                    rng.gen_range(0.0..3.0) / ell,
                )
            })
            .collect();
        let v = Field::from_fn(grid, |x| {
            bumps
                .iter()
                .map(|&(a, x0, w, k)| {
                    let d = grid.wrapped_offset(x, x0);
                    a * (-(d / w).powi(2)).exp() * (k * d).cos()
                })
                .sum()
        });
        let v = project_out_directions(basis, &v);
        if v.l2_norm() < 1e-10 {
            continue;
        }
        worst = worst.min(rayleigh_quotient(basis, &v));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    fn grid_for(c: f64) -> GridSpec {
        let l = 80.0 / c.sqrt();
        make_grid(1024, l, -0.5 * l).unwrap()
    }

    #[test]
    fn kernel_and_tails() {
        let g = make_grid(1024, 60.0, -30.0).unwrap();
        let qp = profiles::sample_profile(6, 1.0, &g, 0.0, ProfileDerivative::First);
        let lq = apply_operator(Operator::L, 6, 1.0, 0.0, &qp).unwrap();
        assert!(lq.sup_norm() < 1e-9, "{}", lq.sup_norm());
        let one = Field::constant(g, 1.0);
        let l1 = apply_operator(Operator::L, 6, 2.0, 0.0, &one).unwrap();
        assert!((l1.values()[20] - 2.0).abs() < 1e-12);
        assert!(apply_operator(Operator::L, 6, 1.0, 25.0, &one).is_err());
    }

    #[test]
    fn matrix_matches_operator() {
        let g = make_grid(64, 30.0, -15.0).unwrap();
        let m = collocation_matrix(6, 1.0, &g, 0.0);
        let v = Field::from_fn(g, |x| (-(x - 1.0) * (x - 1.0)).exp());
        let direct = apply_operator(Operator::CurlyL, 6, 1.0, 0.0, &v).unwrap();
        for i in 0..64 {
            let row: f64 = (0..64).map(|j| m[(i, j)] * v.values()[j]).sum();
            assert!((row - direct.values()[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn basis_identities() {
        let b = solve_spectrum(6, 1.0, &grid_for(1.0)).unwrap();
        let ch = b.checks();
        for (name, ok) in ch.flags() {
            assert!(ok, "{name} failed: {ch:?}");
        }
        assert!(b.eta0 > 0.0);
        let cl = apply_operator(Operator::CurlyL, 6, 1.0, b.center, &b.y_minus).unwrap();
        assert!((&cl + &b.y_minus.scaled(b.e_c)).l2_norm() < 1e-7);
    }

    #[test]
    fn normalization_is_idempotent_and_projective() {
        let b = solve_spectrum(6, 1.0, &grid_for(1.0)).unwrap();
        let again = normalize_basis(&b).unwrap();
        assert!((&again.y_plus - &b.y_plus).sup_norm() < 1e-12);
        let tripled = LinearizedBasis {
            y_plus: b.y_plus.scaled(-3.0),
            ..b.clone()
        };
        let n3 = normalize_basis(&tripled).unwrap();
        assert!((&n3.y_plus - &b.y_plus).sup_norm() < 1e-12);
        let zero = LinearizedBasis {
            y_plus: Field::zeros(*b.grid()),
            ..b.clone()
        };
        assert!(matches!(normalize_basis(&zero), Err(Error::DegenerateBasis(_))));
    }

    #[test]
    fn coercivity_needs_projections() {
        let b = solve_spectrum(6, 1.0, &grid_for(1.0)).unwrap();
        assert!(rayleigh_quotient(&b, &b.q_prime()).abs() < 1e-9);
        assert!(rayleigh_quotient(&b, &b.y_plus) < 0.0);
        let min = coercivity_probe(&b, 100, 7).unwrap();
        assert!(min > 0.0, "{min}");
        assert!(coercivity_probe(&b, 10, 7).is_err());
    }

    #[test]
    fn under_resolved_grid_rejected() {
        let g = make_grid(256, 100.0, -50.0).unwrap();
        assert!(matches!(solve_spectrum(6, 1.0, &g), Err(Error::Resolution(_))));
    }
}
