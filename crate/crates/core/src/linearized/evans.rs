//! Shooting oracle for the unstable eigenvalue, independent of the
//! collocation matrix.
//!
//! `(curly L_c - e) v = 0` is the third-order ODE
//! `v''' = c v' - p (Q^(p-1))' v - p Q^(p-1) v' + e v`. For `e > 0` the
//! far-field characteristic roots of `l^3 - c l - e` are one positive root
//! (the decaying mode at `-inf`) and a pair with negative real part (the
//! decaying plane at `+inf`). An eigenvalue is an `e` at which the left
//! decaying solution lies in the right decaying plane, detected as a zero of
//! the 3x3 determinant of the three solutions continued to `x = 0`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::profiles::{q_prime, q_value};

/// Largest positive root of `l^3 - c l - e` for `e > 0`.
fn growing_root(c: f64, e: f64) -> f64 {
    let mut l = c.sqrt() + e.cbrt() + 1.0;
    for _ in 0..100 {
        let f = l * l * l - c * l - e;
        let step = f / (3.0 * l * l - c);
        l -= step;
        if step.abs() < 1e-16 * l {
            break;
        }
    }
    l
}

#[derive(Clone, Copy)]
struct Ode {
    p: u32,
    c: f64,
    e: f64,
}

impl Ode {
    fn rhs(&self, x: f64, v: [f64; 3]) -> [f64; 3] {
        let p = self.p as f64;
        let q = q_value(self.p, self.c, x);
        let qm = q.powi(self.p as i32 - 1);
        let dqm = (p - 1.0) * q.powi(self.p as i32 - 2) * q_prime(self.p, self.c, x);
        [
            v[1],
            v[2],
            self.c * v[1] - p * dqm * v[0] - p * qm * v[1] + self.e * v[0],
        ]
    }

    /// Integrates from `x0` to `x1` with classical fourth-order Runge-Kutta,
    /// renormalizing the vector as it grows.
    fn integrate(&self, mut v: [f64; 3], x0: f64, x1: f64, steps: usize) -> [f64; 3] {
        let h = (x1 - x0) / steps as f64;
        let add = |a: [f64; 3], b: [f64; 3], s: f64| [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]];
        for i in 0..steps {
            let x = x0 + i as f64 * h;
            let k1 = self.rhs(x, v);
            let k2 = self.rhs(x + 0.5 * h, add(v, k1, 0.5 * h));
            let k3 = self.rhs(x + 0.5 * h, add(v, k2, 0.5 * h));
            let k4 = self.rhs(x + h, add(v, k3, h));
            for j in 0..3 {
                v[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            }
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if n > 1e100 {
                v = v.map(|a| a / n);
            }
        }
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        v.map(|a| a / n)
    }
}

/// Numerical parameters of the shooting oracle.
#[derive(Debug, Clone, Copy)]
pub struct EvansOptions {
    /// Half-width of the integration interval, in decay lengths.
    pub half_width: f64,
    /// RK4 steps per decay length.
    pub steps_per_length: usize,
    /// Number of scan intervals when bracketing roots.
    pub scan_points: usize,
}

impl Default for EvansOptions {
    fn default() -> Self {
        EvansOptions {
            half_width: 14.0,
            steps_per_length: 800,
            scan_points: 240,
        }
    }
}

/// Matching determinant at `x = 0` for spectral parameter `e > 0`, or `None`
/// exactly at the switch between a real and complex pair of decaying roots.
pub fn evans_determinant(p: u32, c: f64, e: f64, opts: &EvansOptions) -> Option<f64> {
    let ode = Ode { p, c, e };
    let x_far = opts.half_width / c.sqrt();
    let steps = (opts.half_width * opts.steps_per_length as f64) as usize;
    let l1 = growing_root(c, e);
    let left = ode.integrate([1.0, l1, l1 * l1], -x_far, 0.0, steps);

    // Decaying pair: roots of l^2 + l1 l + (l1^2 - c).
    let disc = l1 * l1 - 4.0 * (l1 * l1 - c);
    let (r1, r2) = if disc < 0.0 {
        let l = Complex64::new(-0.5 * l1, 0.5 * (-disc).sqrt());
        let l2 = l * l;
        ([1.0, l.re, l2.re], [0.0, l.im, l2.im])
    } else if disc > 0.0 {
        let a = -0.5 * l1 + 0.5 * disc.sqrt();
        let b = -0.5 * l1 - 0.5 * disc.sqrt();
        ([1.0, a, a * a], [1.0, b, b * b])
    } else {
        return None;
    };
    let r1 = ode.integrate(r1, x_far, 0.0, steps);
    let r2 = ode.integrate(r2, x_far, 0.0, steps);
    let det = left[0] * (r1[1] * r2[2] - r1[2] * r2[1]) - left[1] * (r1[0] * r2[2] - r1[2] * r2[0])
        + left[2] * (r1[0] * r2[1] - r1[1] * r2[0]);
    Some(det)
}

/// All roots of the matching determinant in `(e_lo, e_hi)`, found by a
/// uniform scan followed by bisection. The scan never straddles the switch
/// between real and complex decaying roots, where the determinant changes
/// orientation without a root.
pub fn evans_roots(p: u32, c: f64, e_lo: f64, e_hi: f64, opts: &EvansOptions) -> Vec<f64> {
    // The decaying pair is complex iff e > 2 (c/3)^(3/2).
    let switch = 2.0 * (c / 3.0).powf(1.5);
    let mut roots = Vec::new();
    let mut segments = Vec::new();
    if e_lo < switch {
        segments.push((e_lo, switch.min(e_hi)));
    }
    if e_hi > switch {
        segments.push((switch.max(e_lo), e_hi));
    }
    for (a, b) in segments {
        let pad = 1e-9 * (b - a);
        let (a, b) = (a + pad, b - pad);
        let k = opts.scan_points;
        let at = |i: usize| a + (b - a) * i as f64 / k as f64;
        let mut prev = (at(0), evans_determinant(p, c, at(0), opts));
        for i in 1..=k {
            let e = at(i);
            let d = evans_determinant(p, c, e, opts);
            if let (Some(d0), Some(d1)) = (prev.1, d) {
                if d0 == 0.0 {
                    roots.push(prev.0);
                } else if d0.signum() != d1.signum() {
                    roots.push(bisect(p, c, prev.0, e, d0, opts));
                }
            }
            prev = (e, d);
        }
    }
    roots
}

fn bisect(p: u32, c: f64, mut a: f64, mut b: f64, mut da: f64, opts: &EvansOptions) -> f64 {
    for _ in 0..80 {
        let m = 0.5 * (a + b);
        if b - a <= 1e-15 * m {
            break;
        }
        let dm = evans_determinant(p, c, m, opts).unwrap_or(da);
        if dm.signum() == da.signum() {
            a = m;
            da = dm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// The unique positive eigenvalue `e_c` located by the shooting oracle in
/// `(0.02, 4) c^(3/2)`.
pub fn evans_eigenvalue(p: u32, c: f64) -> Result<f64> {
    let opts = EvansOptions::default();
    let s = c.powf(1.5);
    let roots = evans_roots(p, c, 0.02 * s, 4.0 * s, &opts);
    match roots.as_slice() {
        [] => Err(Error::Resolution(format!(
            "shooting oracle found no eigenvalue for p = {p}, c = {c}"
        ))),
        [e] => Ok(*e),
        many => Err(Error::Ambiguity(format!(
            "shooting oracle found {} roots: {many:?}",
            many.len()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn growing_root_solves_cubic() {
        for &(c, e) in &[(1.0, 0.6), (4.0, 0.1), (0.25, 3.0)] {
            let l = growing_root(c, e);
            assert!((l * l * l - c * l - e).abs() < 1e-12);
            assert!(l > c.sqrt());
        }
    }

    #[test]
    fn oracle_scales_like_c_to_three_halves() {
        let e1 = evans_eigenvalue(6, 1.0).unwrap();
        let e4 = evans_eigenvalue(6, 4.0).unwrap();
        assert!((e4 / e1 - 8.0).abs() < 1e-6, "{e1} {e4}");
    }
}
