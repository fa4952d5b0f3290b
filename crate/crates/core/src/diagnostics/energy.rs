//! Localized mass and energy, and the weighted functionals built on them.

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::profiles::{sample_profile, ProfileDerivative, SolitonFamily};
use crate::spectral::derivative;

use super::weights::weights;

/// Localized quantities `M_j`, `E_j` and `E~_j = E_j + (sigma0/100) M_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalQuantities {
    pub mass: Vec<f64>,
    pub energy: Vec<f64>,
    pub energy_tilde: Vec<f64>,
}

pub fn local_quantities(u: &Field, fam: &SolitonFamily, t: f64, sigma0: f64) -> LocalQuantities {
    let p = fam.p() as i32;
    let w = weights(fam, sigma0, t, u.grid());
    let ux = derivative(u, 1);
    let u2 = u.map(|v| v * v);
    let dens = u.zip_map(&ux, |v, d| 0.5 * d * d - v.powi(p + 1) / (p + 1) as f64);
    let mass: Vec<f64> = w.phi.iter().map(|f| u2.dot(f)).collect();
    let energy: Vec<f64> = w.phi.iter().map(|f| dens.dot(f)).collect();
    let energy_tilde = energy
        .iter()
        .zip(&mass)
        .map(|(e, m)| e + sigma0 / 100.0 * m)
        .collect();
    LocalQuantities {
        mass,
        energy,
        energy_tilde,
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `F = 2 [ (b+z)^{p+1}/(p+1) - b^{p+1}/(p+1) - b^p z ]`, expanded in powers
/// of `z` so small perturbations lose no digits to cancellation.
pub fn nonlinear_remainder(p: u32, b: f64, z: f64) -> f64 {
    let mut sum = 0.0;
    for k in 2..=p + 1 {
        sum += binomial(p + 1, k) * b.powi((p + 1 - k) as i32) * z.powi(k as i32);
    }
    2.0 * sum / (p + 1) as f64
}

/// `H(t) = int { (z_x^2 - F(t, z)) h + z^2 }` with `F` expanded around
/// `background + v_j`.
pub fn functional_h(
    z: &Field,
    background: &Field,
    v_j: &Field,
    fam: &SolitonFamily,
    t: f64,
    sigma0: f64,
) -> Result<f64> {
    if !z.same_grid(background) || !z.same_grid(v_j) {
        return Err(Error::Argument("functional_h: grid mismatch".into()));
    }
    let w = weights(fam, sigma0, t, z.grid());
    let zx = derivative(z, 1);
    let p = fam.p();
    let mut acc = 0.0;
    for i in 0..z.len() {
        let zi = z.values()[i];
        let b = background.values()[i] + v_j.values()[i];
        let f = nonlinear_remainder(p, b, zi);
        let zxi = zx.values()[i];
        acc += (zxi * zxi - f) * w.h.values()[i] + zi * zi;
    }
    Ok(acc * z.grid().spacing())
}

/// `H_j = int (w_x^2 + c_j w^2 - p R~_j^{p-1} w^2) phi_j` for every member,
/// with `R~_j` displaced by the modulation shifts `y` (zeros if empty).
pub fn local_linearized_energy(
    w: &Field,
    fam: &SolitonFamily,
    t: f64,
    y: &[f64],
    sigma0: f64,
) -> Result<Vec<f64>> {
    if !y.is_empty() && y.len() != fam.len() {
        return Err(Error::Argument(format!(
            "{} shifts for {} solitons",
            y.len(),
            fam.len()
        )));
    }
    let wt = weights(fam, sigma0, t, w.grid());
    let wx = derivative(w, 1);
    let p = fam.p();
    let mut out = Vec::with_capacity(fam.len());
    for (j, m) in fam.members().iter().enumerate() {
        let shift = y.get(j).copied().unwrap_or(0.0);
        let r = sample_profile(p, m.speed, w.grid(), m.position(t) + shift, ProfileDerivative::Value);
        let mut acc = 0.0;
        for i in 0..w.len() {
            let wi = w.values()[i];
            let pot = m.speed - p as f64 * r.values()[i].powi(p as i32 - 1);
            acc += (wx.values()[i].powi(2) + pot * wi * wi) * wt.phi[j].values()[i];
        }
        out.push(acc * w.grid().spacing());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::profiles::{multisoliton_sum, q_value};

    #[test]
    fn remainder_matches_direct_formula() {
        let p = 6;
        for &(b, z) in &[(0.7f64, 0.3f64), (1.2, -0.4), (0.0, 0.5)] {
            let q = (p + 1) as f64;
            let direct = 2.0 * ((b + z).powi(7) / q - b.powi(7) / q - b.powi(6) * z);
            assert!((nonlinear_remainder(p, b, z) - direct).abs() < 1e-13);
        }
        assert_eq!(nonlinear_remainder(p, 0.9, 0.0), 0.0);
    }

    #[test]
    fn local_masses_of_separated_solitons() {
        let fam = SolitonFamily::new(6, &[1.0, 2.0], &[-50.0, 40.0]).unwrap();
        let g = make_grid(4096, 200.0, -100.0).unwrap();
        let u = multisoliton_sum(&fam, 0.0, &g).unwrap();
        let lq = local_quantities(&u, &fam, 0.0, 0.67);
        // Independent line quadrature of int Q_c^2 on a fine uniform grid.
        for (m, c) in lq.mass.iter().zip([1.0, 2.0]) {
            let h = 1e-3;
            let exact: f64 = (-40_000..=40_000)
                .map(|i| q_value(6, c, i as f64 * h).powi(2) * h)
                .sum();
            assert!(((m - exact) / exact).abs() < 1e-6, "{m} {exact}");
        }
        let total = u.dot(&u);
        assert!((lq.mass.iter().sum::<f64>() - total).abs() < 1e-12 * total);
    }

    #[test]
    fn quadratic_scaling_of_h() {
        let fam = SolitonFamily::new(6, &[1.0, 2.0], &[-20.0, 0.0]).unwrap();
        let g = make_grid(1024, 200.0, -100.0).unwrap();
        let bg = multisoliton_sum(&fam, 0.0, &g).unwrap();
        let zero = Field::zeros(g);
        let shape = Field::from_fn(g, |x| (-(x + 20.0) * (x + 20.0) / 4.0).exp());
        let ratio = |d: f64| functional_h(&shape.scaled(d), &bg, &zero, &fam, 0.0, 0.67).unwrap() / (d * d);
        assert_eq!(functional_h(&zero, &bg, &zero, &fam, 0.0, 0.67).unwrap(), 0.0);
        let (a, b, c) = (ratio(1e-2), ratio(1e-3), ratio(1e-4));
        assert!((b - c).abs() < 0.1 * (a - b).abs() + 1e-12);
    }
}
