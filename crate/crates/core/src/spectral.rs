//! Fourier collocation on periodic grids: derivatives, translations,
//! reflection and trigonometric resampling.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn plans(n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft_forward(n), p.plan_fft_inverse(n))
    })
}

/// Unnormalised forward DFT of a real field.
pub fn forward(f: &Field) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plans(buf.len()).0.process(&mut buf);
    buf
}

/// Inverse DFT (with the `1/n` factor) keeping the real part.
pub fn inverse(grid: GridSpec, mut spectrum: Vec<Complex64>) -> Field {
    let n = spectrum.len();
    plans(n).1.process(&mut spectrum);
    let scale = 1.0 / n as f64;
    Field::from_vec(grid, spectrum.iter().map(|c| c.re * scale).collect())
}

/// Multiplier `(ik)^order` for every FFT bin; odd orders zero the Nyquist bin.
pub fn derivative_symbol(grid: &GridSpec, order: u32) -> Vec<Complex64> {
    let n = grid.num_points;
    (0..n)
        .map(|m| {
            if m == n / 2 && order % 2 == 1 {
                return Complex64::new(0.0, 0.0);
            }
            Complex64::new(0.0, grid.wavenumber(m)).powu(order)
        })
        .collect()
}

pub(crate) fn derivative(f: &Field, order: u32) -> Field {
    if order == 0 {
        return f.clone();
    }
    let symbol = derivative_symbol(f.grid(), order);
    let mut spec = forward(f);
    for (s, k) in spec.iter_mut().zip(&symbol) {
        *s *= k;
    }
    inverse(*f.grid(), spec)
}

/// Fourier-collocation derivative of order 1, 2 or 3.
pub fn spectral_derivative(f: &Field, order: u32) -> Result<Field> {
    if !(1..=3).contains(&order) {
        return Err(Error::Argument(format!(
            "unsupported derivative order {order}; expected 1, 2 or 3"
        )));
    }
    Ok(derivative(f, order))
}

/// Spectrum prepared once so that many translates can be produced cheaply.
#[derive(Debug, Clone)]
pub struct Translator {
    grid: GridSpec,
    spectrum: Vec<Complex64>,
}

impl Translator {
    pub fn new(f: &Field) -> Self {
        Translator {
            grid: *f.grid(),
            spectrum: forward(f),
        }
    }

    /// `x -> f(x - shift)`, exact for resolved modes.
    pub fn shifted(&self, shift: f64) -> Field {
        let n = self.grid.num_points;
        let spec = self
            .spectrum
            .iter()
            .enumerate()
            .map(|(m, s)| {
                let k = self.grid.wavenumber(m);
                if m == n / 2 {
                    // Keep the Nyquist bin real so the result stays real.
                    s * (k * shift).cos()
                } else {
                    s * Complex64::from_polar(1.0, -k * shift)
                }
            })
            .collect();
        inverse(self.grid, spec)
    }
}

/// `x -> f(x - shift)` via the Fourier shift theorem.
pub fn translate(f: &Field, shift: f64) -> Field {
    Translator::new(f).shifted(shift)
}

/// Reflection about the box center, `x -> f(2 m - x)`.
pub fn reflect(f: &Field) -> Field {
    let n = f.len();
    let v = f.values();
    Field::from_vec(*f.grid(), (0..n).map(|i| v[(n - i) % n]).collect())
}

/// Ratio of the largest modal amplitude with `|k| >= 0.9 k_nyquist` to the
/// largest amplitude overall.
pub fn modal_tail_ratio(f: &Field) -> f64 {
    let spec = forward(f);
    let grid = f.grid();
    let cutoff = 0.9 * grid.nyquist();
    let mut peak = 0.0f64;
    let mut tail = 0.0f64;
    for (m, s) in spec.iter().enumerate() {
        let a = s.norm();
        peak = peak.max(a);
        if grid.wavenumber(m).abs() >= cutoff {
            tail = tail.max(a);
        }
    }
    if peak == 0.0 {
        0.0
    } else {
        tail / peak
    }
}

/// Evaluates the trigonometric interpolant of `f` on the nodes of `target`.
///
/// Target nodes outside the source box get zero, so this is meant for
/// localised fields that are negligible near the source box edges.
pub fn resample(f: &Field, target: &GridSpec) -> Field {
    let src = f.grid();
    let h = src.spacing();
    let offset = (target.origin - src.origin) / h;
    if (target.spacing() - h).abs() <= 1e-14 * h && (offset - offset.round()).abs() < 1e-9 {
        let shift = offset.round() as i64;
        let values = (0..target.num_points)
            .map(|i| {
                let j = i as i64 + shift;
                if j >= 0 && (j as usize) < src.num_points {
                    f.values()[j as usize]
                } else {
                    0.0
                }
            })
            .collect();
        return Field::from_vec(*target, values);
    }

    let n = src.num_points;
    let spec = forward(f);
    let k1 = 2.0 * PI / src.domain_length;
    let scale = 1.0 / n as f64;
    let values = target
        .nodes()
        .map(|x| {
            let t = x - src.origin;
            if t < -1e-12 * src.domain_length || t >= src.domain_length {
                return 0.0;
            }
            let step = Complex64::from_polar(1.0, k1 * t);
            let mut rot = step;
            let mut acc = spec[0].re;
            for s in spec.iter().take(n / 2).skip(1) {
                acc += 2.0 * (s * rot).re;
                rot *= step;
            }
            acc += spec[n / 2].re * (k1 * (n / 2) as f64 * t).cos();
            acc * scale
        })
        .collect();
    Field::from_vec(*target, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    fn grid() -> GridSpec {
        make_grid(64, 10.0, -5.0).unwrap()
    }

    #[test]
    fn pure_mode_derivative_is_exact() {
        let g = grid();
        let w = 2.0 * PI / g.domain_length;
        let f = Field::from_fn(g, |x| (w * x).sin());
        let d = spectral_derivative(&f, 1).unwrap();
        let exact = Field::from_fn(g, |x| w * (w * x).cos());
        assert!((&d - &exact).sup_norm() < 1e-13);
        let d3 = spectral_derivative(&f, 3).unwrap();
        let exact3 = Field::from_fn(g, |x| -w.powi(3) * (w * x).cos());
        assert!((&d3 - &exact3).sup_norm() < 1e-12);
    }

    #[test]
    fn constant_has_zero_derivatives() {
        let f = Field::constant(grid(), 3.5);
        for order in 1..=3 {
            assert!(spectral_derivative(&f, order).unwrap().sup_norm() < 1e-13);
        }
    }

    #[test]
    fn unsupported_order_is_rejected() {
        let f = Field::zeros(grid());
        assert!(matches!(spectral_derivative(&f, 4), Err(Error::Argument(_))));
        assert!(matches!(spectral_derivative(&f, 0), Err(Error::Argument(_))));
    }

    #[test]
    fn odd_derivative_kills_nyquist() {
        let g = grid();
        let f = Field::from_fn(g, |x| (g.nyquist() * (x - g.origin)).cos());
        assert!(spectral_derivative(&f, 1).unwrap().sup_norm() < 1e-12);
        let d2 = spectral_derivative(&f, 2).unwrap();
        assert!((&d2 + &f.scaled(g.nyquist().powi(2))).sup_norm() < 1e-9);
    }

    #[test]
    fn translate_and_reflect() {
        let g = make_grid(256, 40.0, -20.0).unwrap();
        let gauss = |x: f64| (-x * x).exp();
        let f = Field::from_fn(g, gauss);
        let t = translate(&f, 1.37);
        let exact = Field::from_fn(g, |x| gauss(x - 1.37));
        assert!((&t - &exact).sup_norm() < 1e-12);
        let odd = Field::from_fn(g, |x| x * gauss(x - 0.5));
        let r = reflect(&odd);
        let exact = Field::from_fn(g, |x| -x * gauss(-x - 0.5));
        assert!((&r - &exact).sup_norm() < 1e-13);
    }

    #[test]
    fn resample_onto_finer_and_wider_grid() {
        let g = make_grid(256, 40.0, -20.0).unwrap();
        let gauss = |x: f64| (-(x - 0.3) * (x - 0.3)).exp();
        let f = Field::from_fn(g, gauss);
        let target = make_grid(1024, 100.0, -50.0).unwrap();
        let r = resample(&f, &target);
        let exact = Field::from_fn(target, gauss);
        assert!((&r - &exact).sup_norm() < 1e-12);
        let aligned = make_grid(512, 80.0, -40.0).unwrap();
        let r = resample(&f, &aligned);
        let exact = Field::from_fn(aligned, gauss);
        assert!((&r - &exact).sup_norm() < 1e-15);
    }
}
