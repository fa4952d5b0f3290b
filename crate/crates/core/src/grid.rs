//! Periodic grids, sampled fields and quadrature.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral;

/// Uniform periodic grid on `[origin, origin + domain_length)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub num_points: usize,
    pub domain_length: f64,
    pub origin: f64,
}

/// Builds a grid with nodes `origin + i * spacing`, `i = 0..num_points`.
pub fn make_grid(num_points: usize, domain_length: f64, origin: f64) -> Result<GridSpec> {
    let grid = GridSpec {
        num_points,
        domain_length,
        origin,
    };
    grid.validate()?;
    Ok(grid)
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_points < 8 || !self.num_points.is_power_of_two() {
            return Err(Error::config(
                "grid.num_points",
                format!("must be a power of two >= 8, got {}", self.num_points),
            ));
        }
        if !(self.domain_length.is_finite() && self.domain_length > 0.0) {
            return Err(Error::config(
                "grid.domain_length",
                format!("must be positive, got {}", self.domain_length),
            ));
        }
        if !self.origin.is_finite() {
            return Err(Error::config("grid.origin", "must be finite"));
        }
        Ok(())
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        self.domain_length / self.num_points as f64
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.spacing()
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.num_points).map(move |i| self.node(i))
    }

    /// Midpoint of the box. It is always a node (index `num_points / 2`).
    pub fn center(&self) -> f64 {
        self.origin + 0.5 * self.domain_length
    }

    pub fn end(&self) -> f64 {
        self.origin + self.domain_length
    }

    /// Offset `x - center` folded into `[-L/2, L/2)`.
    pub fn wrapped_offset(&self, x: f64, center: f64) -> f64 {
        let l = self.domain_length;
        let d = x - center;
        d - l * ((d + 0.5 * l) / l).floor()
    }

    /// Distance from `x` to the nearer edge of the box.
    pub fn edge_distance(&self, x: f64) -> f64 {
        (x - self.origin).min(self.end() - x)
    }

    /// Angular wavenumber of FFT bin `m` (Nyquist bin reported as positive).
    pub fn wavenumber(&self, m: usize) -> f64 {
        let n = self.num_points;
        let signed = if m <= n / 2 { m as f64 } else { m as f64 - n as f64 };
        2.0 * std::f64::consts::PI * signed / self.domain_length
    }

    /// Largest resolved wavenumber `pi / spacing`.
    pub fn nyquist(&self) -> f64 {
        std::f64::consts::PI / self.spacing()
    }
}

/// Real function sampled on a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: GridSpec,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_points {
            return Err(Error::Argument(format!(
                "field has {} values but grid has {} points",
                values.len(),
                grid.num_points
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Argument(format!("non-finite value at node {i}")));
        }
        Ok(Field { grid, values })
    }

    /// Constructor for values already known to be valid.
    pub(crate) fn from_vec(grid: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.num_points);
        Field { grid, values }
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Field::from_vec(grid, vec![0.0; grid.num_points])
    }

    pub fn constant(grid: GridSpec, value: f64) -> Self {
        Field::from_vec(grid, vec![value; grid.num_points])
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(f64) -> f64) -> Self {
        Field::from_vec(grid, grid.nodes().map(f).collect())
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_vec(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        assert_same_grid(self, other);
        Field::from_vec(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &Field) {
        assert_same_grid(self, other);
        for (s, o) in self.values.iter_mut().zip(&other.values) {
            *s += a * o;
        }
    }

    pub fn scaled(&self, a: f64) -> Field {
        self.map(|v| a * v)
    }

    /// Trapezoidal `L^2` inner product.
    pub fn dot(&self, other: &Field) -> f64 {
        assert_same_grid(self, other);
        self.grid.spacing() * dot_slices(&self.values, &other.values)
    }

    /// Trapezoidal integral of the field.
    pub fn integral(&self) -> f64 {
        self.grid.spacing() * self.values.iter().sum::<f64>()
    }

    pub fn l2_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn h1_norm(&self) -> f64 {
        let dx = spectral::derivative(self, 1);
        (self.dot(self) + dx.dot(&dx)).sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn same_grid(&self, other: &Field) -> bool {
        self.grid == other.grid
    }
}

fn dot_slices(a: &[f64], b: &[f64]) -> f64 {
    // Four accumulators keep the sum order fixed and vectorisable.
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

fn assert_same_grid(a: &Field, b: &Field) {
    assert!(
        a.grid == b.grid,
        "field grid mismatch: {:?} vs {:?}",
        a.grid,
        b.grid
    );
}

impl Add<&Field> for &Field {
    type Output = Field;
    fn add(self, rhs: &Field) -> Field {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub<&Field> for &Field {
    type Output = Field;
    fn sub(self, rhs: &Field) -> Field {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Mul<&Field> for f64 {
    type Output = Field;
    fn mul(self, rhs: &Field) -> Field {
        rhs.scaled(self)
    }
}

impl Neg for &Field {
    type Output = Field;
    fn neg(self) -> Field {
        self.map(|v| -v)
    }
}

/// Quadrature mode for [`integrate_inner`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormMode {
    L2Inner,
    L2Norm,
    H1Norm,
    SupNorm,
}

/// Quadrature entry point: inner product of `f` and `g`, or a norm of `f`.
///
/// `L2Inner` needs `g`; the norm modes ignore it. The trapezoidal rule is
/// spectrally accurate for smooth periodic integrands, and `h1_norm` takes
/// the derivative spectrally.
pub fn integrate_inner(f: &Field, g: Option<&Field>, mode: NormMode) -> Result<f64> {
    if let Some(g) = g {
        if !f.same_grid(g) {
            return Err(Error::Argument(format!(
                "grid mismatch: {:?} vs {:?}",
                f.grid(),
                g.grid()
            )));
        }
    }
    match mode {
        NormMode::L2Inner => {
            let g = g.ok_or_else(|| Error::Argument("l2_inner needs a second field".into()))?;
            Ok(f.dot(g))
        }
        NormMode::L2Norm => Ok(f.l2_norm()),
        NormMode::H1Norm => Ok(f.h1_norm()),
        NormMode::SupNorm => Ok(f.sup_norm()),
    }
}
