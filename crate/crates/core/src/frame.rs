//! Per-soliton eigenbasis carried along the soliton paths `x_k + c_k t`.

use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec};
use crate::linearized::LinearizedBasis;
use crate::profiles::{self, ProfileDerivative, SolitonFamily};
use crate::spectral::Translator;

struct Member {
    basis: LinearizedBasis,
    y_plus: Translator,
    y_minus: Translator,
    z_plus: Translator,
    z_minus: Translator,
}

/// The family together with one normalized basis per member, all on the
/// same grid, able to produce `Y_k^pm(t)`, `Z_k^pm(t)` and `R_k(t)`.
pub struct MovingFrame {
    fam: SolitonFamily,
    grid: GridSpec,
    members: Vec<Member>,
}

impl std::fmt::Debug for MovingFrame {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MovingFrame")
            .field("fam", &self.fam)
            .field("grid", &self.grid)
            .finish_non_exhaustive()
    }
}

impl MovingFrame {
    /// `bases[k]` must be the basis for speed `c_k`, on the grid the
    /// trajectories live on.
    pub fn new(fam: &SolitonFamily, bases: &[LinearizedBasis]) -> Result<Self> {
        if bases.len() != fam.len() {
            return Err(Error::Argument(format!(
                "{} bases for {} solitons",
                bases.len(),
                fam.len()
            )));
        }
        let grid = *bases[0].grid();
        let mut members = Vec::with_capacity(bases.len());
        for (b, m) in bases.iter().zip(fam.members()) {
            if *b.grid() != grid {
                return Err(Error::Argument("bases live on different grids".into()));
            }
            if (b.c - m.speed).abs() > 1e-12 * m.speed || b.p != fam.p() {
                return Err(Error::Argument(format!(
                    "basis for c = {} (p = {}) does not match soliton c = {} (p = {})",
                    b.c,
                    b.p,
                    m.speed,
                    fam.p()
                )));
            }
            members.push(Member {
                basis: b.clone(),
                y_plus: Translator::new(&b.y_plus),
                y_minus: Translator::new(&b.y_minus),
                z_plus: Translator::new(&b.z_plus),
                z_minus: Translator::new(&b.z_minus),
            });
        }
        Ok(MovingFrame {
            fam: fam.clone(),
            grid,
            members,
        })
    }

    pub fn family(&self) -> &SolitonFamily {
        &self.fam
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn basis(&self, k: usize) -> &LinearizedBasis {
        &self.members[k].basis
    }

    /// `e_k` for every member.
    pub fn rates(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.basis.e_c).collect()
    }

    fn shift(&self, k: usize, t: f64) -> f64 {
        self.fam.members()[k].position(t) - self.members[k].basis.center
    }

    pub fn y_plus(&self, k: usize, t: f64) -> Field {
        self.members[k].y_plus.shifted(self.shift(k, t))
    }

    pub fn y_minus(&self, k: usize, t: f64) -> Field {
        self.members[k].y_minus.shifted(self.shift(k, t))
    }

    pub fn z_plus(&self, k: usize, t: f64) -> Field {
        self.members[k].z_plus.shifted(self.shift(k, t))
    }

    pub fn z_minus(&self, k: usize, t: f64) -> Field {
        self.members[k].z_minus.shifted(self.shift(k, t))
    }

    /// `R_k(t)`.
    pub fn r(&self, k: usize, t: f64) -> Field {
        let m = &self.fam.members()[k];
        profiles::sample_profile(self.fam.p(), m.speed, &self.grid, m.position(t), ProfileDerivative::Value)
    }

    /// `(R_k)_x(t)`.
    pub fn r_x(&self, k: usize, t: f64) -> Field {
        let m = &self.fam.members()[k];
        profiles::sample_profile(self.fam.p(), m.speed, &self.grid, m.position(t), ProfileDerivative::First)
    }

    /// `R(t)`, after checking every soliton is inside the window.
    pub fn multisoliton(&self, t: f64) -> Result<Field> {
        profiles::multisoliton_sum(&self.fam, t, &self.grid)
    }
}
