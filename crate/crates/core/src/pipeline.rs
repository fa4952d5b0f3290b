//! Shared setup for runs driven by a [`RunConfig`].

use crate::config::RunConfig;
use crate::constructor::ShootConfig;
use crate::diagnostics::ClassifyConfig;
use crate::error::Result;
use crate::frame::MovingFrame;
use crate::linearized::{solve_spectrum, LinearizedBasis};
use crate::profiles::{interaction_constants, InteractionConstants, SolitonFamily};

/// Family, eigenbases and derived constants for one configuration.
#[derive(Debug)]
pub struct Prepared {
    pub family: SolitonFamily,
    pub frame: MovingFrame,
    pub constants: InteractionConstants,
    pub shoot: ShootConfig,
    pub classify: ClassifyConfig,
}

impl Prepared {
    pub fn bases(&self) -> Vec<&LinearizedBasis> {
        (0..self.frame.len()).map(|k| self.frame.basis(k)).collect()
    }

    /// Largest rate `e_N`.
    pub fn e_max(&self) -> f64 {
        self.frame.basis(self.frame.len() - 1).e_c
    }

    /// `tol e^{e_N S}`: the shooting tolerance carried to the final time.
    pub fn propagated_tolerance(&self) -> f64 {
        self.shoot.tol * (self.e_max() * self.shoot.s).exp()
    }
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    cfg.validate()?;
    let family = cfg.soliton_family()?;
    let bases = family
        .speeds()
        .iter()
        .map(|&c| solve_spectrum(family.p(), c, &cfg.grid))
        .collect::<Result<Vec<_>>>()?;
    let eta0 = bases.iter().map(|b| b.eta0).fold(f64::INFINITY, f64::min);
    let mut constants = interaction_constants(&family, bases[0].e0(), eta0)?;
    if let Some(g) = cfg.tolerances.gamma_eff_override {
        constants = constants.with_gamma_eff(g)?;
    }
    let frame = MovingFrame::new(&family, &bases)?;
    let shoot = cfg.shoot_config(constants.gamma_eff);
    let e_max = bases.last().unwrap().e_c;
    let mut classify = ClassifyConfig::new(constants.gamma_eff, shoot.tol, e_max, shoot.t0);
    classify.refine_steps = cfg.tolerances.refine_steps;
    classify.projection_noise = cfg.tolerances.projection_noise;
    if let Some(t) = cfg.tolerances.tol_class {
        classify.tol_class = t;
    }
    Ok(Prepared {
        family,
        frame,
        constants,
        shoot,
        classify,
    })
}
