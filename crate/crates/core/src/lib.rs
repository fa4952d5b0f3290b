//! Numerical construction and classification of multi-solitons for the
//! supercritical generalized KdV equation `u_t + (u_xx + u^p)_x = 0`.

pub mod config;
pub mod constructor;
pub mod diagnostics;
pub mod error;
pub mod evolver;
pub mod frame;
pub mod grid;
pub mod io;
pub mod linearized;
pub mod pipeline;
pub mod profiles;
pub mod spectral;

pub use constructor::{
    assemble_final_data, build_family, gram_matrix, modulated_beta, shoot, Background,
    FamilyBuilder, FamilyCache, FinalDataSpec, ShootConfig, ShootExit, ShootingResult,
};
pub use config::{parse_config, RunConfig};
pub use diagnostics::{classify, modulate, project, uniqueness_residual, ProjectionSeries};
pub use error::{Error, ErrorClass, Result};
pub use evolver::{conserved_quantities, evolve, EvolveConfig, Trajectory};
pub use frame::MovingFrame;
pub use grid::{integrate_inner, make_grid, Field, GridSpec, NormMode};
pub use pipeline::{prepare, Prepared};
pub use linearized::{
    apply_operator, coercivity_probe, normalize_basis, solve_spectrum, LinearizedBasis, Operator,
};
pub use profiles::{
    interaction_constants, multisoliton_sum, q_profile, soliton_field, InteractionConstants,
    SolitonFamily, SolitonParams,
};
pub use spectral::{reflect, resample, spectral_derivative, translate};
