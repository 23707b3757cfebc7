//! Traveling waves of the diffusive SIR model with standard incidence.
//!
//! The crate is organised bottom-up: [`model`] holds parameters and grids,
//! [`linear_analysis`] the minimal-speed theory, [`resolvent`] the integral
//! operators, [`wave_profile`] the profile solvers, [`pde_sim`] the
//! time-dependent simulator and [`verification`] the consolidated checks.

pub mod linear_analysis;
pub mod model;
pub mod numerics;
pub mod resolvent;

pub use linear_analysis::{
    c_star, characteristic_f, lambda0, minimal_speed, CharRoots, LinearError, SpeedAnalysis,
};
pub use model::{
    incidence, r_naught, reaction_terms, Grid, GridFunction, ModelError, ModelParams, Profile, Tail,
    INCIDENCE_GUARD,
};
pub use resolvent::{
    apply_delta, apply_delta_inverse, choose_alphas, choose_mu, ResolventError, ResolventSpec,
    WeightedNormContext,
};
pub mod wave_profile;
pub mod pde_sim;
pub mod verification;
