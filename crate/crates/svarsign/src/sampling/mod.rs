//! Posterior and orthogonal-matrix sampling, and the accept-reject samplers
//! for restriction-consistent impact matrices.

mod draw;
mod orthogonal;
mod posterior;

pub use draw::{
    a0_mode_draw, algorithm1_draw, collect_draws, draw_once, enumerate_assignments,
    fallback_enumeration_draw, rwz_draw, AdmissibleDraw, Algorithm, Collection, DrawConfig,
    DrawCounters, DrawStats, ShockAssignment,
};
pub use orthogonal::{cholesky_lower, sample_haar};
pub use posterior::{
    fit_ols_params, fit_posterior, log_marginal_likelihood, MinnesotaHyper, NiwPosterior, Posterior,
    PosteriorDraws,
};
