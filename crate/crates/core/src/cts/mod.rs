//! Continuous-time SIR model with a sigmoidal-GP infection rate
//! `beta(t) = beta* sigma(g(t))`, handled by thinning a rate `beta* X Y`
//! bounding process.

mod likelihood;
mod sampler;
mod sgcp;

pub use likelihood::{sir_thinned_augmented_loglik, ThinnedState};
pub use sampler::{attach_reporting_grid, run_cts_gp_mcmc, CtsConfig, CtsSampler, PointKind};
pub use sgcp::sgcp_augmented_loglik;
