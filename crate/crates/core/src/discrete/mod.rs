//! Discrete-time SIR model with a log-Gaussian-process infection rate,
//! observed through removal days only.

mod likelihood;
mod ml;
mod sampler;

pub use likelihood::{discrete_augmented_loglik, discrete_log_h, BetaPrior};
pub use ml::{ml_daily_estimate, DailyEstimate};
pub use sampler::{
    initial_infection_days, run_discrete_gp_mcmc, DiscreteGpConfig, DiscreteSampler, RateSource,
};
