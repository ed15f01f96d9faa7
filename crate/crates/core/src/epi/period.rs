use rand::Rng;
use rand_distr::{Distribution, Exp, Geometric};

use crate::error::{Error, Result};

/// Infectious-period distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InfectiousPeriodModel {
    /// Continuous time: exponential with the given removal rate (mean `1/rate`).
    Exponential { rate: f64 },
    /// Discrete time: `p(k) = prob * (1 - prob)^(k-1)` for `k >= 1`, mean `1/prob`.
    Geometric { prob: f64 },
}

impl InfectiousPeriodModel {
    pub fn exponential(rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::Parameter(format!("removal rate must be positive, got {rate}")));
        }
        Ok(InfectiousPeriodModel::Exponential { rate })
    }

    /// `prob = 1` is accepted as the degenerate one-day period.
    pub fn geometric(prob: f64) -> Result<Self> {
        if !(prob > 0.0 && prob <= 1.0) {
            return Err(Error::Parameter(format!(
                "geometric parameter must lie in (0, 1], got {prob}"
            )));
        }
        Ok(InfectiousPeriodModel::Geometric { prob })
    }

    pub fn mean(&self) -> f64 {
        match *self {
            InfectiousPeriodModel::Exponential { rate } => 1.0 / rate,
            InfectiousPeriodModel::Geometric { prob } => 1.0 / prob,
        }
    }

    /// Draws a period: real for exponential, integer-valued (>= 1) for geometric.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            InfectiousPeriodModel::Exponential { rate } => {
                Exp::new(rate).expect("validated rate").sample(rng)
            }
            InfectiousPeriodModel::Geometric { prob } => sample_geometric(prob, rng) as f64,
        }
    }
}

/// Number of trials up to and including the first success; support 1, 2, ...
pub(crate) fn sample_geometric<R: Rng + ?Sized>(prob: f64, rng: &mut R) -> i64 {
    if prob >= 1.0 {
        return 1;
    }
    let failures = Geometric::new(prob).expect("validated probability").sample(rng);
    1 + failures.min(i64::MAX as u64 / 2) as i64
}

/// Integer-valued infectious periods, as used by the discrete-time likelihood.
pub trait DiscretePeriod {
    /// `log p(k)`, `-inf` outside the support.
    fn log_pmf(&self, k: i64) -> f64;

    fn pmf(&self, k: i64) -> f64 {
        self.log_pmf(k).exp()
    }
}

impl DiscretePeriod for InfectiousPeriodModel {
    fn log_pmf(&self, k: i64) -> f64 {
        match *self {
            InfectiousPeriodModel::Geometric { prob } => {
                if k < 1 {
                    f64::NEG_INFINITY
                } else if k == 1 {
                    prob.ln()
                } else {
                    prob.ln() + (k - 1) as f64 * (-prob).ln_1p()
                }
            }
            InfectiousPeriodModel::Exponential { .. } => f64::NEG_INFINITY,
        }
    }
}
