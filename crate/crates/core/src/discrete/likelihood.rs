use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::epi::{DiscretePeriod, RateFunction, RemovalData, TimeScale};
use crate::error::{Error, Result};

/// Beta prior `Beta(a, b)` on the geometric removal probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaPrior {
    pub a: f64,
    pub b: f64,
}

impl BetaPrior {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite() && b > 0.0 && b.is_finite()) {
            return Err(Error::Parameter(format!(
                "beta prior needs positive parameters, got ({a}, {b})"
            )));
        }
        Ok(BetaPrior { a, b })
    }

    pub fn mean(&self) -> f64 {
        self.a / (self.a + self.b)
    }

    /// `gamma | rest ~ Beta(n + a, sum(r_j - i_j) - n + b)`.
    pub fn sample_posterior<R: Rng + ?Sized>(&self, n: usize, sum_periods: i64, rng: &mut R) -> f64 {
        let a = self.a + n as f64;
        let b = self.b + (sum_periods - n as i64) as f64;
        Beta::new(a, b).expect("positive beta parameters").sample(rng)
    }
}

/// Per-day log contribution `C ln(1 - exp(-beta Y)) - beta Y X'`.
#[inline]
pub(crate) fn day_term(beta: f64, y: i64, new_infections: i64, x_next: i64) -> f64 {
    let rate = beta * y as f64;
    let mut v = -rate * x_next as f64;
    if new_infections > 0 {
        if rate <= 0.0 {
            return f64::NEG_INFINITY;
        }
        v += new_infections as f64 * (-(-rate).exp_m1()).ln();
    }
    v
}

fn check_inputs(days: &[i64], kappa: usize, removals: &[i64]) -> Result<()> {
    if days.len() != removals.len() {
        return Err(Error::Usage(format!(
            "{} infection days for {} removals",
            days.len(),
            removals.len()
        )));
    }
    if kappa >= days.len() {
        return Err(Error::Usage(format!("initial infective index {kappa} out of range")));
    }
    Ok(())
}

/// Log of the transmission part of the augmented likelihood,
/// `sum_{t = i_kappa}^{r_n - 1} [C(t+1) ln(1 - exp(-beta(t) Y(t))) - beta(t) Y(t) X(t+1)]`,
/// where `C(t+1)` counts infections on day `t + 1`. Individual `j` is
/// infected on `days[j]` and removed on `removals[j]`; `kappa` indexes the
/// initial infective. `beta(t)` is only queried on `i_kappa..=r_n - 1`.
pub fn discrete_log_h(
    days: &[i64],
    kappa: usize,
    removals: &[i64],
    population: usize,
    beta: impl Fn(i64) -> Result<f64>,
) -> Result<f64> {
    check_inputs(days, kappa, removals)?;
    if days.len() > population {
        return Err(Error::Usage("more infections than individuals".into()));
    }
    let start = days[kappa];
    let invalid = days
        .iter()
        .zip(removals)
        .enumerate()
        .any(|(j, (&i, &r))| r <= i || (j != kappa && i <= start));
    if invalid {
        return Ok(f64::NEG_INFINITY);
    }
    let end = removals.iter().cloned().max().unwrap_or(start) - 1;
    let n_pop = population as i64;
    let mut total = 0.0;
    for t in start..=end {
        let infected_by = |d: i64| days.iter().filter(|&&i| i <= d).count() as i64;
        let removed_by = removals.iter().filter(|&&r| r <= t).count() as i64;
        let y = infected_by(t) - removed_by;
        let c = days.iter().filter(|&&i| i == t + 1).count() as i64;
        let x_next = n_pop - infected_by(t + 1);
        total += day_term(beta(t)?, y, c, x_next);
        if total == f64::NEG_INFINITY {
            break;
        }
    }
    Ok(total)
}

/// Full augmented log-likelihood: [`discrete_log_h`] plus
/// `sum_j ln p(r_j - i_j)`. The rate must be defined on every day from the
/// initial infection to the day before the last removal.
pub fn discrete_augmented_loglik(
    days: &[i64],
    kappa: usize,
    data: &RemovalData,
    beta: &RateFunction,
    period: &dyn DiscretePeriod,
) -> Result<f64> {
    if data.time_scale() != TimeScale::Discrete {
        return Err(Error::Data("removal data are not on a daily scale".into()));
    }
    let removals = data.days()?;
    check_inputs(days, kappa, &removals)?;
    let lookup = |t: i64| {
        beta.eval(t as f64).map_err(|e| match e {
            Error::Domain(msg) => Error::Usage(format!("rate does not cover the outbreak: {msg}")),
            other => other,
        })
    };
    let log_h = discrete_log_h(days, kappa, &removals, data.population(), lookup)?;
    if log_h == f64::NEG_INFINITY {
        return Ok(log_h);
    }
    let log_p: f64 = days
        .iter()
        .zip(&removals)
        .map(|(&i, &r)| period.log_pmf(r - i))
        .sum();
    Ok(log_h + log_p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::epi::InfectiousPeriodModel;

    fn table(first: i64, values: &[f64]) -> RateFunction {
        let grid = (0..values.len()).map(|k| (first + k as i64) as f64).collect();
        RateFunction::tabulated(grid, values.to_vec()).unwrap()
    }

    #[test]
    fn two_day_outbreak() {
        let data = RemovalData::new(vec![2.0, 2.0], 2, TimeScale::Discrete).unwrap();
        let (b, g) = (0.7, 0.3);
        let period = InfectiousPeriodModel::geometric(g).unwrap();
        let ll = discrete_augmented_loglik(&[0, 1], 0, &data, &table(0, &[b, b]), &period).unwrap();
        let expect = (1.0 - (-b).exp()) * g * g * (1.0 - g);
        assert!((ll.exp() - expect).abs() < 1e-15);
    }

    #[test]
    fn single_individual() {
        let data = RemovalData::new(vec![5.0], 4, TimeScale::Discrete).unwrap();
        let g = 0.4;
        let period = InfectiousPeriodModel::geometric(g).unwrap();
        let beta = [0.1, 0.2, 0.3, 0.4, 0.5];
        let ll = discrete_augmented_loglik(&[1], 0, &data, &table(0, &beta), &period).unwrap();
        let exponent: f64 = (1..=4).map(|t| beta[t] * 1.0 * 3.0).sum();
        let expect = g * (1.0 - g).powi(3) * (-exponent).exp();
        assert!((ll.exp() - expect).abs() < 1e-15);
    }

    #[test]
    fn impossible_configurations() {
        let data = RemovalData::new(vec![2.0, 4.0], 3, TimeScale::Discrete).unwrap();
        let period = InfectiousPeriodModel::geometric(0.5).unwrap();
        let beta = table(-5, &[0.3; 10]);
        // second infection on a day after the first infective left
        let ll = discrete_augmented_loglik(&[0, 3], 0, &data, &beta, &period).unwrap();
        assert_eq!(ll, f64::NEG_INFINITY);
        // non-initial infection not after the initial one
        let ll = discrete_augmented_loglik(&[0, 0], 0, &data, &beta, &period).unwrap();
        assert_eq!(ll, f64::NEG_INFINITY);
        // removal not after infection
        let ll = discrete_augmented_loglik(&[2, 1], 1, &data, &beta, &period).unwrap();
        assert_eq!(ll, f64::NEG_INFINITY);
    }

    #[test]
    fn uncovered_rate_is_usage_error() {
        let data = RemovalData::new(vec![2.0, 4.0], 3, TimeScale::Discrete).unwrap();
        let period = InfectiousPeriodModel::geometric(0.5).unwrap();
        let r = discrete_augmented_loglik(&[0, 1], 0, &data, &table(1, &[0.3; 3]), &period);
        assert!(matches!(r, Err(Error::Usage(_))));
    }

    #[test]
    fn gamma_conditional_parameters() {
        // n = 2, sum = 3, Beta(1, 1) prior -> Beta(3, 2), mean 3/5
        let prior = BetaPrior::new(1.0, 1.0).unwrap();
        let mut r = crate::rng::from_seed(6);
        let n = 100_000;
        let mean = (0..n).map(|_| prior.sample_posterior(2, 3, &mut r)).sum::<f64>() / n as f64;
        let var = 3.0 * 2.0 / (25.0 * 6.0);
        assert!((mean - 0.6).abs() < 3.0 * (var / n as f64).sqrt(), "{mean}");
    }
}
