use crate::error::{Error, Result};

use super::TimeScale;

/// Observed removal times of a completed outbreak.
#[derive(Debug, Clone, PartialEq)]
pub struct RemovalData {
    times: Vec<f64>,
    population: usize,
    time_scale: TimeScale,
}

impl RemovalData {
    /// Sorts and validates removal times. Continuous data must be free of
    /// ties; see [`RemovalData::continuous_with_tie_breaking`].
    pub fn new(mut times: Vec<f64>, population: usize, time_scale: TimeScale) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::Data("no removals".into()));
        }
        if let Some(t) = times.iter().find(|t| !t.is_finite()) {
            return Err(Error::Data(format!("non-finite removal time {t}")));
        }
        if times.len() > population {
            return Err(Error::Data(format!(
                "{} removals exceed the population size {population}",
                times.len()
            )));
        }
        times.sort_by(f64::total_cmp);
        match time_scale {
            TimeScale::Discrete => {
                if let Some(t) = times.iter().find(|t| t.fract() != 0.0) {
                    return Err(Error::Data(format!("non-integer removal day {t}")));
                }
            }
            TimeScale::Continuous => {
                if let Some(w) = times.windows(2).find(|w| w[0] == w[1]) {
                    return Err(Error::Data(format!("tied continuous removal times at {}", w[0])));
                }
            }
        }
        Ok(RemovalData {
            times,
            population,
            time_scale,
        })
    }

    /// Continuous-time data where exact ties are spread apart.
    ///
    /// The `k`-th repeat of a value `t` is moved to `t + k * spacing`. Fails if
    /// any shift exceeds `tolerance` or would reach the next distinct time.
    pub fn continuous_with_tie_breaking(
        mut times: Vec<f64>,
        population: usize,
        spacing: f64,
        tolerance: f64,
    ) -> Result<Self> {
        if spacing.is_nan() || spacing <= 0.0 || tolerance.is_nan() || tolerance < 0.0 {
            return Err(Error::Parameter(format!(
                "tie spacing {spacing} must be positive and tolerance {tolerance} non-negative"
            )));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::Data("non-finite removal time".into()));
        }
        times.sort_by(f64::total_cmp);
        let mut out = Vec::with_capacity(times.len());
        let mut k = 0;
        while k < times.len() {
            let t = times[k];
            let mut end = k;
            while end < times.len() && times[end] == t {
                end += 1;
            }
            let next = times.get(end).copied().unwrap_or(f64::INFINITY);
            for rep in 0..end - k {
                let shift = rep as f64 * spacing;
                if shift > tolerance {
                    return Err(Error::Data(format!(
                        "{} tied removals at {t} need a shift of {shift}, above the tolerance {tolerance}",
                        end - k
                    )));
                }
                if t + shift >= next {
                    return Err(Error::Data(format!(
                        "breaking ties at {t} would collide with the removal at {next}"
                    )));
                }
                out.push(t + shift);
            }
            k = end;
        }
        RemovalData::new(out, population, TimeScale::Continuous)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Number of removals `n`.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn population(&self) -> usize {
        self.population
    }

    pub fn time_scale(&self) -> TimeScale {
        self.time_scale
    }

    pub fn first(&self) -> f64 {
        self.times[0]
    }

    pub fn last(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// Removal days as integers; only meaningful for discrete data.
    pub fn days(&self) -> Result<Vec<i64>> {
        if self.time_scale != TimeScale::Discrete {
            return Err(Error::Usage("removal days requested from continuous data".into()));
        }
        Ok(self.times.iter().map(|&t| t as i64).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorts_and_reports_shape() {
        let d = RemovalData::new(vec![3.0, 1.0, 2.0], 10, TimeScale::Discrete).unwrap();
        assert_eq!(d.times(), &[1.0, 2.0, 3.0]);
        assert_eq!((d.len(), d.population()), (3, 10));
        assert_eq!(d.days().unwrap(), vec![1, 2, 3]);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            RemovalData::new(vec![], 10, TimeScale::Discrete),
            Err(Error::Data(m)) if m == "no removals"
        ));
        assert!(RemovalData::new(vec![1.5], 10, TimeScale::Discrete).is_err());
        assert!(RemovalData::new(vec![1.0, 2.0, 3.0], 2, TimeScale::Discrete).is_err());
        assert!(RemovalData::new(vec![1.0, 1.0], 5, TimeScale::Continuous).is_err());
        assert!(RemovalData::new(vec![1.0, 1.0], 5, TimeScale::Discrete).is_ok());
    }

    #[test]
    fn tie_breaking_spreads_repeats() {
        let d = RemovalData::continuous_with_tie_breaking(vec![2.0, 1.0, 1.0, 1.0], 5, 0.01, 0.05)
            .unwrap();
        assert_eq!(d.times(), &[1.0, 1.01, 1.02, 2.0]);
        assert!(RemovalData::continuous_with_tie_breaking(vec![1.0; 4], 5, 0.01, 0.02).is_err());
        assert!(
            RemovalData::continuous_with_tie_breaking(vec![1.0, 1.0, 1.005], 5, 0.01, 1.0).is_err()
        );
    }
}
