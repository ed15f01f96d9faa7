use crate::epi::{EpidemicEvents, EventKind, TimeScale};
use crate::error::{Error, Result};

/// Per-day maximum-likelihood estimate of the infection rate when infection
/// days are known: new infections on day `t + 1` are
/// `Binomial(X(t), 1 - exp(-beta(t) Y(t)))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DailyEstimate {
    pub day: i64,
    pub susceptible: usize,
    pub infective: usize,
    pub new_infections: usize,
    /// `None` when `X(t) = 0` or `Y(t) = 0`; `+inf` when saturated.
    pub beta: Option<f64>,
    /// Every susceptible was infected, so the estimate is unbounded.
    pub saturated: bool,
}

/// `beta_hat(t) = -ln(1 - c_t / X(t)) / Y(t)` for each day from the initial
/// infection to the day before the last event.
pub fn ml_daily_estimate(events: &EpidemicEvents) -> Result<Vec<DailyEstimate>> {
    if events.time_scale() != TimeScale::Discrete {
        return Err(Error::Data("daily estimates need a discrete-time history".into()));
    }
    let first = events.initial_time() as i64;
    let last = events.events().last().map_or(first, |e| e.time as i64);
    let mut out = Vec::new();
    for t in first..last {
        let (x, y) = events.counts(t as f64)?;
        let c = events
            .events()
            .iter()
            .filter(|e| e.kind == EventKind::Infection && e.time == (t + 1) as f64)
            .count();
        let (beta, saturated) = if x == 0 || y == 0 {
            (None, false)
        } else if c == x {
            (Some(f64::INFINITY), true)
        } else {
            let frac = c as f64 / x as f64;
            (Some(-(-frac).ln_1p() / y as f64), false)
        };
        out.push(DailyEstimate {
            day: t,
            susceptible: x,
            infective: y,
            new_infections: c,
            beta,
            saturated,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::epi::Event;

    fn events(inf: &[(i64, i64)], population: usize) -> EpidemicEvents {
        let mut ev = Vec::new();
        for (k, &(i, r)) in inf.iter().enumerate() {
            ev.push(Event::infection(i as f64, Some(k + 1)));
            ev.push(Event::removal(r as f64, Some(k + 1)));
        }
        EpidemicEvents::new(ev, population, TimeScale::Discrete).unwrap()
    }

    #[test]
    fn hand_value_and_moment_matching() {
        // 1 initial infective... build X = 100, Y = 5 on day 3 with 10 new on day 4
        let mut people = vec![(0, 20)];
        people.extend((0..4).map(|_| (1, 20)));
        people.extend((0..10).map(|_| (4, 20)));
        let ev = events(&people, 105);
        let est = ml_daily_estimate(&ev).unwrap();
        let d3 = est.iter().find(|e| e.day == 3).unwrap();
        assert_eq!((d3.susceptible, d3.infective, d3.new_infections), (100, 5, 10));
        let b = d3.beta.unwrap();
        assert!((b - 0.021072).abs() < 1e-6);
        let expected = 100.0 * (1.0 - (-b * 5.0).exp());
        assert!((expected - 10.0).abs() < 1e-10);
        let d2 = est.iter().find(|e| e.day == 2).unwrap();
        assert_eq!(d2.beta, Some(0.0));
    }

    #[test]
    fn saturated_and_undefined_days() {
        let ev = events(&[(0, 2), (1, 3)], 2);
        let est = ml_daily_estimate(&ev).unwrap();
        assert!(est[0].saturated);
        assert_eq!(est[0].beta, Some(f64::INFINITY));
        assert_eq!(est[1].beta, None);
    }
}
