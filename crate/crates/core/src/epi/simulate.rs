use rand::Rng;
use rand_distr::{Binomial, Distribution, Exp};

use super::{EpidemicEvents, Event, InfectiousPeriodModel, RateFunction, TimeScale};
use crate::error::{Error, Result};
use crate::rng;

/// Continuous-time SIR epidemic started at `t = 0` with one infective and
/// `population - 1` susceptibles. Events are label-free.
pub fn simulate_continuous(
    population: usize,
    beta: &RateFunction,
    gamma: f64,
    seed: u64,
) -> Result<EpidemicEvents> {
    simulate_continuous_with(population, beta, gamma, &mut rng::from_seed(seed))
}

/// As [`simulate_continuous`], drawing from a caller-supplied generator.
///
/// Each step draws the removal waiting time `Exp(gamma * y)` first, then walks
/// the candidate points of a rate `beta* x y` Poisson process, keeping each with
/// probability `beta(s) / beta*`, until one is kept or the removal comes first.
pub fn simulate_continuous_with<R: Rng + ?Sized>(
    population: usize,
    beta: &RateFunction,
    gamma: f64,
    rng: &mut R,
) -> Result<EpidemicEvents> {
    if population == 0 {
        return Err(Error::Parameter("population must be at least 1".into()));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Parameter(format!("removal rate must be positive, got {gamma}")));
    }
    let bound = beta.sup();
    if !(bound >= 0.0 && bound.is_finite()) {
        return Err(Error::Parameter(format!("infection rate bound {bound} is unusable")));
    }

    let mut events = vec![Event::infection(0.0, None)];
    let (mut t, mut x, mut y) = (0.0f64, population - 1, 1usize);
    while y > 0 {
        let removal_at = t + Exp::new(gamma * y as f64).expect("positive rate").sample(rng);
        let mut infection_at = None;
        if x > 0 && bound > 0.0 {
            let candidates = Exp::new(bound * (x * y) as f64).expect("positive rate");
            let mut s = t;
            loop {
                s += candidates.sample(rng);
                if s >= removal_at {
                    break;
                }
                let u: f64 = rng.random();
                if u * bound < beta.eval(s)? {
                    infection_at = Some(s);
                    break;
                }
            }
        }
        match infection_at {
            Some(s) => {
                events.push(Event::infection(s, None));
                t = s;
                x -= 1;
                y += 1;
            }
            None => {
                events.push(Event::removal(removal_at, None));
                t = removal_at;
                y -= 1;
            }
        }
    }
    EpidemicEvents::new(events, population, TimeScale::Continuous)
}

/// Discrete-time SIR epidemic with the initial infective infected on day 0.
///
/// Each day `t`, each of the `X(t)` susceptibles is infected on day `t + 1`
/// with probability `1 - exp(-beta(t) Y(t))`. Infectious periods are drawn at
/// infection. Individuals are labelled `1..n` in order of removal, ties broken
/// by infection day.
pub fn simulate_discrete(
    population: usize,
    beta: &RateFunction,
    period: &InfectiousPeriodModel,
    seed: u64,
) -> Result<EpidemicEvents> {
    simulate_discrete_with(population, beta, period, &mut rng::from_seed(seed))
}

pub fn simulate_discrete_with<R: Rng + ?Sized>(
    population: usize,
    beta: &RateFunction,
    period: &InfectiousPeriodModel,
    rng: &mut R,
) -> Result<EpidemicEvents> {
    if population == 0 {
        return Err(Error::Parameter("population must be at least 1".into()));
    }
    if !matches!(period, InfectiousPeriodModel::Geometric { .. }) {
        return Err(Error::Parameter(
            "discrete-time simulation needs an integer-valued infectious period".into(),
        ));
    }

    // (infection day, removal day) per infected individual
    let mut people: Vec<(i64, i64)> = vec![(0, period.sample(rng) as i64)];
    let mut x = population - 1;
    let mut t = 0i64;
    loop {
        let y = people.iter().filter(|&&(i, r)| i <= t && r > t).count();
        if y == 0 {
            break;
        }
        if x > 0 {
            let b = beta.eval(t as f64)?;
            if !(b >= 0.0 && b.is_finite()) {
                return Err(Error::Parameter(format!("infection rate {b} on day {t}")));
            }
            let p = -(-b * y as f64).exp_m1();
            let c = if p > 0.0 {
                Binomial::new(x as u64, p.min(1.0))
                    .map_err(|e| Error::Parameter(e.to_string()))?
                    .sample(rng) as usize
            } else {
                0
            };
            for _ in 0..c {
                let w = period.sample(rng) as i64;
                people.push((t + 1, t + 1 + w));
            }
            x -= c;
        }
        t += 1;
    }

    people.sort_by_key(|&(i, r)| (r, i));
    let mut events = Vec::with_capacity(2 * people.len());
    for (k, &(i, r)) in people.iter().enumerate() {
        events.push(Event::infection(i as f64, Some(k + 1)));
        events.push(Event::removal(r as f64, Some(k + 1)));
    }
    EpidemicEvents::new(events, population, TimeScale::Discrete)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::epi::{final_size_oracle, EventKind};

    fn check_counts(ev: &EpidemicEvents) {
        for (_, x, y) in ev.count_path() {
            assert!(x + y <= ev.population());
        }
        assert!(ev.is_complete());
    }

    #[test]
    fn lone_infective_is_removed() {
        let beta = RateFunction::constant(3.0).unwrap();
        let mut r = rng::from_seed(5);
        let n = 20_000;
        let mut total = 0.0;
        for _ in 0..n {
            let ev = simulate_continuous_with(1, &beta, 2.0, &mut r).unwrap();
            assert_eq!(ev.events().len(), 2);
            assert_eq!(ev.events()[1].kind, EventKind::Removal);
            total += ev.events()[1].time;
        }
        let mean = total / n as f64;
        assert!((mean - 0.5).abs() < 4.0 * 0.5 / (n as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn zero_rate_never_spreads() {
        let beta = RateFunction::constant(0.0).unwrap();
        for seed in 0..50 {
            let ev = simulate_continuous(10, &beta, 1.0, seed).unwrap();
            assert_eq!(ev.final_size(), 1);
            let period = InfectiousPeriodModel::geometric(0.3).unwrap();
            let ev = simulate_discrete(10, &beta, &period, seed).unwrap();
            assert_eq!(ev.final_size(), 1);
        }
    }

    #[test]
    fn tabulated_constant_matches_constant() {
        let c = RateFunction::constant(0.4).unwrap();
        let grid: Vec<f64> = (0..=2000).map(|k| k as f64 * 0.5).collect();
        let tab = RateFunction::tabulate(grid, |_| 0.4).unwrap();
        for seed in 0..30 {
            let a = simulate_continuous(8, &c, 1.0, seed).unwrap();
            let b = simulate_continuous(8, &tab, 1.0, seed).unwrap();
            assert_eq!(a, b);
            check_counts(&a);
        }
    }

    #[test]
    fn continuous_final_size_matches_oracle() {
        let beta = RateFunction::constant(1.0).unwrap();
        let mut r = rng::from_seed(11);
        for n_pop in [2usize, 3, 4] {
            let reps = 40_000;
            let mut hist = vec![0usize; n_pop + 1];
            for _ in 0..reps {
                let ev = simulate_continuous_with(n_pop, &beta, 1.0, &mut r).unwrap();
                hist[ev.final_size()] += 1;
            }
            let exact = final_size_oracle(n_pop, 1.0, 1.0).unwrap();
            for k in 1..=n_pop {
                let p = exact[k];
                let phat = hist[k] as f64 / reps as f64;
                let se = (p * (1.0 - p) / reps as f64).sqrt();
                assert!((phat - p).abs() < 3.5 * se + 1e-12, "N={n_pop} k={k} {phat} vs {p}");
            }
        }
    }

    #[test]
    fn discrete_one_day_periods() {
        let beta = RateFunction::constant(0.2).unwrap();
        let period = InfectiousPeriodModel::geometric(1.0).unwrap();
        for seed in 0..20 {
            let ev = simulate_discrete(30, &beta, &period, seed).unwrap();
            for (i, r) in ev.labelled_histories().unwrap() {
                assert_eq!(r.unwrap() - i, 1.0);
            }
        }
    }

    #[test]
    fn discrete_second_infection_probability() {
        let beta = RateFunction::constant(2f64.ln()).unwrap();
        let period = InfectiousPeriodModel::geometric(0.5).unwrap();
        let mut r = rng::from_seed(2);
        let reps = 100_000;
        let hits = (0..reps)
            .filter(|_| {
                let ev = simulate_discrete_with(2, &beta, &period, &mut r).unwrap();
                ev.infection_times().contains(&1.0)
            })
            .count();
        let frac = hits as f64 / reps as f64;
        assert!((frac - 0.5).abs() < 0.005, "{frac}");
    }

    #[test]
    fn discrete_labels_follow_removal_order() {
        let beta = RateFunction::constant(0.05).unwrap();
        let period = InfectiousPeriodModel::geometric(0.3).unwrap();
        let ev = simulate_discrete(60, &beta, &period, 9).unwrap();
        let h = ev.labelled_histories().unwrap();
        assert!(h.windows(2).all(|w| w[0].1 <= w[1].1));
        check_counts(&ev);
    }
}
