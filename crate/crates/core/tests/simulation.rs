use epinp::discrete::ml_daily_estimate;
use epinp::epi::{
    final_size_oracle, simulate_continuous_with, simulate_discrete, simulate_discrete_with,
    InfectiousPeriodModel, RateFunction,
};
use epinp::rng::from_seed;
use epinp::stats::chi_square_gof;

#[test]
fn continuous_final_sizes_follow_the_exact_distribution() {
    let (n, beta, gamma) = (6, 0.4, 1.0);
    let rate = RateFunction::constant(beta).unwrap();
    let mut rng = from_seed(11);
    let runs = 20_000;
    let mut counts = vec![0u64; n + 1];
    for _ in 0..runs {
        counts[simulate_continuous_with(n, &rate, gamma, &mut rng).unwrap().final_size()] += 1;
    }
    let expected: Vec<f64> = final_size_oracle(n, beta, gamma)
        .unwrap()
        .iter()
        .map(|p| p * runs as f64)
        .collect();
    let res = chi_square_gof(&counts[1..], &expected[1..], 5.0).unwrap();
    assert!(res.p_value > 0.001, "{res:?} {counts:?}");
}

#[test]
fn final_size_oracle_two_people() {
    // the only infective either infects the other first or is removed first
    let p = final_size_oracle(2, 0.3, 0.7).unwrap();
    assert!((p[2] - 0.3).abs() < 1e-14);
    assert!((p[1] - 0.7).abs() < 1e-14);
}

#[test]
fn discrete_escape_probability_for_a_pair() {
    // P(no infection) = sum_k gamma (1 - gamma)^(k - 1) exp(-beta k)
    let (beta, gamma): (f64, f64) = (0.3, 0.4);
    let rate = RateFunction::constant(beta).unwrap();
    let period = InfectiousPeriodModel::geometric(gamma).unwrap();
    let mut rng = from_seed(12);
    let runs = 40_000;
    let escaped = (0..runs)
        .filter(|_| simulate_discrete_with(2, &rate, &period, &mut rng).unwrap().final_size() == 1)
        .count() as f64;
    let e = (-beta).exp();
    let p = gamma * e / (1.0 - (1.0 - gamma) * e);
    let se = (p * (1.0 - p) / runs as f64).sqrt();
    assert!((escaped / runs as f64 - p).abs() < 4.0 * se, "{} vs {p}", escaped / runs as f64);
}

#[test]
fn daily_estimates_count_from_the_labelled_history() {
    let rate = RateFunction::constant(0.004).unwrap();
    let period = InfectiousPeriodModel::geometric(0.3).unwrap();
    let ev = simulate_discrete(300, &rate, &period, 4).unwrap();
    let hist = ev.labelled_histories().unwrap();
    let est = ml_daily_estimate(&ev).unwrap();
    assert!(!est.is_empty());
    for e in est {
        let t = e.day;
        let infected = hist.iter().filter(|h| h.0 <= t as f64).count();
        let removed = hist.iter().filter(|h| h.1.is_some_and(|r| r <= t as f64)).count();
        let new = hist.iter().filter(|h| h.0 == (t + 1) as f64).count();
        assert_eq!((e.susceptible, e.infective, e.new_infections), (300 - infected, infected - removed, new));
        if let Some(b) = e.beta.filter(|b| b.is_finite()) {
            // inverts the binomial mean
            let p = 1.0 - (-b * e.infective as f64).exp();
            assert!((p * e.susceptible as f64 - new as f64).abs() < 1e-9);
        }
    }
}

#[test]
fn first_day_infections_are_binomial() {
    // X(0) = 10, Y(0) = 1: infections on day 1 ~ Binomial(10, 1 - exp(-beta))
    let beta: f64 = 0.08;
    let rate = RateFunction::constant(beta).unwrap();
    let period = InfectiousPeriodModel::geometric(0.5).unwrap();
    let mut rng = from_seed(13);
    let runs = 100_000;
    let mut counts = vec![0u64; 11];
    for _ in 0..runs {
        let ev = simulate_discrete_with(11, &rate, &period, &mut rng).unwrap();
        let c = ev.infection_times().iter().filter(|&&t| t == 1.0).count();
        counts[c] += 1;
    }
    let p = 1.0 - (-beta).exp();
    let mut expected = Vec::new();
    let mut choose = 1.0;
    for k in 0..=10i32 {
        expected.push(choose * p.powi(k) * (1.0 - p).powi(10 - k) * runs as f64);
        choose = choose * (10 - k) as f64 / (k + 1) as f64;
    }
    let res = chi_square_gof(&counts, &expected, 5.0).unwrap();
    assert!(res.p_value > 0.001, "{res:?} {counts:?}");
}
