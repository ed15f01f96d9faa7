//! Data-augmented MCMC for the constant-rate continuous-time SIR model.
//!
//! The latent infection times are label-free: only the sorted set matters,
//! with `i_1` the earliest.

use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma};

use crate::chain::{ChainOutput, LikelihoodMode, McmcSettings};
use crate::epi::{RemovalData, TimeScale};
use crate::error::{Error, Result};
use crate::trajectory::{path_terms, PathTerms};

/// Gamma distribution with `shape` and `rate` (mean `shape / rate`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaPrior {
    pub shape: f64,
    pub rate: f64,
}

impl GammaPrior {
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        if !(shape > 0.0 && shape.is_finite() && rate > 0.0 && rate.is_finite()) {
            return Err(Error::Parameter(format!(
                "gamma prior needs positive shape and rate, got ({shape}, {rate})"
            )));
        }
        Ok(GammaPrior { shape, rate })
    }

    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    /// Draw from `Gamma(shape + extra_shape, rate + extra_rate)`.
    pub fn sample_posterior<R: Rng + ?Sized>(
        &self,
        extra_shape: f64,
        extra_rate: f64,
        rng: &mut R,
    ) -> f64 {
        Gamma::new(self.shape + extra_shape, 1.0 / (self.rate + extra_rate))
            .expect("positive gamma parameters")
            .sample(rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParametricPriors {
    pub beta: GammaPrior,
    pub gamma: GammaPrior,
    /// Rate of the exponential prior on `r_1 - i_1`.
    pub init_gap_rate: f64,
}

impl ParametricPriors {
    pub fn validate(&self) -> Result<()> {
        GammaPrior::new(self.beta.shape, self.beta.rate)?;
        GammaPrior::new(self.gamma.shape, self.gamma.rate)?;
        if !(self.init_gap_rate > 0.0 && self.init_gap_rate.is_finite()) {
            return Err(Error::Parameter(format!(
                "initial-gap prior rate must be positive, got {}",
                self.init_gap_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParametricState {
    pub initial: f64,
    /// Non-initial infection times, sorted.
    pub infections: Vec<f64>,
    pub beta: f64,
    pub gamma: f64,
}

impl ParametricState {
    /// All infection times, `i_1` first.
    pub fn all_infections(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.infections.len() + 1);
        v.push(self.initial);
        v.extend_from_slice(&self.infections);
        v
    }

    pub fn terms(&self, data: &RemovalData) -> Option<PathTerms> {
        path_terms(&self.all_infections(), data.times(), &[], data.population())
    }
}

fn loglik_from_terms(p: &PathTerms, beta: f64, gamma: f64) -> f64 {
    let mut ll = p.ln_xy_infections + p.ln_y_removals - beta * p.int_xy - gamma * p.int_y;
    if p.infections > 0 {
        ll += p.infections as f64 * beta.ln();
    }
    if p.removals > 0 {
        ll += p.removals as f64 * gamma.ln();
    }
    ll
}

/// Log of the augmented likelihood of infection times `initial` plus
/// `infections` and removal times `removals` over `[i_1, r_n]`.
/// `-inf` for impossible trajectories.
pub fn augmented_loglik(
    initial: f64,
    infections: &[f64],
    removals: &[f64],
    beta: f64,
    gamma: f64,
    population: usize,
) -> Result<f64> {
    if infections.len() + 1 > population || removals.len() > infections.len() + 1 {
        return Err(Error::Usage(format!(
            "{} infections and {} removals in a population of {population}",
            infections.len() + 1,
            removals.len()
        )));
    }
    if infections.iter().any(|&t| t <= initial) {
        return Ok(f64::NEG_INFINITY);
    }
    let mut all = vec![initial];
    all.extend_from_slice(infections);
    Ok(match path_terms(&all, removals, &[], population) {
        Some(p) => loglik_from_terms(&p, beta, gamma),
        None => f64::NEG_INFINITY,
    })
}

/// `beta | rest ~ Gamma(shape + m - 1, rate + int XY dt)`.
pub fn gibbs_beta<R: Rng + ?Sized>(
    state: &ParametricState,
    data: &RemovalData,
    prior: &GammaPrior,
    rng: &mut R,
) -> Result<f64> {
    let p = state
        .terms(data)
        .ok_or_else(|| Error::Numerical("beta update on an impossible trajectory".into()))?;
    Ok(prior.sample_posterior(p.infections as f64, p.int_xy, rng))
}

/// `gamma | rest ~ Gamma(shape + n, rate + int Y dt)`.
pub fn gibbs_gamma<R: Rng + ?Sized>(
    state: &ParametricState,
    data: &RemovalData,
    prior: &GammaPrior,
    rng: &mut R,
) -> Result<f64> {
    let p = state
        .terms(data)
        .ok_or_else(|| Error::Numerical("gamma update on an impossible trajectory".into()))?;
    Ok(prior.sample_posterior(p.removals as f64, p.int_y, rng))
}

/// Exact draw of `i_1` from its full conditional.
///
/// With `e = min(i_2, r_1)`, `i_1` only enters through the interval
/// `[i_1, e)` where `X = N - 1`, `Y = 1`, and through the prior on
/// `r_1 - i_1`. Together these give `e - i_1 ~ Exp(beta (N - 1) + gamma + rho)`.
/// Without data only the prior term is left: `e - i_1 ~ Exp(rho)`.
pub fn update_initial_time<R: Rng + ?Sized>(
    state: &ParametricState,
    data: &RemovalData,
    priors: &ParametricPriors,
    mode: LikelihoodMode,
    rng: &mut R,
) -> f64 {
    let e = state
        .infections
        .first()
        .map_or(data.first(), |&i2| i2.min(data.first()));
    let rate = match mode {
        LikelihoodMode::Data => {
            state.beta * (data.population() - 1) as f64 + state.gamma + priors.init_gap_rate
        }
        LikelihoodMode::Prior => priors.init_gap_rate,
    };
    e - Exp::new(rate).expect("positive rate").sample(rng)
}

/// Metropolis-Hastings move of one non-initial infection time, proposed
/// uniformly on `(i_1, r_n)`. Returns whether the move was accepted.
pub fn move_infection_time<R: Rng + ?Sized>(
    state: &mut ParametricState,
    data: &RemovalData,
    mode: LikelihoodMode,
    rng: &mut R,
) -> bool {
    let n = state.infections.len();
    if n == 0 {
        return false;
    }
    let k = rng.random_range(0..n);
    let proposal = rng.random_range(state.initial..data.last());
    let old = state.infections[k];
    let current = state.terms(data);

    let mut moved = state.infections.clone();
    moved.remove(k);
    let at = moved.partition_point(|&t| t < proposal);
    moved.insert(at, proposal);
    let mut all = vec![state.initial];
    all.extend_from_slice(&moved);
    let Some(next) = path_terms(&all, data.times(), &[], data.population()) else {
        return false;
    };
    let log_ratio = match (mode, current) {
        (LikelihoodMode::Prior, _) => 0.0,
        (LikelihoodMode::Data, Some(cur)) => {
            loglik_from_terms(&next, state.beta, state.gamma)
                - loglik_from_terms(&cur, state.beta, state.gamma)
        }
        (LikelihoodMode::Data, None) => f64::INFINITY,
    };
    let accept = log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio;
    if accept && proposal != old {
        state.infections = moved;
    }
    accept
}

/// Starting state: `i_j = r_j - Exp(gamma_0)` with `gamma_0` the prior mean,
/// retried up to 100 times, then all infections packed before `r_1`.
pub fn initialize<R: Rng + ?Sized>(
    data: &RemovalData,
    priors: &ParametricPriors,
    rng: &mut R,
) -> Result<(ParametricState, bool)> {
    let gamma0 = priors.gamma.mean();
    let period = Exp::new(gamma0).expect("positive prior mean");
    for _ in 0..100 {
        let mut inf: Vec<f64> = data.times().iter().map(|r| r - period.sample(rng)).collect();
        inf.sort_by(f64::total_cmp);
        let state = ParametricState {
            initial: inf[0],
            infections: inf[1..].to_vec(),
            beta: priors.beta.mean(),
            gamma: gamma0,
        };
        if state.terms(data).is_some() {
            return Ok((state, false));
        }
    }
    let n = data.len();
    let span = 1.0 / gamma0;
    let inf: Vec<f64> = (0..n)
        .map(|k| data.first() - span * (n - k) as f64 / n as f64)
        .collect();
    let state = ParametricState {
        initial: inf[0],
        infections: inf[1..].to_vec(),
        beta: priors.beta.mean(),
        gamma: gamma0,
    };
    if state.terms(data).is_none() {
        return Err(Error::Initialization(
            "no valid infection times found for the removal data".into(),
        ));
    }
    Ok((state, true))
}

/// Runs the sampler: per sweep, Gibbs `beta`, Gibbs `gamma`, exact `i_1`,
/// then the configured number of infection-time moves.
pub fn run_parametric_mcmc(
    data: &RemovalData,
    priors: &ParametricPriors,
    settings: &McmcSettings,
) -> Result<ChainOutput> {
    settings.validate()?;
    priors.validate()?;
    if data.time_scale() != TimeScale::Continuous {
        return Err(Error::Data("the constant-rate sampler needs continuous removal times".into()));
    }
    let start = Instant::now();
    let mut rng = settings.rng();
    let mut out = ChainOutput::new("parametric", settings.seed);
    let (mut state, fallback) = initialize(data, priors, &mut rng)?;
    if fallback {
        let msg = "random initialization failed 100 times; packed infections before r_1";
        log::warn!("{msg}");
        out.warnings.push(msg.into());
    }
    let moves = settings.moves_per_sweep.unwrap_or(data.len());
    let mode = settings.mode;

    for it in 0..settings.iterations {
        match mode {
            LikelihoodMode::Data => {
                state.beta = gibbs_beta(&state, data, &priors.beta, &mut rng)?;
                state.gamma = gibbs_gamma(&state, data, &priors.gamma, &mut rng)?;
            }
            LikelihoodMode::Prior => {
                state.beta = priors.beta.sample_posterior(0.0, 0.0, &mut rng);
                state.gamma = priors.gamma.sample_posterior(0.0, 0.0, &mut rng);
            }
        }
        state.initial = update_initial_time(&state, data, priors, mode, &mut rng);
        for _ in 0..moves {
            let ok = move_infection_time(&mut state, data, mode, &mut rng);
            out.acceptance_mut("infection_time").record(ok);
        }
        debug_assert!(state.terms(data).is_some());

        if settings.retains(it) {
            out.retained.push(it);
            out.push_scalar("beta", state.beta);
            out.push_scalar("gamma", state.gamma);
            out.push_scalar("i_1", state.initial);
            if settings.record_latent {
                out.latent.push(state.all_infections());
            }
        }
    }
    out.iterations = settings.iterations;
    out.elapsed_secs = start.elapsed().as_secs_f64();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn two_person() -> RemovalData {
        RemovalData::new(vec![2.0, 3.0], 2, TimeScale::Continuous).unwrap()
    }

    #[test]
    fn worked_example() {
        let ll = augmented_loglik(0.0, &[1.0], &[2.0, 3.0], 1.0, 1.0, 2).unwrap();
        assert!((ll - (2.0f64 * (-5.0f64).exp()).ln()).abs() < 1e-14);
    }

    #[test]
    fn infection_with_no_infectives_is_impossible() {
        let ll = augmented_loglik(0.0, &[2.5], &[2.0, 3.0], 1.0, 1.0, 3).unwrap();
        assert_eq!(ll, f64::NEG_INFINITY);
        assert!(augmented_loglik(0.0, &[1.0, 1.5], &[2.0], 1.0, 1.0, 2).is_err());
    }

    #[test]
    fn gamma_conditional_on_worked_example() {
        // gamma | rest ~ Gamma(1 + 2, 1 + 4)
        let data = two_person();
        let s = ParametricState {
            initial: 0.0,
            infections: vec![1.0],
            beta: 1.0,
            gamma: 1.0,
        };
        let prior = GammaPrior::new(1.0, 1.0).unwrap();
        let mut r = rng::from_seed(8);
        let n = 100_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| gibbs_gamma(&s, &data, &prior, &mut r).unwrap())
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let sd = (3.0f64).sqrt() / 5.0;
        assert!((mean - 0.6).abs() < 3.0 * sd / (n as f64).sqrt(), "{mean}");
    }

    #[test]
    fn initial_time_respects_ordering() {
        let data = two_person();
        let priors = ParametricPriors {
            beta: GammaPrior::new(1.0, 1.0).unwrap(),
            gamma: GammaPrior::new(1.0, 1.0).unwrap(),
            init_gap_rate: 1.0,
        };
        let s = ParametricState {
            initial: 0.0,
            infections: vec![1.0],
            beta: 1.0,
            gamma: 1.0,
        };
        let mut r = rng::from_seed(2);
        for _ in 0..1000 {
            assert!(update_initial_time(&s, &data, &priors, LikelihoodMode::Data, &mut r) < 1.0);
        }
        let sharp = ParametricPriors {
            init_gap_rate: 1e9,
            ..priors
        };
        let s1 = ParametricState {
            infections: vec![2.5],
            ..s
        };
        let mean: f64 = (0..1000)
            .map(|_| 2.0 - update_initial_time(&s1, &data, &sharp, LikelihoodMode::Data, &mut r))
            .sum::<f64>()
            / 1000.0;
        assert!(mean < 1e-6);
    }

    #[test]
    fn moves_keep_valid_paths() {
        let data = RemovalData::new(vec![1.0, 1.4, 2.2, 2.9, 3.5], 10, TimeScale::Continuous)
            .unwrap();
        let priors = ParametricPriors {
            beta: GammaPrior::new(1.0, 1.0).unwrap(),
            gamma: GammaPrior::new(1.0, 1.0).unwrap(),
            init_gap_rate: 1.0,
        };
        let mut r = rng::from_seed(4);
        let (mut s, _) = initialize(&data, &priors, &mut r).unwrap();
        for _ in 0..2000 {
            move_infection_time(&mut s, &data, LikelihoodMode::Data, &mut r);
            assert!(s.terms(&data).is_some());
            assert!(s.infections.windows(2).all(|w| w[0] <= w[1]));
            assert!(s.infections.iter().all(|&t| t > s.initial));
        }
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let data = RemovalData::new(vec![1.0, 1.4, 2.2, 2.9], 10, TimeScale::Continuous).unwrap();
        let priors = ParametricPriors {
            beta: GammaPrior::new(1.0, 1.0).unwrap(),
            gamma: GammaPrior::new(1.0, 1.0).unwrap(),
            init_gap_rate: 1.0,
        };
        let mut s = McmcSettings::new(500, 77);
        s.thin = 1;
        let a = run_parametric_mcmc(&data, &priors, &s).unwrap();
        let b = run_parametric_mcmc(&data, &priors, &s).unwrap();
        assert_eq!(a.scalars, b.scalars);
        assert_eq!(a.retained, b.retained);
        assert_eq!(a.len(), 400);
    }
}
