use std::time::Instant;

use rand::Rng;

use super::likelihood::{day_term, BetaPrior};
use crate::chain::{ChainOutput, FunctionTrace, LikelihoodMode, McmcSettings};
use crate::epi::period::sample_geometric;
use crate::epi::{RemovalData, TimeScale};
use crate::error::{Error, Result};
use crate::gp::{KernelParams, PrefixGp};

/// Where the daily infection rate comes from.
#[derive(Debug, Clone)]
pub enum RateSource {
    /// `beta(t) = exp(g(t))` with `g` a GP on days `floor..=r_n - 1`, held as
    /// whitened coordinates of a [`PrefixGp`]. Coordinates of days before the
    /// current initial infection are auxiliary standard normals.
    Gp { gp: PrefixGp, z: Vec<f64> },
    /// A fixed table `values[k] = beta(first_day + k)`.
    Fixed { first_day: i64, values: Vec<f64> },
}

/// Sampler settings specific to the discrete-time GP model.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteGpConfig {
    pub kernel: KernelParams,
    pub epsilon: f64,
    /// Tune `epsilon` during burn-in towards a 25% acceptance rate.
    pub adapt_epsilon: bool,
    pub g_updates_per_sweep: usize,
    pub gamma_prior: BetaPrior,
    /// Known infection days per individual (in removal order); the latent
    /// times are then held fixed.
    pub known_infections: Option<Vec<i64>>,
    /// Lowest day the initial infection may reach, as a multiple of the prior
    /// mean infectious period before the first removal.
    pub floor_periods: f64,
}

impl DiscreteGpConfig {
    pub fn new(kernel: KernelParams, gamma_prior: BetaPrior) -> Self {
        DiscreteGpConfig {
            kernel,
            epsilon: 0.2,
            adapt_epsilon: false,
            g_updates_per_sweep: 1,
            gamma_prior,
            known_infections: None,
            floor_periods: 100.0,
        }
    }

    /// First day the GP covers.
    pub fn floor_day(&self, first_removal: i64) -> i64 {
        let mean_period = 1.0 / self.gamma_prior.mean();
        first_removal - (self.floor_periods * mean_period).ceil() as i64
    }
}

/// State and day-indexed bookkeeping of the discrete-time sampler.
///
/// Counts are kept per day on `lo..=r_n` so that moving one infection day
/// only touches the days between its old and new position.
#[derive(Debug, Clone)]
pub struct DiscreteSampler {
    removals: Vec<i64>,
    population: i64,
    lo: i64,
    hi: i64,
    source: RateSource,
    beta: Vec<f64>,
    days: Vec<i64>,
    kappa: usize,
    gamma: f64,
    inf: Vec<i64>,
    cum_inf: Vec<i64>,
    cum_rem: Vec<i64>,
    sum_periods: i64,
    log_h: f64,
    mode: LikelihoodMode,
    pub epsilon: f64,
    // rates before the initial infection lag behind the GP coordinates
    stale: bool,
}

impl DiscreteSampler {
    pub fn new(
        data: &RemovalData,
        source: RateSource,
        days: Vec<i64>,
        gamma: f64,
        mode: LikelihoodMode,
    ) -> Result<Self> {
        if data.time_scale() != TimeScale::Discrete {
            return Err(Error::Data("the discrete-time sampler needs removal days".into()));
        }
        let removals = data.days()?;
        if days.len() != removals.len() {
            return Err(Error::Usage(format!(
                "{} infection days for {} removals",
                days.len(),
                removals.len()
            )));
        }
        let hi = removals[removals.len() - 1] - 1;
        let lo = match &source {
            RateSource::Gp { gp, z } => {
                if gp.top() != hi || z.len() != gp.len() {
                    return Err(Error::Usage("GP day range does not end at r_n - 1".into()));
                }
                gp.floor()
            }
            RateSource::Fixed { first_day, values } => {
                if *first_day + values.len() as i64 - 1 < hi {
                    return Err(Error::Usage("rate table ends before r_n - 1".into()));
                }
                *first_day
            }
        };
        let min_day = days.iter().cloned().min().unwrap_or(lo);
        if min_day < lo {
            return Err(Error::Initialization(format!(
                "infection day {min_day} precedes the first rate day {lo}"
            )));
        }
        let at_min: Vec<usize> = (0..days.len()).filter(|&j| days[j] == min_day).collect();
        if at_min.len() != 1 {
            return Err(Error::Initialization(
                "the earliest infection day must be unique".into(),
            ));
        }
        if days.iter().zip(&removals).any(|(i, r)| i >= r) {
            return Err(Error::Initialization("an infection day is not before its removal".into()));
        }
        let width = (hi + 2 - lo) as usize;
        let mut inf = vec![0i64; width];
        let mut rem = vec![0i64; width];
        for &d in &days {
            inf[(d - lo) as usize] += 1;
        }
        for &r in &removals {
            rem[(r - lo) as usize] += 1;
        }
        let cumulative = |v: &[i64]| {
            v.iter()
                .scan(0, |acc, x| {
                    *acc += x;
                    Some(*acc)
                })
                .collect::<Vec<_>>()
        };
        let sum_periods = removals.iter().zip(&days).map(|(r, i)| r - i).sum();
        let mut s = DiscreteSampler {
            population: data.population() as i64,
            lo,
            hi,
            beta: Vec::new(),
            kappa: at_min[0],
            gamma,
            cum_inf: cumulative(&inf),
            cum_rem: cumulative(&rem),
            inf,
            days,
            removals,
            source,
            sum_periods,
            log_h: 0.0,
            mode,
            epsilon: 0.2,
            stale: false,
        };
        s.refresh_beta();
        s.log_h = s.full_log_h();
        if s.log_h == f64::NEG_INFINITY {
            return Err(Error::Initialization(
                "starting infection days give a zero likelihood".into(),
            ));
        }
        Ok(s)
    }

    fn refresh_beta(&mut self) {
        self.beta = match &self.source {
            RateSource::Gp { gp, z } => gp.values(z, gp.len()).iter().rev().map(|g| g.exp()).collect(),
            RateSource::Fixed { first_day, values } => {
                let skip = (self.lo - first_day) as usize;
                values[skip..=(skip + (self.hi - self.lo) as usize)].to_vec()
            }
        };
    }

    #[inline]
    fn idx(&self, day: i64) -> usize {
        (day - self.lo) as usize
    }

    /// Contribution of day `t`, zero before the initial infection `start`.
    #[inline]
    fn term(&self, t: i64, start: i64) -> f64 {
        if t < start || t > self.hi {
            return 0.0;
        }
        let k = self.idx(t);
        let y = self.cum_inf[k] - self.cum_rem[k];
        let x_next = self.population - self.cum_inf[k + 1];
        day_term(self.beta[k], y, self.inf[k + 1], x_next)
    }

    fn window(&self, from: i64, to: i64, start: i64) -> f64 {
        let mut s = 0.0;
        for t in from.max(start)..=to.min(self.hi) {
            s += self.term(t, start);
        }
        s
    }

    /// Recomputes `ln h` from the day counts.
    pub fn full_log_h(&self) -> f64 {
        self.window(self.days[self.kappa], self.hi, self.days[self.kappa])
    }

    /// `ln h` as maintained incrementally.
    pub fn log_h(&self) -> f64 {
        self.log_h
    }

    /// Replaces the incremental value with a fresh recomputation and returns
    /// the discrepancy.
    pub fn resync(&mut self) -> f64 {
        let fresh = self.full_log_h();
        let diff = (fresh - self.log_h).abs();
        self.log_h = fresh;
        diff
    }

    pub fn days(&self) -> &[i64] {
        &self.days
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn initial_day(&self) -> i64 {
        self.days[self.kappa]
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn set_gamma(&mut self, gamma: f64) {
        self.gamma = gamma;
    }

    pub fn sum_periods(&self) -> i64 {
        self.sum_periods
    }

    pub fn floor(&self) -> i64 {
        self.lo
    }

    pub fn last_day(&self) -> i64 {
        self.hi
    }

    /// `beta(t)` for `t` in `floor..=r_n - 1`.
    pub fn beta(&self, day: i64) -> f64 {
        self.beta[self.idx(day)]
    }

    pub fn source(&self) -> &RateSource {
        &self.source
    }

    fn shift_infection(&mut self, from: i64, to: i64) {
        let (a, b) = (self.idx(from), self.idx(to));
        self.inf[a] -= 1;
        self.inf[b] += 1;
        if a < b {
            for c in &mut self.cum_inf[a..b] {
                *c -= 1;
            }
        } else {
            for c in &mut self.cum_inf[b..a] {
                *c += 1;
            }
        }
    }

    /// Earliest infection day strictly after `day`, with its multiplicity.
    fn next_occupied(&self, day: i64) -> Option<(i64, i64)> {
        ((day + 1)..=self.hi + 1).find_map(|d| {
            let c = self.inf[self.idx(d)];
            (c > 0).then_some((d, c))
        })
    }

    /// One infection-day proposal: pick an individual uniformly, propose
    /// `r_j - W` with `W ~ Geometric(gamma)`, relabel the initial infective as
    /// the unique earliest infection (reject on a tie) and accept with the
    /// ratio of `h`. The geometric proposal cancels the infectious-period
    /// factors of the target.
    pub fn propose_infection<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        let n = self.days.len();
        let j = rng.random_range(0..n);
        let w = sample_geometric(self.gamma, rng);
        self.try_move(j, self.removals[j] - w, rng)
    }

    /// Metropolis-Hastings step moving individual `j` to day `to`.
    pub fn try_move<R: Rng + ?Sized>(&mut self, j: usize, to: i64, rng: &mut R) -> bool {
        let from = self.days[j];
        if to == from {
            return true;
        }
        if to < self.lo || to >= self.removals[j] {
            return false;
        }
        let s_old = self.days[self.kappa];
        if self.stale && to < s_old {
            self.refresh_beta();
            self.stale = false;
        }
        let (kappa_new, s_new) = if j != self.kappa {
            match to.cmp(&s_old) {
                std::cmp::Ordering::Less => (j, to),
                std::cmp::Ordering::Equal => return false,
                std::cmp::Ordering::Greater => (self.kappa, s_old),
            }
        } else {
            match self.next_occupied(s_old) {
                None => (j, to),
                Some((m, count)) => {
                    if to < m {
                        (j, to)
                    } else if to == m || count > 1 {
                        return false;
                    } else {
                        let k = (0..self.days.len())
                            .find(|&k| k != j && self.days[k] == m)
                            .expect("occupied day has an individual");
                        (k, m)
                    }
                }
            }
        };

        let w_lo = from.min(to).min(s_old).min(s_new) - 1;
        let w_hi = from.max(to);
        let before = self.window(w_lo, w_hi, s_old);
        self.shift_infection(from, to);
        let after = self.window(w_lo, w_hi, s_new);
        let delta = after - before;
        let log_ratio = if after == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            match self.mode {
                LikelihoodMode::Data => delta,
                LikelihoodMode::Prior => 0.0,
            }
        };
        let accept = log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio;
        if accept {
            self.days[j] = to;
            self.kappa = kappa_new;
            self.sum_periods += from - to;
            self.log_h += delta;
        } else {
            self.shift_infection(to, from);
        }
        accept
    }

    /// Gibbs draw of the geometric parameter.
    pub fn update_gamma<R: Rng + ?Sized>(&mut self, prior: &BetaPrior, rng: &mut R) {
        self.gamma = prior.sample_posterior(self.days.len(), self.sum_periods, rng);
    }

    /// Redraws the GP coordinates of days before the initial infection from
    /// their prior. The likelihood does not involve them, so this is an exact
    /// Gibbs step; it keeps fresh conditional values ready for moves that
    /// bring the initial infection earlier.
    pub fn refresh_auxiliary<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let active = (self.hi - self.days[self.kappa] + 1) as usize;
        if let RateSource::Gp { z, .. } = &mut self.source {
            for v in z[active..].iter_mut() {
                *v = rng.sample(rand_distr::StandardNormal);
            }
        }
        self.refresh_beta();
        self.stale = false;
    }

    /// One under-relaxed proposal for the GP on the active days, accepted
    /// with the ratio of `h`.
    pub fn update_g<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<bool> {
        let active = (self.hi - self.days[self.kappa] + 1) as usize;
        let eps = self.epsilon;
        let RateSource::Gp { gp, z } = &self.source else {
            return Err(Error::Usage("the rate table is fixed".into()));
        };
        let a = (1.0 - eps * eps).max(0.0).sqrt();
        let mut proposal = z[..active].to_vec();
        for v in proposal.iter_mut() {
            let xi: f64 = rng.sample(rand_distr::StandardNormal);
            *v = a * *v + eps * xi;
        }
        let g = gp.values(&proposal, active);
        // factor order runs backwards in time
        let len = self.beta.len();
        let offset = len - active;
        let saved: Vec<f64> = self.beta[offset..].to_vec();
        for (k, v) in g.iter().enumerate() {
            self.beta[len - 1 - k] = v.exp();
        }
        let fresh = self.full_log_h();
        let log_ratio = match self.mode {
            LikelihoodMode::Data => fresh - self.log_h,
            LikelihoodMode::Prior => 0.0,
        };
        let accept = log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio;
        if accept {
            if let RateSource::Gp { z, .. } = &mut self.source {
                z[..active].copy_from_slice(&proposal);
            }
            self.log_h = fresh;
            self.stale = true;
        } else {
            self.beta[offset..].copy_from_slice(&saved);
        }
        Ok(accept)
    }

    /// `(day, beta)` on the active grid `i_kappa..=r_n - 1`.
    pub fn active_rates(&self) -> Vec<(i64, f64)> {
        (self.days[self.kappa]..=self.hi)
            .map(|d| (d, self.beta(d)))
            .collect()
    }

    /// GP value on day `r_n - 1`, always active.
    pub fn g_last(&self) -> f64 {
        self.beta(self.hi).ln()
    }
}

/// A valid set of starting infection days: the first-removed individual is
/// the initial infective, infected a mean period before its removal (at
/// least two days); every other individual is infected on the latest day not
/// after `r_j - W_j` (`W_j` geometric with the prior-mean parameter) on which
/// the previous day had an infective.
pub fn initial_infection_days<R: Rng + ?Sized>(
    removals: &[i64],
    gamma0: f64,
    floor: i64,
    rng: &mut R,
) -> Result<Vec<i64>> {
    let n = removals.len();
    let lead = ((1.0 / gamma0).round() as i64).max(2);
    let start = (removals[0] - lead).max(floor);
    if start > removals[0] - 2 && n > 1 {
        return Err(Error::Initialization("no room before the first removal".into()));
    }
    let mut days = vec![0i64; n];
    days[0] = start.min(removals[0] - 1);
    let mut assigned: Vec<(i64, i64)> = vec![(days[0], removals[0])];
    for j in 1..n {
        let target = removals[j] - sample_geometric(gamma0, rng);
        let mut d = target.min(removals[j] - 1);
        let ok = |d: i64, a: &[(i64, i64)]| a.iter().any(|&(i, r)| i < d && d <= r);
        while d > start + 1 && !ok(d, &assigned) {
            d -= 1;
        }
        if d <= start {
            d = start + 1;
        }
        if !ok(d, &assigned) || d >= removals[j] {
            return Err(Error::Initialization(format!(
                "could not place an infection for removal day {}",
                removals[j]
            )));
        }
        days[j] = d;
        assigned.push((d, removals[j]));
    }
    Ok(days)
}

/// Starting whitened coordinates: a smooth level curve `g = K a` at roughly
/// `level` on the active days, zero elsewhere.
fn level_start(gp: &PrefixGp, active: usize, level: f64) -> Vec<f64> {
    let l = gp.chol();
    let k = gp.params();
    // K 1 in the middle of a long grid is about omega * l * sqrt(2 pi)
    let mass: f64 = (-200..=200)
        .map(|d| k.cov(0.0, d as f64))
        .sum();
    let a = level / mass;
    let mut z = vec![0.0; gp.len()];
    // z = L^T a on the active block
    for (j, zj) in z.iter_mut().enumerate().take(active) {
        *zj = (j..active).map(|i| l[(i, j)] * a).sum();
    }
    z
}

/// Runs the discrete-time sampler. Per sweep: Gibbs `gamma`, the configured
/// number of infection-day proposals, then `g_updates_per_sweep`
/// under-relaxed GP updates.
pub fn run_discrete_gp_mcmc(
    data: &RemovalData,
    config: &DiscreteGpConfig,
    settings: &McmcSettings,
) -> Result<ChainOutput> {
    settings.validate()?;
    if !(config.epsilon >= 0.0 && config.epsilon <= 1.0) {
        return Err(Error::Parameter(format!("epsilon {} outside [0, 1]", config.epsilon)));
    }
    if data.time_scale() != TimeScale::Discrete {
        return Err(Error::Data("the discrete-time sampler needs integer removal days".into()));
    }
    let start_clock = Instant::now();
    let removals = data.days()?;
    let hi = removals[removals.len() - 1] - 1;
    let floor = config.floor_day(removals[0]);
    let gp = PrefixGp::new(hi, floor, config.kernel)?;
    let mut rng = settings.rng();
    let gamma0 = config.gamma_prior.mean();

    let days = match &config.known_infections {
        Some(days) => days.clone(),
        None => initial_infection_days(&removals, gamma0, floor, &mut rng)?,
    };
    let active = (hi - days.iter().min().copied().unwrap_or(hi) + 1).max(1) as usize;
    // crude constant rate from the starting configuration
    let level = {
        let probe = DiscreteSampler::new(
            data,
            RateSource::Fixed {
                first_day: floor,
                values: vec![1.0; (hi - floor + 1) as usize],
            },
            days.clone(),
            gamma0,
            LikelihoodMode::Prior,
        )?;
        let mut pressure = 0.0;
        for t in probe.initial_day()..=hi {
            let k = probe.idx(t);
            pressure += ((probe.cum_inf[k] - probe.cum_rem[k]) * (probe.population - probe.cum_inf[k])) as f64;
        }
        let infections = (days.len() - 1) as f64;
        if infections > 0.0 && pressure > 0.0 {
            (infections / pressure).ln()
        } else {
            0.0
        }
    };
    let z = if settings.mode == LikelihoodMode::Prior {
        gp.standard_normals(&mut rng)
    } else {
        level_start(&gp, active, level)
    };
    let mut sampler = DiscreteSampler::new(
        data,
        RateSource::Gp { gp, z },
        days,
        gamma0,
        settings.mode,
    )?;
    sampler.epsilon = config.epsilon;

    let mut out = ChainOutput::new("discrete-gp", settings.seed);
    let moves = if config.known_infections.is_some() {
        0
    } else {
        settings.moves_per_sweep.unwrap_or(removals.len())
    };
    let mut rows: Vec<(i64, Vec<f64>)> = Vec::new();
    let mut window = (0u64, 0u64);
    let mut adapt_round = 0usize;
    let mut floor_warned = false;
    let floor_margin = ((hi - floor) / 10).max(1);

    for it in 0..settings.iterations {
        sampler.update_gamma(&config.gamma_prior, &mut rng);
        sampler.refresh_auxiliary(&mut rng);
        for _ in 0..moves {
            let ok = sampler.propose_infection(&mut rng);
            out.acceptance_mut("infection_time").record(ok);
        }
        for _ in 0..config.g_updates_per_sweep {
            let ok = sampler.update_g(&mut rng)?;
            out.acceptance_mut("g").record(ok);
            window.0 += ok as u64;
            window.1 += 1;
        }
        if config.adapt_epsilon && it < settings.burnin && window.1 >= 50 {
            adapt_round += 1;
            let rate = window.0 as f64 / window.1 as f64;
            let step = (rate - 0.25) / (adapt_round as f64).sqrt();
            sampler.epsilon = (sampler.epsilon * step.exp()).clamp(1e-3, 1.0);
            window = (0, 0);
        }
        if it % 100 == 99 {
            let diff = sampler.resync();
            if diff > 1e-10 * sampler.log_h().abs().max(1.0) {
                log::warn!("incremental likelihood drifted by {diff:e} at sweep {it}");
            }
        }
        if !floor_warned && sampler.initial_day() - floor < floor_margin {
            floor_warned = true;
            let msg = format!(
                "initial infection reached day {}, close to the lowest allowed day {floor}",
                sampler.initial_day()
            );
            log::warn!("{msg}");
            out.warnings.push(msg);
        }
        if settings.retains(it) {
            out.retained.push(it);
            out.push_scalar("gamma", sampler.gamma());
            out.push_scalar("kappa", (sampler.kappa() + 1) as f64);
            out.push_scalar("i_kappa", sampler.initial_day() as f64);
            out.push_scalar("g_last", sampler.g_last());
            let rates = sampler.active_rates();
            rows.push((rates[0].0, rates.iter().map(|r| r.1).collect()));
            if settings.record_latent {
                out.latent.push(sampler.days().iter().map(|&d| d as f64).collect());
            }
        }
    }
    if config.adapt_epsilon {
        out.notes.push(format!("epsilon after burn-in: {}", sampler.epsilon));
    }
    let first = rows.iter().map(|r| r.0).min().unwrap_or(hi);
    let grid: Vec<f64> = (first..=hi).map(|d| d as f64).collect();
    let rows = rows
        .into_iter()
        .map(|(s, vals)| {
            let pad = (s - first) as usize;
            std::iter::repeat_n(None, pad)
                .chain(vals.into_iter().map(Some))
                .collect()
        })
        .collect();
    out.function = Some(FunctionTrace { grid, rows });
    out.iterations = settings.iterations;
    out.elapsed_secs = start_clock.elapsed().as_secs_f64();
    Ok(out)
}
