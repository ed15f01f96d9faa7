//! Chain settings and per-iteration output shared by all samplers.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Whether the sampler targets the posterior or only the prior (likelihood
/// replaced by the indicator of a valid latent configuration).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LikelihoodMode {
    #[default]
    Data,
    Prior,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McmcSettings {
    pub iterations: usize,
    pub burnin: usize,
    pub thin: usize,
    /// Latent-time proposals per sweep; `None` means one per observed removal.
    pub moves_per_sweep: Option<usize>,
    pub seed: u64,
    /// Generator stream, so parallel chains sharing a seed stay independent.
    pub stream: u64,
    pub mode: LikelihoodMode,
    /// Keep the latent infection times of every retained sample.
    pub record_latent: bool,
}

impl McmcSettings {
    /// Burn-in of 20% and thinning of 10.
    pub fn new(iterations: usize, seed: u64) -> Self {
        McmcSettings {
            iterations,
            burnin: iterations / 5,
            thin: 10,
            moves_per_sweep: None,
            seed,
            stream: 0,
            mode: LikelihoodMode::Data,
            record_latent: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Usage("at least one iteration is required".into()));
        }
        if self.thin == 0 {
            return Err(Error::Usage("thinning interval must be at least 1".into()));
        }
        if self.burnin >= self.iterations {
            return Err(Error::Usage(format!(
                "burn-in {} leaves nothing of {} iterations",
                self.burnin, self.iterations
            )));
        }
        Ok(())
    }

    /// Iteration `it` (0-based) is kept once past burn-in, every `thin`-th.
    pub fn retains(&self, it: usize) -> bool {
        it >= self.burnin && (it - self.burnin + 1).is_multiple_of(self.thin)
    }

    pub fn retained_count(&self) -> usize {
        (self.iterations - self.burnin) / self.thin
    }

    pub fn rng(&self) -> crate::rng::StreamRng {
        crate::rng::stream(self.seed, self.stream)
    }
}

/// Accepted and attempted counts for one proposal type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Acceptance {
    pub accepted: u64,
    pub proposed: u64,
}

impl Acceptance {
    pub fn record(&mut self, accepted: bool) {
        self.proposed += 1;
        self.accepted += accepted as u64;
    }

    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// Samples of a function of time, one row per retained iteration. Entries
/// are `None` where a time point lies outside that iteration's support.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FunctionTrace {
    pub grid: Vec<f64>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl FunctionTrace {
    /// Column `k` without missing entries.
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r[k]).collect()
    }

    fn regrid(&self, grid: &[f64]) -> Vec<Vec<Option<f64>>> {
        let pos: Vec<Option<usize>> = grid
            .iter()
            .map(|t| self.grid.iter().position(|s| s == t))
            .collect();
        self.rows
            .iter()
            .map(|r| pos.iter().map(|p| p.and_then(|k| r[k])).collect())
            .collect()
    }

    /// Rows of both traces on the union of their grids.
    pub fn merge(&self, other: &FunctionTrace) -> FunctionTrace {
        if self.grid == other.grid {
            let mut rows = self.rows.clone();
            rows.extend(other.rows.iter().cloned());
            return FunctionTrace {
                grid: self.grid.clone(),
                rows,
            };
        }
        let mut grid: Vec<f64> = self.grid.iter().chain(&other.grid).cloned().collect();
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        let mut rows = self.regrid(&grid);
        rows.extend(other.regrid(&grid));
        FunctionTrace { grid, rows }
    }
}

/// GP state kept at a retained iteration of the continuous-time sampler, from
/// which rates on any grid can be computed after the run.
#[derive(Debug, Clone, PartialEq)]
pub struct GpSnapshot {
    pub points: Vec<f64>,
    pub values: Vec<f64>,
    pub bound: f64,
}

/// Everything a sampler run produces.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChainOutput {
    pub model: String,
    pub seeds: Vec<u64>,
    /// Total sweeps run, summed over merged chains.
    pub iterations: usize,
    /// Sweep number of every retained sample.
    pub retained: Vec<usize>,
    pub scalars: BTreeMap<String, Vec<f64>>,
    /// Rate function samples, `beta(t)`.
    pub function: Option<FunctionTrace>,
    /// Latent infection times per retained sample (sorted).
    pub latent: Vec<Vec<f64>>,
    pub snapshots: Vec<GpSnapshot>,
    pub acceptance: BTreeMap<String, Acceptance>,
    pub elapsed_secs: f64,
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
}

impl ChainOutput {
    pub fn new(model: &str, seed: u64) -> Self {
        ChainOutput {
            model: model.to_string(),
            seeds: vec![seed],
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.retained.len()
    }

    pub fn is_empty(&self) -> bool {
        self.retained.is_empty()
    }

    pub fn scalar(&self, name: &str) -> Option<&[f64]> {
        self.scalars.get(name).map(|v| v.as_slice())
    }

    pub fn push_scalar(&mut self, name: &str, value: f64) {
        self.scalars.entry(name.to_string()).or_default().push(value);
    }

    pub fn acceptance_mut(&mut self, name: &str) -> &mut Acceptance {
        self.acceptance.entry(name.to_string()).or_default()
    }

    /// Concatenation of two chains of the same model. Sweep numbers of
    /// `other` are offset by the sweeps already in `self`, so merging is
    /// associative.
    pub fn merge(&self, other: &ChainOutput) -> Result<ChainOutput> {
        if self.model != other.model {
            return Err(Error::Usage(format!(
                "cannot merge {} output with {} output",
                self.model, other.model
            )));
        }
        let keys_a: Vec<_> = self.scalars.keys().collect();
        let keys_b: Vec<_> = other.scalars.keys().collect();
        if !self.is_empty() && !other.is_empty() && keys_a != keys_b {
            return Err(Error::Usage("chains record different parameters".into()));
        }
        let mut out = self.clone();
        out.seeds.extend(&other.seeds);
        out.retained
            .extend(other.retained.iter().map(|it| it + self.iterations));
        out.iterations += other.iterations;
        for (k, v) in &other.scalars {
            out.scalars.entry(k.clone()).or_default().extend(v);
        }
        out.function = match (&self.function, &other.function) {
            (Some(a), Some(b)) => Some(a.merge(b)),
            (a, b) => a.clone().or_else(|| b.clone()),
        };
        out.latent.extend(other.latent.iter().cloned());
        out.snapshots.extend(other.snapshots.iter().cloned());
        for (k, a) in &other.acceptance {
            let e = out.acceptance.entry(k.clone()).or_default();
            e.accepted += a.accepted;
            e.proposed += a.proposed;
        }
        out.elapsed_secs += other.elapsed_secs;
        out.warnings.extend(other.warnings.iter().cloned());
        out.notes.extend(other.notes.iter().cloned());
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(seed: u64, vals: &[f64], grid: &[f64]) -> ChainOutput {
        let mut c = ChainOutput::new("m", seed);
        c.iterations = 10 * vals.len();
        for (k, v) in vals.iter().enumerate() {
            c.retained.push(10 * k + 9);
            c.push_scalar("gamma", *v);
        }
        c.function = Some(FunctionTrace {
            grid: grid.to_vec(),
            rows: vals.iter().map(|v| grid.iter().map(|_| Some(*v)).collect()).collect(),
        });
        c.acceptance_mut("move").record(true);
        c
    }

    #[test]
    fn retention_schedule() {
        let mut s = McmcSettings::new(100, 1);
        s.burnin = 20;
        s.thin = 10;
        let kept: Vec<usize> = (0..100).filter(|&i| s.retains(i)).collect();
        assert_eq!(kept.len(), s.retained_count());
        assert_eq!(kept[0], 29);
        assert_eq!(kept.len(), 8);
    }

    #[test]
    fn merge_is_associative() {
        let a = chain(1, &[1.0, 2.0], &[0.0, 1.0]);
        let b = chain(2, &[3.0], &[1.0, 2.0]);
        let c = chain(3, &[4.0, 5.0, 6.0], &[0.0]);
        let left = a.merge(&b).unwrap().merge(&c).unwrap();
        let right = a.merge(&b.merge(&c).unwrap()).unwrap();
        assert_eq!(left, right);
        assert_eq!(left.retained, vec![9, 19, 29, 39, 49, 59]);
        let f = left.function.unwrap();
        assert_eq!(f.grid, vec![0.0, 1.0, 2.0]);
        assert_eq!(f.rows[2], vec![None, Some(3.0), Some(3.0)]);
        assert_eq!(left.acceptance["move"].proposed, 3);
    }

    #[test]
    fn merge_rejects_other_models() {
        let a = chain(1, &[1.0], &[0.0]);
        let mut b = chain(2, &[1.0], &[0.0]);
        b.model = "other".into();
        assert!(a.merge(&b).is_err());
    }
}
