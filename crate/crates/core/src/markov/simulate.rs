//! Monte Carlo simulation of a truncated chain.
//!
//! A path that draws the residual (lost) mass of a row is counted as escaped
//! rather than resampled, matching the deficit of the exact computations.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::ops::Range;

use super::{Distribution, TransitionKernel};
use crate::element::{BasisIndex, TruncationPolicy};
use crate::error::{Error, Result};
use crate::rng::CounterRng;

/// Visit counts of `X_n` over the simulated paths.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SimulationOutcome {
    pub counts: BTreeMap<BasisIndex, u64>,
    pub escaped: u64,
    pub paths: u64,
}

impl SimulationOutcome {
    pub fn frequency(&self, k: BasisIndex) -> f64 {
        if self.paths == 0 {
            return 0.0;
        }
        self.counts.get(&k).copied().unwrap_or(0) as f64 / self.paths as f64
    }

    pub fn merge(&mut self, other: SimulationOutcome) {
        for (k, c) in other.counts {
            *self.counts.entry(k).or_insert(0) += c;
        }
        self.escaped += other.escaped;
        self.paths += other.paths;
    }
}

/// Inverse-CDF sampler over `(state, cumulative probability)` pairs.
#[derive(Debug, Clone)]
struct Cdf {
    states: Vec<BasisIndex>,
    cumulative: Vec<f64>,
}

impl Cdf {
    fn new<I: IntoIterator<Item = (BasisIndex, f64)>>(entries: I) -> Self {
        let mut states = Vec::new();
        let mut cumulative = Vec::new();
        let mut acc = 0.0;
        for (k, p) in entries {
            if p > 0.0 {
                acc += p;
                states.push(k);
                cumulative.push(acc);
            }
        }
        Cdf { states, cumulative }
    }

    /// `None` when `u` lands in the residual mass.
    fn sample(&self, u: f64) -> Option<BasisIndex> {
        let j = self.cumulative.partition_point(|&c| c <= u);
        self.states.get(j).copied()
    }
}

/// Samples paths of a chain restricted to the states below the cutoff.
#[derive(Debug, Clone)]
pub struct Simulator {
    initial: Cdf,
    rows: Vec<Cdf>,
    steps: usize,
    rng: CounterRng,
}

impl Simulator {
    /// Tabulates every row below `policy.cutoff()` (or the state limit).
    pub fn new<K: TransitionKernel + ?Sized>(
        k: &K,
        init: &Distribution,
        steps: usize,
        seed: u64,
        policy: &TruncationPolicy,
    ) -> Result<Self> {
        let cutoff = policy.cutoff();
        let n = k.state_limit().map_or(cutoff, |l| l.min(cutoff));
        let rows = (0..n).map(|i| Cdf::new(k.row(i, cutoff).entries)).collect();
        let initial = Cdf::new(init.underlying().iter().filter(|&(i, _)| i < n));
        if initial.states.is_empty() && steps > 0 {
            return Err(Error::InvalidParameter("initial distribution has no mass below the cutoff".into()));
        }
        Ok(Simulator { initial, rows, steps, rng: CounterRng::new(seed) })
    }

    /// Final state of path `path`, `None` if it escaped. Draws are keyed by
    /// `(seed, path, step)` only.
    pub fn run_path(&self, path: u64) -> Option<BasisIndex> {
        let r = self.rng.split(path);
        let mut state = self.initial.sample(r.uniform(0))?;
        for step in 1..=self.steps as u64 {
            state = self.rows.get(state)?.sample(r.uniform(step))?;
        }
        Some(state)
    }

    pub fn run_paths(&self, paths: Range<u64>) -> SimulationOutcome {
        let mut out = SimulationOutcome::default();
        for path in paths {
            out.paths += 1;
            match self.run_path(path) {
                Some(k) => *out.counts.entry(k).or_insert(0) += 1,
                None => out.escaped += 1,
            }
        }
        out
    }
}

/// Simulates `paths` independent copies of `X_steps` with `X_0 ~ init`.
pub fn simulate<K: TransitionKernel + ?Sized>(
    k: &K,
    init: &Distribution,
    steps: usize,
    paths: u64,
    seed: u64,
    policy: &TruncationPolicy,
) -> Result<SimulationOutcome> {
    Ok(Simulator::new(k, init, steps, seed, policy)?.run_paths(0..paths))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::{build_renewal, IdentityKernel, ProbSeq};

    #[test]
    fn identity_paths_stay_put() {
        let policy = TruncationPolicy::with_cutoff(16).unwrap();
        let out = simulate(&IdentityKernel, &Distribution::point_mass(3), 10, 100, 1, &policy).unwrap();
        assert_eq!(out.counts.get(&3), Some(&100));
        assert_eq!(out.escaped, 0);
    }

    #[test]
    fn split_runs_merge_to_the_whole() {
        let policy = TruncationPolicy::with_cutoff(32).unwrap();
        let k = build_renewal(ProbSeq::Geometric { start: 1, ratio: 0.5 }).unwrap();
        let sim = Simulator::new(&k, &Distribution::point_mass(0), 5, 42, &policy).unwrap();
        let whole = sim.run_paths(0..1000);
        let mut parts = sim.run_paths(0..400);
        parts.merge(sim.run_paths(400..1000));
        assert_eq!(whole, parts);
    }

    #[test]
    fn residual_mass_escapes() {
        let cdf = Cdf::new([(0, 0.25), (2, 0.25)]);
        assert_eq!(cdf.sample(0.1), Some(0));
        assert_eq!(cdf.sample(0.3), Some(2));
        assert_eq!(cdf.sample(0.9), None);
    }
}
