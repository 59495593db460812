//! Built-in chain families and explicit sparse kernels.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::TransitionKernel;
use crate::element::BasisIndex;
use crate::error::{Error, Result};
use crate::series::{Omitted, Truncated};
use crate::sum::{sum, CompensatedSum};

const SUM_TOL: f64 = 1e-12;

/// A probability sequence `p_0, p_1, ...` with exact tail masses.
#[derive(Debug, Clone, PartialEq)]
pub enum ProbSeq {
    /// `p_i = (1 - ratio) ratio^(i - start)` for `i >= start`, zero before.
    Geometric { start: usize, ratio: f64 },
    /// `p_i = p` for every `i`; not summable.
    Constant(f64),
    /// Finitely many values, zero afterwards.
    Finite(Vec<f64>),
}

impl ProbSeq {
    pub fn prob(&self, i: usize) -> f64 {
        match self {
            ProbSeq::Geometric { start, ratio } => {
                if i < *start {
                    0.0
                } else {
                    (1.0 - ratio) * libm::pow(*ratio, (i - start) as f64)
                }
            }
            ProbSeq::Constant(p) => *p,
            ProbSeq::Finite(v) => v.get(i).copied().unwrap_or(0.0),
        }
    }

    /// `Σ_{i >= n} p_i`, infinite for a constant sequence.
    pub fn tail_mass(&self, n: usize) -> f64 {
        match self {
            ProbSeq::Geometric { start, ratio } => {
                if n <= *start {
                    1.0
                } else {
                    libm::pow(*ratio, (n - start) as f64)
                }
            }
            ProbSeq::Constant(p) => {
                if *p == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            ProbSeq::Finite(v) => v.get(n..).map_or(0.0, |t| sum(t.iter().copied())),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            ProbSeq::Geometric { start, ratio } => format!("geometric(start={start}, ratio={ratio})"),
            ProbSeq::Constant(p) => format!("constant({p})"),
            ProbSeq::Finite(v) => format!("finite({v:?})"),
        }
    }
}

/// From state 0 jump to `i` with probability `p_i`; from `i >= 1` step down
/// to `i - 1`.
#[derive(Debug, Clone)]
pub struct RenewalKernel {
    p: ProbSeq,
}

pub fn build_renewal(p: ProbSeq) -> Result<RenewalKernel> {
    let bad = |detail: String| Error::NotMarkov { index: 0, detail };
    match &p {
        ProbSeq::Geometric { start, ratio } => {
            if *start == 0 {
                return Err(bad("a renewal chain needs p_0 = 0".into()));
            }
            if !(0.0..1.0).contains(ratio) {
                return Err(bad(format!("geometric ratio {ratio} is outside [0, 1)")));
            }
        }
        ProbSeq::Constant(p) => return Err(bad(format!("constant sequence {p} does not sum to 1"))),
        ProbSeq::Finite(v) => {
            if v.iter().any(|x| !(0.0..=1.0).contains(x)) {
                return Err(bad("probabilities must lie in [0, 1]".into()));
            }
            if v.first().is_some_and(|&x| x != 0.0) {
                return Err(bad("a renewal chain needs p_0 = 0".into()));
            }
            let total = sum(v.iter().copied());
            if (total - 1.0).abs() > SUM_TOL {
                return Err(bad(format!("probabilities sum to {total}")));
            }
        }
    }
    Ok(RenewalKernel { p })
}

impl RenewalKernel {
    pub fn sequence(&self) -> &ProbSeq {
        &self.p
    }
}

impl TransitionKernel for RenewalKernel {
    fn row(&self, i: BasisIndex, cutoff: usize) -> Truncated {
        if i >= 1 {
            return Truncated::from_full([(i - 1, 1.0)], cutoff);
        }
        let last = match &self.p {
            ProbSeq::Finite(v) => v.len().min(cutoff),
            _ => cutoff,
        };
        let entries: Vec<_> = (1..last).map(|k| (k, self.p.prob(k))).filter(|&(_, x)| x > 0.0).collect();
        let rest = self.p.tail_mass(cutoff.max(1));
        let omitted = if rest > 0.0 { Omitted::Mass(rest) } else { Omitted::Nothing };
        Truncated { entries, omitted }
    }

    fn inflow_tail(&self, k: BasisIndex, cutoff: usize) -> Omitted {
        if k + 1 == cutoff {
            Omitted::Mass(1.0)
        } else {
            Omitted::Nothing
        }
    }

    fn inflow_sup_from(&self, cutoff: usize) -> Option<f64> {
        Some(1.0 + self.p.tail_mass(cutoff.max(1)).min(1.0))
    }

    fn description(&self) -> String {
        format!("renewal {}", self.p.describe())
    }
}

/// From `i`, collapse to 0 with probability `p_i` or climb to `i + 1`.
#[derive(Debug, Clone)]
pub struct HouseOfCardsKernel {
    p: ProbSeq,
}

pub fn build_house_of_cards(p: ProbSeq) -> Result<HouseOfCardsKernel> {
    let bad = |detail: String| Error::InvalidParameter(detail);
    match &p {
        ProbSeq::Geometric { start, ratio } => {
            if *start != 0 {
                return Err(bad("house-of-cards probabilities must be positive from p_0 on".into()));
            }
            if !(*ratio > 0.0 && *ratio < 1.0) {
                return Err(bad(format!("geometric ratio {ratio} is outside (0, 1)")));
            }
        }
        ProbSeq::Constant(p) => {
            if !(*p > 0.0 && *p <= 1.0) {
                return Err(bad(format!("collapse probability {p} is outside (0, 1]")));
            }
        }
        ProbSeq::Finite(_) => {
            return Err(bad("house-of-cards probabilities must be positive for every state".into()));
        }
    }
    Ok(HouseOfCardsKernel { p })
}

impl TransitionKernel for HouseOfCardsKernel {
    fn row(&self, i: BasisIndex, cutoff: usize) -> Truncated {
        let collapse = self.p.prob(i);
        let climb = 1.0 - collapse;
        let full = [(0, collapse), (i + 1, climb)].into_iter().filter(|&(_, x)| x > 0.0);
        Truncated::from_full(full, cutoff)
    }

    fn inflow_tail(&self, k: BasisIndex, cutoff: usize) -> Omitted {
        if k == 0 {
            Omitted::Mass(self.p.tail_mass(cutoff))
        } else {
            Omitted::Nothing
        }
    }

    /// Columns `k >= 1` receive `1 - p_{k-1}` only; column 0 receives `Σ p_i`.
    fn inflow_sup_from(&self, cutoff: usize) -> Option<f64> {
        if cutoff > 0 {
            return Some(1.0);
        }
        let collapse = self.p.tail_mass(0);
        collapse.is_finite().then(|| collapse.max(1.0))
    }

    fn description(&self) -> String {
        format!("house-of-cards {}", self.p.describe())
    }
}

/// Galton-Watson chain: from population `i` the next population is the sum
/// of `i` independent offspring counts.
#[derive(Debug, Clone)]
pub struct BranchingKernel {
    offspring: Vec<f64>,
    /// Rows `0..=max_population`, in full.
    rows: Vec<Vec<f64>>,
}

fn convolve(a: &[f64], b: &[f64], limit: usize) -> Vec<f64> {
    let len = (a.len() + b.len() - 1).min(limit);
    let mut out = Vec::with_capacity(len);
    for n in 0..len {
        let mut acc = CompensatedSum::new();
        let lo = n.saturating_sub(b.len() - 1);
        for j in lo..=n.min(a.len() - 1) {
            acc.add(a[j] * b[n - j]);
        }
        out.push(acc.value());
    }
    out
}

fn pgf(offspring: &[f64], s: f64) -> f64 {
    offspring.iter().rev().fold(0.0, |acc, &p| acc * s + p)
}

fn check_offspring(offspring: &[f64]) -> Result<()> {
    if offspring.len() < 2 {
        return Err(Error::InvalidParameter("offspring law needs at least two entries".into()));
    }
    if offspring.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(Error::InvalidParameter("offspring probabilities must lie in [0, 1]".into()));
    }
    let p0 = offspring[0];
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(Error::InvalidParameter(format!("p_0 = {p0} is outside (0, 1)")));
    }
    let total = sum(offspring.iter().copied());
    if (total - 1.0).abs() > SUM_TOL {
        return Err(Error::InvalidParameter(format!("offspring probabilities sum to {total}")));
    }
    Ok(())
}

pub fn build_branching(offspring: Vec<f64>, max_population: usize) -> Result<BranchingKernel> {
    check_offspring(&offspring)?;
    let mut rows = Vec::with_capacity(max_population + 1);
    rows.push(vec![1.0]);
    for i in 1..=max_population {
        let next = convolve(&rows[i - 1], &offspring, usize::MAX);
        rows.push(next);
    }
    Ok(BranchingKernel { offspring, rows })
}

/// `max{p_0 / (1 - p_0), φ(s) / (s (1 - φ(s)))}` with `φ` the offspring pgf.
pub fn branching_column_bound(offspring: &[f64], s: f64) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::InvalidParameter(format!("evaluation point {s} is outside (0, 1)")));
    }
    let p0 = offspring.first().copied().unwrap_or(0.0);
    if p0.is_nan() || p0 >= 1.0 {
        return Err(Error::InvalidParameter(format!("p_0 = {p0} leaves no growth")));
    }
    let phi = pgf(offspring, s);
    if phi >= 1.0 {
        return Err(Error::InvalidParameter(format!("pgf value {phi} at {s} is not below 1")));
    }
    Ok((p0 / (1.0 - p0)).max(phi / (s * (1.0 - phi))))
}

impl BranchingKernel {
    pub fn offspring(&self) -> &[f64] {
        &self.offspring
    }

    pub fn max_population(&self) -> usize {
        self.rows.len() - 1
    }

    /// Law of the sum of `i` offspring counts, cut at `limit` entries.
    fn row_prefix(&self, i: usize, limit: usize) -> Vec<f64> {
        if let Some(r) = self.rows.get(i) {
            return r[..r.len().min(limit)].to_vec();
        }
        let mut row = self.rows.last().cloned().unwrap_or_else(|| vec![1.0]);
        row.truncate(limit);
        for _ in self.rows.len() - 1..i {
            if row.is_empty() {
                break;
            }
            row = convolve(&row, &self.offspring, limit);
        }
        row
    }
}

impl TransitionKernel for BranchingKernel {
    fn row(&self, i: BasisIndex, cutoff: usize) -> Truncated {
        let d = self.offspring.len() - 1;
        let full_len = i.saturating_mul(d).saturating_add(1);
        let prefix = self.row_prefix(i, cutoff);
        let entries: Vec<_> = prefix.iter().copied().enumerate().filter(|&(_, x)| x > 0.0).collect();
        let omitted = if full_len <= cutoff {
            Omitted::Nothing
        } else if let Some(r) = self.rows.get(i) {
            Omitted::Mass(sum(r[cutoff..].iter().copied()))
        } else {
            Omitted::Mass((1.0 - sum(prefix.iter().copied())).max(0.0))
        };
        Truncated { entries, omitted }
    }

    /// `Σ_{i >= n} P(S_i = k) <= s^{-k} φ(s)^n / (1 - φ(s))` for every
    /// `s ∈ (0, 1)`; the best of a fixed grid of `s` is returned.
    fn inflow_tail(&self, k: BasisIndex, cutoff: usize) -> Omitted {
        let p0 = self.offspring[0];
        if k == 0 {
            return Omitted::Mass(libm::pow(p0, cutoff as f64) / (1.0 - p0));
        }
        let best = (1..20)
            .map(|j| j as f64 / 20.0)
            .filter_map(|s| {
                let phi = pgf(&self.offspring, s);
                (phi < 1.0).then(|| libm::pow(phi, cutoff as f64) / ((1.0 - phi) * libm::pow(s, k as f64)))
            })
            .fold(f64::INFINITY, f64::min);
        Omitted::Mass(best.min(1.0 / (1.0 - p0)))
    }

    /// The partial sums `S_i` never decrease and stay at a level for a
    /// geometric number of steps with mean `1 / (1 - p_0)`, which bounds
    /// `Σ_i P(S_i = k)` for every `k`.
    fn inflow_sup_from(&self, _cutoff: usize) -> Option<f64> {
        Some(1.0 / (1.0 - self.offspring[0]))
    }

    fn description(&self) -> String {
        format!("branching offspring={:?} max_population={}", self.offspring, self.max_population())
    }
}

/// `p_ii = 1`.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityKernel;

impl TransitionKernel for IdentityKernel {
    fn row(&self, i: BasisIndex, cutoff: usize) -> Truncated {
        Truncated::from_full([(i, 1.0)], cutoff)
    }

    fn inflow_tail(&self, _k: BasisIndex, _cutoff: usize) -> Omitted {
        Omitted::Nothing
    }

    fn inflow_sup_from(&self, _cutoff: usize) -> Option<f64> {
        Some(1.0)
    }

    fn description(&self) -> String {
        "identity".into()
    }
}

/// Explicit rows on the states `0..n`, `n` one past the largest index seen.
#[derive(Debug, Clone, Default)]
pub struct SparseKernel {
    rows: BTreeMap<BasisIndex, Vec<(BasisIndex, f64)>>,
    states: usize,
}

impl SparseKernel {
    /// Rows may arrive in any order; repeated `(i, k)` pairs are rejected.
    pub fn from_entries<I>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (BasisIndex, BasisIndex, f64)>,
    {
        let mut cells: BTreeMap<BasisIndex, BTreeMap<BasisIndex, f64>> = BTreeMap::new();
        let mut states = 0;
        for (i, k, p) in entries {
            if !p.is_finite() {
                return Err(Error::NonFiniteCoefficient { index: k });
            }
            if cells.entry(i).or_default().insert(k, p).is_some() {
                return Err(Error::DuplicateIndex(k));
            }
            states = states.max(i + 1).max(k + 1);
        }
        let rows = cells.into_iter().map(|(i, r)| (i, r.into_iter().collect())).collect();
        Ok(SparseKernel { rows, states })
    }

    pub fn states(&self) -> usize {
        self.states
    }

    fn full_row(&self, i: BasisIndex) -> &[(BasisIndex, f64)] {
        self.rows.get(&i).map_or(&[], |r| r.as_slice())
    }

    fn inflow(&self, k: BasisIndex, from: BasisIndex) -> f64 {
        let mut acc = CompensatedSum::new();
        for (_, row) in self.rows.range(from..) {
            if let Ok(j) = row.binary_search_by_key(&k, |&(t, _)| t) {
                acc.add(row[j].1.abs());
            }
        }
        acc.value()
    }
}

impl TransitionKernel for SparseKernel {
    fn row(&self, i: BasisIndex, cutoff: usize) -> Truncated {
        Truncated::from_full(self.full_row(i).iter().copied(), cutoff)
    }

    fn row_mass(&self, i: BasisIndex) -> f64 {
        sum(self.full_row(i).iter().map(|&(_, p)| p.abs()))
    }

    fn inflow_tail(&self, k: BasisIndex, cutoff: usize) -> Omitted {
        match self.inflow(k, cutoff) {
            0.0 => Omitted::Nothing,
            m => Omitted::Mass(m),
        }
    }

    fn inflow_sup_from(&self, cutoff: usize) -> Option<f64> {
        Some((cutoff..self.states).map(|k| self.inflow(k, 0)).fold(0.0, f64::max))
    }

    fn state_limit(&self) -> Option<usize> {
        Some(self.states)
    }

    fn description(&self) -> String {
        format!("explicit kernel on {} states", self.states)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn halves() -> ProbSeq {
        ProbSeq::Geometric { start: 1, ratio: 0.5 }
    }

    #[test]
    fn renewal_rows() {
        let k = build_renewal(halves()).unwrap();
        let r0 = k.row(0, 10);
        assert_eq!(r0.entries.len(), 9);
        assert_eq!(r0.entries[0], (1, 0.5));
        assert_eq!(r0.sum(), 1.0 - libm::pow(2.0, -9.0));
        assert_eq!(r0.omitted, Omitted::Mass(libm::pow(2.0, -9.0)));
        // window of 10 holds k = 1..=9; with one more state the mass is 1 - 2^-10
        assert_eq!(k.row(0, 11).sum(), 1.0 - libm::pow(2.0, -10.0));
        assert_eq!(k.row(7, 10), Truncated::complete(vec![(6, 1.0)]));
    }

    #[test]
    fn degenerate_renewal_alternates() {
        let k = build_renewal(ProbSeq::Finite(vec![0.0, 1.0])).unwrap();
        assert_eq!(k.row(0, 8), Truncated::complete(vec![(1, 1.0)]));
        assert_eq!(k.row(1, 8), Truncated::complete(vec![(0, 1.0)]));
    }

    #[test]
    fn renewal_rejects_bad_sequences() {
        assert!(matches!(build_renewal(ProbSeq::Finite(vec![0.0, 0.5])), Err(Error::NotMarkov { .. })));
        assert!(matches!(build_renewal(ProbSeq::Constant(0.5)), Err(Error::NotMarkov { .. })));
        assert!(build_renewal(ProbSeq::Geometric { start: 0, ratio: 0.5 }).is_err());
    }

    #[test]
    fn house_of_cards_rows() {
        let k = build_house_of_cards(ProbSeq::Constant(0.3)).unwrap();
        assert_eq!(k.row(0, 8), Truncated::complete(vec![(0, 0.3), (1, 0.7)]));
        let cut = k.row(7, 8);
        assert_eq!(cut.entries, vec![(0, 0.3)]);
        assert_eq!(cut.omitted, Omitted::Mass(0.7));
        assert_eq!(k.inflow_tail(0, 8), Omitted::Mass(f64::INFINITY));
        assert!(build_house_of_cards(ProbSeq::Constant(0.0)).is_err());
        assert!(build_house_of_cards(ProbSeq::Constant(1.5)).is_err());
        let g = build_house_of_cards(ProbSeq::Geometric { start: 0, ratio: 0.5 }).unwrap();
        assert_eq!(g.row(0, 8), Truncated::complete(vec![(0, 0.5), (1, 0.5)]));
        assert_eq!(g.inflow_tail(0, 4), Omitted::Mass(1.0 / 16.0));
    }

    #[test]
    fn branching_rows_are_convolutions() {
        let k = build_branching(vec![0.5, 0.5], 16).unwrap();
        assert_eq!(k.row(0, 8), Truncated::complete(vec![(0, 1.0)]));
        assert_eq!(k.row(2, 8), Truncated::complete(vec![(0, 0.25), (1, 0.5), (2, 0.25)]));
        for i in 0..30 {
            assert_eq!(k.row(i, 64).entries[0], (0, libm::pow(0.5, i as f64)));
        }
        // beyond the materialized rows the oracle computes on demand
        let far = k.row(20, 64);
        let expect = 20.0 * libm::pow(0.5, 20.0);
        assert!((far.entries[1].1 - expect).abs() < 1e-18);
        assert!(far.omitted.is_nothing());
        let cut = k.row(20, 5);
        assert!((cut.sum() + cut.omitted.mass().unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn branching_inflow_respects_its_bound() {
        let k = build_branching(vec![0.25, 0.25, 0.5], 64).unwrap();
        let sup = k.inflow_sup_from(0).unwrap();
        for target in 0..40 {
            let window: f64 = (0..200)
                .map(|i| {
                    let r = k.row(i, 64);
                    r.entries.iter().find(|e| e.0 == target).map_or(0.0, |e| e.1)
                })
                .sum();
            assert!(window <= sup + 1e-12, "k={target}: {window} > {sup}");
            let tail = k.inflow_tail(target, 50).mass().unwrap();
            let actual: f64 =
                (50..200).map(|i| k.row(i, 64).entries.iter().find(|e| e.0 == target).map_or(0.0, |e| e.1)).sum();
            assert!(actual <= tail + 1e-15);
        }
    }

    #[test]
    fn branching_validation() {
        assert!(build_branching(vec![1.0], 4).is_err());
        assert!(build_branching(vec![0.0, 1.0], 4).is_err());
        assert!(build_branching(vec![0.5, 0.6], 4).is_err());
    }

    #[test]
    fn pgf_bound_examples() {
        assert_eq!(branching_column_bound(&[0.5, 0.5], 0.5).unwrap(), 6.0);
        let b = branching_column_bound(&[0.9, 0.1], 0.5).unwrap();
        assert!((b - 38.0).abs() < 1e-9);
        assert!(branching_column_bound(&[0.5, 0.5], 1.0).is_err());
    }

    #[test]
    fn sparse_kernel_metadata() {
        let k = SparseKernel::from_entries([(0, 1, 1.0), (1, 0, 0.5), (1, 2, 0.5), (2, 2, 1.0)]).unwrap();
        assert_eq!(k.state_limit(), Some(3));
        assert_eq!(k.row(1, 2).omitted, Omitted::Mass(0.5));
        assert_eq!(k.inflow_tail(0, 1), Omitted::Mass(0.5));
        assert_eq!(k.inflow_sup_from(2), Some(1.5));
        assert!(SparseKernel::from_entries([(0, 1, 1.0), (0, 1, 1.0)]).is_err());
    }
}
