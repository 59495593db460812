//! Countable-state Markov chains and their evolution algebras.
//!
//! Kernels are row-oriented (`i ↦ {p_ik}_k`, the law of the next state) and
//! structure maps column-oriented; [`MarkovMap`] is the only place where the
//! two meet, through `c_ki = p_ik`.
//!
//! Probability mass pushed past a cutoff is never renormalized away: it is
//! kept in an explicit deficit so that truncated answers stay comparable
//! with Monte Carlo estimates.

mod chains;
mod simulate;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

pub use chains::{
    branching_column_bound, build_branching, build_house_of_cards, build_renewal, BranchingKernel, HouseOfCardsKernel,
    IdentityKernel, ProbSeq, RenewalKernel, SparseKernel,
};
pub use simulate::{simulate, SimulationOutcome, Simulator};

use crate::algebra::{accumulate_columns, MapKind, StructureMap};
use crate::element::{BasisIndex, Element, TruncationPolicy};
use crate::error::{Error, Result};
use crate::series::{Omitted, Truncated};
use crate::sum::CompensatedSum;

/// Row oracle of a countable-state transition kernel.
pub trait TransitionKernel {
    /// Transition probabilities `p_ik` with `k < cutoff`, sorted by `k`.
    fn row(&self, i: BasisIndex, cutoff: usize) -> Truncated;

    /// ℓ¹ mass of the full row; 1 for every state of an honest kernel.
    fn row_mass(&self, _i: BasisIndex) -> f64 {
        1.0
    }

    /// `Σ_{i >= cutoff} p_ik` for a state `k < cutoff`.
    fn inflow_tail(&self, _k: BasisIndex, _cutoff: usize) -> Omitted {
        Omitted::Unknown
    }

    /// Bound on `sup_{k >= cutoff} Σ_i p_ik`.
    fn inflow_sup_from(&self, _cutoff: usize) -> Option<f64> {
        None
    }

    /// `Some(n)` for a chain on the states `0..n`.
    fn state_limit(&self) -> Option<usize> {
        None
    }

    fn description(&self) -> String;
}

impl<K: TransitionKernel + ?Sized> TransitionKernel for &K {
    fn row(&self, i: BasisIndex, cutoff: usize) -> Truncated {
        (**self).row(i, cutoff)
    }
    fn row_mass(&self, i: BasisIndex) -> f64 {
        (**self).row_mass(i)
    }
    fn inflow_tail(&self, k: BasisIndex, cutoff: usize) -> Omitted {
        (**self).inflow_tail(k, cutoff)
    }
    fn inflow_sup_from(&self, cutoff: usize) -> Option<f64> {
        (**self).inflow_sup_from(cutoff)
    }
    fn state_limit(&self) -> Option<usize> {
        (**self).state_limit()
    }
    fn description(&self) -> String {
        (**self).description()
    }
}

impl<K: TransitionKernel + ?Sized> TransitionKernel for alloc::boxed::Box<K> {
    fn row(&self, i: BasisIndex, cutoff: usize) -> Truncated {
        (**self).row(i, cutoff)
    }
    fn row_mass(&self, i: BasisIndex) -> f64 {
        (**self).row_mass(i)
    }
    fn inflow_tail(&self, k: BasisIndex, cutoff: usize) -> Omitted {
        (**self).inflow_tail(k, cutoff)
    }
    fn inflow_sup_from(&self, cutoff: usize) -> Option<f64> {
        (**self).inflow_sup_from(cutoff)
    }
    fn state_limit(&self) -> Option<usize> {
        (**self).state_limit()
    }
    fn description(&self) -> String {
        (**self).description()
    }
}

/// Mass a truncated row dropped: the certified omitted mass when known,
/// otherwise whatever the row mass leaves unexplained.
pub(crate) fn lost_mass<K: TransitionKernel + ?Sized>(k: &K, i: BasisIndex, row: &Truncated) -> f64 {
    match row.omitted {
        Omitted::Nothing => 0.0,
        Omitted::Mass(m) => m,
        Omitted::Unknown => (k.row_mass(i) - row.sum()).max(0.0),
    }
}

/// One problem found by [`validate_kernel`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    EntryOutOfRange { state: BasisIndex, target: BasisIndex, p: f64 },
    UnsortedOrDuplicate { state: BasisIndex, target: BasisIndex },
    RowMass { state: BasisIndex, mass: f64 },
    RowSum { state: BasisIndex, sum: f64 },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub states_checked: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks entries in `[0, 1]`, row ordering, `row_mass = 1` and row sums
/// (window plus omitted mass) for the first `states_to_check` states.
pub fn validate_kernel<K: TransitionKernel + ?Sized>(
    k: &K,
    states_to_check: usize,
    policy: &TruncationPolicy,
) -> ValidationReport {
    let tol = policy.abs_tol();
    let n = k.state_limit().map_or(states_to_check, |l| l.min(states_to_check));
    let mut violations = Vec::new();
    for i in 0..n {
        let row = k.row(i, policy.cutoff());
        for (j, &(target, p)) in row.entries.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                violations.push(Violation::EntryOutOfRange { state: i, target, p });
            }
            if j > 0 && row.entries[j - 1].0 >= target {
                violations.push(Violation::UnsortedOrDuplicate { state: i, target });
            }
        }
        let mass = k.row_mass(i);
        if (mass - 1.0).abs() > tol {
            violations.push(Violation::RowMass { state: i, mass });
        }
        let window = row.sum();
        let sum = match row.omitted.mass() {
            Some(m) => window + m,
            None => window,
        };
        let bad = match row.omitted {
            Omitted::Unknown => window > 1.0 + tol,
            _ => (sum - 1.0).abs() > tol,
        };
        if bad {
            violations.push(Violation::RowSum { state: i, sum });
        }
    }
    ValidationReport { states_checked: n, violations }
}

/// The Markov Hilbert evolution algebra of a kernel: column `i` of the
/// structure constants is row `i` of the kernel.
#[derive(Debug, Clone)]
pub struct MarkovMap<K> {
    kernel: K,
}

impl<K: TransitionKernel> MarkovMap<K> {
    /// Wraps a kernel without validating it.
    pub fn new_unchecked(kernel: K) -> Self {
        MarkovMap { kernel }
    }

    pub fn kernel(&self) -> &K {
        &self.kernel
    }
}

impl<K: TransitionKernel> StructureMap for MarkovMap<K> {
    fn column(&self, i: BasisIndex, cutoff: usize) -> Truncated {
        self.kernel.row(i, cutoff)
    }

    fn kind(&self) -> MapKind {
        if self.kernel.state_limit().is_some() {
            MapKind::ExplicitSparse
        } else {
            MapKind::LazyFormula
        }
    }

    fn column_l1(&self, i: BasisIndex) -> Option<f64> {
        Some(self.kernel.row_mass(i))
    }

    fn row_tail(&self, k: BasisIndex, cutoff: usize) -> Omitted {
        self.kernel.inflow_tail(k, cutoff)
    }

    fn column_l1_sup_from(&self, _cutoff: usize) -> Option<f64> {
        Some(1.0)
    }

    fn row_l1_sup_from(&self, cutoff: usize) -> Option<f64> {
        self.kernel.inflow_sup_from(cutoff)
    }

    fn column_l2_sup(&self) -> Option<f64> {
        Some(1.0)
    }

    fn support_limit(&self) -> Option<usize> {
        self.kernel.state_limit()
    }
}

/// Validates the first `policy.cutoff()` states and builds `c_ki = p_ik`.
pub fn to_structure_map<K: TransitionKernel>(kernel: K, policy: &TruncationPolicy) -> Result<MarkovMap<K>> {
    let report = validate_kernel(&kernel, policy.cutoff(), policy);
    if let Some(v) = report.violations.first() {
        let index = match *v {
            Violation::EntryOutOfRange { state, .. }
            | Violation::UnsortedOrDuplicate { state, .. }
            | Violation::RowMass { state, .. }
            | Violation::RowSum { state, .. } => state,
        };
        return Err(Error::NotMarkov { index, detail: format!("{v:?}") });
    }
    Ok(MarkovMap { kernel })
}

/// A probability vector `Σ α_i e_i` with the mass lost to truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    underlying: Element,
    mass_deficit: f64,
}

impl Distribution {
    /// Checks coefficients in `[0, 1]` and `Σ α_i + deficit = 1 ± abs_tol`.
    /// The element's tail bound is replaced by the deficit (ℓ² ≤ ℓ¹).
    pub fn new(coefficients: Element, mass_deficit: f64, abs_tol: f64) -> Result<Self> {
        if let Some((i, x)) = coefficients.iter().find(|&(_, x)| !(0.0..=1.0).contains(&x)) {
            return Err(Error::InvalidParameter(format!("probability {x} at state {i} is outside [0, 1]")));
        }
        if !(0.0..=1.0).contains(&mass_deficit) {
            return Err(Error::InvalidParameter(format!("mass deficit {mass_deficit} is outside [0, 1]")));
        }
        let total = coefficients.coefficient_sum() + mass_deficit;
        if (total - 1.0).abs() > abs_tol {
            return Err(Error::InvalidParameter(format!("total mass {total} differs from 1")));
        }
        let underlying = coefficients.with_tail(mass_deficit)?;
        Ok(Distribution { underlying, mass_deficit })
    }

    pub fn point_mass(i: BasisIndex) -> Self {
        Distribution { underlying: Element::basis(i), mass_deficit: 0.0 }
    }

    pub fn underlying(&self) -> &Element {
        &self.underlying
    }

    pub fn mass_deficit(&self) -> f64 {
        self.mass_deficit
    }

    pub fn probability(&self, i: BasisIndex) -> f64 {
        self.underlying.get(i)
    }

    pub fn total_mass(&self) -> f64 {
        self.underlying.coefficient_sum()
    }
}

/// `p_ik^(n)` for a fixed starting state.
#[derive(Debug, Clone, PartialEq)]
pub struct NStepTable {
    pub from: BasisIndex,
    pub horizon: usize,
    pub probabilities: BTreeMap<BasisIndex, f64>,
    pub deficit: f64,
}

impl NStepTable {
    pub fn get(&self, k: BasisIndex) -> f64 {
        self.probabilities.get(&k).copied().unwrap_or(0.0)
    }
}

/// n-step transition probabilities by pushing a dense row vector through the
/// truncated kernel. Shares no code with the algebra path, so it serves as an
/// oracle for it.
pub fn nstep_oracle<K: TransitionKernel + ?Sized>(
    k: &K,
    from: BasisIndex,
    n: usize,
    policy: &TruncationPolicy,
) -> Result<NStepTable> {
    let cutoff = policy.cutoff();
    let mut probabilities = BTreeMap::new();
    if n == 0 {
        probabilities.insert(from, 1.0);
        return Ok(NStepTable { from, horizon: 0, probabilities, deficit: 0.0 });
    }

    let mut deficit = 0.0;
    let first = k.row(from, cutoff);
    deficit += lost_mass(k, from, &first);
    let mut current = vec![0.0; cutoff];
    for &(j, p) in &first.entries {
        current[j] += p;
    }
    let mut rows: BTreeMap<BasisIndex, Truncated> = BTreeMap::new();
    for _ in 1..n {
        let mut next = vec![0.0; cutoff];
        for (i, &mass) in current.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let row = rows.entry(i).or_insert_with(|| k.row(i, cutoff));
            for &(j, p) in &row.entries {
                next[j] += mass * p;
            }
            deficit += mass * lost_mass(k, i, row);
        }
        current = next;
    }
    policy.check_tail(deficit)?;
    for (j, &p) in current.iter().enumerate() {
        if p != 0.0 {
            probabilities.insert(j, p);
        }
    }
    Ok(NStepTable { from, horizon: n, probabilities, deficit })
}

/// Law of `X_n` given the law of `X_0`: `C^n` applied to the initial
/// distribution through the kernel's structure map, with the lost mass
/// tracked exactly (for nonnegative vectors the column-truncation tail is
/// the ℓ¹ mass that left the window).
pub fn evolve_distribution<K: TransitionKernel>(
    k: &MarkovMap<K>,
    init: &Distribution,
    n: usize,
    policy: &TruncationPolicy,
) -> Result<Distribution> {
    policy.check_tail(init.mass_deficit)?;
    let mut deficit = CompensatedSum::new();
    deficit.add(init.mass_deficit);
    let mut kept = BTreeMap::new();
    for (i, p) in init.underlying.iter() {
        if i < policy.cutoff() {
            kept.insert(i, p);
        } else {
            deficit.add(p);
        }
    }
    policy.check_tail(deficit.value())?;
    let mut current = Element::from_parts(kept, deficit.value());
    for _ in 0..n {
        let (coefficients, lost) = accumulate_columns(k, current.iter(), policy.cutoff())?;
        deficit.add(lost);
        policy.check_tail(deficit.value())?;
        current = Element::from_parts(coefficients, deficit.value());
    }
    let mass_deficit = deficit.value();
    Ok(Distribution { underlying: Element::from_parts(current.iter().collect(), mass_deficit), mass_deficit })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn policy(cutoff: usize) -> TruncationPolicy {
        TruncationPolicy::new(cutoff, 1e-12, 1e-3).unwrap()
    }

    struct Leaky;

    impl TransitionKernel for Leaky {
        fn row(&self, i: BasisIndex, _cutoff: usize) -> Truncated {
            if i == 1 {
                Truncated::complete(vec![(0, 0.9)])
            } else {
                Truncated::complete(vec![(i, 1.0)])
            }
        }
        fn description(&self) -> String {
            "leaky".into()
        }
    }

    #[test]
    fn short_row_is_reported() {
        let report = validate_kernel(&Leaky, 5, &policy(8));
        assert_eq!(report.states_checked, 5);
        assert_eq!(report.violations.len(), 1);
        assert!(matches!(report.violations[0], Violation::RowSum { state: 1, .. }));
        assert!(matches!(to_structure_map(Leaky, &policy(8)), Err(Error::NotMarkov { index: 1, .. })));
    }

    #[test]
    fn identity_chain_is_valid() {
        assert!(validate_kernel(&IdentityKernel, 50, &policy(64)).is_valid());
    }

    #[test]
    fn zero_steps_is_a_point_mass() {
        let t = nstep_oracle(&IdentityKernel, 5, 0, &policy(4)).unwrap();
        assert_eq!(t.get(5), 1.0);
        assert_eq!(t.deficit, 0.0);
        assert_eq!(t.probabilities.len(), 1);
    }

    #[test]
    fn distribution_checks() {
        let e = Element::from_pairs([(0, 0.5), (1, 0.4)]).unwrap();
        assert!(Distribution::new(e.clone(), 0.0, 1e-12).is_err());
        let d = Distribution::new(e, 0.1, 1e-12).unwrap();
        assert_eq!(d.underlying().tail_bound(), 0.1);
        assert!(Distribution::new(Element::from_pairs([(0, 1.5)]).unwrap(), 0.0, 1.0).is_err());
    }

    #[test]
    fn identity_evolution_is_trivial() {
        let map = to_structure_map(IdentityKernel, &policy(16)).unwrap();
        let init = Distribution::new(Element::from_pairs([(2, 0.25), (9, 0.75)]).unwrap(), 0.0, 1e-12).unwrap();
        let out = evolve_distribution(&map, &init, 7, &policy(16)).unwrap();
        assert_eq!(out, init);
    }
}
