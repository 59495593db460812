//! Square-summable coefficient sequences with certified truncation tails.

use alloc::collections::btree_map::{self, BTreeMap};

use crate::error::{Error, Result};
use crate::sum::CompensatedSum;

/// Index into the countable orthonormal basis `{e_i}`. Indexing is 0-based.
pub type BasisIndex = usize;

/// A real value together with a nonnegative uncertainty radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub uncertainty: f64,
}

impl Estimate {
    pub const fn exact(value: f64) -> Self {
        Estimate { value, uncertainty: 0.0 }
    }

    pub fn lower(&self) -> f64 {
        self.value - self.uncertainty
    }

    pub fn upper(&self) -> f64 {
        self.value + self.uncertainty
    }
}

/// Governs every infinite-series evaluation in the crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationPolicy {
    cutoff: usize,
    abs_tol: f64,
    max_tail: f64,
}

impl TruncationPolicy {
    pub const DEFAULT_CUTOFF: usize = 64;
    pub const DEFAULT_ABS_TOL: f64 = 1e-12;
    pub const DEFAULT_MAX_TAIL: f64 = 1e-6;

    /// Indices `>= cutoff` are dropped; `abs_tol` is the comparison
    /// tolerance; operations refuse when a tail bound exceeds `max_tail`.
    pub fn new(cutoff: usize, abs_tol: f64, max_tail: f64) -> Result<Self> {
        if cutoff == 0 {
            return Err(Error::InvalidParameter("cutoff must be at least 1".into()));
        }
        if !(abs_tol > 0.0 && abs_tol.is_finite()) {
            return Err(Error::InvalidParameter("abs_tol must be positive".into()));
        }
        if max_tail.is_nan() || max_tail <= 0.0 {
            return Err(Error::InvalidParameter("max_tail must be positive".into()));
        }
        Ok(TruncationPolicy { cutoff, abs_tol, max_tail })
    }

    pub fn with_cutoff(cutoff: usize) -> Result<Self> {
        Self::new(cutoff, Self::DEFAULT_ABS_TOL, Self::DEFAULT_MAX_TAIL)
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn abs_tol(&self) -> f64 {
        self.abs_tol
    }

    pub fn max_tail(&self) -> f64 {
        self.max_tail
    }

    pub(crate) fn check_tail(&self, tail: f64) -> Result<()> {
        if tail > self.max_tail || tail.is_nan() {
            Err(Error::TailTooLarge { tail, max_tail: self.max_tail })
        } else {
            Ok(())
        }
    }
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy {
            cutoff: Self::DEFAULT_CUTOFF,
            abs_tol: Self::DEFAULT_ABS_TOL,
            max_tail: Self::DEFAULT_MAX_TAIL,
        }
    }
}

/// `v = Σ v_i e_i`, stored as finitely many coefficients plus `tail_bound`,
/// an upper bound on `‖v - Σ_stored v_i e_i‖`.
///
/// Coefficients are kept exactly as written: tiny or zero values are never
/// pruned, only [`truncate`] drops entries.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Element {
    coefficients: BTreeMap<BasisIndex, f64>,
    tail_bound: f64,
}

impl Element {
    pub fn zero() -> Self {
        Element::default()
    }

    /// The basis vector `e_i`.
    pub fn basis(i: BasisIndex) -> Self {
        let mut coefficients = BTreeMap::new();
        coefficients.insert(i, 1.0);
        Element { coefficients, tail_bound: 0.0 }
    }

    /// Builds an exact element from `(index, value)` pairs.
    pub fn from_pairs<I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (BasisIndex, f64)>,
    {
        let mut coefficients = BTreeMap::new();
        for (i, x) in pairs {
            if !x.is_finite() {
                return Err(Error::NonFiniteCoefficient { index: i });
            }
            if coefficients.insert(i, x).is_some() {
                return Err(Error::DuplicateIndex(i));
            }
        }
        Ok(Element { coefficients, tail_bound: 0.0 })
    }

    /// Replaces the tail bound.
    pub fn with_tail(mut self, tail_bound: f64) -> Result<Self> {
        if !tail_bound.is_finite() || tail_bound < 0.0 {
            return Err(Error::InvalidParameter("tail bound must be finite and nonnegative".into()));
        }
        self.tail_bound = tail_bound;
        Ok(self)
    }

    pub(crate) fn from_parts(coefficients: BTreeMap<BasisIndex, f64>, tail_bound: f64) -> Self {
        debug_assert!(tail_bound >= 0.0);
        Element { coefficients, tail_bound }
    }

    /// Coefficient at `i`, zero when not stored.
    pub fn get(&self, i: BasisIndex) -> f64 {
        self.coefficients.get(&i).copied().unwrap_or(0.0)
    }

    pub fn stored(&self, i: BasisIndex) -> Option<f64> {
        self.coefficients.get(&i).copied()
    }

    /// Stored coefficients in increasing index order.
    pub fn iter(&self) -> impl DoubleEndedIterator<Item = (BasisIndex, f64)> + '_ {
        self.coefficients.iter().map(|(&i, &x)| (i, x))
    }

    pub fn support_len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn max_index(&self) -> Option<BasisIndex> {
        self.coefficients.keys().next_back().copied()
    }

    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    pub fn is_exact(&self) -> bool {
        self.tail_bound == 0.0
    }

    /// True when every stored coefficient is exactly zero and nothing was
    /// omitted.
    pub fn is_zero(&self) -> bool {
        self.is_exact() && self.coefficients.values().all(|&x| x == 0.0)
    }

    /// Coefficientwise equality treating missing entries as zero (tails ignored).
    pub fn same_coefficients(&self, other: &Element) -> bool {
        self.coefficients.iter().all(|(&i, &x)| other.get(i) == x)
            && other.coefficients.iter().all(|(&i, &x)| self.get(i) == x)
    }

    /// Largest coefficientwise deviation, missing entries read as zero.
    pub fn max_abs_diff(&self, other: &Element) -> f64 {
        let mut worst = 0.0f64;
        for (&i, &x) in &self.coefficients {
            worst = worst.max((x - other.get(i)).abs());
        }
        for (&i, &x) in &other.coefficients {
            worst = worst.max((x - self.get(i)).abs());
        }
        worst
    }

    /// Sum of the stored coefficients.
    pub fn coefficient_sum(&self) -> f64 {
        self.coefficients.values().copied().collect::<CompensatedSum>().value()
    }

    fn squared_norm(&self) -> f64 {
        self.coefficients.values().map(|x| x * x).collect::<CompensatedSum>().value()
    }
}

impl<'a> IntoIterator for &'a Element {
    type Item = (&'a BasisIndex, &'a f64);
    type IntoIter = btree_map::Iter<'a, BasisIndex, f64>;

    fn into_iter(self) -> Self::IntoIter {
        self.coefficients.iter()
    }
}

/// `⟨v, w⟩` over the stored coefficients, with a Cauchy–Schwarz radius for
/// the omitted mass of both arguments.
pub fn inner_product(v: &Element, w: &Element) -> Estimate {
    let (small, large) = if v.support_len() <= w.support_len() { (v, w) } else { (w, v) };
    let mut acc = CompensatedSum::new();
    for (i, x) in small.iter() {
        if let Some(y) = large.stored(i) {
            acc.add(x * y);
        }
    }
    let (tv, tw) = (v.tail_bound, w.tail_bound);
    let uncertainty = if tv == 0.0 && tw == 0.0 {
        0.0
    } else {
        let nv = libm::sqrt(v.squared_norm());
        let nw = libm::sqrt(w.squared_norm());
        tv * tw + tv * nw + tw * nv
    };
    Estimate { value: acc.value(), uncertainty }
}

/// `‖v‖` of the stored part; the true norm lies within `tail_bound` of it.
pub fn norm(v: &Element) -> Estimate {
    Estimate { value: libm::sqrt(v.squared_norm()), uncertainty: v.tail_bound }
}

/// `a·v + w`, with tails combined by Minkowski's inequality.
pub fn axpy(a: f64, v: &Element, w: &Element) -> Element {
    let mut coefficients = w.coefficients.clone();
    if a != 0.0 {
        for (i, x) in v.iter() {
            let slot = coefficients.entry(i).or_insert(0.0);
            *slot += a * x;
        }
    }
    let tail_bound = libm::fabs(a) * v.tail_bound + w.tail_bound;
    Element { coefficients, tail_bound }
}

/// ℓ² norm of `dropped`, rounded up so that it never undershoots.
fn dropped_norm_upper(dropped: &BTreeMap<BasisIndex, f64>) -> f64 {
    let mut values = dropped.values();
    match (values.next(), values.next()) {
        (Some(x), None) => libm::fabs(*x),
        _ => {
            let sq = dropped.values().map(|x| x * x).collect::<CompensatedSum>().value();
            libm::sqrt(sq) * (1.0 + 4.0 * f64::EPSILON)
        }
    }
}

/// Drops every coefficient at index `>= cutoff`, adding the ℓ² norm of the
/// dropped part to the tail bound.
pub fn truncate(v: &Element, policy: &TruncationPolicy) -> Result<Element> {
    let mut kept = v.coefficients.clone();
    let dropped = kept.split_off(&policy.cutoff);
    let tail_bound = if dropped.is_empty() { v.tail_bound } else { v.tail_bound + dropped_norm_upper(&dropped) };
    policy.check_tail(tail_bound)?;
    Ok(Element { coefficients: kept, tail_bound })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn policy(cutoff: usize, max_tail: f64) -> TruncationPolicy {
        TruncationPolicy::new(cutoff, 1e-12, max_tail).unwrap()
    }

    #[test]
    fn basis_vectors_are_orthonormal() {
        assert_eq!(inner_product(&Element::basis(3), &Element::basis(3)), Estimate::exact(1.0));
        assert_eq!(inner_product(&Element::basis(3), &Element::basis(5)), Estimate::exact(0.0));
    }

    #[test]
    fn inner_product_with_geometric_vector() {
        let v = Element::from_pairs((0..10).map(|i| (i, libm::pow(2.0, -((i + 1) as f64))))).unwrap();
        assert_eq!(inner_product(&v, &Element::basis(0)), Estimate::exact(0.5));
    }

    #[test]
    fn inner_product_uncertainty_uses_tails() {
        let v = Element::basis(0).with_tail(0.1).unwrap();
        let w = Element::from_pairs([(0, 3.0), (1, 4.0)]).unwrap().with_tail(0.2).unwrap();
        let ip = inner_product(&v, &w);
        assert_eq!(ip.value, 3.0);
        // 0.1*0.2 + 0.1*5 + 0.2*1
        assert!((ip.uncertainty - 0.72).abs() < 1e-15);
    }

    #[test]
    fn norms() {
        assert_eq!(norm(&Element::basis(7)), Estimate::exact(1.0));
        assert_eq!(norm(&Element::zero()), Estimate::exact(0.0));
        let v = Element::from_pairs([(0, 0.6), (1, 0.8)]).unwrap();
        assert!((norm(&v).value - 1.0).abs() < 1e-15);
        assert_eq!(norm(&v).uncertainty, 0.0);
    }

    #[test]
    fn axpy_examples() {
        let v = Element::from_pairs([(4, 9.0)]).unwrap();
        assert_eq!(axpy(0.0, &v, &Element::basis(2)), Element::basis(2));

        let r = axpy(1.0, &Element::basis(1), &Element::basis(1));
        assert_eq!(r, Element::from_pairs([(1, 2.0)]).unwrap());

        let v = Element::basis(0).with_tail(0.1).unwrap();
        let w = Element::basis(1).with_tail(0.2).unwrap();
        let r = axpy(2.0, &v, &w);
        assert_eq!(r.get(0), 2.0);
        assert_eq!(r.get(1), 1.0);
        assert!((r.tail_bound() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn truncate_examples() {
        let v = Element::from_pairs([(0, 1.0), (1, 2.0), (2, 3.0)]).unwrap();
        assert_eq!(truncate(&v, &policy(10, 1.0)).unwrap(), v);

        let v = Element::from_pairs([(0, 1.0), (100, 0.3)]).unwrap();
        let t = truncate(&v, &policy(50, 1.0)).unwrap();
        assert_eq!(t.get(0), 1.0);
        assert_eq!(t.support_len(), 1);
        assert_eq!(t.tail_bound(), 0.3);

        let v = Element::from_pairs([(100, 0.9)]).unwrap();
        assert!(matches!(truncate(&v, &policy(50, 0.5)), Err(Error::TailTooLarge { .. })));
    }

    #[test]
    fn from_pairs_rejects_duplicates_and_nan() {
        assert_eq!(Element::from_pairs([(1, 1.0), (1, 2.0)]), Err(Error::DuplicateIndex(1)));
        assert!(Element::from_pairs([(1, f64::NAN)]).is_err());
    }

    #[test]
    fn tiny_coefficients_are_kept() {
        let v = Element::from_pairs([(3, 1e-310), (4, 0.0)]).unwrap();
        assert_eq!(v.support_len(), 2);
    }

    #[test]
    fn policy_validation() {
        assert!(TruncationPolicy::new(0, 1e-12, 1.0).is_err());
        assert!(TruncationPolicy::new(1, 0.0, 1.0).is_err());
        assert!(TruncationPolicy::new(1, 1e-12, 0.0).is_err());
    }
}
