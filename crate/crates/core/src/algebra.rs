//! Structure constants and the evolution-algebra product.
//!
//! A Hilbert evolution algebra is fixed by its structure constants `c_ki`
//! relative to an orthonormal natural basis:
//!
//! ```text
//! e_i · e_i = Σ_k c_ki e_k,      e_i · e_j = 0  (i ≠ j)
//! v · w     = Σ_k (Σ_i v_i w_i c_ki) e_k
//! ```
//!
//! Columns `i ↦ {c_ki}_k` come from a [`StructureMap`]. Maps may be infinite;
//! they are always queried through a cutoff and report what they dropped, and
//! may carry extra metadata (exact column ℓ¹ masses, row tails, suprema beyond
//! the cutoff) that lets downstream code certify tails instead of guessing.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::element::{BasisIndex, Element, TruncationPolicy};
use crate::error::{Error, Result};
use crate::series::{Omitted, Truncated};
use crate::sum::CompensatedSum;

/// How a structure map produces its columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapKind {
    ExplicitSparse,
    LazyFormula,
}

/// Column oracle `i ↦ {c_ki}` plus optional tail metadata.
///
/// Only [`StructureMap::column`] and [`StructureMap::kind`] are required.
/// Every other method defaults to "unknown", which makes certificates and
/// tail bounds inconclusive rather than wrong.
pub trait StructureMap {
    /// Entries `c_ki` with `k < cutoff`, sorted by `k`, each `k` at most once.
    fn column(&self, i: BasisIndex, cutoff: usize) -> Truncated;

    fn kind(&self) -> MapKind;

    /// Exact `Σ_k |c_ki|` over the untruncated column.
    fn column_l1(&self, _i: BasisIndex) -> Option<f64> {
        None
    }

    /// `Σ_{i >= cutoff} |c_ki|` for a row `k < cutoff`.
    fn row_tail(&self, _k: BasisIndex, _cutoff: usize) -> Omitted {
        Omitted::Unknown
    }

    /// Bound on `sup_{i >= cutoff} Σ_k |c_ki|`.
    fn column_l1_sup_from(&self, _cutoff: usize) -> Option<f64> {
        None
    }

    /// Bound on `sup_{k >= cutoff} Σ_i |c_ki|`.
    fn row_l1_sup_from(&self, _cutoff: usize) -> Option<f64> {
        None
    }

    /// Bound on `sup_i (Σ_k |c_ki|²)^{1/2}` over every column.
    fn column_l2_sup(&self) -> Option<f64> {
        None
    }

    /// `Some(n)` when every `c_ki` with `i >= n` or `k >= n` is zero.
    fn support_limit(&self) -> Option<usize> {
        None
    }
}

impl<S: StructureMap + ?Sized> StructureMap for &S {
    fn column(&self, i: BasisIndex, cutoff: usize) -> Truncated {
        (**self).column(i, cutoff)
    }
    fn kind(&self) -> MapKind {
        (**self).kind()
    }
    fn column_l1(&self, i: BasisIndex) -> Option<f64> {
        (**self).column_l1(i)
    }
    fn row_tail(&self, k: BasisIndex, cutoff: usize) -> Omitted {
        (**self).row_tail(k, cutoff)
    }
    fn column_l1_sup_from(&self, cutoff: usize) -> Option<f64> {
        (**self).column_l1_sup_from(cutoff)
    }
    fn row_l1_sup_from(&self, cutoff: usize) -> Option<f64> {
        (**self).row_l1_sup_from(cutoff)
    }
    fn column_l2_sup(&self) -> Option<f64> {
        (**self).column_l2_sup()
    }
    fn support_limit(&self) -> Option<usize> {
        (**self).support_limit()
    }
}

/// Fetches a column and, when the map only knows the column's full ℓ¹ mass,
/// turns that into an omitted-mass bound.
pub(crate) fn fetch_column<S: StructureMap + ?Sized>(s: &S, i: BasisIndex, cutoff: usize) -> Truncated {
    let mut col = s.column(i, cutoff);
    debug_assert!(col.is_well_formed(cutoff), "malformed column {i}");
    if col.omitted == Omitted::Unknown {
        if let Some(total) = s.column_l1(i) {
            col.omitted = Omitted::Mass((total - col.l1()).max(0.0));
        }
    }
    col
}

/// Structure constants given explicitly, finitely many nonzero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseMap {
    columns: BTreeMap<BasisIndex, Vec<(BasisIndex, f64)>>,
    rows: BTreeMap<BasisIndex, Vec<(BasisIndex, f64)>>,
    limit: usize,
}

impl SparseMap {
    /// Builds from `(k, i, c_ki)` triples. Exact zeros are skipped.
    pub fn from_triples<I>(triples: I) -> Result<Self>
    where
        I: IntoIterator<Item = (BasisIndex, BasisIndex, f64)>,
    {
        let mut grid: BTreeMap<(BasisIndex, BasisIndex), f64> = BTreeMap::new();
        for (k, i, c) in triples {
            if !c.is_finite() {
                return Err(Error::NonFiniteCoefficient { index: k });
            }
            if grid.insert((i, k), c).is_some() {
                return Err(Error::InvalidParameter(alloc::format!("duplicate constant c[{k}][{i}]")));
            }
        }
        let mut map = SparseMap::default();
        for ((i, k), c) in grid {
            if c == 0.0 {
                continue;
            }
            map.columns.entry(i).or_default().push((k, c));
            map.rows.entry(k).or_default().push((i, c));
            map.limit = map.limit.max(i + 1).max(k + 1);
        }
        for row in map.rows.values_mut() {
            row.sort_by_key(|&(i, _)| i);
        }
        Ok(map)
    }

    /// Builds from a dense matrix with `dense[k][i] = c_ki`.
    pub fn from_dense<R: AsRef<[f64]>>(dense: &[R]) -> Result<Self> {
        let triples =
            dense.iter().enumerate().flat_map(|(k, row)| row.as_ref().iter().enumerate().map(move |(i, &c)| (k, i, c)));
        Self::from_triples(triples)
    }

    pub fn get(&self, k: BasisIndex, i: BasisIndex) -> f64 {
        self.columns.get(&i).and_then(|col| col.iter().find(|&&(kk, _)| kk == k)).map_or(0.0, |&(_, c)| c)
    }

    fn l1_of(entries: &[(BasisIndex, f64)]) -> f64 {
        entries.iter().map(|&(_, c)| libm::fabs(c)).collect::<CompensatedSum>().value()
    }
}

impl StructureMap for SparseMap {
    fn column(&self, i: BasisIndex, cutoff: usize) -> Truncated {
        match self.columns.get(&i) {
            Some(col) => Truncated::from_full(col.iter().copied(), cutoff),
            None => Truncated::empty(),
        }
    }

    fn kind(&self) -> MapKind {
        MapKind::ExplicitSparse
    }

    fn column_l1(&self, i: BasisIndex) -> Option<f64> {
        Some(self.columns.get(&i).map_or(0.0, |c| Self::l1_of(c)))
    }

    fn row_tail(&self, k: BasisIndex, cutoff: usize) -> Omitted {
        let Some(row) = self.rows.get(&k) else { return Omitted::Nothing };
        let beyond: Vec<_> = row.iter().copied().filter(|&(i, _)| i >= cutoff).collect();
        if beyond.is_empty() {
            Omitted::Nothing
        } else {
            Omitted::Mass(Self::l1_of(&beyond))
        }
    }

    fn column_l1_sup_from(&self, cutoff: usize) -> Option<f64> {
        Some(self.columns.range(cutoff..).map(|(_, c)| Self::l1_of(c)).fold(0.0, f64::max))
    }

    fn row_l1_sup_from(&self, cutoff: usize) -> Option<f64> {
        Some(self.rows.range(cutoff..).map(|(_, r)| Self::l1_of(r)).fold(0.0, f64::max))
    }

    fn column_l2_sup(&self) -> Option<f64> {
        let sq = self
            .columns
            .values()
            .map(|c| c.iter().map(|&(_, x)| x * x).collect::<CompensatedSum>().value())
            .fold(0.0, f64::max);
        Some(libm::sqrt(sq))
    }

    fn support_limit(&self) -> Option<usize> {
        Some(self.limit)
    }
}

/// A structure map given only by a column formula, with no tail metadata.
pub struct LazyMap<F> {
    formula: F,
}

impl<F> LazyMap<F>
where
    F: Fn(BasisIndex, usize) -> Vec<(BasisIndex, f64)>,
{
    /// `formula(i, cutoff)` must return the entries of column `i` below
    /// `cutoff`, sorted by row index.
    pub fn new(formula: F) -> Self {
        LazyMap { formula }
    }
}

impl<F> StructureMap for LazyMap<F>
where
    F: Fn(BasisIndex, usize) -> Vec<(BasisIndex, f64)>,
{
    fn column(&self, i: BasisIndex, cutoff: usize) -> Truncated {
        Truncated { entries: (self.formula)(i, cutoff), omitted: Omitted::Unknown }
    }

    fn kind(&self) -> MapKind {
        MapKind::LazyFormula
    }
}

/// `M_v` with `‖v · w‖ ≤ M_v ‖w‖` for every `w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuityBound {
    /// `+∞` when some touched column had an unknown tail.
    pub m_v: f64,
    /// Every touched column was complete within the cutoff.
    pub exact: bool,
}

/// `e_i · e_i = Σ_{k < cutoff} c_ki e_k`, with the column's omitted ℓ¹ mass
/// as tail bound (ℓ² ≤ ℓ¹).
pub fn square_basis<S: StructureMap + ?Sized>(s: &S, i: BasisIndex, policy: &TruncationPolicy) -> Result<Element> {
    let col = fetch_column(s, i, policy.cutoff());
    let tail = col.omitted.mass_or_inf();
    policy.check_tail(tail)?;
    let mut coefficients = BTreeMap::new();
    for (k, c) in col.entries {
        coefficients.insert(k, c);
    }
    Ok(Element::from_parts(coefficients, tail))
}

/// Per-column accumulation shared by the product and the evolution operator:
/// `out_k = Σ_i weight_i c_ki` over the given weights (in increasing `i`).
/// Returns the coefficients and `Σ_i |weight_i| · omitted_i`.
pub(crate) fn accumulate_columns<S, I>(s: &S, weights: I, cutoff: usize) -> Result<(BTreeMap<BasisIndex, f64>, f64)>
where
    S: StructureMap + ?Sized,
    I: IntoIterator<Item = (BasisIndex, f64)>,
{
    let mut acc: BTreeMap<BasisIndex, CompensatedSum> = BTreeMap::new();
    let mut tail = CompensatedSum::new();
    for (i, weight) in weights {
        let col = fetch_column(s, i, cutoff);
        for &(k, c) in &col.entries {
            acc.entry(k).or_default().add(weight * c);
        }
        match col.omitted {
            Omitted::Nothing => {}
            Omitted::Mass(m) => tail.add(libm::fabs(weight) * m),
            Omitted::Unknown => tail.add(f64::INFINITY),
        }
    }
    let mut out = BTreeMap::new();
    for (k, a) in acc {
        let x = a.value();
        if !x.is_finite() {
            return Err(Error::NonFiniteCoefficient { index: k });
        }
        out.insert(k, x);
    }
    Ok((out, tail.value()))
}

/// `M_v` of the stored part of `v`, ignoring its tail.
fn stored_continuity<S: StructureMap + ?Sized>(s: &S, v: &Element, cutoff: usize) -> ContinuityBound {
    let mut acc = CompensatedSum::new();
    let mut exact = true;
    let mut bounded = true;
    for (i, x) in v.iter() {
        let col = fetch_column(s, i, cutoff);
        exact &= col.omitted.is_nothing();
        match col.l2_squared_bound() {
            Some(sq) => acc.add(x * x * sq),
            None => bounded = false,
        }
    }
    let m_v = if bounded { libm::sqrt(acc.value()) } else { f64::INFINITY };
    ContinuityBound { m_v, exact }
}

/// `M_v = (Σ_k Σ_i |v_i c_ki|²)^{1/2}` for a finitely supported `v`.
///
/// Column parts beyond the cutoff enter through their ℓ¹ mass. A column with
/// no tail information makes the bound infinite.
pub fn continuity_bound<S: StructureMap + ?Sized>(
    s: &S,
    v: &Element,
    policy: &TruncationPolicy,
) -> Result<ContinuityBound> {
    if !v.is_exact() {
        return Err(Error::UnsupportedInput("continuity bound needs a finitely supported element"));
    }
    Ok(stored_continuity(s, v, policy.cutoff()))
}

/// `v · w = Σ_k (Σ_i v_i w_i c_ki) e_k`, evaluated column by column over the
/// common support in increasing index order.
///
/// The tail bound covers truncated columns and, for inputs with tails,
/// `M_{v'}‖r_w‖ + M_{w'}‖r_v‖ + K‖r_v‖‖r_w‖` where `v'`, `w'` are the stored
/// parts, `r_v`, `r_w` the omitted parts and `K` the map's column ℓ² supremum.
pub fn product<S: StructureMap + ?Sized>(
    s: &S,
    v: &Element,
    w: &Element,
    policy: &TruncationPolicy,
) -> Result<Element> {
    policy.check_tail(v.tail_bound())?;
    policy.check_tail(w.tail_bound())?;
    let cutoff = policy.cutoff();

    let common = v.iter().filter_map(|(i, x)| w.stored(i).map(|y| (i, x * y)));
    let (coefficients, mut tail) = accumulate_columns(s, common, cutoff)?;

    let (tv, tw) = (v.tail_bound(), w.tail_bound());
    if tw > 0.0 {
        tail += stored_continuity(s, v, cutoff).m_v * tw;
    }
    if tv > 0.0 {
        tail += stored_continuity(s, w, cutoff).m_v * tv;
    }
    if tv > 0.0 && tw > 0.0 {
        tail += s.column_l2_sup().unwrap_or(f64::INFINITY) * tv * tw;
    }
    policy.check_tail(tail)?;
    Ok(Element::from_parts(coefficients, tail))
}

/// Left multiplication `L_v(w) = v · w`.
#[derive(Debug, Clone)]
pub struct LeftMultiplication<'a, S: ?Sized> {
    map: &'a S,
    v: Element,
}

/// Handle for `L_v` over the structure map `s`.
pub fn left_mult<S: StructureMap + ?Sized>(s: &S, v: Element) -> LeftMultiplication<'_, S> {
    LeftMultiplication { map: s, v }
}

impl<S: StructureMap + ?Sized> LeftMultiplication<'_, S> {
    pub fn element(&self) -> &Element {
        &self.v
    }

    /// `L_v(w)`; identical to `product(s, v, w, policy)`.
    pub fn apply(&self, w: &Element, policy: &TruncationPolicy) -> Result<Element> {
        product(self.map, &self.v, w, policy)
    }

    pub fn continuity_bound(&self, policy: &TruncationPolicy) -> Result<ContinuityBound> {
        continuity_bound(self.map, &self.v, policy)
    }
}
