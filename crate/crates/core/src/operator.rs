//! The evolution operator `C(e_i) = e_i²` and its boundedness certificates.
//!
//! ```text
//! C(v) = Σ_k (Σ_i v_i c_ki) e_k
//! ```
//!
//! Three sufficient conditions for `C` to be bounded on all of the space are
//! checked over a truncation window plus whatever tail metadata the structure
//! map provides:
//!
//! - Hilbert–Schmidt: `Σ_k Σ_i |c_ki|² < ∞`, with `‖C‖ ≤ (Σ Σ |c_ki|²)^{1/2}`.
//! - Schur: positive weights `α_k`, `β_i` with `Σ_k |c_ki| α_k ≤ M1 β_i` and
//!   `Σ_i |c_ki| β_i ≤ M2 α_k`, giving `‖C‖ ≤ (M1 M2)^{1/2}`.
//! - Row sum, for Markov structure constants: `Σ_i p_ik ≤ M` for all `k`,
//!   which is the Schur test with unit weights and `M1 = 1`.
//!
//! A certificate is only issued when every sum that leaves the window is
//! controlled by metadata; otherwise the verdict is inconclusive and carries
//! the offending partial sum. An inconclusive verdict never claims `C` is
//! unbounded.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use core::fmt;

use crate::algebra::{accumulate_columns, fetch_column, StructureMap};
use crate::element::{norm, truncate, BasisIndex, Element, TruncationPolicy};
use crate::error::{Error, Result};
use crate::rng::CounterRng;
use crate::series::Omitted;
use crate::sum::CompensatedSum;

/// Positive weights for the Schur test.
pub trait WeightOracle {
    fn weight(&self, i: BasisIndex) -> f64;

    /// `(inf, sup)` of the weights at indices `>= start`, if known.
    fn range_from(&self, start: BasisIndex) -> Option<(f64, f64)>;

    fn describe(&self) -> String {
        "custom".to_string()
    }
}

/// `α_k = β_i = 1`.
#[derive(Debug, Clone, Copy, Default)]
pub struct UnitWeights;

impl WeightOracle for UnitWeights {
    fn weight(&self, _i: BasisIndex) -> f64 {
        1.0
    }

    fn range_from(&self, _start: BasisIndex) -> Option<(f64, f64)> {
        Some((1.0, 1.0))
    }

    fn describe(&self) -> String {
        "unit".to_string()
    }
}

/// Listed weights plus an optional default for every unlisted index.
/// Without a default, unlisted indices have weight 0 and are rejected when
/// queried.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitWeights {
    weights: BTreeMap<BasisIndex, f64>,
    default: Option<f64>,
}

impl ExplicitWeights {
    pub fn new(weights: BTreeMap<BasisIndex, f64>, default: Option<f64>) -> Self {
        ExplicitWeights { weights, default }
    }

    /// Coefficients become weights; a positive tail bound becomes the default.
    pub fn from_element(e: &Element) -> Self {
        let default = (e.tail_bound() > 0.0).then(|| e.tail_bound());
        ExplicitWeights { weights: e.iter().collect(), default }
    }
}

impl WeightOracle for ExplicitWeights {
    fn weight(&self, i: BasisIndex) -> f64 {
        self.weights.get(&i).copied().or(self.default).unwrap_or(0.0)
    }

    fn range_from(&self, start: BasisIndex) -> Option<(f64, f64)> {
        let default = self.default?;
        let (lo, hi) = self.weights.range(start..).fold((default, default), |(lo, hi), (_, &w)| (lo.min(w), hi.max(w)));
        Some((lo, hi))
    }

    fn describe(&self) -> String {
        format!("explicit({} listed)", self.weights.len())
    }
}

fn checked_weight<W: WeightOracle + ?Sized>(w: &W, i: BasisIndex) -> Result<f64> {
    let x = w.weight(i);
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(Error::InvalidWeights { index: i, weight: x })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CertificateKind {
    HilbertSchmidt {
        hs_sum: f64,
    },
    Schur {
        m1: f64,
        m2: f64,
        alpha: String,
        beta: String,
    },
    RowSum {
        m: f64,
    },
    Inconclusive {
        diagnostic: String,
        /// Row or column whose sum could not be controlled.
        index: Option<BasisIndex>,
        /// Its partial sum over the window.
        partial_sum: Option<f64>,
    },
}

/// Evidence that the evolution operator is bounded.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub kind: CertificateKind,
    /// Present exactly when the certificate is conclusive.
    pub norm_bound: Option<f64>,
    pub cutoff_used: usize,
}

impl Certificate {
    fn inconclusive(cutoff: usize, diagnostic: String, index: Option<BasisIndex>, partial_sum: Option<f64>) -> Self {
        Certificate {
            kind: CertificateKind::Inconclusive { diagnostic, index, partial_sum },
            norm_bound: None,
            cutoff_used: cutoff,
        }
    }

    pub fn is_certified(&self) -> bool {
        self.norm_bound.is_some()
    }

    pub fn variant_name(&self) -> &'static str {
        match self.kind {
            CertificateKind::HilbertSchmidt { .. } => "HilbertSchmidt",
            CertificateKind::Schur { .. } => "Schur",
            CertificateKind::RowSum { .. } => "RowSum",
            CertificateKind::Inconclusive { .. } => "Inconclusive",
        }
    }
}

/// `CERTIFIED <variant> norm_bound=<x> cutoff=<N>` or `INCONCLUSIVE <diagnostic>`.
impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.kind, self.norm_bound) {
            (CertificateKind::Inconclusive { diagnostic, .. }, _) => write!(f, "INCONCLUSIVE {diagnostic}"),
            (_, Some(b)) => {
                write!(f, "CERTIFIED {} norm_bound={:?} cutoff={}", self.variant_name(), b, self.cutoff_used)
            }
            (_, None) => write!(f, "INCONCLUSIVE {} without norm bound", self.variant_name()),
        }
    }
}

/// Window of indices that can hold nonzero constants, and whether anything
/// lies beyond the cutoff.
fn window<S: StructureMap + ?Sized>(s: &S, cutoff: usize) -> (usize, bool) {
    match s.support_limit() {
        Some(limit) if limit <= cutoff => (limit, false),
        _ => (cutoff, true),
    }
}

fn tail_word(mass: Option<f64>) -> &'static str {
    match mass {
        Some(m) if m.is_infinite() => "divergent",
        _ => "uncontrolled",
    }
}

/// Whether `v` lies in the domain `D(C)`.
#[derive(Debug, Clone, PartialEq)]
pub enum DomainVerdict {
    /// `‖C v‖² ≤ bound`; `exact` when no column was truncated.
    WithinCutoff {
        bound: f64,
        exact: bool,
    },
    Inconclusive {
        diagnostic: String,
    },
}

/// Checks `Σ_k |Σ_i v_i c_ki|² < ∞` for a finitely supported `v`. Never
/// claims non-membership.
pub fn in_domain<S: StructureMap + ?Sized>(s: &S, v: &Element, policy: &TruncationPolicy) -> DomainVerdict {
    if !v.is_exact() {
        return DomainVerdict::Inconclusive {
            diagnostic: "element has an omitted tail; membership depends on coefficients not stored".into(),
        };
    }
    let cutoff = policy.cutoff();
    let mut exact = true;
    let mut unknown = None;
    for (i, _) in v.iter() {
        let col = fetch_column(s, i, cutoff);
        exact &= col.omitted.is_nothing();
        if col.omitted.mass().is_none_or(f64::is_infinite) && unknown.is_none() {
            unknown = Some(i);
        }
    }
    let (coefficients, trunc) = match accumulate_columns(s, v.iter(), cutoff) {
        Ok(r) => r,
        Err(e) => return DomainVerdict::Inconclusive { diagnostic: format!("{e}") },
    };
    let partial = coefficients.values().map(|x| x * x).collect::<CompensatedSum>().value();
    if let Some(i) = unknown {
        return DomainVerdict::Inconclusive {
            diagnostic: format!(
                "column {i} has no tail information; partial sum of squares {partial} over indices < {cutoff}"
            ),
        };
    }
    // The omitted part sits at indices >= cutoff, orthogonal to the window.
    DomainVerdict::WithinCutoff { bound: partial + trunc * trunc, exact }
}

/// Hilbert–Schmidt certificate `‖C‖ ≤ (Σ_k Σ_i |c_ki|²)^{1/2}`.
pub fn certify_hilbert_schmidt<S: StructureMap + ?Sized>(s: &S, policy: &TruncationPolicy) -> Certificate {
    let cutoff = policy.cutoff();
    let (w, beyond) = window(s, cutoff);
    let mut hs = CompensatedSum::new();
    for i in 0..w {
        let col = fetch_column(s, i, cutoff);
        match col.l2_squared_bound() {
            Some(sq) if sq.is_finite() => hs.add(sq),
            _ => {
                return Certificate::inconclusive(
                    cutoff,
                    format!("column {i} has an uncontrolled tail"),
                    Some(i),
                    Some(col.l2_squared()),
                )
            }
        }
    }
    let hs_sum = hs.value();
    if beyond {
        return Certificate::inconclusive(
            cutoff,
            format!(
                "partial Hilbert-Schmidt sum {hs_sum} over columns < {cutoff}; columns beyond the cutoff are not controlled"
            ),
            None,
            Some(hs_sum),
        );
    }
    Certificate {
        kind: CertificateKind::HilbertSchmidt { hs_sum },
        norm_bound: Some(libm::sqrt(hs_sum)),
        cutoff_used: cutoff,
    }
}

/// Result of the weighted row/column scan behind the Schur and row-sum tests.
enum Scan {
    Bounded { m1: f64, m2: f64 },
    Uncontrolled { diagnostic: String, index: Option<BasisIndex>, partial_sum: Option<f64> },
}

fn capped(bound: Option<f64>, cap: Option<f64>) -> Option<f64> {
    match (bound, cap) {
        (Some(b), Some(c)) => Some(b.min(c)),
        (b, c) => b.or(c),
    }
}

fn schur_scan<S, A, B>(s: &S, alpha: &A, beta: &B, cutoff: usize) -> Result<Scan>
where
    S: StructureMap + ?Sized,
    A: WeightOracle + ?Sized,
    B: WeightOracle + ?Sized,
{
    let (w, beyond) = window(s, cutoff);
    let alpha_w = (0..w).map(|k| checked_weight(alpha, k)).collect::<Result<alloc::vec::Vec<_>>>()?;
    let beta_w = (0..w).map(|i| checked_weight(beta, i)).collect::<Result<alloc::vec::Vec<_>>>()?;
    let alpha_far = alpha.range_from(cutoff);
    let beta_far = beta.range_from(cutoff);
    // Global sups cap every weighted line sum, including ones whose own
    // tail is loose or unknown.
    let cap = |l1: Option<f64>, weights: Option<(f64, f64)>| match (l1, weights) {
        (Some(l), Some((_, sup))) if (l * sup).is_finite() => Some(l * sup),
        _ => None,
    };
    let col_cap = cap(s.column_l1_sup_from(0), alpha.range_from(0));
    let row_cap = cap(s.row_l1_sup_from(0), beta.range_from(0));

    let mut m1 = 0.0f64;
    let mut rows = vec![CompensatedSum::new(); w];
    for (i, &beta_i) in beta_w.iter().enumerate().take(w) {
        let col = fetch_column(s, i, cutoff);
        let mut acc = CompensatedSum::new();
        for &(k, c) in &col.entries {
            acc.add(libm::fabs(c) * alpha_w[k]);
            rows[k].add(libm::fabs(c) * beta_i);
        }
        let bound = match (col.omitted, alpha_far) {
            (Omitted::Nothing, _) => Some(acc.value()),
            (Omitted::Mass(0.0), _) => Some(acc.value()),
            (Omitted::Mass(m), Some((_, sup))) if m.is_finite() => {
                let mut with_tail = acc;
                with_tail.add(m * sup);
                Some(with_tail.value())
            }
            _ => None,
        };
        let Some(bound) = capped(bound, col_cap) else {
            return Ok(Scan::Uncontrolled {
                diagnostic: format!(
                    "column {i}: weighted sum {} over k < {cutoff} with a {} tail",
                    acc.value(),
                    tail_word(col.omitted.mass())
                ),
                index: Some(i),
                partial_sum: Some(acc.value()),
            });
        };
        m1 = m1.max(bound / beta_w[i]);
    }

    let mut m2 = 0.0f64;
    for (k, row) in rows.iter().enumerate() {
        let omitted = if beyond { s.row_tail(k, cutoff) } else { Omitted::Nothing };
        let bound = match (omitted, beta_far) {
            (Omitted::Nothing, _) => Some(row.value()),
            (Omitted::Mass(0.0), _) => Some(row.value()),
            (Omitted::Mass(m), Some((_, sup))) if m.is_finite() => {
                let mut with_tail = *row;
                with_tail.add(m * sup);
                Some(with_tail.value())
            }
            _ => None,
        };
        let Some(bound) = capped(bound, row_cap) else {
            return Ok(Scan::Uncontrolled {
                diagnostic: format!(
                    "row {k} of the structure constants (kernel column {k}): partial sum {} over i < {cutoff} with a {} tail",
                    row.value(),
                    tail_word(omitted.mass())
                ),
                index: Some(k),
                partial_sum: Some(row.value()),
            });
        };
        m2 = m2.max(bound / alpha_w[k]);
    }

    if beyond {
        let far = (s.column_l1_sup_from(cutoff), s.row_l1_sup_from(cutoff), alpha_far, beta_far);
        let (Some(col_sup), Some(row_sup), Some((alpha_inf, alpha_sup)), Some((beta_inf, beta_sup))) = far else {
            return Ok(Scan::Uncontrolled {
                diagnostic: format!(
                    "rows and columns at or beyond index {cutoff} are not controlled by metadata (window M1={m1}, M2={m2})"
                ),
                index: None,
                partial_sum: None,
            });
        };
        if !(alpha_inf > 0.0 && beta_inf > 0.0) {
            return Err(Error::InvalidWeights { index: cutoff, weight: alpha_inf.min(beta_inf) });
        }
        let alpha_all = alpha_w.iter().copied().fold(alpha_sup, f64::max);
        let beta_all = beta_w.iter().copied().fold(beta_sup, f64::max);
        m1 = m1.max(col_sup * alpha_all / beta_inf);
        m2 = m2.max(row_sup * beta_all / alpha_inf);
    }
    Ok(Scan::Bounded { m1, m2 })
}

/// Schur test with weight oracles `alpha` (rows `k`) and `beta` (columns `i`).
pub fn certify_schur<S, A, B>(s: &S, alpha: &A, beta: &B, policy: &TruncationPolicy) -> Result<Certificate>
where
    S: StructureMap + ?Sized,
    A: WeightOracle + ?Sized,
    B: WeightOracle + ?Sized,
{
    let cutoff = policy.cutoff();
    Ok(match schur_scan(s, alpha, beta, cutoff)? {
        Scan::Bounded { m1, m2 } => Certificate {
            kind: CertificateKind::Schur { m1, m2, alpha: alpha.describe(), beta: beta.describe() },
            norm_bound: Some(libm::sqrt(m1 * m2)),
            cutoff_used: cutoff,
        },
        Scan::Uncontrolled { diagnostic, index, partial_sum } => {
            Certificate::inconclusive(cutoff, diagnostic, index, partial_sum)
        }
    })
}

/// Row-sum certificate for Markov structure constants: `m = sup_k Σ_i p_ik`,
/// `‖C‖ ≤ m^{1/2}`.
pub fn certify_rowsum<S: StructureMap + ?Sized>(s: &S, policy: &TruncationPolicy) -> Result<Certificate> {
    let cutoff = policy.cutoff();
    let (w, _) = window(s, cutoff);
    for i in 0..w {
        let col = fetch_column(s, i, cutoff);
        if let Some(&(k, c)) = col.entries.iter().find(|&&(_, c)| c < 0.0) {
            return Err(Error::NotMarkov { index: i, detail: format!("negative constant c[{k}][{i}] = {c}") });
        }
        let Some(omitted) = col.omitted.mass() else {
            return Ok(Certificate::inconclusive(
                cutoff,
                format!("column {i} has no tail information; stochasticity cannot be checked"),
                Some(i),
                Some(col.sum()),
            ));
        };
        let total = col.sum() + omitted;
        if (total - 1.0).abs() > policy.abs_tol() {
            return Err(Error::NotMarkov { index: i, detail: format!("column sum {total} differs from 1") });
        }
    }
    Ok(match schur_scan(s, &UnitWeights, &UnitWeights, cutoff)? {
        Scan::Bounded { m2, .. } => Certificate {
            kind: CertificateKind::RowSum { m: m2 },
            norm_bound: Some(libm::sqrt(m2)),
            cutoff_used: cutoff,
        },
        Scan::Uncontrolled { diagnostic, index, partial_sum } => {
            Certificate::inconclusive(cutoff, diagnostic, index, partial_sum)
        }
    })
}

/// How [`EvolutionOperator::power`] treats tails it cannot bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailMode {
    /// Fail with [`Error::MissingCertificate`].
    Require,
    /// Keep going and clear [`Powered::tail_certified`].
    BestEffort,
}

/// Output of [`EvolutionOperator::power`].
#[derive(Debug, Clone, PartialEq)]
pub struct Powered {
    pub element: Element,
    /// False when some step had a tail that no norm bound could propagate;
    /// the element's tail bound then only covers column truncation.
    pub tail_certified: bool,
}

/// The evolution operator `C` of a structure map, optionally with a known
/// bound on `‖C‖` used to carry input tails through applications.
#[derive(Debug, Clone, Copy)]
pub struct EvolutionOperator<'a, S: ?Sized> {
    map: &'a S,
    norm_bound: Option<f64>,
}

impl<'a, S: StructureMap + ?Sized> EvolutionOperator<'a, S> {
    pub fn new(map: &'a S) -> Self {
        EvolutionOperator { map, norm_bound: None }
    }

    pub fn with_norm_bound(mut self, bound: f64) -> Self {
        self.norm_bound = Some(bound);
        self
    }

    /// Uses the certificate's norm bound, if it has one.
    pub fn with_certificate(mut self, certificate: &Certificate) -> Self {
        if let Some(b) = certificate.norm_bound {
            self.norm_bound = Some(b);
        }
        self
    }

    pub fn norm_bound(&self) -> Option<f64> {
        self.norm_bound
    }

    /// `C(v)`. A tail on `v` needs a norm bound, otherwise it is unbounded
    /// and the call fails with `TailTooLarge`.
    pub fn apply(&self, v: &Element, policy: &TruncationPolicy) -> Result<Element> {
        policy.check_tail(v.tail_bound())?;
        let (coefficients, mut tail) = accumulate_columns(self.map, v.iter(), policy.cutoff())?;
        if v.tail_bound() > 0.0 {
            tail += self.norm_bound.unwrap_or(f64::INFINITY) * v.tail_bound();
        }
        policy.check_tail(tail)?;
        Ok(Element::from_parts(coefficients, tail))
    }

    /// `C^n(v)`, re-truncating after every step. Each step adds the column
    /// truncation tail and multiplies the incoming tail by the norm bound.
    pub fn power(&self, v: &Element, n: usize, policy: &TruncationPolicy, mode: TailMode) -> Result<Powered> {
        policy.check_tail(v.tail_bound())?;
        let mut current = truncate(v, policy)?;
        let mut tail_certified = true;
        for _ in 0..n {
            let (coefficients, mut tail) = accumulate_columns(self.map, current.iter(), policy.cutoff())?;
            let incoming = current.tail_bound();
            if incoming > 0.0 {
                match (self.norm_bound, mode) {
                    (Some(b), _) => tail += b * incoming,
                    (None, TailMode::Require) => return Err(Error::MissingCertificate),
                    (None, TailMode::BestEffort) => tail_certified = false,
                }
            }
            policy.check_tail(tail)?;
            current = truncate(&Element::from_parts(coefficients, tail), policy)?;
        }
        Ok(Powered { element: current, tail_certified })
    }
}

/// `C(v) = Σ_k (Σ_i v_i c_ki) e_k`.
pub fn evolution_apply<S: StructureMap + ?Sized>(s: &S, v: &Element, policy: &TruncationPolicy) -> Result<Element> {
    EvolutionOperator::new(s).apply(v, policy)
}

/// `C^n(v)` without a norm bound ([`TailMode::BestEffort`]). Use
/// [`EvolutionOperator`] to supply a certificate.
pub fn power_apply<S: StructureMap + ?Sized>(
    s: &S,
    v: &Element,
    n: usize,
    policy: &TruncationPolicy,
) -> Result<Powered> {
    EvolutionOperator::new(s).power(v, n, policy, TailMode::BestEffort)
}

/// Largest `‖C v‖` over `trials` random finitely supported unit vectors: a
/// lower bound on `‖C‖`.
pub fn empirical_norm_lower_bound<S: StructureMap + ?Sized>(
    s: &S,
    trials: usize,
    seed: u64,
    policy: &TruncationPolicy,
) -> f64 {
    const MAX_SUPPORT: u64 = 8;
    const MAX_SPREAD: usize = 32;
    let spread = window(s, policy.cutoff()).0.min(MAX_SPREAD);
    if spread == 0 {
        return 0.0;
    }
    let rng = CounterRng::new(seed);
    let mut best = 0.0f64;
    for trial in 0..trials as u64 {
        let r = rng.split(trial);
        let size = 1 + r.below(0, MAX_SUPPORT);
        let mut coefficients = BTreeMap::new();
        for j in 0..size {
            let i = r.below(1 + 2 * j, spread as u64) as usize;
            coefficients.insert(i, 2.0 * r.uniform(2 + 2 * j) - 1.0);
        }
        let v = Element::from_parts(coefficients, 0.0);
        let nv = norm(&v).value;
        if nv == 0.0 {
            continue;
        }
        if let Ok((image, _)) = accumulate_columns(s, v.iter(), policy.cutoff()) {
            let image = Element::from_parts(image, 0.0);
            best = best.max(norm(&image).value / nv);
        }
    }
    best
}
