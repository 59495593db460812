//! Truncated views of infinite sparse sequences (structure-map columns and
//! kernel rows).

use alloc::vec::Vec;

use crate::element::BasisIndex;
use crate::sum::CompensatedSum;

/// What a truncated sequence left out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Omitted {
    /// Nothing: the sequence is complete within the window.
    Nothing,
    /// Certified upper bound on the ℓ¹ mass of the dropped entries
    /// (`f64::INFINITY` when the dropped part is known to diverge).
    Mass(f64),
    /// No information about the dropped entries.
    Unknown,
}

impl Omitted {
    /// ℓ¹ bound on the dropped part, `None` when unknown.
    pub fn mass(&self) -> Option<f64> {
        match *self {
            Omitted::Nothing => Some(0.0),
            Omitted::Mass(m) => Some(m),
            Omitted::Unknown => None,
        }
    }

    /// Like [`Omitted::mass`] with unknown read as `+∞`.
    pub fn mass_or_inf(&self) -> f64 {
        self.mass().unwrap_or(f64::INFINITY)
    }

    pub fn is_nothing(&self) -> bool {
        matches!(self, Omitted::Nothing)
    }
}

/// Entries `(index, value)` below some cutoff, sorted by index with no
/// repeats, plus an account of the rest.
#[derive(Debug, Clone, PartialEq)]
pub struct Truncated {
    pub entries: Vec<(BasisIndex, f64)>,
    pub omitted: Omitted,
}

impl Truncated {
    pub fn complete(entries: Vec<(BasisIndex, f64)>) -> Self {
        Truncated { entries, omitted: Omitted::Nothing }
    }

    pub fn empty() -> Self {
        Truncated::complete(Vec::new())
    }

    /// Splits a sorted, fully known sequence at `cutoff`; the omitted mass is
    /// the exact ℓ¹ norm of the dropped entries.
    pub fn from_full<I>(entries: I, cutoff: usize) -> Self
    where
        I: IntoIterator<Item = (BasisIndex, f64)>,
    {
        let mut kept = Vec::new();
        let mut dropped = CompensatedSum::new();
        let mut any_dropped = false;
        for (k, x) in entries {
            if k < cutoff {
                kept.push((k, x));
            } else {
                any_dropped = true;
                dropped.add(libm::fabs(x));
            }
        }
        let omitted = if any_dropped { Omitted::Mass(dropped.value()) } else { Omitted::Nothing };
        Truncated { entries: kept, omitted }
    }

    /// `Σ |x|` over the kept entries.
    pub fn l1(&self) -> f64 {
        self.entries.iter().map(|&(_, x)| libm::fabs(x)).collect::<CompensatedSum>().value()
    }

    /// `Σ x` over the kept entries.
    pub fn sum(&self) -> f64 {
        self.entries.iter().map(|&(_, x)| x).collect::<CompensatedSum>().value()
    }

    /// `Σ x²` over the kept entries.
    pub fn l2_squared(&self) -> f64 {
        self.entries.iter().map(|&(_, x)| x * x).collect::<CompensatedSum>().value()
    }

    /// Upper bound on `Σ x²` over the full sequence (ℓ² ≤ ℓ¹ on the
    /// dropped part).
    pub fn l2_squared_bound(&self) -> Option<f64> {
        self.omitted.mass().map(|m| self.l2_squared() + m * m)
    }

    pub(crate) fn is_well_formed(&self, cutoff: usize) -> bool {
        self.entries.windows(2).all(|w| w[0].0 < w[1].0) && self.entries.last().is_none_or(|&(k, _)| k < cutoff)
    }
}
