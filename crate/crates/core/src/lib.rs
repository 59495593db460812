//! Hilbert evolution algebras over a countable orthonormal basis.
//!
//! Elements of the underlying separable Hilbert space are stored as a finite
//! coefficient map together with a certified bound on the ℓ² norm of every
//! coefficient that was not materialized. Every series in the crate (products,
//! the evolution operator, certificate scans, Markov push-forwards) is
//! evaluated under a [`TruncationPolicy`] and reports what it dropped instead
//! of pretending the truncation is exact.
//!
//! The crate is `no_std` and only needs `alloc`.
//!
//! Layout:
//!
//! - [`element`]: coefficient sequences, inner products, norms, truncation.
//! - [`algebra`]: structure constants, the product `v · w`, left multiplication
//!   and its continuity constant `M_v`.
//! - [`operator`]: the evolution operator `C`, its domain test, powers, and the
//!   Hilbert–Schmidt / Schur / row-sum boundedness certificates.
//! - [`markov`]: transition kernels, the kernel → structure-map bridge,
//!   n-step oracles, distribution evolution and Monte Carlo simulation.
#![no_std]

extern crate alloc;

pub mod algebra;
pub mod element;
mod error;
pub mod markov;
pub mod operator;
pub mod rng;
pub mod series;
pub mod sum;

pub use algebra::{
    continuity_bound, left_mult, product, square_basis, ContinuityBound, LazyMap, LeftMultiplication, MapKind,
    SparseMap, StructureMap,
};
pub use element::{axpy, inner_product, norm, truncate, BasisIndex, Element, Estimate, TruncationPolicy};
pub use error::{Error, Result};
pub use operator::{
    certify_hilbert_schmidt, certify_rowsum, certify_schur, empirical_norm_lower_bound, evolution_apply, in_domain,
    power_apply, Certificate, CertificateKind, DomainVerdict, EvolutionOperator, ExplicitWeights, Powered, TailMode,
    UnitWeights, WeightOracle,
};
pub use series::{Omitted, Truncated};
