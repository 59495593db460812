//! A single owned type for every kernel the command line can load.

use evoalg_core::markov::{
    build_branching, build_house_of_cards, build_renewal, BranchingKernel, HouseOfCardsKernel, IdentityKernel, ProbSeq,
    RenewalKernel, SparseKernel, TransitionKernel,
};
use evoalg_core::series::{Omitted, Truncated};
use evoalg_core::{BasisIndex, Result};

/// Largest population whose branching row is materialized by default.
pub const DEFAULT_MAX_POPULATION: usize = 256;

#[derive(Debug, Clone)]
pub enum Kernel {
    Renewal(RenewalKernel),
    HouseOfCards(HouseOfCardsKernel),
    Branching(BranchingKernel),
    Identity,
    Sparse(SparseKernel),
}

impl Kernel {
    pub fn renewal(p: ProbSeq) -> Result<Self> {
        build_renewal(p).map(Kernel::Renewal)
    }

    pub fn house_of_cards(p: ProbSeq) -> Result<Self> {
        build_house_of_cards(p).map(Kernel::HouseOfCards)
    }

    pub fn branching(offspring: Vec<f64>, max_population: usize) -> Result<Self> {
        build_branching(offspring, max_population).map(Kernel::Branching)
    }

    fn inner(&self) -> &dyn TransitionKernel {
        match self {
            Kernel::Renewal(k) => k,
            Kernel::HouseOfCards(k) => k,
            Kernel::Branching(k) => k,
            Kernel::Identity => &IdentityKernel,
            Kernel::Sparse(k) => k,
        }
    }
}

impl TransitionKernel for Kernel {
    fn row(&self, i: BasisIndex, cutoff: usize) -> Truncated {
        self.inner().row(i, cutoff)
    }
    fn row_mass(&self, i: BasisIndex) -> f64 {
        self.inner().row_mass(i)
    }
    fn inflow_tail(&self, k: BasisIndex, cutoff: usize) -> Omitted {
        self.inner().inflow_tail(k, cutoff)
    }
    fn inflow_sup_from(&self, cutoff: usize) -> Option<f64> {
        self.inner().inflow_sup_from(cutoff)
    }
    fn state_limit(&self) -> Option<usize> {
        self.inner().state_limit()
    }
    fn description(&self) -> String {
        self.inner().description()
    }
}
