use rayon::prelude::*;

use evoalg_core::markov::{Distribution, SimulationOutcome, Simulator, TransitionKernel};
use evoalg_core::{Result, TruncationPolicy};

const CHUNK: u64 = 4096;

/// [`evoalg_core::markov::simulate`] spread over the rayon pool. Paths are
/// keyed by index, so the outcome does not depend on the thread count.
pub fn simulate_parallel<K: TransitionKernel + ?Sized>(
    k: &K,
    init: &Distribution,
    steps: usize,
    paths: u64,
    seed: u64,
    policy: &TruncationPolicy,
) -> Result<SimulationOutcome> {
    let sim = Simulator::new(k, init, steps, seed, policy)?;
    let chunks = paths.div_ceil(CHUNK);
    Ok((0..chunks).into_par_iter().map(|c| sim.run_paths(c * CHUNK..((c + 1) * CHUNK).min(paths))).reduce(
        SimulationOutcome::default,
        |mut a, b| {
            a.merge(b);
            a
        },
    ))
}
