//! File formats, parallel simulation and the command line for
//! [`evoalg_core`].

pub mod cli;
pub mod format;
pub mod kernel;
mod parallel;

pub use parallel::simulate_parallel;
