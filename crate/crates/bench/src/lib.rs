//! Shared fixtures for the benchmarks.

use stirep_core::solver::{Seed, SolverOptions};
use stirep_core::synthesis;
use stirep_core::ExtremalSolution;

/// Converged extremum of a built-in seed.
pub fn solved(name: &str) -> ExtremalSolution {
    Seed::by_name(name)
        .expect("built-in seed")
        .solve(&SolverOptions::default())
        .expect("built-in seeds converge")
}

/// Pulses of a built-in extremum at `T = 1`.
pub fn pulses(name: &str, points: usize) -> synthesis::PulseSet {
    synthesis::synthesize_with(&solved(name), 1.0, points).expect("synthesis of a converged extremum")
}
