//! Shared inputs for the benchmarks.

use sepcheck::fixtures::{random_separable, GeneratorSpec};
use sepcheck::BipartiteState;

/// Planted separable state with `terms` product terms.
pub fn planted(m: usize, n: usize, terms: usize, seed: u64) -> BipartiteState {
    random_separable(&GeneratorSpec::separable(m, n, terms, seed))
        .expect("feasible spec")
        .0
}
