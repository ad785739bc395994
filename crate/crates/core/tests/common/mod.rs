#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vat_core::dataset::{pair_runs, PairPolicy};
use vat_core::evidence::{build_shift_matrix, Aggregation};
use vat_core::synthetic::{generate, PlantedSpec};
use vat_core::{Execution, PairedTable, ShiftMatrix, Taxonomy};

pub fn fixture_paired() -> (Taxonomy, PairedTable) {
    let spec = PlantedSpec::bundled_fixture();
    let runs = generate(&spec, Execution::Parallel).unwrap();
    let paired = pair_runs(&runs.pre, &runs.post, PairPolicy::Strict).unwrap();
    (spec.taxonomy, paired)
}

pub fn fixture_shifts() -> ShiftMatrix {
    let (t, p) = fixture_paired();
    build_shift_matrix(&p, &t, Aggregation::ObservedMean, Execution::Parallel).unwrap()
}

/// Values on the half-step grid in [-1, 1]; few levels, so many ties.
pub fn grid_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| f64::from(rng.random_range(-2i8..=2)) / 2.0).collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
