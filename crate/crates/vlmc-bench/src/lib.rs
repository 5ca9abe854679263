//! Shared fixtures for the benches.

use vlmc_core::{ref_tree, Alphabet, PreparedSampler, SymbolSequence};

/// A seeded sample of length `n` from the three-context reference tree,
/// together with its alphabet.
pub fn ref_fixture(n: usize) -> (Alphabet, SymbolSequence) {
    let pct = ref_tree();
    let sampler = PreparedSampler::new(&pct).expect("the reference tree samples");
    (pct.alphabet().clone(), sampler.sample(n, 0xBE7C, 0))
}
