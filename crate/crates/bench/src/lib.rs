//! Shared fixtures for the criterion benchmarks.

use ptf_core::index::MultiIndex;
use ptf_core::poly::HermitePoly;

/// A dense degree-`d` polynomial over `n` variables with deterministic
/// pseudo-random coefficients, unit L2 norm.
pub fn dense_poly(n: usize, d: u32) -> HermitePoly {
    let terms: Vec<(MultiIndex, f64)> = ptf_core::index::indices_up_to(n, d)
        .into_iter()
        .enumerate()
        .map(|(i, a)| (a, (i as f64 * 0.7375 + 0.11).sin()))
        .collect();
    HermitePoly::from_hermite_terms(n, terms)
        .unwrap()
        .normalized()
        .unwrap()
}
