//! Multi-indices for sparse multivariate polynomials.

use serde::{Deserialize, Serialize};

/// Exponent vector of a monomial `x^a = prod_i x_i^{a_i}`, stored with
/// trailing zeros trimmed so that equal monomials compare equal regardless
/// of the ambient dimension they were built in.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(mut exponents: Vec<u32>) -> Self {
        while exponents.last() == Some(&0) {
            exponents.pop();
        }
        MultiIndex(exponents)
    }

    /// The all-zeros index (the constant monomial).
    pub fn zero() -> Self {
        MultiIndex(Vec::new())
    }

    /// The index of the single variable `x_i`.
    pub fn var(i: usize) -> Self {
        let mut e = vec![0; i + 1];
        e[i] = 1;
        MultiIndex(e)
    }

    pub fn exponent(&self, i: usize) -> u32 {
        self.0.get(i).copied().unwrap_or(0)
    }

    pub fn total_degree(&self) -> u32 {
        self.0.iter().sum()
    }

    /// Highest variable index that appears, plus one. Zero for constants.
    pub fn min_dim(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.0.iter().copied().enumerate().filter(|&(_, e)| e > 0)
    }

    /// Exponents padded to length `dim`.
    pub fn to_dense(&self, dim: usize) -> Vec<u32> {
        (0..dim).map(|i| self.exponent(i)).collect()
    }

    /// Sum of exponents (monomial product).
    pub fn mul(&self, other: &MultiIndex) -> MultiIndex {
        let len = self.0.len().max(other.0.len());
        MultiIndex::new(
            (0..len)
                .map(|i| self.exponent(i) + other.exponent(i))
                .collect(),
        )
    }

    /// Decrement coordinate `i`; `None` if the exponent there is zero.
    pub fn lower(&self, i: usize) -> Option<MultiIndex> {
        if self.exponent(i) == 0 {
            return None;
        }
        let mut e = self.to_dense(self.0.len());
        e[i] -= 1;
        Some(MultiIndex::new(e))
    }

    /// Replace coordinate `i` with `value`.
    pub fn with_exponent(&self, i: usize, value: u32) -> MultiIndex {
        let mut e = self.to_dense(self.0.len().max(i + 1));
        e[i] = value;
        MultiIndex::new(e)
    }
}

/// All multi-indices over `dim` variables with total degree <= `max_degree`,
/// in lexicographic order. The constant index comes first.
pub fn indices_up_to(dim: usize, max_degree: u32) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    let mut current = vec![0u32; dim];
    fn rec(
        dim: usize,
        pos: usize,
        remaining: u32,
        current: &mut Vec<u32>,
        out: &mut Vec<MultiIndex>,
    ) {
        if pos == dim {
            out.push(MultiIndex::new(current.clone()));
            return;
        }
        for e in 0..=remaining {
            current[pos] = e;
            rec(dim, pos + 1, remaining - e, current, out);
        }
        current[pos] = 0;
    }
    rec(dim, 0, max_degree, &mut current, &mut out);
    out.sort();
    out.dedup();
    out
}

/// All multi-indices over `dim` variables with total degree exactly `degree`.
pub fn indices_of_degree(dim: usize, degree: u32) -> Vec<MultiIndex> {
    indices_up_to(dim, degree)
        .into_iter()
        .filter(|a| a.total_degree() == degree)
        .collect()
}
