//! Lower-degree product decomposition of a pure harmonic polynomial.
//!
//! A degree-k harmonic `q` is flattened through its gradient: the matrix
//! `M[i][b] = ` Hermite coefficient of `dq/dx_i` at the degree-(k-1) index
//! `b`. Because `sum_i x_i dq/dx_i` has degree-k harmonic part exactly
//! `k q`, the rank-one SVD layers of `M` give linear-times-(k-1) products
//!
//! ```text
//! q = (1/k) sum_t sigma_t (u_t . x) beta_t(x)  +  lower-degree remainder
//! ```
//!
//! and truncating the spectrum moves exactly the dropped layers' harmonic
//! mass into the residual. A combination flagged by the violation search has
//! a near-degenerate spectrum here, which is what makes the split useful to
//! the decomposition engine.

use nalgebra::DMatrix;

use crate::error::SnptError;
use crate::index::MultiIndex;
use crate::poly::HermitePoly;

#[derive(Debug, Clone)]
pub struct SplitPair {
    /// Unit-norm linear factor `u . x`.
    pub alpha: HermitePoly,
    /// Degree-(k-1) harmonic factor carrying the weight `sigma / k`.
    pub beta: HermitePoly,
    pub sigma: f64,
    /// `||alpha|| * ||beta||`.
    pub product_norm: f64,
}

#[derive(Debug)]
pub struct LowDegreeSplit {
    pub pairs: Vec<SplitPair>,
    pub dropped: Vec<SplitPair>,
    /// `g = q - sum_kept alpha_i beta_i`.
    pub g: HermitePoly,
    /// `g^{[k]}`, the high-degree residual.
    pub residual_high: HermitePoly,
    /// `r = g - g^{[k]}`, degree <= k-1.
    pub remainder: HermitePoly,
    pub degree: u32,
}

/// Splits a pure degree-`k` harmonic (`k >= 2`) into linear-times-lower
/// products, keeping singular values `sigma_t >= rank_tol * sigma_1`.
pub fn low_degree_split(q: &HermitePoly, rank_tol: f64) -> Result<LowDegreeSplit, SnptError> {
    low_degree_split_capped(q, rank_tol, usize::MAX)
}

/// Like [`low_degree_split`] but keeps at most `max_pairs` layers (largest
/// singular values first). A cap of 1 on a tied spectrum still truncates.
pub fn low_degree_split_capped(
    q: &HermitePoly,
    rank_tol: f64,
    max_pairs: usize,
) -> Result<LowDegreeSplit, SnptError> {
    let k = q.harmonic_degree().ok_or(SnptError::NotPureHarmonic)?;
    if k < 2 {
        return Err(SnptError::NotPureHarmonic);
    }
    let n = q.dim();
    let grads: Vec<HermitePoly> = q.gradient();
    // Sparse column basis: union of the gradient supports.
    let mut columns: Vec<MultiIndex> = Vec::new();
    for g in &grads {
        for idx in g.hermite_coeffs().keys() {
            if !columns.contains(idx) {
                columns.push(idx.clone());
            }
        }
    }
    columns.sort();
    if columns.is_empty() {
        // Zero polynomial; nothing to split.
        return Ok(LowDegreeSplit {
            pairs: Vec::new(),
            dropped: Vec::new(),
            g: q.clone(),
            residual_high: q.harmonic_component(k),
            remainder: HermitePoly::zero(n),
            degree: k,
        });
    }
    let mut flat = DMatrix::zeros(n, columns.len());
    for (i, g) in grads.iter().enumerate() {
        for (b, &c) in g.hermite_coeffs() {
            let col = columns.binary_search(b).expect("column registered");
            flat[(i, col)] = c;
        }
    }
    let svd = flat.svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let sigma_max = svd.singular_values.iter().copied().fold(0.0f64, f64::max);

    let mut pairs = Vec::new();
    let mut dropped = Vec::new();
    for (t, &sigma) in svd.singular_values.iter().enumerate() {
        if sigma <= 1e-12 * sigma_max.max(1.0) {
            continue;
        }
        let alpha_terms: Vec<(MultiIndex, f64)> = (0..n)
            .filter(|&i| u[(i, t)].abs() > 1e-14)
            .map(|i| (MultiIndex::var(i), u[(i, t)]))
            .collect();
        let alpha = HermitePoly::from_hermite_terms(n, alpha_terms)?;
        let beta_terms: Vec<(MultiIndex, f64)> = columns
            .iter()
            .enumerate()
            .filter(|(c, _)| vt[(t, *c)].abs() > 1e-14)
            .map(|(c, b)| (b.clone(), vt[(t, c)] * sigma / k as f64))
            .collect();
        let beta = HermitePoly::from_hermite_terms(n, beta_terms)?;
        let pair = SplitPair {
            product_norm: alpha.l2_norm() * beta.l2_norm(),
            alpha,
            beta,
            sigma,
        };
        if sigma >= rank_tol * sigma_max && pairs.len() < max_pairs {
            pairs.push(pair);
        } else {
            dropped.push(pair);
        }
    }

    let mut g = q.clone();
    for pair in &pairs {
        g = g.sub(&pair.alpha.mul(&pair.beta));
    }
    let residual_high = g.harmonic_component(k);
    let remainder = g.sub(&residual_high);
    Ok(LowDegreeSplit {
        pairs,
        dropped,
        g,
        residual_high,
        remainder,
        degree: k,
    })
}
