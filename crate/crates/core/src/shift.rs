//! The correlated-shift expansion of a harmonic polynomial.
//!
//! For a degree-d harmonic `q` with `||q|| <= 1` and `0 < delta < 1/4`,
//!
//! ```text
//! q(sqrt(1-delta^2) x + delta z) = g(x)
//!     + (sqrt(1-delta^2))^{d-1} delta grad q(x) . z
//!     + e(x, z)
//! ```
//!
//! with `g = (sqrt(1-delta^2))^d q` and `||e|| <= 2^{d/2} delta^2`. The
//! construction is exact through the Hermite addition formula
//! `H_s(ax + by) = sum_{k<=s} sqrt(binom(s,k)) a^{|s-k|} b^{|k|} H_{s-k}(x) H_k(y)`:
//! the `j = |k| = 0` layer is `g`, the `j = 1` layer is the gradient term,
//! and everything with `j >= 2` lands in `e`.

use crate::error::PolyError;
use crate::index::MultiIndex;
use crate::poly::{HermitePoly, PolyVec};
use crate::tables::binomial;

/// Per-component split of a harmonic transformation under the correlated
/// shift. The error components `e_i` live jointly over `(x, z)`: variables
/// `0..n` are `x`, variables `n..2n` are `z`.
#[derive(Debug, Clone)]
pub struct ShiftSplit {
    pub g: PolyVec,
    /// Diagonal scale `(sqrt(1-delta^2))^{deg(q_i) - 1}` that multiplies the
    /// gradient term of each component.
    pub scale_factors: Vec<f64>,
    pub e: PolyVec,
    pub delta: f64,
}

impl ShiftSplit {
    /// Evaluates the reconstruction `g_i(x) + delta s_i grad q_i(x).z + e_i(x,z)`
    /// for component `i`; callers compare against `q_i(ax + bz)` directly.
    pub fn reconstruct(
        &self,
        q: &PolyVec,
        i: usize,
        x: &[f64],
        z: &[f64],
    ) -> Result<f64, PolyError> {
        let n = q.dim();
        let grad_dot: f64 = q.components()[i]
            .gradient()
            .iter()
            .zip(z)
            .map(|(gj, &zj)| gj.eval(x).map(|v| v * zj))
            .sum::<Result<f64, PolyError>>()?;
        let mut xz = Vec::with_capacity(2 * n);
        xz.extend_from_slice(x);
        xz.extend_from_slice(z);
        Ok(self.g.components()[i].eval(x)?
            + self.delta * self.scale_factors[i] * grad_dot
            + self.e.components()[i].eval(&xz)?)
    }
}

/// Splits each component of `q` under the shift with mixing parameter
/// `delta`. Components must be harmonic of a single degree with L2 norm at
/// most one (up to rounding).
pub fn shift_split(q: &PolyVec, delta: f64) -> Result<ShiftSplit, PolyError> {
    if !(delta > 0.0 && delta < 0.25) {
        return Err(PolyError::DeltaOutOfRange(delta));
    }
    let n = q.dim();
    let a = (1.0 - delta * delta).sqrt();
    let mut g_parts = Vec::with_capacity(q.len());
    let mut scales = Vec::with_capacity(q.len());
    let mut e_parts = Vec::with_capacity(q.len());
    for comp in q.components() {
        let d = comp.harmonic_degree().ok_or(PolyError::NotHarmonic {
            expected: comp.degree(),
        })?;
        g_parts.push(comp.scale(a.powi(d as i32)));
        scales.push(a.powi(d as i32 - 1));
        let mut e_terms: Vec<(MultiIndex, f64)> = Vec::new();
        for (s, &coeff) in comp.hermite_coeffs() {
            // Enumerate k <= s with |k| >= 2.
            let dense = s.to_dense(n);
            let mut k = vec![0u32; n];
            loop {
                let total_k: u32 = k.iter().sum();
                if total_k >= 2 {
                    let mut weight =
                        coeff * a.powi((d - total_k) as i32) * delta.powi(total_k as i32);
                    for i in 0..n {
                        weight *= binomial(dense[i], k[i]).sqrt();
                    }
                    if weight != 0.0 {
                        let mut joint = vec![0u32; 2 * n];
                        for i in 0..n {
                            joint[i] = dense[i] - k[i];
                            joint[n + i] = k[i];
                        }
                        e_terms.push((MultiIndex::new(joint), weight));
                    }
                }
                // Odometer over k <= dense.
                let mut pos = 0;
                loop {
                    if pos == n {
                        break;
                    }
                    if k[pos] < dense[pos] {
                        k[pos] += 1;
                        break;
                    }
                    k[pos] = 0;
                    pos += 1;
                }
                if pos == n {
                    break;
                }
            }
        }
        e_parts.push(HermitePoly::from_hermite_terms(2 * n, e_terms)?);
    }
    Ok(ShiftSplit {
        g: PolyVec::new(g_parts)?,
        scale_factors: scales,
        e: PolyVec::new(e_parts)?,
        delta,
    })
}
