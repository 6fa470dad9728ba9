//! Sparse multivariate polynomials carried in both the Hermite and the
//! monomial basis.
//!
//! The Hermite representation is authoritative: coefficients there are the
//! tensor `W` with `||f||_{L2}^2 = ||W||_2^2` under the standard Gaussian,
//! so norms, harmonic projections and derivatives are exact coefficient
//! operations. The monomial representation (`coe(f)`) is derived lazily and
//! cached; it is what evaluation, multiplication and the maximum-coefficient
//! functional `MC(f)` read.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::PolyError;
use crate::index::MultiIndex;
use crate::tables;

/// Coefficients smaller than this in absolute value are dropped when a
/// polynomial is put into canonical sparse form. Legitimate coefficients at
/// desk scale are far above this; cancellation noise is far below.
pub const PRUNE_EPS: f64 = 1e-13;

pub type Terms = BTreeMap<MultiIndex, f64>;

fn prune(terms: &mut Terms) {
    terms.retain(|_, c| c.abs() > PRUNE_EPS);
}

#[derive(Debug, Clone)]
pub struct HermitePoly {
    dim: usize,
    /// Hermite-basis coefficients; no stored zeros.
    hermite: Terms,
    /// Monomial-basis coefficients, derived on first use.
    monomial: OnceLock<Terms>,
}

impl HermitePoly {
    fn check_dim(dim: usize, terms: &Terms) -> Result<(), PolyError> {
        for idx in terms.keys() {
            if idx.min_dim() > dim {
                return Err(PolyError::DimensionMismatch {
                    expected: dim,
                    got: idx.min_dim(),
                });
            }
        }
        Ok(())
    }

    /// Builds a polynomial from Hermite-basis coefficients.
    pub fn from_hermite_terms<I>(dim: usize, terms: I) -> Result<Self, PolyError>
    where
        I: IntoIterator<Item = (MultiIndex, f64)>,
    {
        let mut map = Terms::new();
        for (idx, c) in terms {
            *map.entry(idx).or_insert(0.0) += c;
        }
        prune(&mut map);
        Self::check_dim(dim, &map)?;
        Ok(HermitePoly {
            dim,
            hermite: map,
            monomial: OnceLock::new(),
        })
    }

    /// Builds a polynomial from monomial coefficients, converting to the
    /// Hermite basis through the univariate tables. The input terms seed the
    /// monomial cache so the round trip is exact.
    pub fn from_monomial_terms<I>(dim: usize, terms: I) -> Result<Self, PolyError>
    where
        I: IntoIterator<Item = (MultiIndex, f64)>,
    {
        let mut mono = Terms::new();
        for (idx, c) in terms {
            *mono.entry(idx).or_insert(0.0) += c;
        }
        prune(&mut mono);
        Self::check_dim(dim, &mono)?;
        let hermite = monomial_terms_to_hermite(&mono);
        let cell = OnceLock::new();
        let _ = cell.set(mono);
        Ok(HermitePoly {
            dim,
            hermite,
            monomial: cell,
        })
    }

    pub fn zero(dim: usize) -> Self {
        HermitePoly {
            dim,
            hermite: Terms::new(),
            monomial: OnceLock::new(),
        }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self::from_hermite_terms(dim, [(MultiIndex::zero(), c)]).unwrap()
    }

    /// The coordinate polynomial `x_i` (which is also `H_{e_i}`).
    pub fn coordinate(dim: usize, i: usize) -> Self {
        assert!(i < dim, "coordinate {i} out of range for dim {dim}");
        Self::from_hermite_terms(dim, [(MultiIndex::var(i), 1.0)]).unwrap()
    }

    /// The multivariate Hermite basis element `H_a`.
    pub fn hermite_basis(dim: usize, a: MultiIndex) -> Result<Self, PolyError> {
        Self::from_hermite_terms(dim, [(a, 1.0)])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.hermite.is_empty()
    }

    /// Maximum total degree over stored terms (0 for the zero polynomial).
    pub fn degree(&self) -> u32 {
        self.hermite
            .keys()
            .map(|a| a.total_degree())
            .max()
            .unwrap_or(0)
    }

    pub fn hermite_coeffs(&self) -> &Terms {
        &self.hermite
    }

    pub fn hermite_coeff(&self, a: &MultiIndex) -> f64 {
        self.hermite.get(a).copied().unwrap_or(0.0)
    }

    pub fn monomial_coeffs(&self) -> &Terms {
        self.monomial
            .get_or_init(|| hermite_terms_to_monomial(&self.hermite))
    }

    /// Gaussian L2 norm: the Euclidean norm of the Hermite coefficients.
    pub fn l2_norm(&self) -> f64 {
        self.hermite.values().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// `MC(f)`: the largest absolute monomial coefficient.
    pub fn max_coeff(&self) -> f64 {
        self.monomial_coeffs()
            .values()
            .fold(0.0f64, |m, c| m.max(c.abs()))
    }

    /// Diagnostic ratio `MC(f) / ||f||_{L2}`; zero for the zero polynomial.
    pub fn mc_l2_ratio(&self) -> f64 {
        let n = self.l2_norm();
        if n == 0.0 {
            0.0
        } else {
            self.max_coeff() / n
        }
    }

    /// Evaluation through the monomial form.
    pub fn eval(&self, x: &[f64]) -> Result<f64, PolyError> {
        if x.len() != self.dim {
            return Err(PolyError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(eval_terms(self.monomial_coeffs(), x))
    }

    /// Evaluation through the Hermite form (products of univariate
    /// recurrences); used to cross-check the two representations.
    pub fn eval_hermite_form(&self, x: &[f64]) -> Result<f64, PolyError> {
        if x.len() != self.dim {
            return Err(PolyError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let mut acc = 0.0;
        for (a, &c) in &self.hermite {
            let mut term = c;
            for (i, e) in a.iter() {
                term *= tables::eval_hermite_univariate(e, x[i]);
            }
            acc += term;
        }
        Ok(acc)
    }

    /// The degree-`k` harmonic component `p^{[k]}` (Hermite mass of total
    /// degree exactly `k`).
    pub fn harmonic_component(&self, k: u32) -> HermitePoly {
        let terms: Vec<_> = self
            .hermite
            .iter()
            .filter(|(a, _)| a.total_degree() == k)
            .map(|(a, &c)| (a.clone(), c))
            .collect();
        HermitePoly::from_hermite_terms(self.dim, terms).unwrap()
    }

    /// Harmonic degrees with nonzero mass, ascending.
    pub fn harmonic_degrees(&self) -> Vec<u32> {
        let mut degs: Vec<u32> = self.hermite.keys().map(|a| a.total_degree()).collect();
        degs.sort_unstable();
        degs.dedup();
        degs
    }

    /// `Some(k)` if the polynomial is harmonic of a single degree `k`.
    pub fn harmonic_degree(&self) -> Option<u32> {
        match self.harmonic_degrees().as_slice() {
            [k] => Some(*k),
            _ => None,
        }
    }

    /// Partial derivative; exact in the Hermite basis via
    /// `d/dx_i H_a = sqrt(a_i) H_{a - e_i}`.
    pub fn partial(&self, i: usize) -> HermitePoly {
        let mut terms = Vec::new();
        for (a, &c) in &self.hermite {
            let e = a.exponent(i);
            if e > 0 {
                terms.push((a.lower(i).unwrap(), c * (e as f64).sqrt()));
            }
        }
        HermitePoly::from_hermite_terms(self.dim, terms).unwrap()
    }

    /// Gradient as a vector of polynomials (degree drops by one).
    pub fn gradient(&self) -> Vec<HermitePoly> {
        (0..self.dim).map(|i| self.partial(i)).collect()
    }

    /// `D_y p = y . grad p`.
    pub fn directional_derivative(&self, y: &[f64]) -> Result<HermitePoly, PolyError> {
        if y.len() != self.dim {
            return Err(PolyError::DimensionMismatch {
                expected: self.dim,
                got: y.len(),
            });
        }
        let mut acc = HermitePoly::zero(self.dim);
        for (i, &yi) in y.iter().enumerate() {
            if yi != 0.0 {
                acc = acc.add(&self.partial(i).scale(yi));
            }
        }
        Ok(acc)
    }

    pub fn scale(&self, c: f64) -> HermitePoly {
        let terms: Vec<_> = self
            .hermite
            .iter()
            .map(|(a, &v)| (a.clone(), v * c))
            .collect();
        HermitePoly::from_hermite_terms(self.dim, terms).unwrap()
    }

    pub fn add(&self, other: &HermitePoly) -> HermitePoly {
        let dim = self.dim.max(other.dim);
        let mut terms: Vec<(MultiIndex, f64)> =
            self.hermite.iter().map(|(a, &c)| (a.clone(), c)).collect();
        terms.extend(other.hermite.iter().map(|(a, &c)| (a.clone(), c)));
        HermitePoly::from_hermite_terms(dim, terms).unwrap()
    }

    pub fn sub(&self, other: &HermitePoly) -> HermitePoly {
        self.add(&other.scale(-1.0))
    }

    /// Product, computed by monomial convolution.
    pub fn mul(&self, other: &HermitePoly) -> HermitePoly {
        let dim = self.dim.max(other.dim);
        let mut terms = Terms::new();
        for (a, &ca) in self.monomial_coeffs() {
            for (b, &cb) in other.monomial_coeffs() {
                *terms.entry(a.mul(b)).or_insert(0.0) += ca * cb;
            }
        }
        prune(&mut terms);
        HermitePoly::from_monomial_terms(dim, terms).unwrap()
    }

    /// Reinterprets the polynomial in a larger ambient dimension.
    pub fn extend_dim(&self, dim: usize) -> HermitePoly {
        assert!(dim >= self.dim);
        let terms: Vec<_> = self.hermite.iter().map(|(a, &c)| (a.clone(), c)).collect();
        HermitePoly::from_hermite_terms(dim, terms).unwrap()
    }

    /// Shifts every variable index up by `offset` (used to build joint
    /// polynomials over `(x, z)` pairs).
    pub fn shift_vars(&self, offset: usize, new_dim: usize) -> HermitePoly {
        let terms: Vec<_> = self
            .hermite
            .iter()
            .map(|(a, &c)| {
                let mut e = vec![0u32; new_dim];
                for (i, ex) in a.iter() {
                    e[i + offset] = ex;
                }
                (MultiIndex::new(e), c)
            })
            .collect();
        HermitePoly::from_hermite_terms(new_dim, terms).unwrap()
    }

    pub fn normalized(&self) -> Option<HermitePoly> {
        let n = self.l2_norm();
        if n <= PRUNE_EPS {
            None
        } else {
            Some(self.scale(1.0 / n))
        }
    }
}

fn eval_terms(terms: &Terms, x: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (a, &c) in terms {
        let mut t = c;
        for (i, e) in a.iter() {
            t *= x[i].powi(e as i32);
        }
        acc += t;
    }
    acc
}

/// Change of basis Hermite -> monomial: each `H_a` is the product of the
/// univariate tables over its variables, expanded variable by variable.
fn hermite_terms_to_monomial(hermite: &Terms) -> Terms {
    let mut out = Terms::new();
    for (a, &c) in hermite {
        let mut partial: Vec<(MultiIndex, f64)> = vec![(MultiIndex::zero(), c)];
        for (i, e) in a.iter() {
            let table = tables::hermite_univariate(e);
            let mut next = Vec::with_capacity(partial.len() * table.len());
            for (idx, coeff) in &partial {
                for (p, &t) in table.iter().enumerate() {
                    if t != 0.0 {
                        next.push((idx.with_exponent(i, p as u32), coeff * t));
                    }
                }
            }
            partial = next;
        }
        for (idx, coeff) in partial {
            *out.entry(idx).or_insert(0.0) += coeff;
        }
    }
    prune(&mut out);
    out
}

/// Change of basis monomial -> Hermite via the inverse univariate tables.
fn monomial_terms_to_hermite(monomial: &Terms) -> Terms {
    let mut out = Terms::new();
    for (a, &c) in monomial {
        let mut partial: Vec<(MultiIndex, f64)> = vec![(MultiIndex::zero(), c)];
        for (i, e) in a.iter() {
            let table = tables::monomial_to_hermite_univariate(e);
            let mut next = Vec::with_capacity(partial.len() * table.len());
            for (idx, coeff) in &partial {
                for (j, &t) in table.iter().enumerate() {
                    if t != 0.0 {
                        next.push((idx.with_exponent(i, j as u32), coeff * t));
                    }
                }
            }
            partial = next;
        }
        for (idx, coeff) in partial {
            *out.entry(idx).or_insert(0.0) += coeff;
        }
    }
    prune(&mut out);
    out
}

/// An ordered tuple of polynomials over a shared ambient dimension; the
/// vector-valued transformation `q(x) = (q_1(x), ..., q_m(x))`.
#[derive(Debug, Clone)]
pub struct PolyVec {
    components: Vec<HermitePoly>,
}

impl PolyVec {
    pub fn new(components: Vec<HermitePoly>) -> Result<Self, PolyError> {
        assert!(!components.is_empty(), "PolyVec must be non-empty");
        let dim = components[0].dim();
        for c in &components[1..] {
            if c.dim() != dim {
                return Err(PolyError::DimensionMismatch {
                    expected: dim,
                    got: c.dim(),
                });
            }
        }
        Ok(PolyVec { components })
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn components(&self) -> &[HermitePoly] {
        &self.components
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>, PolyError> {
        self.components.iter().map(|p| p.eval(x)).collect()
    }

    /// Numeric Jacobian rows `grad q_i(x)` stacked into an `m x n` matrix
    /// (row-major).
    pub fn jacobian_at(&self, x: &[f64]) -> Result<Vec<Vec<f64>>, PolyError> {
        self.components
            .iter()
            .map(|p| p.gradient().iter().map(|g| g.eval(x)).collect())
            .collect()
    }
}

/// Composition `h(q_1(x), ..., q_m(x))`.
///
/// `h` lives over `m` variables; each of its monomials `prod y_i^{a_i}` must
/// satisfy the weighted-degree constraint `sum a_i deg(q_i) <= max_degree`.
pub fn compose(h: &HermitePoly, q: &PolyVec, max_degree: u32) -> Result<HermitePoly, PolyError> {
    if h.dim() > q.len() {
        return Err(PolyError::DimensionMismatch {
            expected: h.dim(),
            got: q.len(),
        });
    }
    let degs: Vec<u32> = q.components().iter().map(|c| c.degree()).collect();
    for a in h.monomial_coeffs().keys() {
        let weighted: u32 = a.iter().map(|(i, e)| e * degs[i]).sum();
        if weighted > max_degree {
            return Err(PolyError::WeightedDegreeExceeded {
                got: weighted,
                bound: max_degree,
            });
        }
    }
    let n = q.dim();
    // Cache powers of each component as needed.
    let mut powers: Vec<Vec<HermitePoly>> = q
        .components()
        .iter()
        .map(|c| vec![HermitePoly::constant(n, 1.0), c.clone()])
        .collect();
    let mut acc = HermitePoly::zero(n);
    for (a, &c) in h.monomial_coeffs() {
        let mut term = HermitePoly::constant(n, c);
        for (i, e) in a.iter() {
            while powers[i].len() <= e as usize {
                let next = powers[i].last().unwrap().mul(&q.components()[i]);
                powers[i].push(next);
            }
            term = term.mul(&powers[i][e as usize]);
        }
        acc = acc.add(&term);
    }
    Ok(acc)
}

/// Gaussian-moment inner product `E[p(x) q(x)]` computed entirely from the
/// monomial coefficients and the closed-form moments `E[x^{2k}] = (2k-1)!!`.
/// Independent of the Hermite machinery; this is the orthonormality oracle.
pub fn gaussian_moment_inner_product(p: &HermitePoly, q: &HermitePoly) -> f64 {
    let mut acc = 0.0;
    for (a, &ca) in p.monomial_coeffs() {
        for (b, &cb) in q.monomial_coeffs() {
            let mut moment = 1.0;
            let dim = a.min_dim().max(b.min_dim());
            for i in 0..dim {
                moment *= tables::gaussian_moment(a.exponent(i) + b.exponent(i));
                if moment == 0.0 {
                    break;
                }
            }
            acc += ca * cb * moment;
        }
    }
    acc
}

// --- serialization -------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct TermDto {
    idx: Vec<u32>,
    c: f64,
}

#[derive(Serialize, Deserialize)]
struct PolyDto {
    dim: usize,
    basis: String,
    terms: Vec<TermDto>,
}

impl HermitePoly {
    /// JSON of the form `{"dim": n, "basis": "hermite", "terms": [{"idx": [...], "c": ...}]}`.
    pub fn to_json(&self, basis: Basis) -> String {
        let terms = match basis {
            Basis::Hermite => &self.hermite,
            Basis::Monomial => self.monomial_coeffs(),
        };
        let dto = PolyDto {
            dim: self.dim,
            basis: match basis {
                Basis::Hermite => "hermite".into(),
                Basis::Monomial => "monomial".into(),
            },
            terms: terms
                .iter()
                .map(|(a, &c)| TermDto {
                    idx: a.to_dense(self.dim),
                    c,
                })
                .collect(),
        };
        serde_json::to_string(&dto).expect("polynomial serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self, PolyError> {
        let dto: PolyDto = serde_json::from_str(s).map_err(|e| PolyError::Serde(e.to_string()))?;
        let terms: Vec<(MultiIndex, f64)> = dto
            .terms
            .into_iter()
            .map(|t| (MultiIndex::new(t.idx), t.c))
            .collect();
        match dto.basis.as_str() {
            "hermite" => Self::from_hermite_terms(dto.dim, terms),
            "monomial" => Self::from_monomial_terms(dto.dim, terms),
            other => Err(PolyError::Serde(format!("unknown basis {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    Hermite,
    Monomial,
}

impl Serialize for HermitePoly {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let dto = PolyDto {
            dim: self.dim,
            basis: "hermite".into(),
            terms: self
                .hermite
                .iter()
                .map(|(a, &c)| TermDto {
                    idx: a.to_dense(self.dim),
                    c,
                })
                .collect(),
        };
        dto.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for HermitePoly {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let dto = PolyDto::deserialize(deserializer)?;
        let terms: Vec<(MultiIndex, f64)> = dto
            .terms
            .into_iter()
            .map(|t| (MultiIndex::new(t.idx), t.c))
            .collect();
        let build = match dto.basis.as_str() {
            "hermite" => Self::from_hermite_terms(dto.dim, terms),
            "monomial" => Self::from_monomial_terms(dto.dim, terms),
            other => return Err(serde::de::Error::custom(format!("unknown basis {other:?}"))),
        };
        build.map_err(|e| serde::de::Error::custom(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(dim: usize, a: &[u32]) -> HermitePoly {
        HermitePoly::hermite_basis(dim, MultiIndex::new(a.to_vec())).unwrap()
    }

    #[test]
    fn norms_are_pythagorean() {
        // ||H_(2,1)|| = 1; ||3 H_a + 4 H_b|| = 5.
        assert!((h(2, &[2, 1]).l2_norm() - 1.0).abs() < 1e-15);
        let p = h(2, &[2, 0]).scale(3.0).add(&h(2, &[0, 1]).scale(4.0));
        assert!((p.l2_norm() - 5.0).abs() < 1e-15);
        // ||x^2|| = sqrt(3) = sqrt(2 + 1) from x^2 = sqrt(2) H_2 + H_0.
        let x2 = HermitePoly::from_monomial_terms(1, [(MultiIndex::new(vec![2]), 1.0)]).unwrap();
        assert!((x2.l2_norm() - 3.0f64.sqrt()).abs() < 1e-12);
        assert!((x2.hermite_coeff(&MultiIndex::new(vec![2])) - 2.0f64.sqrt()).abs() < 1e-12);
        assert!((x2.hermite_coeff(&MultiIndex::zero()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn evaluation_agrees_across_bases() {
        // H_2 at 1 -> 0; H_2 at 0 -> -1/sqrt(2); H_(1,1) at (2,3) -> 6.
        let h2 = h(1, &[2]);
        assert!(h2.eval(&[1.0]).unwrap().abs() < 1e-14);
        assert!((h2.eval(&[0.0]).unwrap() + 1.0 / 2.0f64.sqrt()).abs() < 1e-14);
        let h11 = h(2, &[1, 1]);
        assert!((h11.eval(&[2.0, 3.0]).unwrap() - 6.0).abs() < 1e-14);
        for x in [[-1.3, 0.4], [0.2, 2.2]] {
            let p = h(2, &[2, 1]).scale(0.7).add(&h(2, &[0, 3]).scale(-0.2));
            let a = p.eval(&x).unwrap();
            let b = p.eval_hermite_form(&x).unwrap();
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
    }

    #[test]
    fn basis_round_trip() {
        let p = HermitePoly::from_monomial_terms(
            2,
            [
                (MultiIndex::new(vec![2, 1]), 0.3),
                (MultiIndex::new(vec![0, 2]), -1.2),
                (MultiIndex::zero(), 0.5),
            ],
        )
        .unwrap();
        let back = HermitePoly::from_hermite_terms(
            2,
            p.hermite_coeffs().iter().map(|(a, &c)| (a.clone(), c)),
        )
        .unwrap();
        for (a, &c) in p.monomial_coeffs() {
            let c2 = back.monomial_coeffs().get(a).copied().unwrap_or(0.0);
            assert!((c - c2).abs() < 1e-10);
        }
    }

    #[test]
    fn harmonic_components_partition() {
        let x2 = HermitePoly::from_monomial_terms(1, [(MultiIndex::new(vec![2]), 1.0)]).unwrap();
        // (x^2)^[2] = x^2 - 1.
        let k2 = x2.harmonic_component(2);
        assert!((k2.eval(&[1.5]).unwrap() - (1.5f64 * 1.5 - 1.0)).abs() < 1e-12);
        let h11 = h(2, &[1, 1]);
        assert!(h11.harmonic_component(2).sub(&h11).l2_norm() < 1e-15);
        assert!(h11.harmonic_component(1).is_zero());
        // Components sum back to the polynomial.
        let p = x2.add(&HermitePoly::coordinate(1, 0).scale(2.5));
        let mut sum = HermitePoly::zero(1);
        for k in p.harmonic_degrees() {
            sum = sum.add(&p.harmonic_component(k));
        }
        assert!(sum.sub(&p).l2_norm() < 1e-14);
    }

    #[test]
    fn gradient_examples() {
        // grad H_2 (1D) = sqrt(2) x, and E[(sqrt2 x)^2] = 2 = 2 ||H_2||^2.
        let g = h(1, &[2]).partial(0);
        assert!((g.eval(&[1.0]).unwrap() - 2.0f64.sqrt()).abs() < 1e-14);
        assert!((g.l2_norm().powi(2) - 2.0).abs() < 1e-12);
        assert!(HermitePoly::constant(1, 1.0).partial(0).is_zero());
        // D_(0,1)(x1 x2) = x1.
        let d = h(2, &[1, 1]).directional_derivative(&[0.0, 1.0]).unwrap();
        assert!(d.sub(&HermitePoly::coordinate(2, 0)).l2_norm() < 1e-14);
    }

    #[test]
    fn gradient_energy_identity() {
        // Harmonic p: sum_i ||dp/dx_i||^2 = d ||p||^2 exactly; mixed: strictly less.
        let p = h(2, &[2, 1]).scale(1.3).add(&h(2, &[0, 3]).scale(-0.4));
        let lhs: f64 = p.gradient().iter().map(|g| g.l2_norm().powi(2)).sum();
        assert!((lhs - 3.0 * p.l2_norm().powi(2)).abs() < 1e-9 * lhs);
        let mixed = p.add(&h(2, &[1, 0]).scale(2.0));
        let lhs2: f64 = mixed.gradient().iter().map(|g| g.l2_norm().powi(2)).sum();
        assert!(lhs2 < 3.0 * mixed.l2_norm().powi(2) - 1e-3);
    }

    #[test]
    fn compose_examples() {
        // h(y) = y^2 over q = (x1) -> x1^2.
        let hy = HermitePoly::from_monomial_terms(1, [(MultiIndex::new(vec![2]), 1.0)]).unwrap();
        let q = PolyVec::new(vec![HermitePoly::coordinate(1, 0)]).unwrap();
        let c = compose(&hy, &q, 2).unwrap();
        assert!((c.eval(&[3.0]).unwrap() - 9.0).abs() < 1e-12);
        // h(y1,y2) = y1 y2 over (x1, x1) -> x1^2.
        let hyy =
            HermitePoly::from_monomial_terms(2, [(MultiIndex::new(vec![1, 1]), 1.0)]).unwrap();
        let q2 = PolyVec::new(vec![
            HermitePoly::coordinate(1, 0),
            HermitePoly::coordinate(1, 0),
        ])
        .unwrap();
        let c2 = compose(&hyy, &q2, 2).unwrap();
        assert!((c2.eval(&[-2.0]).unwrap() - 4.0).abs() < 1e-12);
        // h(y) = y^2 over H_2 -> ((x^2-1)/sqrt2)^2 = (x^4 - 2x^2 + 1)/2.
        let c3 = compose(&hy, &PolyVec::new(vec![h(1, &[2])]).unwrap(), 4).unwrap();
        for x in [-1.7, 0.3, 2.1f64] {
            let expect = (x.powi(4) - 2.0 * x * x + 1.0) / 2.0;
            assert!((c3.eval(&[x]).unwrap() - expect).abs() < 1e-10);
        }
        // Weighted-degree constraint rejects h(y)=y^2 over a quadratic at bound 3.
        let err = compose(&hy, &PolyVec::new(vec![h(1, &[2])]).unwrap(), 3);
        assert!(matches!(err, Err(PolyError::WeightedDegreeExceeded { .. })));
    }

    #[test]
    fn moment_oracle_orthonormality_spot() {
        let a = h(2, &[2, 1]);
        let b = h(2, &[1, 2]);
        assert!((gaussian_moment_inner_product(&a, &a) - 1.0).abs() < 1e-10);
        assert!(gaussian_moment_inner_product(&a, &b).abs() < 1e-10);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let p = h(3, &[1, 0, 2]).scale(0.1234567890123456789);
        for basis in [Basis::Hermite, Basis::Monomial] {
            let s = p.to_json(basis);
            let q = HermitePoly::from_json(&s).unwrap();
            for (a, &c) in p.hermite_coeffs() {
                let c2 = q.hermite_coeff(a);
                match basis {
                    Basis::Hermite => assert_eq!(c, c2),
                    Basis::Monomial => assert!((c - c2).abs() < 1e-12),
                }
            }
        }
    }

    #[test]
    fn mc_examples() {
        assert!((h(1, &[3]).max_coeff() - 3.0 / 6.0f64.sqrt()).abs() < 1e-12);
        assert_eq!(HermitePoly::zero(2).max_coeff(), 0.0);
    }
}
