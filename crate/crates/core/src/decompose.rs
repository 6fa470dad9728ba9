//! The extendible super non-singular decomposition engine.
//!
//! Given an already well-conditioned initial set `q_1, ..., q_l` and a
//! target polynomial `p`, the engine maintains a partial decomposition
//! (primitives, magnitude coefficients, composition polynomial) with
//!
//! ```text
//! p(x) ~= h(eps^{b_1} q_1(x), ..., eps^{b_m} q_m(x))
//! ```
//!
//! and repeatedly: finds a violating combination at some degree level k,
//! splits it into linear-times-lower products, and rewrites one non-initial
//! primitive of that level in terms of the new pieces. Each rewrite is exact
//! value-preserving algebra; error enters only when a saturated primitive
//! (magnitude at `M + 3d`) is removed. Every rewrite strictly decreases the
//! per-degree weighted-magnitude potential lexicographically from the top
//! degree down, which is what bounds the process in practice (the hard cap
//! `max_rewrites` stands in for the transfinite termination argument).

use crate::error::SnptError;
use crate::index::MultiIndex;
use crate::poly::{compose, HermitePoly, PolyVec, Terms};
use crate::snpt::{snpt_violation_search, SnptParams, ViolationCertificate};
use crate::split::low_degree_split;

/// The rewrite engine's bookkeeping structure.
#[derive(Debug, Clone)]
pub struct PartialDecomposition {
    /// Number of protected initial polynomials (an unmodified prefix).
    pub ell: usize,
    /// Unit-norm harmonic primitives, each of a single degree.
    pub primitives: Vec<HermitePoly>,
    /// Magnitude coefficients `b_i` in units of 1/6; zero for `i < ell`.
    pub magnitudes_sixths: Vec<u32>,
    /// Composition polynomial over the primitive outputs; its input `i` is
    /// understood as `eps^{b_i} q_i(x)`.
    pub composition: HermitePoly,
    pub big_m: u32,
    pub degree: u32,
    pub epsilon: f64,
}

impl PartialDecomposition {
    pub fn magnitude(&self, i: usize) -> f64 {
        self.magnitudes_sixths[i] as f64 / 6.0
    }

    fn magnitude_cap_sixths(&self) -> u32 {
        6 * (self.big_m + 3 * self.degree)
    }

    /// Evaluates `h(eps^{b_1} q_1(x), ...)`.
    pub fn eval_composition(&self, x: &[f64]) -> Result<f64, SnptError> {
        if self.primitives.is_empty() {
            return Ok(self.composition.hermite_coeff(&MultiIndex::zero()));
        }
        let inputs: Result<Vec<f64>, _> = self
            .primitives
            .iter()
            .enumerate()
            .map(|(i, q)| q.eval(x).map(|v| v * self.epsilon.powf(self.magnitude(i))))
            .collect();
        Ok(self.composition.eval(&inputs?)?)
    }

    /// Expands `h(eps^{b_i} q_i)` into an explicit polynomial over `x`.
    pub fn compose_scaled(&self) -> Result<HermitePoly, SnptError> {
        if self.primitives.is_empty() {
            let c = self.composition.hermite_coeff(&MultiIndex::zero());
            return Ok(HermitePoly::constant(1, c));
        }
        let scaled: Vec<HermitePoly> = self
            .primitives
            .iter()
            .enumerate()
            .map(|(i, q)| q.scale(self.epsilon.powf(self.magnitude(i))))
            .collect();
        let qv = PolyVec::new(scaled)?;
        Ok(compose(&self.composition, &qv, self.degree)?)
    }

    /// Exact coefficient-space residual `p - h(eps^{b} q)`.
    pub fn residual(&self, p: &HermitePoly) -> Result<HermitePoly, SnptError> {
        let mut comp = self.compose_scaled()?;
        if comp.dim() < p.dim() {
            comp = comp.extend_dim(p.dim());
        }
        Ok(p.sub(&comp))
    }

    /// Per-degree weighted magnitude `sum_{deg(q_i) = t} (M + 3d - b_i)`, in
    /// units of 1/6, from the highest degree down. Rewrites must decrease
    /// this vector lexicographically.
    pub fn potential_vector(&self) -> Vec<u64> {
        let cap = self.magnitude_cap_sixths() as u64;
        let mut v = vec![0u64; self.degree as usize];
        for (i, q) in self.primitives.iter().enumerate() {
            let deg = q.harmonic_degree().expect("primitive harmonic") as usize;
            v[self.degree as usize - deg] += cap - self.magnitudes_sixths[i] as u64;
        }
        v
    }

    /// Structural invariants: unit-norm single-degree primitives, magnitude
    /// bounds, and the weighted-degree constraint on the composition.
    pub fn check_invariants(&self) -> Result<(), SnptError> {
        let cap = self.magnitude_cap_sixths();
        for (i, q) in self.primitives.iter().enumerate() {
            let norm = q.l2_norm();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(SnptError::NotNormalized { index: i, norm });
            }
            let deg = q.harmonic_degree().ok_or(SnptError::NotPureHarmonic)?;
            if deg == 0 {
                return Err(SnptError::NotPureHarmonic);
            }
            if self.magnitudes_sixths[i] > cap || (i < self.ell && self.magnitudes_sixths[i] != 0) {
                return Err(SnptError::CoefficientBlowup {
                    name: "magnitude",
                    value: self.magnitude(i),
                    bound: (self.big_m + 3 * self.degree) as f64,
                });
            }
        }
        let degs: Vec<u32> = self
            .primitives
            .iter()
            .map(|q| q.harmonic_degree().unwrap())
            .collect();
        for a in self.composition.monomial_coeffs().keys() {
            let weighted: u32 = a.iter().map(|(i, e)| e * degs[i]).sum();
            if weighted > self.degree {
                return Err(SnptError::Poly(
                    crate::error::PolyError::WeightedDegreeExceeded {
                        got: weighted,
                        bound: self.degree,
                    },
                ));
            }
        }
        Ok(())
    }
}

/// Measured rewrite coefficients against their theoretical bounds
/// (`|gamma| < eps^-1`, `|theta| <= 1`, `|zeta| <= eps^-1`,
/// `|lambda| <= eps^-1/2`, `|iota| <= 1`).
#[derive(Debug, Clone, Default)]
pub struct CoeffStats {
    pub gamma_max: f64,
    pub theta: f64,
    pub zeta_max: f64,
    pub lambda_max: f64,
    pub iota_max: f64,
}

#[derive(Debug, Clone)]
pub struct RewriteRecord {
    pub iteration: usize,
    pub k: u32,
    pub j: usize,
    /// Potential vector after the rewrite.
    pub potential: Vec<u64>,
    pub m: usize,
    pub h_l2: f64,
    pub residual_l2: f64,
    pub coeffs: CoeffStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtendStatus {
    Converged,
    BudgetExhausted,
}

#[derive(Debug)]
pub struct Extension {
    pub decomposition: PartialDecomposition,
    pub status: ExtendStatus,
    /// Exact error polynomial `p - h(eps^b q)`.
    pub error_poly: HermitePoly,
    pub trace: Vec<RewriteRecord>,
}

impl Extension {
    pub fn residual_l2(&self) -> f64 {
        self.error_poly.l2_norm()
    }

    /// Serializes the rewrite trace as JSON lines.
    pub fn trace_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.trace {
            out.push_str(&format!(
                "{{\"iteration\":{},\"k\":{},\"j\":{},\"potential\":{:?},\"m\":{},\"h_l2\":{},\"residual\":{}}}\n",
                r.iteration, r.k, r.j, r.potential, r.m, r.h_l2, r.residual_l2
            ));
        }
        out
    }
}

/// Extends `initial` into a super non-singular set expressing `p`, per the
/// module-level description. The returned primitive list contains `initial`
/// as an unmodified prefix.
pub fn extend_decomposition(
    initial: &[HermitePoly],
    p: &HermitePoly,
    big_m: u32,
    params: &SnptParams,
    max_rewrites: usize,
) -> Result<Extension, SnptError> {
    let eps = params.epsilon;
    let degree = p
        .degree()
        .max(initial.iter().map(|q| q.degree()).max().unwrap_or(0));

    // The initial prefix must itself be well-conditioned at the stronger
    // (eps^{1/3}, N') level; checked, not assumed.
    if !initial.is_empty() {
        let check_params = SnptParams {
            epsilon: eps.cbrt(),
            n_exponent: params.initial_check_exponent,
            grid_step: params.grid_step,
            ..params.clone()
        };
        if let Some(cert) = snpt_violation_search(initial, &check_params)? {
            return Err(SnptError::NotSufficientlyNonSingular {
                k: cert.k,
                est_prob: cert.est_prob,
            });
        }
    }

    let dim = p.dim().max(initial.first().map_or(0, |q| q.dim()));
    let mut primitives: Vec<HermitePoly> = initial.iter().map(|q| q.extend_dim(dim)).collect();
    let mut magnitudes = vec![0u32; primitives.len()];
    // Seed with the harmonic components of p; the constant part lives in h.
    let mut h_terms: Vec<(MultiIndex, f64)> = Vec::new();
    let p0 = p.harmonic_component(0).hermite_coeff(&MultiIndex::zero());
    if p0 != 0.0 {
        h_terms.push((MultiIndex::zero(), p0));
    }
    for k in p.harmonic_degrees() {
        if k == 0 {
            continue;
        }
        let comp = p.harmonic_component(k);
        if let Some(unit) = comp.normalized() {
            let slot = primitives.len();
            primitives.push(unit.extend_dim(dim));
            magnitudes.push(0);
            h_terms.push((MultiIndex::var(slot), comp.l2_norm()));
        }
    }
    let h = HermitePoly::from_monomial_terms(primitives.len().max(1), h_terms)?;
    let mut decomp = PartialDecomposition {
        ell: initial.len(),
        primitives,
        magnitudes_sixths: magnitudes,
        composition: h,
        big_m,
        degree: degree.max(1),
        epsilon: eps,
    };
    decomp.check_invariants()?;

    let mut trace: Vec<RewriteRecord> = Vec::new();
    let mut last_potential = decomp.potential_vector();
    let status = loop {
        drop_saturated(&mut decomp);
        let cert = match snpt_violation_search(&decomp.primitives, params)? {
            None => break ExtendStatus::Converged,
            Some(c) => c,
        };
        if trace.len() >= max_rewrites {
            break ExtendStatus::BudgetExhausted;
        }
        let iteration = trace.len();
        let (j, coeffs) = rewrite(&mut decomp, &cert, params.split_rank_tol)?;
        decomp.check_invariants()?;
        let potential = decomp.potential_vector();
        assert!(
            lex_less(&potential, &last_potential),
            "potential must strictly decrease: {potential:?} vs {last_potential:?}"
        );
        last_potential = potential.clone();
        trace.push(RewriteRecord {
            iteration,
            k: cert.k,
            j,
            potential,
            m: decomp.primitives.len(),
            h_l2: decomp.composition.l2_norm(),
            residual_l2: decomp.residual(p)?.l2_norm(),
            coeffs,
        });
    };

    let error_poly = decomp.residual(p)?;
    Ok(Extension {
        decomposition: decomp,
        status,
        error_poly,
        trace,
    })
}

fn lex_less(a: &[u64], b: &[u64]) -> bool {
    // Potential vectors may change length when the top degree empties; compare
    // by aligned degree slots (both ordered highest degree first, same length
    // because `degree` is fixed).
    a < b
}

/// Removes primitives whose magnitude has saturated at `M + 3d` by setting
/// their composition variable to zero. Protected initial polynomials always
/// have magnitude 0 and are never removed.
fn drop_saturated(decomp: &mut PartialDecomposition) {
    let cap = 6 * (decomp.big_m + 3 * decomp.degree);
    loop {
        let Some(j) =
            (decomp.ell..decomp.primitives.len()).find(|&i| decomp.magnitudes_sixths[i] >= cap)
        else {
            return;
        };
        let m = decomp.primitives.len();
        let zero_sub = HermitePoly::zero(m);
        decomp.composition = substitute_variable(&decomp.composition, m, j, &zero_sub, m);
        remove_slot(decomp, j);
    }
}

/// Removes primitive slot `j`, remapping the composition variables.
fn remove_slot(decomp: &mut PartialDecomposition, j: usize) {
    let m = decomp.primitives.len();
    decomp.primitives.remove(j);
    decomp.magnitudes_sixths.remove(j);
    let mut terms: Vec<(MultiIndex, f64)> = Vec::new();
    for (a, &c) in decomp.composition.monomial_coeffs() {
        debug_assert_eq!(a.exponent(j), 0, "slot must be eliminated before removal");
        let mut e = vec![0u32; m.saturating_sub(1).max(1)];
        for (i, ex) in a.iter() {
            let ni = if i > j { i - 1 } else { i };
            e[ni] = ex;
        }
        terms.push((MultiIndex::new(e), c));
    }
    decomp.composition =
        HermitePoly::from_monomial_terms(m.saturating_sub(1).max(1), terms).expect("remap");
}

/// Substitutes `expr` (over `new_m` variables) for variable `j` of `h`
/// (over `old_m` variables); all other variables keep their index.
fn substitute_variable(
    h: &HermitePoly,
    old_m: usize,
    j: usize,
    expr: &HermitePoly,
    new_m: usize,
) -> HermitePoly {
    debug_assert!(new_m >= old_m);
    let mut acc_terms: Terms = Terms::new();
    let mut expr_powers: Vec<HermitePoly> = vec![HermitePoly::constant(new_m, 1.0), expr.clone()];
    for (a, &c) in h.monomial_coeffs() {
        let e_j = a.exponent(j);
        while expr_powers.len() <= e_j as usize {
            let next = expr_powers.last().unwrap().mul(expr);
            expr_powers.push(next);
        }
        // Monomial over the untouched variables.
        let passthrough = MultiIndex::new(
            (0..new_m)
                .map(|i| if i == j { 0 } else { a.exponent(i) })
                .collect(),
        );
        for (b, &cb) in expr_powers[e_j as usize].monomial_coeffs() {
            *acc_terms.entry(passthrough.mul(b)).or_insert(0.0) += c * cb;
        }
    }
    HermitePoly::from_monomial_terms(new_m, acc_terms).expect("substitution stays in range")
}

/// One rewrite step: split the violating combination and replace the chosen
/// primitive `q_j`. Returns `j` and the measured rewrite coefficients.
fn rewrite(
    decomp: &mut PartialDecomposition,
    cert: &ViolationCertificate,
    rank_tol: f64,
) -> Result<(usize, CoeffStats), SnptError> {
    let eps = decomp.epsilon;
    let sqrt_eps = eps.sqrt();
    let dim = decomp.primitives[0].dim();

    // Selection: j in S_k, j >= ell, a_j > sqrt(eps), maximizing the
    // effective weight |a_j| eps^{-b_j}. This is the rule that makes the
    // cross-term coefficients iota_i = a_i eps^{b_j - b_i} / a_j at most one
    // for every other non-initial member.
    let mut best: Option<(usize, usize, f64)> = None; // (pos in members, global j, score)
    for (pos, &i) in cert.member_indices.iter().enumerate() {
        let aj = cert.a[pos];
        if i >= decomp.ell && aj.abs() > sqrt_eps {
            let score = aj.abs() * eps.powf(-decomp.magnitude(i));
            if best.as_ref().map_or(true, |&(_, _, s)| score > s) {
                best = Some((pos, i, score));
            }
        }
    }
    let Some((pos_j, j, _)) = best else {
        return Err(SnptError::NotSufficientlyNonSingular {
            k: cert.k,
            est_prob: cert.est_prob,
        });
    };
    // Flip the combination so a_j > 0.
    let sign = cert.a[pos_j].signum();
    let a: Vec<f64> = cert.a.iter().map(|v| v * sign).collect();
    let a_j = a[pos_j];
    let b_j = decomp.magnitude(j);

    // q = sum over S_k of a_i q_i.
    let mut qcomb = HermitePoly::zero(dim);
    for (pos, &i) in cert.member_indices.iter().enumerate() {
        qcomb = qcomb.add(&decomp.primitives[i].scale(a[pos]));
    }

    // Split into linear-times-lower pieces, unless the combination is small
    // enough (or outright zero, from an exact linear dependence) that all of
    // its degree-k mass fits in the error slot within the theta bound. The
    // k = 1 case always takes the direct route: its "combination" is already
    // the lower-degree certificate.
    let qk = qcomb.harmonic_component(cert.k);
    let direct = cert.k == 1 || qk.l2_norm() <= 0.9 * a_j * eps.powf(1.0 / 6.0);
    let (pairs, e_poly, remainder) = if direct {
        (Vec::new(), qk.clone(), qcomb.sub(&qk))
    } else {
        let split = low_degree_split(&qcomb, rank_tol)?;
        (split.pairs, split.residual_high, split.remainder)
    };

    let e_norm = e_poly.l2_norm();
    let r_const = remainder
        .harmonic_component(0)
        .hermite_coeff(&MultiIndex::zero());
    let r_comps: Vec<HermitePoly> = remainder
        .harmonic_degrees()
        .into_iter()
        .filter(|&t| t >= 1)
        .map(|t| remainder.harmonic_component(t))
        .collect();

    // New primitive layout: slot j holds the normalized high-degree error
    // (removed when the split is exact); pairs and remainder components get
    // magnitude-0 slots, reusing an existing magnitude-0 primitive whenever
    // the new piece equals it up to sign (splits of near-duplicates produce
    // many exact repeats, and merging them here keeps m from creeping).
    let old_m = decomp.primitives.len();
    let keep_e = e_norm > 1e-12;
    let mut appended: Vec<HermitePoly> = Vec::new();
    #[derive(Clone, Copy)]
    enum SubSlot {
        Pair(usize, usize), // variable indices of (alpha, beta)
        Remainder(usize),
    }
    let mut sub_slots: Vec<(SubSlot, f64)> = Vec::new();

    let mut coeffs = CoeffStats::default();
    let eps_inv = 1.0 / eps;
    let resolve = |poly: HermitePoly, appended: &mut Vec<HermitePoly>| -> (usize, f64) {
        for (i, q) in decomp.primitives.iter().enumerate() {
            if i != j && decomp.magnitudes_sixths[i] == 0 {
                if let Some(s) = sign_match(q, &poly) {
                    return (i, s);
                }
            }
        }
        for (off, q) in appended.iter().enumerate() {
            if let Some(s) = sign_match(q, &poly) {
                return (old_m + off, s);
            }
        }
        appended.push(poly);
        (old_m + appended.len() - 1, 1.0)
    };

    for pair in &pairs {
        let alpha_unit = pair.alpha.normalized().expect("alpha unit");
        let beta_unit = pair.beta.normalized().expect("beta nonzero");
        let gamma = eps.powf(b_j) * pair.alpha.l2_norm() * pair.beta.l2_norm() / a_j;
        coeffs.gamma_max = coeffs.gamma_max.max(gamma.abs());
        check_bound("gamma", gamma, eps_inv, true)?;
        let (va, sa) = resolve(alpha_unit, &mut appended);
        let (vb, sb) = resolve(beta_unit, &mut appended);
        sub_slots.push((SubSlot::Pair(va, vb), gamma * sa * sb));
    }
    for rc in &r_comps {
        let zeta = eps.powf(b_j) * rc.l2_norm() / a_j;
        coeffs.zeta_max = coeffs.zeta_max.max(zeta.abs());
        check_bound("zeta", zeta, eps_inv, false)?;
        let (vr, sr) = resolve(rc.normalized().expect("component nonzero"), &mut appended);
        sub_slots.push((SubSlot::Remainder(vr), zeta * sr));
    }

    let new_m = old_m + appended.len();
    // Substitution expression for y_j over the new variable space.
    let mut expr = HermitePoly::zero(new_m);
    if keep_e {
        // Slot j is reused for the normalized error with magnitude b_j + 1/6;
        // theta pairs with the slot value eps^{b_j + 1/6} e_bar.
        let theta = e_norm * eps.powf(-1.0 / 6.0) / a_j;
        coeffs.theta = theta;
        check_bound("theta", theta, 1.0, false)?;
        expr = expr.add(&HermitePoly::from_monomial_terms(
            new_m,
            [(MultiIndex::var(j), theta)],
        )?);
    }
    for (slot, c) in &sub_slots {
        let term = match slot {
            SubSlot::Pair(i1, i2) => HermitePoly::from_monomial_terms(
                new_m,
                [(MultiIndex::var(*i1).mul(&MultiIndex::var(*i2)), *c)],
            )?,
            SubSlot::Remainder(i) => {
                HermitePoly::from_monomial_terms(new_m, [(MultiIndex::var(*i), *c)])?
            }
        };
        expr = expr.add(&term);
    }
    if r_const != 0.0 {
        expr = expr.add(&HermitePoly::constant(new_m, eps.powf(b_j) * r_const / a_j));
    }
    // Cross terms: -a_i / a_j * eps^{b_j - b_i} for the other members.
    for (pos, &i) in cert.member_indices.iter().enumerate() {
        if i == j {
            continue;
        }
        let coeff = -a[pos] * eps.powf(b_j - decomp.magnitude(i)) / a_j;
        if i < decomp.ell {
            coeffs.lambda_max = coeffs.lambda_max.max(coeff.abs());
            check_bound("lambda", coeff, eps_inv.sqrt(), false)?;
        } else {
            coeffs.iota_max = coeffs.iota_max.max(coeff.abs());
            check_bound("iota", coeff, 1.0, false)?;
        }
        if coeff != 0.0 {
            expr = expr.add(&HermitePoly::from_monomial_terms(
                new_m,
                [(MultiIndex::var(i), coeff)],
            )?);
        }
    }

    let new_h = substitute_variable(&decomp.composition, old_m, j, &expr, new_m);
    let mc_bound = eps.powi(-3 * decomp.degree as i32);
    let mc = new_h.max_coeff();
    if mc > mc_bound * (1.0 + 1e-9) {
        return Err(SnptError::CoefficientBlowup {
            name: "MC(h)",
            value: mc,
            bound: mc_bound,
        });
    }

    // Commit: replace slot j, append the new primitives.
    for poly in appended {
        decomp.primitives.push(poly);
        decomp.magnitudes_sixths.push(0);
    }
    decomp.composition = new_h;
    if keep_e {
        decomp.primitives[j] = e_poly.normalized().expect("norm checked");
        decomp.magnitudes_sixths[j] += 1;
    } else {
        // Exact split: slot j no longer appears in h; drop it.
        remove_slot(decomp, j);
    }
    Ok((j, coeffs))
}

/// `Some(s)` when `b = s * a` coefficient-wise (both unit norm), `s = +-1`.
fn sign_match(a: &HermitePoly, b: &HermitePoly) -> Option<f64> {
    for s in [1.0, -1.0] {
        if a.scale(s).sub(b).l2_norm() < 1e-10 {
            return Some(s);
        }
    }
    None
}

fn check_bound(name: &'static str, value: f64, bound: f64, strict: bool) -> Result<(), SnptError> {
    let ok = if strict {
        value.abs() < bound * (1.0 + 1e-9)
    } else {
        value.abs() <= bound * (1.0 + 1e-9)
    };
    if ok {
        Ok(())
    } else {
        Err(SnptError::CoefficientBlowup { name, value, bound })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn basis(dim: usize, a: &[u32]) -> HermitePoly {
        HermitePoly::hermite_basis(dim, MultiIndex::new(a.to_vec())).unwrap()
    }

    fn desk_params(eps: f64, seed: u64) -> SnptParams {
        SnptParams {
            grid_step: 0.05,
            n_mc: 10_000,
            ..SnptParams::new(eps, 2, seed)
        }
    }

    #[test]
    fn degree_one_target_is_a_singleton() {
        let p = HermitePoly::coordinate(1, 0);
        let ext = extend_decomposition(&[], &p, 3, &desk_params(0.1, 1), 20).unwrap();
        assert_eq!(ext.status, ExtendStatus::Converged);
        assert_eq!(ext.decomposition.primitives.len(), 1);
        assert!(ext.residual_l2() < 1e-12);
        assert!(ext.trace.is_empty());
    }

    #[test]
    fn product_target_extends_a_coordinate_prefix() {
        let initial = [HermitePoly::coordinate(2, 0), HermitePoly::coordinate(2, 1)];
        let p = basis(2, &[1, 1]);
        let ext = extend_decomposition(&initial, &p, 3, &desk_params(0.1, 2), 20).unwrap();
        // Prefix preserved bit-exactly.
        for (i, q) in initial.iter().enumerate() {
            assert_eq!(
                format!("{:?}", q.hermite_coeffs()),
                format!("{:?}", ext.decomposition.primitives[i].hermite_coeffs())
            );
        }
        assert!(ext.residual_l2() <= 1e-8);
        assert_eq!(ext.status, ExtendStatus::Converged);
    }

    #[test]
    fn rank_one_quadratic_cascades_to_linear() {
        // p = H2(x1) violates at desk scale; the engine should split it into
        // x1 * x1, merge the duplicates and converge on {x1}.
        let p = basis(1, &[2]);
        let params = desk_params(0.1, 3);
        let ext = extend_decomposition(&[], &p, 3, &params, 30).unwrap();
        assert_eq!(
            ext.status,
            ExtendStatus::Converged,
            "trace: {}",
            ext.trace_jsonl()
        );
        assert!(ext.residual_l2() < 1e-10, "residual {}", ext.residual_l2());
        // One JSON record per rewrite in the trace stream.
        let jsonl = ext.trace_jsonl();
        assert_eq!(jsonl.lines().count(), ext.trace.len());
        for line in jsonl.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            assert!(v["k"].is_number());
        }
        assert_eq!(ext.decomposition.primitives.len(), 1);
        assert_eq!(ext.decomposition.primitives[0].harmonic_degree(), Some(1));
        assert!(!ext.trace.is_empty());
        // Potential strictly lexicographically decreasing across the trace.
        let mut prev: Option<Vec<u64>> = None;
        for r in &ext.trace {
            if let Some(p) = &prev {
                assert!(r.potential < *p, "{:?} !< {:?}", r.potential, p);
            }
            prev = Some(r.potential.clone());
        }
        // Coefficient bounds from the rewrite rule hold on every record.
        let eps = params.epsilon;
        for r in &ext.trace {
            assert!(r.coeffs.gamma_max < 1.0 / eps);
            assert!(r.coeffs.theta.abs() <= 1.0);
            assert!(r.coeffs.zeta_max <= 1.0 / eps);
            assert!(r.coeffs.lambda_max <= (1.0 / eps).sqrt());
            assert!(r.coeffs.iota_max <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn residual_matches_monte_carlo() {
        let p = basis(2, &[1, 1])
            .scale(0.8)
            .add(&basis(2, &[0, 1]).scale(0.6));
        let ext = extend_decomposition(&[], &p, 3, &desk_params(0.1, 4), 30).unwrap();
        let mut rng = rng::stream(99, 0);
        let mut acc = 0.0;
        let n = 20_000;
        for _ in 0..n {
            let x = rng::gaussian_vector(&mut rng, 2);
            let d = p.eval(&x).unwrap() - ext.decomposition.eval_composition(&x).unwrap();
            acc += d * d;
        }
        let mc = (acc / n as f64).sqrt();
        assert!(mc <= 1e-3, "mc residual {mc}");
        assert!((mc - ext.residual_l2()).abs() < 1e-3);
    }

    #[test]
    fn protected_prefix_is_never_rewritten() {
        // Initial {x1}; p duplicates x1 to force a k=1 merge. The merge must
        // eliminate the non-initial copy, not the protected one.
        let initial = [HermitePoly::coordinate(2, 0)];
        let p = HermitePoly::coordinate(2, 0)
            .scale(0.9)
            .add(&HermitePoly::coordinate(2, 1).scale(0.1))
            .normalized()
            .unwrap();
        let params = desk_params(0.3, 5);
        let ext = extend_decomposition(&initial, &p, 3, &params, 30).unwrap();
        assert_eq!(ext.decomposition.ell, 1);
        assert!(
            ext.decomposition.primitives[0]
                .sub(&initial[0].extend_dim(2))
                .l2_norm()
                < 1e-15
        );
        assert!(ext.residual_l2() < 1e-9);
    }

    #[test]
    fn budget_exhausted_is_reported_not_looped() {
        let p = basis(1, &[2]);
        let ext = extend_decomposition(&[], &p, 3, &desk_params(0.1, 6), 0).unwrap();
        assert_eq!(ext.status, ExtendStatus::BudgetExhausted);
        // Still a valid partial decomposition with an exact residual report.
        assert!(ext.residual_l2() < 1e-10);
        // With enough budget the same instance converges.
        let ok = extend_decomposition(&[], &p, 3, &desk_params(0.1, 6), 10).unwrap();
        assert_eq!(ok.status, ExtendStatus::Converged);
    }
}
