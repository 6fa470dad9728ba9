//! Super non-singularity testing.
//!
//! A set of harmonic polynomials, grouped by degree into `S_k`, is
//! `(eps, N)`-super non-singular when for every level `k` and every unit
//! combination `a` over `S_k`,
//!
//! ```text
//! Pr[ || grad_x D_{y^{(k-1)}} ... D_{y^{(1)}} (sum_i a_i q_i) ||_2 < eps ] < eps^N .
//! ```
//!
//! The searcher here is a falsifier: it hunts for a combination violating
//! the display (with the relaxed thresholds `eps/2` and `eps^N / 2`) and
//! returns a certificate when it finds one. Because a degree-k polynomial
//! loses one degree per directional derivative, the iterated derivative of a
//! degree-k combination is linear in `x`, so its `x`-gradient is a constant
//! vector determined by the `y` draws alone; the Monte-Carlo samples are
//! tuples `(y^{(1)}, ..., y^{(k-1)})`.

use nalgebra::DMatrix;

use crate::error::SnptError;
use crate::index::MultiIndex;
use crate::poly::{HermitePoly, PolyVec};
use crate::rng;

#[derive(Debug, Clone)]
pub struct SnptParams {
    pub epsilon: f64,
    /// The probability exponent `N`.
    pub n_exponent: u32,
    /// Coefficient lattice pitch for the exhaustive search.
    pub grid_step: f64,
    /// Random unit directions when the lattice is infeasible.
    pub n_dirs: usize,
    /// Monte-Carlo samples per probability estimate.
    pub n_mc: usize,
    pub seed: u64,
    pub workers: usize,
    /// Lattice candidate cap; larger lattices fall back to random
    /// directions with coordinate descent.
    pub max_lattice: usize,
    /// Override for the derivative threshold (default `eps / 2`).
    pub deriv_threshold: Option<f64>,
    /// Override for the probability threshold (default `eps^N / 2`).
    pub prob_threshold: Option<f64>,
    /// Relative singular-value cutoff used by the lower-degree split.
    pub split_rank_tol: f64,
    /// Exponent used when checking that an initial set is super
    /// non-singular at the stronger `(eps^{1/3}, N')` level.
    pub initial_check_exponent: u32,
}

impl SnptParams {
    pub fn new(epsilon: f64, n_exponent: u32, seed: u64) -> Self {
        assert!(epsilon > 0.0 && epsilon < 1.0);
        SnptParams {
            epsilon,
            n_exponent,
            grid_step: epsilon.powi(3),
            n_dirs: 200,
            n_mc: 20_000,
            seed,
            workers: 1,
            max_lattice: 2_000_000,
            deriv_threshold: None,
            prob_threshold: None,
            split_rank_tol: 1e-7,
            initial_check_exponent: 1,
        }
    }

    pub fn deriv_threshold(&self) -> f64 {
        self.deriv_threshold.unwrap_or(self.epsilon / 2.0)
    }

    pub fn prob_threshold(&self) -> f64 {
        self.prob_threshold
            .unwrap_or(self.epsilon.powi(self.n_exponent as i32) / 2.0)
    }
}

/// A combination witnessing the failure of super non-singularity at level `k`.
#[derive(Debug, Clone)]
pub struct ViolationCertificate {
    pub k: u32,
    /// Indices (into the searched set) of the degree-`k` members.
    pub member_indices: Vec<usize>,
    /// Unit-normalized combination coefficients over those members.
    pub a: Vec<f64>,
    /// Empirical probability of the small-derivative event at `a`.
    pub est_prob: f64,
    pub threshold_used: f64,
}

/// Searches for a violation certificate, levels ascending; within a level
/// the best (highest empirical probability) violating combination is
/// returned. `None` means the falsifier found nothing, not a proof of super
/// non-singularity.
pub fn snpt_violation_search(
    polys: &[HermitePoly],
    params: &SnptParams,
) -> Result<Option<ViolationCertificate>, SnptError> {
    let mut by_degree: Vec<(u32, Vec<usize>)> = Vec::new();
    for (i, p) in polys.iter().enumerate() {
        let norm = p.l2_norm();
        if (norm - 1.0).abs() > 1e-6 {
            return Err(SnptError::NotNormalized { index: i, norm });
        }
        let k = p.harmonic_degree().ok_or(SnptError::NotPureHarmonic)?;
        match by_degree.iter_mut().find(|(deg, _)| *deg == k) {
            Some((_, v)) => v.push(i),
            None => by_degree.push((k, vec![i])),
        }
    }
    by_degree.sort_by_key(|(k, _)| *k);

    let deriv_thresh = params.deriv_threshold();
    let prob_thresh = params.prob_threshold();

    for (k, members) in by_degree {
        if k == 1 {
            // The degree-1 event is deterministic: the iterated-derivative
            // gradient of a linear combination IS its coefficient vector, so
            // the exact minimizer over unit combinations is the bottom
            // eigenvector of the Gram matrix.
            if let Some(cert) = linear_level_certificate(polys, &members, deriv_thresh, prob_thresh)
            {
                return Ok(Some(cert));
            }
            continue;
        }
        let grads = sample_derivative_gradients(polys, &members, k, params);
        // Score = (violation probability, mean derivative norm). Higher
        // probability wins; ties break toward the deeper cancellation so an
        // exact linear dependence beats a merely-within-threshold one.
        let score = |a: &[f64]| -> (f64, f64) {
            let mut hits = 0usize;
            let mut norm_sum = 0.0;
            for sample in &grads {
                let mut norm_sq = 0.0;
                let n = sample[0].len();
                for t in 0..n {
                    let mut c = 0.0;
                    for (ai, gi) in a.iter().zip(sample) {
                        c += ai * gi[t];
                    }
                    norm_sq += c * c;
                }
                let norm = norm_sq.sqrt();
                norm_sum += norm;
                if norm < deriv_thresh {
                    hits += 1;
                }
            }
            (
                hits as f64 / grads.len() as f64,
                norm_sum / grads.len() as f64,
            )
        };
        let better = |a: (f64, f64), b: (f64, f64)| a.0 > b.0 || (a.0 == b.0 && a.1 < b.1);

        let candidates = candidate_directions(members.len(), params, k, &score);
        let mut best: Option<(Vec<f64>, (f64, f64))> = None;
        for cand in &candidates {
            let s = score(cand);
            if s.0 > prob_thresh && best.as_ref().map_or(true, |(_, bs)| better(s, *bs)) {
                best = Some((cand.clone(), s));
            }
        }
        if let Some((a, _)) = best {
            // Renormalize to the unit sphere and re-measure there.
            let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
            let mut unit: Vec<f64> = a.iter().map(|v| v / norm).collect();
            if let Some(first) = unit.iter().find(|v| v.abs() > 1e-12) {
                if *first < 0.0 {
                    for v in &mut unit {
                        *v = -*v;
                    }
                }
            }
            let (est_prob, _) = score(&unit);
            if est_prob > prob_thresh {
                return Ok(Some(ViolationCertificate {
                    k,
                    member_indices: members,
                    a: unit,
                    est_prob,
                    threshold_used: prob_thresh,
                }));
            }
        }
    }
    Ok(None)
}

/// Exact violation check for the degree-1 level: minimize
/// `||sum_i a_i grad q_i||` over unit `a` through the Gram matrix.
fn linear_level_certificate(
    polys: &[HermitePoly],
    members: &[usize],
    deriv_thresh: f64,
    prob_thresh: f64,
) -> Option<ViolationCertificate> {
    let dim = polys[members[0]].dim();
    let vectors: Vec<Vec<f64>> = members
        .iter()
        .map(|&i| {
            (0..dim)
                .map(|t| polys[i].hermite_coeff(&MultiIndex::var(t)))
                .collect()
        })
        .collect();
    let m = members.len();
    let mut gram = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            gram[(i, j)] = vectors[i]
                .iter()
                .zip(&vectors[j])
                .map(|(a, b)| a * b)
                .sum::<f64>();
        }
    }
    let eig = gram.symmetric_eigen();
    let (mut best_idx, mut best_val) = (0usize, f64::INFINITY);
    for (idx, &val) in eig.eigenvalues.iter().enumerate() {
        if val < best_val {
            best_val = val;
            best_idx = idx;
        }
    }
    let min_norm = best_val.max(0.0).sqrt();
    if min_norm >= deriv_thresh {
        return None;
    }
    let mut a: Vec<f64> = (0..m).map(|i| eig.eigenvectors[(i, best_idx)]).collect();
    if let Some(first) = a.iter().find(|v| v.abs() > 1e-12) {
        if *first < 0.0 {
            for v in &mut a {
                *v = -*v;
            }
        }
    }
    Some(ViolationCertificate {
        k: 1,
        member_indices: members.to_vec(),
        a,
        est_prob: 1.0,
        threshold_used: prob_thresh,
    })
}

/// For each Monte-Carlo tuple of directions, the constant vectors
/// `grad_x D_{y^{(k-1)}} ... D_{y^{(1)}} q_i` for every member `i`.
fn sample_derivative_gradients(
    polys: &[HermitePoly],
    members: &[usize],
    k: u32,
    params: &SnptParams,
) -> Vec<Vec<Vec<f64>>> {
    let dim = polys[members[0]].dim();
    let effective_samples = if k == 1 { 1 } else { params.n_mc };
    let mut rng = rng::stream(params.seed, 10_000 + k as u64);
    let mut out = Vec::with_capacity(effective_samples);
    for _ in 0..effective_samples {
        let dirs: Vec<Vec<f64>> = (0..k.saturating_sub(1))
            .map(|_| rng::gaussian_vector(&mut rng, dim))
            .collect();
        let mut per_member = Vec::with_capacity(members.len());
        for &i in members {
            let mut p = polys[i].clone();
            for y in &dirs {
                p = p.directional_derivative(y).expect("dims agree");
            }
            // p is now linear in x; its gradient is the degree-1 coefficient vector.
            let grad: Vec<f64> = (0..dim)
                .map(|t| p.hermite_coeff(&MultiIndex::var(t)))
                .collect();
            per_member.push(grad);
        }
        out.push(per_member);
    }
    out
}

/// Candidate combination vectors on (a neighborhood of) the unit sphere.
///
/// Small member counts get the exhaustive lattice of pitch `grid_step` over
/// `[-2, 2]^m` restricted to the norm window `(0.9, 1.1)`; larger sets get
/// random unit directions refined by greedy coordinate descent against the
/// provided score.
fn candidate_directions<F>(m: usize, params: &SnptParams, k: u32, score: &F) -> Vec<Vec<f64>>
where
    F: Fn(&[f64]) -> (f64, f64),
{
    let steps_per_axis = (4.0 / params.grid_step).ceil() as usize + 1;
    let lattice_size = steps_per_axis.checked_pow(m as u32);
    if m <= 3 && lattice_size.is_some_and(|s| s <= params.max_lattice) {
        let mut out = Vec::new();
        let axis: Vec<f64> = (0..steps_per_axis)
            .map(|i| -2.0 + i as f64 * params.grid_step)
            .filter(|v| v.abs() <= 2.0 + 1e-12)
            .collect();
        let mut idx = vec![0usize; m];
        loop {
            let a: Vec<f64> = idx.iter().map(|&i| axis[i]).collect();
            let norm_sq: f64 = a.iter().map(|v| v * v).sum();
            if norm_sq > 0.9 && norm_sq < 1.1 {
                // Antipodal pairs score identically; keep one representative.
                if a.iter()
                    .find(|v| v.abs() > 1e-12)
                    .map_or(false, |v| *v > 0.0)
                {
                    out.push(a);
                }
            }
            let mut pos = 0;
            loop {
                if pos == m {
                    return out;
                }
                idx[pos] += 1;
                if idx[pos] < axis.len() {
                    break;
                }
                idx[pos] = 0;
                pos += 1;
            }
        }
    } else {
        let mut rng = rng::stream(params.seed, 20_000 + k as u64);
        let mut out = Vec::new();
        for _ in 0..params.n_dirs {
            let mut a = rng::gaussian_vector(&mut rng, m);
            normalize(&mut a);
            // Greedy coordinate descent at shrinking step sizes.
            let mut best_score = score(&a);
            for &step in &[0.5, 0.2, 0.05, 0.01] {
                let mut improved = true;
                while improved {
                    improved = false;
                    for c in 0..m {
                        for sgn in [1.0, -1.0] {
                            let mut cand = a.clone();
                            cand[c] += sgn * step;
                            normalize(&mut cand);
                            let s = score(&cand);
                            if s.0 > best_score.0 || (s.0 == best_score.0 && s.1 < best_score.1) {
                                best_score = s;
                                a = cand;
                                improved = true;
                            }
                        }
                    }
                }
            }
            out.push(a);
        }
        out
    }
}

fn normalize(a: &mut [f64]) {
    let n = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n > 0.0 {
        for v in a.iter_mut() {
            *v /= n;
        }
    } else {
        a[0] = 1.0;
    }
}

/// Empirical `Pr[sigma_min(Jac_q(x)) <= delta]` over `x ~ N(0, I)`.
pub fn jacobian_singularity_probe(
    q: &PolyVec,
    delta: f64,
    n_mc: usize,
    seed: u64,
    workers: usize,
) -> Result<f64, SnptError> {
    let m = q.len();
    let n = q.dim();
    if m > n {
        return Err(SnptError::RankDeficientSetup { m, dim: n });
    }
    let hits = rng::sharded_sum(seed, 0, n_mc, workers, 1, |rng, count| {
        let mut acc = 0.0;
        for _ in 0..count {
            let x = rng::gaussian_vector(rng, n);
            let rows = q.jacobian_at(&x).expect("dims agree");
            let flat: Vec<f64> = rows.iter().flatten().copied().collect();
            let mat = DMatrix::from_row_slice(m, n, &flat);
            let sv = mat.singular_values();
            let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
            if smin <= delta {
                acc += 1.0;
            }
        }
        vec![acc]
    });
    Ok(hits[0] / n_mc as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coords(dim: usize, n: usize) -> Vec<HermitePoly> {
        (0..n).map(|i| HermitePoly::coordinate(dim, i)).collect()
    }

    fn h2_in(dim: usize, var: usize) -> HermitePoly {
        HermitePoly::hermite_basis(dim, MultiIndex::var(var).with_exponent(var, 2)).unwrap()
    }

    #[test]
    fn independent_coordinates_never_violate() {
        // grad(a1 x1 + a2 x2) = a with ||a|| ~ 1, never below eps/2 for eps < 0.9.
        let polys = coords(2, 2);
        let params = SnptParams {
            grid_step: 0.05,
            n_mc: 10_000,
            ..SnptParams::new(0.5, 2, 1)
        };
        assert!(snpt_violation_search(&polys, &params).unwrap().is_none());
    }

    #[test]
    fn near_collinear_pair_yields_cancellation_certificate() {
        // q1 = H2(x1), q2 = (H2(x1) + eta H2(x2)) / sqrt(1 + eta^2): the
        // difference direction leaves ~eta H2(x2), whose derivative gradient
        // is tiny with probability ~1 at this scale.
        let eta = 0.01f64;
        let q1 = h2_in(2, 0);
        let q2 = h2_in(2, 0)
            .add(&h2_in(2, 1).scale(eta))
            .scale(1.0 / (1.0 + eta * eta).sqrt());
        let params = SnptParams {
            grid_step: 0.05,
            n_mc: 10_000,
            ..SnptParams::new(0.05, 2, 7)
        };
        let cert = snpt_violation_search(&[q1, q2], &params)
            .unwrap()
            .expect("certificate expected");
        assert_eq!(cert.k, 2);
        let along = (cert.a[0] - cert.a[1]) / 2.0f64.sqrt();
        assert!(along.abs() >= 0.95, "a = {:?}", cert.a);
        assert!(cert.est_prob > 0.5);
    }

    #[test]
    fn separated_quadratics_balanced_directions_do_not_cancel() {
        // For S = {H2(x1), H2(x2)} the balanced combination has derivative
        // gradient sqrt(2) (a1 y1, a2 y2); the small-norm event needs both
        // coordinates tiny, which has probability ~eps^2/8 < eps^N/2.
        // (Axis-aligned combinations concentrate on one coordinate and do
        // violate at N = 2; that is a property of single rank-one
        // quadratics, not of the pair.)
        let polys = vec![h2_in(2, 0), h2_in(2, 1)];
        let params = SnptParams {
            n_mc: 40_000,
            ..SnptParams::new(0.05, 2, 3)
        };
        let grads = sample_derivative_gradients(&polys, &[0, 1], 2, &params);
        let balanced = [0.5f64.sqrt(), 0.5f64.sqrt()];
        let thresh = params.deriv_threshold();
        let hits = grads
            .iter()
            .filter(|s| {
                let v0 = balanced[0] * s[0][0] + balanced[1] * s[1][0];
                let v1 = balanced[0] * s[0][1] + balanced[1] * s[1][1];
                (v0 * v0 + v1 * v1).sqrt() < thresh
            })
            .count();
        let est = hits as f64 / grads.len() as f64;
        assert!(est < params.prob_threshold(), "est={est}");
    }

    #[test]
    fn monotone_in_epsilon_on_the_collinear_instance() {
        let eta = 0.01f64;
        let q1 = h2_in(2, 0);
        let q2 = h2_in(2, 0)
            .add(&h2_in(2, 1).scale(eta))
            .scale(1.0 / (1.0 + eta * eta).sqrt());
        let polys = [q1, q2];
        let mut found = Vec::new();
        for eps in [0.05, 0.1] {
            let params = SnptParams {
                grid_step: 0.05,
                n_mc: 10_000,
                ..SnptParams::new(eps, 2, 7)
            };
            found.push(
                snpt_violation_search(&polys, &params)
                    .unwrap()
                    .unwrap()
                    .est_prob,
            );
        }
        assert!(found[1] >= found[0] - 1e-9);
    }

    #[test]
    fn jacobian_probe_examples() {
        // (x1, x2): Jacobian is a fixed orthonormal selection, sigma_min = 1.
        let q = PolyVec::new(coords(2, 2)).unwrap();
        assert_eq!(
            jacobian_singularity_probe(&q, 0.5, 10_000, 1, 1).unwrap(),
            0.0
        );
        // (x1 x2): sigma_min = ||(x2, x1)||; Pr[x1^2 + x2^2 <= 0.01] ~ 0.005.
        let q2 = PolyVec::new(vec![HermitePoly::hermite_basis(
            2,
            MultiIndex::new(vec![1, 1]),
        )
        .unwrap()])
        .unwrap();
        let p = jacobian_singularity_probe(&q2, 0.1, 100_000, 2, 1).unwrap();
        assert!((p - 0.005).abs() < 0.002, "p={p}");
        // (x1, x1): rank-deficient, probability 1.
        let q3 = PolyVec::new(vec![
            HermitePoly::coordinate(2, 0),
            HermitePoly::coordinate(2, 0),
        ])
        .unwrap();
        assert_eq!(
            jacobian_singularity_probe(&q3, 0.01, 1_000_0, 3, 1).unwrap(),
            1.0
        );
    }

    #[test]
    fn rank_deficient_setup_rejected() {
        let q = PolyVec::new(coords(1, 1)).unwrap();
        let q3 = PolyVec::new(vec![
            q.components()[0].clone(),
            HermitePoly::coordinate(1, 0),
        ])
        .unwrap();
        assert!(matches!(
            jacobian_singularity_probe(&q3, 0.1, 10_000, 1, 1),
            Err(SnptError::RankDeficientSetup { .. })
        ));
    }
}
