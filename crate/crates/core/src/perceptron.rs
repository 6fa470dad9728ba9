//! Feature lifting, whitening, robust Chow-parameter estimation, and the
//! margin-perceptron update loop.
//!
//! A degree-d PTF over `x` is a halfspace over the lifted feature vector of
//! all distinct monomials of degree at most d. The lift is whitened against
//! the region's (uncorrupted) marginal so that directional L2 norms become
//! Euclidean up to conditioning error, which is what the perceptron's
//! contraction argument needs. Mean estimates are protected against
//! contamination by an iterative spectral filter: while the top covariance
//! eigenvalue is suspiciously large, points with the largest squared
//! projection on the top eigenvector are removed.

use nalgebra::{DMatrix, DVector};

use crate::error::PerceptronError;
use crate::index::{indices_up_to, MultiIndex};

/// A labeled example; `y` is -1 or +1.
#[derive(Debug, Clone)]
pub struct LabeledSample {
    pub x: Vec<f64>,
    pub y: i8,
}

impl LabeledSample {
    pub fn new(x: Vec<f64>, y: i8) -> Self {
        assert!(y == 1 || y == -1);
        LabeledSample { x, y }
    }
}

/// Whitening of the monomial lift fitted to a marginal oracle.
#[derive(Debug, Clone)]
pub struct WhiteningTransform {
    pub feature_indices: Vec<MultiIndex>,
    /// `T = P D^{-1/2}` with near-null eigendirections dropped; whitened
    /// features are `T^t z`.
    pub transform: DMatrix<f64>,
    pub second_moment: DMatrix<f64>,
    /// Eigenvalues below the degeneracy floor that were dropped.
    pub dropped_eigenvalues: Vec<f64>,
    /// Condition number of the whitened moment on held-out oracle points.
    pub validation_condition: f64,
}

impl WhiteningTransform {
    pub fn lifted_dim(&self) -> usize {
        self.feature_indices.len()
    }

    pub fn whitened_dim(&self) -> usize {
        self.transform.ncols()
    }

    /// The monomial lift of a point (no whitening).
    pub fn lift(&self, x: &[f64]) -> Vec<f64> {
        lift_point(&self.feature_indices, x)
    }

    /// Whitened lifted features `T^t z(x)`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let z = DVector::from_vec(self.lift(x));
        (self.transform.transpose() * z).data.into()
    }

    /// Pulls a whitened weight vector back to a polynomial over `x`:
    /// `w . T^t z(x)` has monomial coefficients `T w`.
    pub fn weight_to_poly(&self, w: &[f64], dim: usize) -> crate::poly::HermitePoly {
        let coeffs = &self.transform * DVector::from_column_slice(w);
        let terms: Vec<(MultiIndex, f64)> = self
            .feature_indices
            .iter()
            .cloned()
            .zip(coeffs.iter().copied())
            .collect();
        crate::poly::HermitePoly::from_monomial_terms(dim, terms).expect("lift stays in dim")
    }
}

fn lift_point(indices: &[MultiIndex], x: &[f64]) -> Vec<f64> {
    indices
        .iter()
        .map(|a| {
            let mut v = 1.0;
            for (i, e) in a.iter() {
                v *= x[i].powi(e as i32);
            }
            v
        })
        .collect()
}

/// Degeneracy floor for whitening eigenvalues.
const EIGEN_FLOOR: f64 = 1e-10;

/// Fits the distinct-monomial lift of degree `d` on the oracle points and
/// whitens it; lifts and whitens the labeled samples.
///
/// The moment matrix is fitted on even-indexed oracle points and the
/// whitened condition number is validated on the odd-indexed rest.
pub fn lift_and_whiten(
    samples: &[LabeledSample],
    oracle_points: &[Vec<f64>],
    d: u32,
) -> Result<(Vec<(Vec<f64>, i8)>, WhiteningTransform), PerceptronError> {
    assert!(!oracle_points.is_empty());
    let dim = oracle_points[0].len();
    let indices = indices_up_to(dim, d);
    let f = indices.len();

    let fit: Vec<&Vec<f64>> = oracle_points.iter().step_by(2).collect();
    let hold: Vec<&Vec<f64>> = oracle_points.iter().skip(1).step_by(2).collect();
    let mut moment = DMatrix::zeros(f, f);
    for x in &fit {
        let z = DVector::from_vec(lift_point(&indices, x));
        moment += &z * z.transpose();
    }
    moment /= fit.len() as f64;

    let eig = moment.clone().symmetric_eigen();
    let mut keep: Vec<usize> = Vec::new();
    let mut dropped = Vec::new();
    for (i, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev < EIGEN_FLOOR {
            dropped.push(ev);
        } else {
            keep.push(i);
        }
    }
    if keep.is_empty() {
        return Err(PerceptronError::IllConditioned(
            eig.eigenvalues.iter().copied().fold(f64::NAN, f64::max),
        ));
    }
    let mut transform = DMatrix::zeros(f, keep.len());
    for (col, &i) in keep.iter().enumerate() {
        let scale = eig.eigenvalues[i].sqrt().recip();
        for row in 0..f {
            transform[(row, col)] = eig.eigenvectors[(row, i)] * scale;
        }
    }

    // Held-out condition number of the whitened moment.
    let mut white_moment = DMatrix::zeros(keep.len(), keep.len());
    for x in &hold {
        let z = DVector::from_vec(lift_point(&indices, x));
        let w = transform.transpose() * z;
        white_moment += &w * w.transpose();
    }
    white_moment /= hold.len().max(1) as f64;
    let wev = white_moment.symmetric_eigen().eigenvalues;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for &v in wev.iter() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let validation_condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if validation_condition > 2.0 {
        return Err(PerceptronError::IllConditioned(lo));
    }

    let wt = WhiteningTransform {
        feature_indices: indices,
        transform,
        second_moment: moment,
        dropped_eigenvalues: dropped,
        validation_condition,
    };
    let lifted = samples.iter().map(|s| (wt.apply(&s.x), s.y)).collect();
    Ok((lifted, wt))
}

/// Iterative spectral filter for mean estimation under contamination.
///
/// With `eps = 0` this is exactly the (weighted) empirical mean. Otherwise,
/// while the top covariance eigenvalue exceeds `eigen_threshold`, the points
/// with the largest squared projection on the top eigenvector (the top `eps`
/// weight mass) are removed, for at most `ceil(1/eps)` rounds.
pub fn robust_mean(
    points: &[Vec<f64>],
    weights: Option<&[f64]>,
    eps: f64,
    eigen_threshold: f64,
) -> Result<Vec<f64>, PerceptronError> {
    assert!(eps < 0.25, "filter assumes eps < 1/4");
    assert!(!points.is_empty());
    let d = points[0].len();
    let n = points.len();
    let mut w: Vec<f64> = match weights {
        Some(ws) => ws.to_vec(),
        None => vec![1.0; n],
    };
    let total0: f64 = w.iter().sum();
    let mean_of = |w: &[f64]| -> Vec<f64> {
        let tw: f64 = w.iter().sum();
        let mut mu = vec![0.0; d];
        for (x, &wi) in points.iter().zip(w) {
            for (m, &xv) in mu.iter_mut().zip(x) {
                *m += wi * xv;
            }
        }
        mu.iter_mut().for_each(|m| *m /= tw);
        mu
    };
    if eps == 0.0 {
        return Ok(mean_of(&w));
    }
    let rounds = (1.0 / eps).ceil() as usize;
    for _ in 0..rounds {
        let mu = mean_of(&w);
        let tw: f64 = w.iter().sum();
        if tw < total0 / 2.0 {
            return Err(PerceptronError::FilterDiverged);
        }
        let mut cov = DMatrix::zeros(d, d);
        for (x, &wi) in points.iter().zip(&w) {
            if wi == 0.0 {
                continue;
            }
            let c = DVector::from_iterator(d, x.iter().zip(&mu).map(|(a, b)| a - b));
            cov += wi * &c * c.transpose();
        }
        cov /= tw;
        let eig = cov.symmetric_eigen();
        let (mut top, mut top_i) = (0.0f64, 0usize);
        for (i, &v) in eig.eigenvalues.iter().enumerate() {
            if v > top {
                top = v;
                top_i = i;
            }
        }
        if top <= eigen_threshold {
            return Ok(mu);
        }
        let dir: Vec<f64> = (0..d).map(|r| eig.eigenvectors[(r, top_i)]).collect();
        let scores: Vec<f64> = points
            .iter()
            .map(|x| {
                let p: f64 = x
                    .iter()
                    .zip(&mu)
                    .zip(&dir)
                    .map(|((a, b), v)| (a - b) * v)
                    .sum();
                p * p
            })
            .collect();
        // Weighted (1 - eps) quantile of the scores.
        let mut order: Vec<usize> = (0..n).filter(|&i| w[i] > 0.0).collect();
        order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());
        let cut_mass = tw * eps;
        let mut acc = 0.0;
        let mut removed = 0usize;
        for &i in order.iter().rev() {
            if acc >= cut_mass && removed > 0 {
                break;
            }
            acc += w[i];
            w[i] = 0.0;
            removed += 1;
        }
    }
    let tw: f64 = w.iter().sum();
    if tw < total0 / 2.0 {
        return Err(PerceptronError::FilterDiverged);
    }
    Ok(mean_of(&w))
}

#[derive(Debug, Clone)]
pub struct PerceptronParams {
    pub eps: f64,
    /// The concentration exponent `K`; fixes `gamma = eps^{4/sqrt(K)}` and
    /// `F = eps^{1 - 8/sqrt(K)}`.
    pub k_exponent: u32,
    pub max_iters: usize,
    pub eigen_threshold: f64,
    /// Overrides the robust initial Chow estimate; a testing hook for
    /// exercising the update loop from a bad start.
    pub initial_iterate: Option<Vec<f64>>,
}

impl PerceptronParams {
    pub fn new(eps: f64, k_exponent: u32) -> Self {
        assert!(eps > 0.0 && eps < 1.0);
        assert!(k_exponent >= 4);
        PerceptronParams {
            eps,
            k_exponent,
            max_iters: 200,
            eigen_threshold: 9.0,
            initial_iterate: None,
        }
    }

    pub fn gamma(&self) -> f64 {
        self.eps.powf(4.0 / (self.k_exponent as f64).sqrt())
    }

    pub fn big_f(&self) -> f64 {
        self.eps.powf(1.0 - 8.0 / (self.k_exponent as f64).sqrt())
    }
}

#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub t: usize,
    pub q_norm: f64,
    pub f_hat: f64,
    pub lambda: f64,
    pub qp_dot: f64,
    pub band_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExitReason {
    BandErrorBelowThreshold,
    MaxIters,
}

#[derive(Debug)]
pub struct PerceptronReport {
    pub gamma: f64,
    pub big_f: f64,
    pub iterations: Vec<IterationRecord>,
    pub final_band_error: f64,
    pub final_band_mass: f64,
    pub final_q_norm: f64,
    pub exit: ExitReason,
}

impl PerceptronReport {
    /// CSV with one row per iteration: `t,q_norm,f_hat,lambda,qp_dot,band_mass`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,q_norm,f_hat,lambda,qp_dot,band_mass\n");
        for r in &self.iterations {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.t, r.q_norm, r.f_hat, r.lambda, r.qp_dot, r.band_mass
            ));
        }
        out
    }
}

/// Directional L2 norm of `v` against the oracle's whitened draws.
fn oracle_norm(v: &[f64], oracle: &[Vec<f64>]) -> f64 {
    let acc: f64 = oracle
        .iter()
        .map(|z| {
            let d: f64 = v.iter().zip(z).map(|(a, b)| a * b).sum();
            d * d
        })
        .sum();
    (acc / oracle.len() as f64).sqrt()
}

/// The margin-perceptron loop on whitened lifted samples.
///
/// Starts from a robust estimate of `E[y z]`, and while the disagreement
/// band `B' = {y != sign(q.z), |q.z| >= gamma ||q||_D}` holds at least `2F`
/// empirical mass, steps `q <- q + lambda p` against a robust estimate `p`
/// of the mispredicted-mass direction inside the band.
pub fn perceptron_learn(
    lifted: &[(Vec<f64>, i8)],
    oracle_lifted: &[Vec<f64>],
    params: &PerceptronParams,
) -> Result<(Vec<f64>, f64, PerceptronReport), PerceptronError> {
    assert!(!lifted.is_empty());
    let gamma = params.gamma();
    let big_f = params.big_f();
    let eps = params.eps;
    let dim = lifted[0].0.len();

    let mut q: Vec<f64> = match &params.initial_iterate {
        Some(q0) => q0.clone(),
        None => {
            let chow: Vec<Vec<f64>> = lifted
                .iter()
                .map(|(z, y)| z.iter().map(|v| v * *y as f64).collect())
                .collect();
            robust_mean(&chow, None, eps, params.eigen_threshold)?
        }
    };

    let mut iterations = Vec::new();
    let mut stall = 0usize;
    let mut last_norm = f64::INFINITY;
    let (final_err, final_mass, exit) = loop {
        let q_norm = oracle_norm(&q, oracle_lifted).max(1e-300);
        let margin = gamma * q_norm;
        let mut band = 0usize;
        let mut band_err = 0usize;
        for (z, y) in lifted {
            let s: f64 = q.iter().zip(z).map(|(a, b)| a * b).sum();
            if s.abs() >= margin {
                band += 1;
                let pred = if s >= 0.0 { 1 } else { -1 };
                if pred != *y {
                    band_err += 1;
                }
            }
        }
        let band_mass = band as f64 / lifted.len() as f64;
        let f_hat = (band_err as f64 / lifted.len() as f64).clamp(0.0, 1.0);
        let t = iterations.len();
        if f_hat < 2.0 * big_f {
            break (f_hat, band_mass, ExitReason::BandErrorBelowThreshold);
        }
        if t >= params.max_iters {
            break (f_hat, band_mass, ExitReason::MaxIters);
        }
        if q_norm >= last_norm {
            stall += 1;
            if stall >= 10 {
                return Err(PerceptronError::NoProgress(stall));
            }
        } else {
            stall = 0;
        }
        last_norm = q_norm;

        // Robust estimate of E[y 1{mispredict} z | band].
        let in_band: Vec<Vec<f64>> = lifted
            .iter()
            .filter(|(z, _)| {
                let s: f64 = q.iter().zip(z).map(|(a, b)| a * b).sum();
                s.abs() >= margin
            })
            .map(|(z, y)| {
                let s: f64 = q.iter().zip(z).map(|(a, b)| a * b).sum();
                let pred = if s >= 0.0 { 1 } else { -1 };
                if pred != *y {
                    z.iter().map(|v| v * *y as f64).collect()
                } else {
                    vec![0.0; dim]
                }
            })
            .collect();
        let p = robust_mean(
            &in_band,
            None,
            (2.0 * eps).min(0.24),
            params.eigen_threshold,
        )?;
        let p_norm = oracle_norm(&p, oracle_lifted).max(1e-300);
        let lambda = gamma * f_hat * q_norm / (2.0 * p_norm * p_norm);
        let qp_dot: f64 = q.iter().zip(&p).map(|(a, b)| a * b).sum();
        iterations.push(IterationRecord {
            t,
            q_norm,
            f_hat,
            lambda,
            qp_dot,
            band_mass,
        });
        for (qi, pi) in q.iter_mut().zip(&p) {
            *qi += lambda * pi;
        }
    };
    let final_q_norm = oracle_norm(&q, oracle_lifted);
    let report = PerceptronReport {
        gamma,
        big_f,
        iterations,
        final_band_error: final_err,
        final_band_mass: final_mass,
        final_q_norm,
        exit,
    };
    Ok((q, gamma, report))
}
