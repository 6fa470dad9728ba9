//! The polynomial-set partitioner.
//!
//! Splits the low-margin set `{|p(x)| < eps, q(x) in R}` into polynomial
//! slabs `{x : qbar(x) in cell}` over an extended super non-singular set
//! `qbar`, by hashing Monte-Carlo samples into grid cells and keeping the
//! cells that are both heavy enough and dominated by low-margin points.
//! Conditioned on a kept cell the Gaussian behaves like a box-truncated
//! product measure, which is what restores (anti-)concentration for the
//! next round of learning.

use serde::Serialize;

use crate::decompose::{extend_decomposition, ExtendStatus};
use crate::error::PartitionError;
use crate::poly::HermitePoly;
use crate::region::{Rectangle, Region};
use crate::rng;
use crate::snpt::SnptParams;

#[derive(Debug, Clone)]
pub struct PartitionParams {
    pub epsilon: f64,
    /// Absolute cell side; `None` derives `sqrt(eps) * conditional std` per
    /// coordinate.
    pub cell_side: Option<f64>,
    /// Big-box half-width multiplier of `log^{d/2}(m/eps)`.
    pub box_scale: f64,
    /// Keep a cell only if its conditional mass exceeds this (desk-scale
    /// stand-in for the theory floor `2 eps^{3+5md}`).
    pub mass_floor: f64,
    /// Keep a cell only if its low-margin fraction exceeds this (theory
    /// `2 eps^3`).
    pub inlier_floor: f64,
    /// Monte-Carlo sample budget.
    pub n_mc: usize,
    pub seed: u64,
    /// Hard cap on kept cells (heaviest first); bounds decision-list growth.
    pub max_cells: usize,
    pub snpt: SnptParams,
    pub max_rewrites: usize,
    /// Polynomials whose per-cell small-ball profile is spot-checked.
    pub probe_polys: Vec<HermitePoly>,
    pub probe_ts: Vec<f64>,
    pub probe_n_mc: usize,
}

impl PartitionParams {
    pub fn new(epsilon: f64, seed: u64) -> Self {
        // The violation search is a Monte-Carlo falsifier; below a scale of
        // ~0.05 its thresholds (eps/2, eps^N/2) are unresolvable at desk
        // budgets, so the super non-singularity level is floored there even
        // when the margin width `epsilon` is much smaller.
        let snpt_scale = epsilon.max(0.05);
        PartitionParams {
            epsilon,
            cell_side: None,
            box_scale: 2.0,
            mass_floor: 1e-4,
            inlier_floor: 2.0 * epsilon.powi(3),
            n_mc: 200_000,
            seed,
            max_cells: 64,
            snpt: SnptParams {
                n_mc: 10_000,
                grid_step: 0.05f64.max(snpt_scale.powi(3)),
                ..SnptParams::new(snpt_scale, 2, seed)
            },
            max_rewrites: 60,
            probe_polys: Vec::new(),
            probe_ts: Vec::new(),
            probe_n_mc: 50_000,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CellReport {
    pub id: Vec<i64>,
    /// Mass relative to the parent region.
    pub conditional_mass: f64,
    pub inlier_fraction: f64,
    /// Per probe polynomial, the small-ball profile over `probe_ts`.
    pub probes: Vec<Vec<(f64, f64)>>,
}

#[derive(Debug, Serialize)]
pub struct PartitionReport {
    pub epsilon: f64,
    pub mass_floor: f64,
    pub inlier_floor: f64,
    pub cell_sides: Vec<f64>,
    pub box_half_width: f64,
    pub samples: usize,
    pub region_count: usize,
    /// Absolute Gaussian mass estimate of the parent region.
    pub region_mass: f64,
    pub kept: Vec<CellReport>,
    pub cells_truncated: usize,
    /// `Pr[x in P, x not in any kept cell] / Pr[region]` (condition 3).
    pub coverage_loss: f64,
    /// `Pr[x in kept, |p(x)| >= 2 eps] / Pr[region]` (condition 4).
    pub overshoot: f64,
    /// Raw counts so callers can attach Monte-Carlo error bars.
    pub inlier_count: usize,
    pub missed_inlier_count: usize,
    pub overshoot_count: usize,
    pub decomposition_size: usize,
    pub decomposition_rewrites: usize,
    pub decomposition_residual: f64,
}

impl PartitionReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Runs the partitioner on `{|p| < eps}` inside `region`.
///
/// `p` must have unit-or-less L2 norm; the region must have level >= 1 so
/// the new slabs can carry `level - 1`.
pub fn partition_region(
    p: &HermitePoly,
    region: &Region,
    params: &PartitionParams,
) -> Result<(Vec<Region>, PartitionReport), PartitionError> {
    assert!(region.level >= 1, "region has no partition budget left");
    assert!(
        p.l2_norm() <= 1.0 + 1e-6,
        "margin polynomial must be normalized"
    );
    let eps = params.epsilon;
    let dim = p.dim();

    let ext = extend_decomposition(&region.polys, p, 3, &params.snpt, params.max_rewrites)
        .map_err(PartitionError::Snpt)?;
    if ext.status == ExtendStatus::BudgetExhausted {
        return Err(PartitionError::DecompositionFailed(format!(
            "rewrite budget exhausted with residual {:.3e}",
            ext.residual_l2()
        )));
    }
    let residual = ext.residual_l2();
    if residual > eps.powi(3) {
        return Err(PartitionError::DecompositionFailed(format!(
            "decomposition residual {residual:.3e} above eps^3"
        )));
    }
    let qbar = ext.decomposition.primitives.clone();
    let ell = region.polys.len();
    let m = qbar.len();
    let degree = p.degree().max(1);

    // Sample and bucket.
    let mut rng = rng::stream(params.seed, 0);
    let mut samples: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new(); // (x, qbar values, p value) in-region
    let total = params.n_mc;
    let mut in_region = 0usize;
    for _ in 0..total {
        let x = rng::gaussian_vector(&mut rng, dim);
        let vals: Vec<f64> = qbar
            .iter()
            .map(|q| q.eval(&x).expect("dims agree"))
            .collect();
        if region.rect.contains(&vals[..ell]) {
            in_region += 1;
            let pv = p.eval(&x).expect("dims agree");
            samples.push((x, vals, pv));
        }
    }
    if in_region == 0 {
        return Err(PartitionError::AcceptanceTooLow {
            rate: 0.0,
            floor: 1.0 / total as f64,
        });
    }
    let region_mass = in_region as f64 / total as f64;

    // Geometry: per-coordinate anchors and cell sides. Only the new
    // coordinates (ell..m) are subdivided; the first ell keep the parent's
    // intervals whole, matching the recursive covering by
    // `{q(x) in R, (q_{l+1}..q_m)(x) in R'}` and keeping per-cell sample
    // counts workable.
    let box_half_width =
        params.box_scale * (m as f64 / eps).ln().max(1.0).powf(degree as f64 / 2.0);
    let mut anchors = vec![0.0f64; m];
    let mut sides = vec![1.0f64; m];
    for i in ell..m {
        anchors[i] = -box_half_width;
        sides[i] = match params.cell_side {
            Some(s) => s,
            None => {
                let mean = samples.iter().map(|(_, v, _)| v[i]).sum::<f64>() / in_region as f64;
                let var = samples
                    .iter()
                    .map(|(_, v, _)| (v[i] - mean).powi(2))
                    .sum::<f64>()
                    / in_region as f64;
                (eps.sqrt() * var.sqrt()).max(1e-6)
            }
        };
    }

    // Hash in-region samples to cells.
    use std::collections::BTreeMap;
    struct CellStat {
        count: usize,
        inliers: usize,
        overshoot: usize,
    }
    let mut cells: BTreeMap<Vec<i64>, CellStat> = BTreeMap::new();
    let mut keys: Vec<Option<Vec<i64>>> = Vec::with_capacity(samples.len());
    let mut inlier_total = 0usize;
    for (_x, vals, pv) in &samples {
        let inlier = pv.abs() < eps;
        if inlier {
            inlier_total += 1;
        }
        if vals.iter().skip(ell).any(|v| v.abs() > box_half_width) {
            keys.push(None);
            continue;
        }
        let key: Vec<i64> = (0..m)
            .map(|i| {
                if i < ell {
                    0
                } else {
                    ((vals[i] - anchors[i]) / sides[i]).floor() as i64
                }
            })
            .collect();
        let stat = cells.entry(key.clone()).or_insert(CellStat {
            count: 0,
            inliers: 0,
            overshoot: 0,
        });
        stat.count += 1;
        if inlier {
            stat.inliers += 1;
        }
        if pv.abs() >= 2.0 * eps {
            stat.overshoot += 1;
        }
        keys.push(Some(key));
    }

    // Selection thresholds (conditions 2 and the inlier rule).
    let mut kept: Vec<(Vec<i64>, CellStat)> = cells
        .into_iter()
        .filter(|(_, s)| {
            let mass = s.count as f64 / in_region as f64;
            let inlier_frac = s.inliers as f64 / s.count as f64;
            mass > params.mass_floor && inlier_frac > params.inlier_floor
        })
        .collect();
    kept.sort_by(|a, b| b.1.count.cmp(&a.1.count).then(a.0.cmp(&b.0)));
    let cells_truncated = kept.len().saturating_sub(params.max_cells);
    kept.truncate(params.max_cells);
    if kept.is_empty() {
        return Err(PartitionError::NoCellsKept);
    }

    // Per-cell sample membership for the spot-check probes: the partition's
    // own draws already realize the conditional law on each kept cell, so
    // probes read them instead of rejection-sampling each (tiny) cell anew.
    let mut members: BTreeMap<&[i64], Vec<usize>> = BTreeMap::new();
    if !params.probe_polys.is_empty() {
        for (key, _) in &kept {
            members.insert(key.as_slice(), Vec::new());
        }
        for (idx, key) in keys.iter().enumerate() {
            if let Some(k) = key {
                if let Some(v) = members.get_mut(k.as_slice()) {
                    v.push(idx);
                }
            }
        }
    }

    // Build output regions and the report.
    let mut regions = Vec::with_capacity(kept.len());
    let mut reports = Vec::with_capacity(kept.len());
    let mut kept_inliers = 0usize;
    let mut overshoot_count = 0usize;
    for (key, stat) in &kept {
        let intervals: Vec<(f64, f64)> = (0..m)
            .map(|i| {
                if i < ell {
                    region.rect.intervals[i]
                } else {
                    let lo = anchors[i] + key[i] as f64 * sides[i];
                    (lo, lo + sides[i])
                }
            })
            .collect();
        let mut r = Region::new(qbar.clone(), Rectangle::new(intervals), region.level - 1);
        r.mass_estimate = stat.count as f64 / total as f64;
        r.mass_samples = total;
        kept_inliers += stat.inliers;
        overshoot_count += stat.overshoot;

        let probes = params
            .probe_polys
            .iter()
            .map(|g| {
                let idxs = members
                    .get(key.as_slice())
                    .map_or(&[][..], |v| v.as_slice());
                let cap = params.probe_n_mc.max(2);
                // Conditional norm from the even-indexed members, small-ball
                // fractions from the odd-indexed rest.
                let mut sum_sq = 0.0;
                let mut n_norm = 0usize;
                for &i in idxs.iter().step_by(2).take(cap / 2) {
                    let v = g.eval(&samples[i].0).expect("dims agree");
                    sum_sq += v * v;
                    n_norm += 1;
                }
                let norm = (sum_sq / n_norm.max(1) as f64).sqrt();
                let mut counts = vec![0usize; params.probe_ts.len()];
                let mut n_prob = 0usize;
                for &i in idxs.iter().skip(1).step_by(2).take(cap / 2) {
                    let v = g.eval(&samples[i].0).expect("dims agree").abs();
                    n_prob += 1;
                    for (c, &t) in counts.iter_mut().zip(&params.probe_ts) {
                        if t > 0.0 && v < t * norm {
                            *c += 1;
                        }
                    }
                }
                params
                    .probe_ts
                    .iter()
                    .zip(counts)
                    .map(|(&t, c)| (t, c as f64 / n_prob.max(1) as f64))
                    .collect::<Vec<(f64, f64)>>()
            })
            .collect::<Vec<_>>();
        reports.push(CellReport {
            id: key.clone(),
            conditional_mass: stat.count as f64 / in_region as f64,
            inlier_fraction: stat.inliers as f64 / stat.count as f64,
            probes,
        });
        regions.push(r);
    }

    let missed_inliers = inlier_total - kept_inliers;
    let _ = &keys;
    let report = PartitionReport {
        epsilon: eps,
        mass_floor: params.mass_floor,
        inlier_floor: params.inlier_floor,
        cell_sides: sides,
        box_half_width,
        samples: total,
        region_count: in_region,
        region_mass,
        kept: reports,
        cells_truncated,
        coverage_loss: missed_inliers as f64 / in_region as f64,
        overshoot: overshoot_count as f64 / in_region as f64,
        inlier_count: inlier_total,
        missed_inlier_count: missed_inliers,
        overshoot_count,
        decomposition_size: m,
        decomposition_rewrites: ext.trace.len(),
        decomposition_residual: residual,
    };
    Ok((regions, report))
}
