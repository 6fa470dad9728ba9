//! The decision-list learner: corruption-rate guessing, per-region partial
//! classification, and the breadth-first region worklist.
//!
//! Each region is handled by the partial classifier: guess the local
//! corruption rate from a grid, run the margin perceptron (amplified a few
//! times), validate on a held-out split, pull the accepted iterate back to
//! an x-space polynomial, and hand the low-margin residue to the
//! partitioner. Regions that fail every guess, run out of level budget, or
//! fall under the mass floor get the constant-majority label. The worklist
//! is breadth-first so depth accounting is exact, and the final hypothesis
//! is an ordered list of (region, PTF, margin) entries with the root
//! classifier as the fall-through default.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{LearnerError, PartitionError, PerceptronError};
use crate::partition::{partition_region, PartitionParams};
use crate::perceptron::{lift_and_whiten, perceptron_learn, LabeledSample, PerceptronParams};
use crate::poly::HermitePoly;
use crate::region::{sample_conditional, Region};

#[derive(Debug, Clone)]
pub struct LearnerConfig {
    pub eps: f64,
    pub k_exponent: u32,
    /// Failure probability; the perceptron is re-run `ceil(log(1/eta))`
    /// times per guess.
    pub eta: f64,
    /// Initial region level; each partition round consumes one.
    pub depth_budget: u32,
    /// The corruption-rate guess grid is `eps * factor^i`, ascending, capped
    /// below 1/2.
    pub guess_grid_factor: f64,
    pub guess_grid_len: usize,
    /// Validation threshold is `validation_scale * eps'^(1 - 8/sqrt(K))`,
    /// clipped: guesses whose threshold reaches 1/2 are vacuous and skipped.
    pub validation_scale: f64,
    /// Regions below this many training samples or this much estimated mass
    /// get the constant-majority label.
    pub region_sample_floor: usize,
    pub region_mass_floor: f64,
    /// Conditional-oracle draws per region.
    pub oracle_budget: usize,
    pub max_iters: usize,
    /// Cells kept per partition round (bounds the decision-list length by
    /// sum_t cells^t).
    pub max_cells: usize,
    pub partition_n_mc: usize,
    pub max_rewrites: usize,
    pub seed: u64,
}

impl LearnerConfig {
    pub fn new(eps: f64, seed: u64) -> Self {
        LearnerConfig {
            eps,
            k_exponent: 400,
            eta: 0.1,
            depth_budget: 2,
            guess_grid_factor: 2.0,
            guess_grid_len: 6,
            validation_scale: 4.0,
            region_sample_floor: 400,
            region_mass_floor: 1e-3,
            oracle_budget: 20_000,
            max_iters: 100,
            max_cells: 24,
            partition_n_mc: 100_000,
            max_rewrites: 60,
            seed,
        }
    }

    fn validation_threshold(&self, eps_guess: f64) -> f64 {
        self.validation_scale * eps_guess.powf(1.0 - 8.0 / (self.k_exponent as f64).sqrt())
    }

    /// Enforced bound on the decision-list length.
    pub fn length_bound(&self) -> usize {
        let mut total = 1usize;
        let mut layer = 1usize;
        for _ in 0..self.depth_budget {
            layer = layer.saturating_mul(self.max_cells);
            total = total.saturating_add(layer);
        }
        total
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum EntryKind {
    Learned,
    ConstantMajority,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecisionEntry {
    pub region: Region,
    /// The learned polynomial in original x-space.
    pub margin_poly: HermitePoly,
    /// Absolute margin threshold: the entry fires when
    /// `|margin_poly(x)| >= gamma_abs` (zero for constant entries).
    pub gamma_abs: f64,
    pub kind: EntryKind,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Fallback {
    Sign(i8),
    /// Fall through to the sign of the root classifier's polynomial.
    Poly(HermitePoly),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecisionListHypothesis {
    pub entries: Vec<DecisionEntry>,
    pub fallback: Fallback,
    pub dim: usize,
}

impl DecisionListHypothesis {
    pub fn predict(&self, x: &[f64]) -> i8 {
        for entry in &self.entries {
            if entry.region.contains(x).unwrap_or(false) {
                let v = entry.margin_poly.eval(x).expect("dims agree");
                if v.abs() >= entry.gamma_abs {
                    return if v >= 0.0 { 1 } else { -1 };
                }
            }
        }
        match &self.fallback {
            Fallback::Sign(s) => *s,
            Fallback::Poly(p) => {
                if p.eval(x).expect("dims agree") >= 0.0 {
                    1
                } else {
                    -1
                }
            }
        }
    }

    /// 0-1 error against a labeled set.
    pub fn evaluate(&self, samples: &[LabeledSample]) -> f64 {
        if samples.is_empty() {
            return 0.0;
        }
        let wrong = samples.iter().filter(|s| self.predict(&s.x) != s.y).count();
        wrong as f64 / samples.len() as f64
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("hypothesis serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, String> {
        serde_json::from_str(s).map_err(|e| e.to_string())
    }
}

/// Per-region outcome record for the run manifest.
#[derive(Debug, Clone, Serialize)]
pub struct RegionRecord {
    pub depth: u32,
    pub train_count: usize,
    pub mass_estimate: f64,
    pub outcome: String,
    pub guess_accepted: Option<f64>,
    pub validation_error: Option<f64>,
    pub band_mass: Option<f64>,
    pub new_regions: usize,
    /// Per-iteration CSV of the accepted perceptron run.
    pub perceptron_csv: Option<String>,
    /// Disagreement rate of the constant label on this region's samples
    /// (populated for constant-majority outcomes).
    pub minority_fraction: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct LearnReport {
    pub regions: Vec<RegionRecord>,
    pub list_length: usize,
    pub length_bound: usize,
    pub budget_exhausted: bool,
    /// Mass accounting per depth: classified band mass, constant-labeled
    /// mass, and residual mass passed on (training-sample estimates).
    pub classified_mass: f64,
    pub constant_mass: f64,
    pub residual_mass: f64,
}

struct PartialOutcome {
    entry: DecisionEntry,
    new_regions: Vec<Region>,
    record: RegionRecord,
}

/// Algorithm-2 analogue on one region.
fn partial_classifier(
    region: &Region,
    samples: &[LabeledSample],
    dim: usize,
    degree: u32,
    config: &LearnerConfig,
    region_seed: u64,
) -> Result<PartialOutcome, LearnerError> {
    // 70/30 split by a fixed hash of the sample index.
    let mut train = Vec::new();
    let mut validate = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        let h = (i as u64).wrapping_mul(2654435761).wrapping_rem(1 << 32);
        if (h as f64) < 0.7 * (1u64 << 32) as f64 {
            train.push(s.clone());
        } else {
            validate.push(s.clone());
        }
    }
    let majority = constant_majority(samples);

    let oracle = match sample_conditional(region, dim, config.oracle_budget, region_seed, 1e-6) {
        Ok(s) => s,
        Err(PartitionError::AcceptanceTooLow { .. }) => {
            return Ok(constant_outcome(region, samples, majority, "oracle_empty"));
        }
        Err(e) => return Err(LearnerError::Partition(e)),
    };
    let (lifted_train, wt) = match lift_and_whiten(&train, &oracle.points, degree) {
        Ok(v) => v,
        Err(PerceptronError::IllConditioned(_)) => {
            return Ok(constant_outcome(
                region,
                samples,
                majority,
                "ill_conditioned",
            ));
        }
        Err(e) => return Err(LearnerError::Perceptron(e)),
    };
    let oracle_lifted: Vec<Vec<f64>> = oracle.points.iter().map(|x| wt.apply(x)).collect();
    let lifted_validate: Vec<(Vec<f64>, i8)> =
        validate.iter().map(|s| (wt.apply(&s.x), s.y)).collect();

    let reps = (1.0 / config.eta).ln().ceil().max(1.0) as usize;
    let mut guess = config.eps;
    for _ in 0..config.guess_grid_len {
        if guess >= 0.5 {
            break;
        }
        let threshold = config.validation_threshold(guess);
        if threshold < 0.5 {
            for rep in 0..reps {
                let mut params = PerceptronParams::new(guess, config.k_exponent);
                params.max_iters = config.max_iters;
                // Amplification: re-estimate from a deterministic subsample
                // after the first attempt.
                let train_view: Vec<(Vec<f64>, i8)> = if rep == 0 {
                    lifted_train.clone()
                } else {
                    lifted_train
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| (i + rep) % reps != 0)
                        .map(|(_, s)| s.clone())
                        .collect()
                };
                if train_view.is_empty() {
                    continue;
                }
                let (w, gamma, preport) =
                    match perceptron_learn(&train_view, &oracle_lifted, &params) {
                        Ok(v) => v,
                        Err(PerceptronError::NoProgress(_) | PerceptronError::FilterDiverged) => {
                            continue
                        }
                        Err(e) => return Err(LearnerError::Perceptron(e)),
                    };
                let w_norm = oracle_norm(&w, &oracle_lifted);
                if w_norm <= 0.0 {
                    continue;
                }
                let margin = gamma * w_norm;
                let (mut band, mut band_err) = (0usize, 0usize);
                for (z, y) in &lifted_validate {
                    let s: f64 = w.iter().zip(z).map(|(a, b)| a * b).sum();
                    if s.abs() >= margin {
                        band += 1;
                        if (s >= 0.0) != (*y == 1) {
                            band_err += 1;
                        }
                    }
                }
                if band == 0 {
                    continue;
                }
                let verr = band_err as f64 / band as f64;
                if verr.clamp(0.0, 1.0) <= threshold {
                    // Accepted: pull back to x-space and partition the residue.
                    let margin_poly = wt.weight_to_poly(&w, dim);
                    let poly_norm = margin_poly.l2_norm();
                    let entry = DecisionEntry {
                        region: region.clone(),
                        margin_poly: margin_poly.clone(),
                        gamma_abs: margin,
                        kind: EntryKind::Learned,
                    };
                    let mut new_regions = Vec::new();
                    if region.level >= 1 && poly_norm > 0.0 {
                        let eps_partition = (margin / poly_norm).min(0.45);
                        let mut pp = PartitionParams::new(eps_partition, region_seed ^ 0x9e37);
                        pp.n_mc = config.partition_n_mc;
                        pp.max_cells = config.max_cells;
                        pp.max_rewrites = config.max_rewrites;
                        let unit = margin_poly.scale(1.0 / poly_norm);
                        match partition_region(&unit, region, &pp) {
                            Ok((cells, _report)) => new_regions = cells,
                            Err(
                                PartitionError::NoCellsKept
                                | PartitionError::AcceptanceTooLow { .. }
                                | PartitionError::DecompositionFailed(_)
                                | PartitionError::Snpt(_),
                            ) => {}
                            Err(e) => return Err(LearnerError::Partition(e)),
                        }
                    }
                    let band_mass = lifted_validate
                        .iter()
                        .filter(|(z, _)| {
                            let s: f64 = w.iter().zip(z).map(|(a, b)| a * b).sum();
                            s.abs() >= margin
                        })
                        .count() as f64
                        / lifted_validate.len().max(1) as f64;
                    let n_new = new_regions.len();
                    return Ok(PartialOutcome {
                        entry,
                        new_regions,
                        record: RegionRecord {
                            depth: region.level,
                            train_count: samples.len(),
                            mass_estimate: region.mass_estimate,
                            outcome: "learned".into(),
                            guess_accepted: Some(guess),
                            validation_error: Some(verr.clamp(0.0, 1.0)),
                            band_mass: Some(band_mass),
                            new_regions: n_new,
                            perceptron_csv: Some(preport.to_csv()),
                            minority_fraction: None,
                        },
                    });
                }
            }
        }
        guess *= config.guess_grid_factor;
    }
    // Every guess failed (or was vacuous): the high-noise branch.
    Ok(constant_outcome(
        region,
        samples,
        majority,
        "all_guesses_failed",
    ))
}

fn oracle_norm(v: &[f64], oracle: &[Vec<f64>]) -> f64 {
    let acc: f64 = oracle
        .iter()
        .map(|z| {
            let d: f64 = v.iter().zip(z).map(|(a, b)| a * b).sum();
            d * d
        })
        .sum();
    (acc / oracle.len().max(1) as f64).sqrt()
}

fn constant_majority(samples: &[LabeledSample]) -> i8 {
    let pos = samples.iter().filter(|s| s.y == 1).count();
    if 2 * pos >= samples.len() {
        1
    } else {
        -1
    }
}

fn constant_outcome(
    region: &Region,
    samples: &[LabeledSample],
    majority: i8,
    reason: &str,
) -> PartialOutcome {
    let dim_hint = samples.first().map_or(1, |s| s.x.len());
    let minority =
        samples.iter().filter(|s| s.y != majority).count() as f64 / samples.len().max(1) as f64;
    PartialOutcome {
        entry: DecisionEntry {
            region: region.clone(),
            margin_poly: HermitePoly::constant(dim_hint, majority as f64),
            gamma_abs: 0.0,
            kind: EntryKind::ConstantMajority,
        },
        new_regions: Vec::new(),
        record: RegionRecord {
            depth: region.level,
            train_count: samples.len(),
            mass_estimate: region.mass_estimate,
            outcome: reason.into(),
            guess_accepted: None,
            validation_error: None,
            band_mass: None,
            new_regions: 0,
            perceptron_csv: None,
            minority_fraction: Some(minority),
        },
    }
}

/// Algorithm-3 analogue: the breadth-first worklist over regions.
pub fn learn_ptf(
    samples: &[LabeledSample],
    dim: usize,
    degree: u32,
    config: &LearnerConfig,
) -> Result<(DecisionListHypothesis, LearnReport), LearnerError> {
    assert!(!samples.is_empty());
    let m = samples.len() as f64;
    let bound = config.length_bound();
    let mut entries: Vec<DecisionEntry> = Vec::new();
    let mut records = Vec::new();
    let mut queue: VecDeque<Region> = VecDeque::new();
    let mut root = Region::full_space(dim, config.depth_budget);
    root.mass_estimate = 1.0;
    queue.push_back(root);
    let mut budget_exhausted = false;
    let mut classified_mass = 0.0;
    let mut constant_mass = 0.0;
    let mut region_counter = 0u64;

    while let Some(region) = queue.pop_front() {
        if entries.len() >= bound {
            budget_exhausted = true;
            break;
        }
        region_counter += 1;
        let in_region: Vec<LabeledSample> = samples
            .iter()
            .filter(|s| region.contains(&s.x).unwrap_or(false))
            .cloned()
            .collect();
        let mass = in_region.len() as f64 / m;
        if in_region.is_empty() {
            continue;
        }
        if region.level == 0
            || mass < config.region_mass_floor
            || in_region.len() < config.region_sample_floor
        {
            let majority = constant_majority(&in_region);
            let outcome = constant_outcome(&region, &in_region, majority, "floor_or_level");
            constant_mass += mass;
            entries.push(outcome.entry);
            records.push(RegionRecord {
                mass_estimate: mass,
                ..outcome.record
            });
            continue;
        }
        let seed = config.seed ^ region_counter.wrapping_mul(0x9e3779b97f4a7c15);
        let mut outcome = partial_classifier(&region, &in_region, dim, degree, config, seed)?;
        outcome.record.mass_estimate = mass;
        match outcome.record.outcome.as_str() {
            "learned" => {
                let residue: f64 = outcome.new_regions.iter().map(|r| r.mass_estimate).sum();
                classified_mass += mass - residue.min(mass);
            }
            _ => constant_mass += mass,
        }
        records.push(outcome.record);
        entries.push(outcome.entry);
        for r in outcome.new_regions {
            queue.push_back(r);
        }
    }
    let residual_mass: f64 = queue.iter().map(|r| r.mass_estimate).sum();

    let fallback = entries
        .iter()
        .find(|e| matches!(e.kind, EntryKind::Learned))
        .map(|e| Fallback::Poly(e.margin_poly.clone()))
        .unwrap_or(Fallback::Sign(1));
    let list_length = entries.len();
    Ok((
        DecisionListHypothesis {
            entries,
            fallback,
            dim,
        },
        LearnReport {
            regions: records,
            list_length,
            length_bound: bound,
            budget_exhausted,
            classified_mass,
            constant_mass,
            residual_mass,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::{corrupt, gen_clean, random_ptf, CorruptionSpec, Strategy};

    #[test]
    fn empty_list_predicts_default() {
        let h = DecisionListHypothesis {
            entries: Vec::new(),
            fallback: Fallback::Sign(1),
            dim: 2,
        };
        assert_eq!(h.predict(&[0.3, -4.0]), 1);
    }

    #[test]
    fn single_full_entry_is_a_plain_ptf() {
        let h = DecisionListHypothesis {
            entries: vec![DecisionEntry {
                region: Region::full_space(1, 1),
                margin_poly: HermitePoly::coordinate(1, 0),
                gamma_abs: 0.0,
                kind: EntryKind::Learned,
            }],
            fallback: Fallback::Sign(-1),
            dim: 1,
        };
        assert_eq!(h.predict(&[2.0]), 1);
        assert_eq!(h.predict(&[-2.0]), -1);
        // Error of the truth against itself is zero.
        let truth = random_ptf(1, 1, 3);
        let data = gen_clean(&truth, 1000, 5);
        let own = DecisionListHypothesis {
            entries: vec![DecisionEntry {
                region: Region::full_space(1, 1),
                margin_poly: truth.p_star.clone(),
                gamma_abs: 0.0,
                kind: EntryKind::Learned,
            }],
            fallback: Fallback::Sign(1),
            dim: 1,
        };
        assert_eq!(own.evaluate(&data.labeled()), 0.0);
    }

    #[test]
    fn halfspace_clean_end_to_end() {
        let truth = random_ptf(5, 1, 21);
        let train = gen_clean(&truth, 40_000, 22);
        let test = gen_clean(&truth, 40_000, 23);
        let config = LearnerConfig::new(0.02, 99);
        let (h, report) = learn_ptf(&train.labeled(), 5, 1, &config).unwrap();
        let err = h.evaluate(&test.labeled());
        assert!(err <= 0.05, "clean halfspace error {err}");
        assert!(report.list_length <= report.length_bound);
        assert!(!report.budget_exhausted);
    }

    #[test]
    fn flipped_region_degrades_to_constant() {
        // All labels flipped in sign: opt ~ 1/2 noise leaves no linear
        // iterate that can validate; the learner must still return a total
        // classifier.
        let truth = random_ptf(3, 1, 31);
        let data = gen_clean(&truth, 8_000, 32);
        // Adversarial half-flip via the random strategy at opt just below 1/2.
        let spec = CorruptionSpec::new(0.49, Strategy::LabelFlipRandom, 34);
        let bad = corrupt(&data, &truth, &spec);
        // eps = 0.01 keeps the first validation thresholds below 1/2, so the
        // guesses genuinely run and fail rather than being skipped as vacuous.
        let config = LearnerConfig::new(0.01, 35);
        let (h, report) = learn_ptf(&bad.labeled(), 3, 1, &config).unwrap();
        assert!(
            report.regions.iter().all(|r| r.outcome != "learned"),
            "half-flipped labels must not validate"
        );
        // Total classifier: predicts everywhere.
        for x in [[0.0, 0.0, 0.0], [3.0, -1.0, 0.5]] {
            let p = h.predict(&x);
            assert!(p == 1 || p == -1);
        }
    }

    #[test]
    fn hypothesis_json_round_trip() {
        let truth = random_ptf(2, 2, 41);
        let h = DecisionListHypothesis {
            entries: vec![DecisionEntry {
                region: Region::full_space(2, 1),
                margin_poly: truth.p_star.clone(),
                gamma_abs: 0.25,
                kind: EntryKind::Learned,
            }],
            fallback: Fallback::Poly(truth.p_star.clone()),
            dim: 2,
        };
        let json = h.to_json();
        let back = DecisionListHypothesis::from_json(&json).unwrap();
        for x in [[-0.4, 1.2], [2.0, 0.1]] {
            assert_eq!(h.predict(&x), back.predict(&x));
        }
    }
}
