//! Ground-truth PTFs, clean sampling, contamination strategies, and the
//! conditioning-failure demonstration.
//!
//! The corruption model: after seeing the clean set (and the ground truth),
//! the adversary removes exactly `floor(opt * m)` examples and replaces them
//! with arbitrary ones. Strategies here instantiate that adversary at
//! different levels of malice; none of them sees the learner.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::index::{indices_up_to, MultiIndex};
use crate::partition::{partition_region, PartitionParams};
use crate::poly::HermitePoly;
use crate::region::Region;
use crate::rng;

#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub p_star: HermitePoly,
    pub d: u32,
    pub n: usize,
    pub seed: u64,
}

/// Random unit-norm degree-d polynomial: standard normal Hermite
/// coefficients on every index of total degree <= d (constant included).
pub fn random_ptf(n: usize, d: u32, seed: u64) -> GroundTruth {
    assert!(d >= 1);
    let mut r = rng::stream(seed, 0);
    let terms: Vec<(MultiIndex, f64)> = indices_up_to(n, d)
        .into_iter()
        .map(|a| {
            let c: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut r);
            (a, c)
        })
        .collect();
    let p_star = HermitePoly::from_hermite_terms(n, terms)
        .unwrap()
        .normalized()
        .expect("nonzero with probability one");
    GroundTruth { p_star, d, n, seed }
}

pub fn ptf_label(truth: &GroundTruth, x: &[f64]) -> i8 {
    if truth.p_star.eval(x).expect("dims agree") >= 0.0 {
        1
    } else {
        -1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Provenance {
    Clean,
    FlippedLabel,
    Replaced,
}

/// A labeled dataset with hidden per-point provenance. Learners receive the
/// `labeled()` view, which does not expose provenance.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<i8>,
    provenance: Vec<Provenance>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The learner-facing view: points and labels only.
    pub fn labeled(&self) -> Vec<crate::perceptron::LabeledSample> {
        self.points
            .iter()
            .zip(&self.labels)
            .map(|(x, &y)| crate::perceptron::LabeledSample::new(x.clone(), y))
            .collect()
    }

    /// Harness-only access for corruption accounting.
    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    pub fn corrupted_count(&self) -> usize {
        self.provenance
            .iter()
            .filter(|p| **p != Provenance::Clean)
            .count()
    }

    /// CSV with header `x1,...,xn,y`; floats print in shortest round-trip
    /// form so re-generation is byte-identical.
    pub fn to_csv(&self) -> String {
        let n = self.points.first().map_or(0, |p| p.len());
        let mut out = String::new();
        for i in 1..=n {
            out.push_str(&format!("x{i},"));
        }
        out.push_str("y\n");
        for (x, y) in self.points.iter().zip(&self.labels) {
            for v in x {
                out.push_str(&format!("{v},"));
            }
            out.push_str(&format!("{y}\n"));
        }
        out
    }

    /// Provenance sidecar (never loaded by learners).
    pub fn provenance_csv(&self) -> String {
        let mut out = String::from("index,provenance\n");
        for (i, p) in self.provenance.iter().enumerate() {
            out.push_str(&format!("{i},{p:?}\n"));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Dataset, String> {
        let mut lines = text.lines();
        let header = lines.next().ok_or("empty csv")?;
        let cols = header.split(',').count();
        if cols < 2 {
            return Err("need at least one feature column and y".into());
        }
        let n = cols - 1;
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for (lineno, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != cols {
                return Err(format!("line {}: expected {} fields", lineno + 2, cols));
            }
            let x: Result<Vec<f64>, _> = fields[..n].iter().map(|f| f.parse::<f64>()).collect();
            let y: i8 = fields[n]
                .parse()
                .map_err(|e| format!("line {}: {e}", lineno + 2))?;
            points.push(x.map_err(|e| format!("line {}: {e}", lineno + 2))?);
            labels.push(y);
        }
        let provenance = vec![Provenance::Clean; points.len()];
        Ok(Dataset {
            points,
            labels,
            provenance,
        })
    }
}

/// i.i.d. standard Gaussian points with exact labels.
pub fn gen_clean(truth: &GroundTruth, m: usize, seed: u64) -> Dataset {
    assert!(m >= 1);
    let mut r = rng::stream(seed, 1);
    let mut points = Vec::with_capacity(m);
    let mut labels = Vec::with_capacity(m);
    for _ in 0..m {
        let x = rng::gaussian_vector(&mut r, truth.n);
        labels.push(ptf_label(truth, &x));
        points.push(x);
    }
    Dataset {
        points,
        labels,
        provenance: vec![Provenance::Clean; m],
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    /// Flip the labels of the `opt`-fraction with smallest `|p*(x)|`.
    LabelFlipBoundary,
    /// Flip a uniformly random `opt`-fraction of labels.
    LabelFlipRandom,
    /// Remove the highest-margin correctly-labeled points and insert a
    /// cluster designed to bias the Chow direction.
    ReplaceCluster {
        center: Vec<f64>,
        radius: f64,
        label: i8,
    },
    /// Generic removal/replacement with named selector and generator.
    RemoveAndReplace {
        selector: Selector,
        generator: Generator,
    },
}

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selector {
    Random,
    LowestMargin,
    HighestMargin,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Generator {
    /// Points uniform in a ball around `center` with a fixed label.
    Cluster {
        center: Vec<f64>,
        radius: f64,
        label: i8,
    },
    /// Fresh Gaussian points labeled against the ground truth.
    GaussianFlipped,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct CorruptionSpec {
    pub opt: f64,
    pub strategy: Strategy,
    pub seed: u64,
}

impl CorruptionSpec {
    pub fn new(opt: f64, strategy: Strategy, seed: u64) -> Self {
        assert!((0.0..0.5).contains(&opt));
        CorruptionSpec {
            opt,
            strategy,
            seed,
        }
    }
}

/// Applies the corruption; exactly `floor(opt * m)` points are modified.
pub fn corrupt(dataset: &Dataset, truth: &GroundTruth, spec: &CorruptionSpec) -> Dataset {
    let m = dataset.len();
    let budget = (spec.opt * m as f64).floor() as usize;
    let mut out = dataset.clone();
    if budget == 0 {
        return out;
    }
    let mut r = rng::stream(spec.seed, 2);
    let margins: Vec<f64> = dataset
        .points
        .iter()
        .map(|x| truth.p_star.eval(x).expect("dims agree").abs())
        .collect();
    let by_margin = |ascending: bool| -> Vec<usize> {
        let mut idx: Vec<usize> = (0..m).collect();
        idx.sort_by(|&a, &b| {
            let ord = margins[a].partial_cmp(&margins[b]).unwrap();
            if ascending {
                ord
            } else {
                ord.reverse()
            }
        });
        idx
    };
    match &spec.strategy {
        Strategy::LabelFlipBoundary => {
            for &i in by_margin(true).iter().take(budget) {
                out.labels[i] = -out.labels[i];
                out.provenance[i] = Provenance::FlippedLabel;
            }
        }
        Strategy::LabelFlipRandom => {
            let mut idx: Vec<usize> = (0..m).collect();
            idx.shuffle(&mut r);
            for &i in idx.iter().take(budget) {
                out.labels[i] = -out.labels[i];
                out.provenance[i] = Provenance::FlippedLabel;
            }
        }
        Strategy::ReplaceCluster {
            center,
            radius,
            label,
        } => {
            let targets: Vec<usize> = by_margin(false)
                .into_iter()
                .filter(|&i| dataset.labels[i] == ptf_label(truth, &dataset.points[i]))
                .take(budget)
                .collect();
            for &i in &targets {
                out.points[i] = ball_point(&mut r, center, *radius);
                out.labels[i] = *label;
                out.provenance[i] = Provenance::Replaced;
            }
        }
        Strategy::RemoveAndReplace {
            selector,
            generator,
        } => {
            let targets: Vec<usize> = match selector {
                Selector::Random => {
                    let mut idx: Vec<usize> = (0..m).collect();
                    idx.shuffle(&mut r);
                    idx.into_iter().take(budget).collect()
                }
                Selector::LowestMargin => by_margin(true).into_iter().take(budget).collect(),
                Selector::HighestMargin => by_margin(false).into_iter().take(budget).collect(),
            };
            for &i in &targets {
                match generator {
                    Generator::Cluster {
                        center,
                        radius,
                        label,
                    } => {
                        out.points[i] = ball_point(&mut r, center, *radius);
                        out.labels[i] = *label;
                    }
                    Generator::GaussianFlipped => {
                        let x = rng::gaussian_vector(&mut r, truth.n);
                        out.labels[i] = -ptf_label(truth, &x);
                        out.points[i] = x;
                    }
                }
                out.provenance[i] = Provenance::Replaced;
            }
        }
    }
    out
}

fn ball_point(r: &mut rng::Stream, center: &[f64], radius: f64) -> Vec<f64> {
    let dim = center.len();
    let g = rng::gaussian_vector(r, dim);
    let norm: f64 = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let u: f64 = r.gen::<f64>().powf(1.0 / dim as f64);
    center
        .iter()
        .zip(&g)
        .map(|(c, gi)| c + radius * u * gi / norm.max(1e-12))
        .collect()
}

/// The conditioning-failure demonstration for `p = x1^2 x2^2`.
#[derive(Debug, serde::Serialize)]
pub struct Figure1Report {
    pub eps: f64,
    /// `Pr[x1^2 x2^2 <= eps]`.
    pub band_mass: f64,
    /// `Pr[x1^2 <= eps | x1^2 x2^2 <= eps]` (the failure; Omega(1)).
    pub conditional_small_ball: f64,
    /// Per kept cell: (cell id, small-ball probability of x1^2 at t = eps).
    pub per_cell: Vec<(Vec<i64>, f64)>,
    pub max_cell_small_ball: f64,
}

impl Figure1Report {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("quantity,value\n");
        out.push_str(&format!("band_mass,{}\n", self.band_mass));
        out.push_str(&format!(
            "conditional_small_ball,{}\n",
            self.conditional_small_ball
        ));
        for (id, v) in &self.per_cell {
            out.push_str(&format!("cell_{:?},{}\n", id, v).replace(' ', ""));
        }
        out.push_str(&format!(
            "max_cell_small_ball,{}\n",
            self.max_cell_small_ball
        ));
        out
    }
}

pub fn figure1_demo(
    eps: f64,
    n_mc: usize,
    seed: u64,
) -> Result<Figure1Report, crate::error::PartitionError> {
    assert!(eps > 0.0 && eps <= 0.1);
    // Monte-Carlo for the two conditional quantities.
    let mut r = rng::stream(seed, 3);
    let mut band = 0usize;
    let mut joint = 0usize;
    for _ in 0..n_mc {
        let x = rng::gaussian_vector(&mut r, 2);
        let v = x[0] * x[0] * x[1] * x[1];
        if v <= eps {
            band += 1;
            if x[0] * x[0] <= eps {
                joint += 1;
            }
        }
    }
    let band_mass = band as f64 / n_mc as f64;
    let conditional_small_ball = joint as f64 / band.max(1) as f64;

    // Partition the same set: {x1^2 x2^2 <= eps} = {|p| < eps/3} for the
    // unit-norm p = x1^2 x2^2 / 3.
    let p =
        HermitePoly::from_monomial_terms(2, [(MultiIndex::new(vec![2, 2]), 1.0 / 3.0)]).unwrap();
    let x1sq = HermitePoly::from_monomial_terms(2, [(MultiIndex::new(vec![2]), 1.0)]).unwrap();
    let mut params = PartitionParams::new(eps / 3.0, seed);
    params.n_mc = n_mc.min(400_000);
    params.cell_side = Some(0.25);
    params.max_cells = 512;
    params.probe_polys = vec![x1sq];
    params.probe_ts = vec![eps];
    params.probe_n_mc = 20_000;
    let region = Region::full_space(2, 1);
    let (_cells, report) = partition_region(&p, &region, &params)?;
    let per_cell: Vec<(Vec<i64>, f64)> = report
        .kept
        .iter()
        .map(|c| (c.id.clone(), c.probes[0][0].1))
        .collect();
    let max_cell_small_ball = per_cell.iter().map(|(_, v)| *v).fold(0.0f64, f64::max);
    Ok(Figure1Report {
        eps,
        band_mass,
        conditional_small_ball,
        per_cell,
        max_cell_small_ball,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_ptf_is_deterministic_and_normalized() {
        let a = random_ptf(3, 2, 5);
        let b = random_ptf(3, 2, 5);
        assert_eq!(
            format!("{:?}", a.p_star.hermite_coeffs()),
            format!("{:?}", b.p_star.hermite_coeffs())
        );
        assert!((a.p_star.l2_norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn clean_labels_match_sign_and_chow_direction() {
        let truth = GroundTruth {
            p_star: HermitePoly::coordinate(2, 0),
            d: 1,
            n: 2,
            seed: 0,
        };
        let data = gen_clean(&truth, 50_000, 1);
        for (x, &y) in data.points.iter().zip(&data.labels).take(100) {
            assert_eq!(y, ptf_label(&truth, x));
        }
        let frac_pos = data.labels.iter().filter(|&&y| y == 1).count() as f64 / data.len() as f64;
        assert!((frac_pos - 0.5).abs() < 0.01);
        // E[y x1] = E|g| = sqrt(2/pi).
        let chow: f64 = data
            .points
            .iter()
            .zip(&data.labels)
            .map(|(x, &y)| y as f64 * x[0])
            .sum::<f64>()
            / data.len() as f64;
        assert!(
            (chow - (2.0 / std::f64::consts::PI).sqrt()).abs() < 0.01,
            "chow {chow}"
        );
    }

    #[test]
    fn corruption_budget_is_exact() {
        let truth = random_ptf(2, 1, 3);
        let data = gen_clean(&truth, 10_000, 4);
        for strategy in [
            Strategy::LabelFlipBoundary,
            Strategy::LabelFlipRandom,
            Strategy::ReplaceCluster {
                center: vec![5.0, 0.0],
                radius: 0.5,
                label: 1,
            },
        ] {
            let spec = CorruptionSpec::new(0.1, strategy, 9);
            let bad = corrupt(&data, &truth, &spec);
            assert_eq!(bad.corrupted_count(), 1000);
        }
        let spec = CorruptionSpec::new(0.0, Strategy::LabelFlipRandom, 9);
        let same = corrupt(&data, &truth, &spec);
        assert_eq!(same.corrupted_count(), 0);
        assert_eq!(same.labels, data.labels);
    }

    #[test]
    fn boundary_flip_targets_smallest_margins() {
        let truth = GroundTruth {
            p_star: HermitePoly::coordinate(1, 0),
            d: 1,
            n: 1,
            seed: 0,
        };
        let data = gen_clean(&truth, 20_000, 7);
        let spec = CorruptionSpec::new(0.1, Strategy::LabelFlipBoundary, 11);
        let bad = corrupt(&data, &truth, &spec);
        let mut margins: Vec<f64> = data.points.iter().map(|x| x[0].abs()).collect();
        margins.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q10 = margins[2000];
        // The 10% quantile of |x| for a standard Gaussian is ~0.1257.
        assert!((q10 - 0.1257).abs() < 0.01, "q10 {q10}");
        for (i, p) in bad.provenance().iter().enumerate() {
            if *p == Provenance::FlippedLabel {
                assert!(bad.points[i][0].abs() <= q10 + 1e-12);
            }
        }
    }

    #[test]
    fn csv_round_trip_byte_identical() {
        let truth = random_ptf(3, 2, 12);
        let data = gen_clean(&truth, 500, 13);
        let csv = data.to_csv();
        let back = Dataset::from_csv(&csv).unwrap();
        assert_eq!(back.to_csv(), csv);
        assert_eq!(back.labels, data.labels);
    }
}
