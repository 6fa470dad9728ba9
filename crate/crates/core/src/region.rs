//! Polynomial slabs `{x : q(x) in R}` and conditional Gaussian sampling.

use serde::{Deserialize, Serialize};

use crate::error::{PartitionError, PolyError};
use crate::poly::HermitePoly;
use crate::rng::{self, Stream};

/// An axis-aligned rectangle; coordinates may be infinite.
///
/// Serializes endpoints as `null` for the infinities (JSON has no
/// representation for non-finite doubles).
#[derive(Debug, Clone)]
pub struct Rectangle {
    pub intervals: Vec<(f64, f64)>,
}

impl Serialize for Rectangle {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let dto: Vec<(Option<f64>, Option<f64>)> = self
            .intervals
            .iter()
            .map(|&(lo, hi)| (lo.is_finite().then_some(lo), hi.is_finite().then_some(hi)))
            .collect();
        dto.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Rectangle {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let dto: Vec<(Option<f64>, Option<f64>)> = Deserialize::deserialize(deserializer)?;
        Ok(Rectangle::new(
            dto.into_iter()
                .map(|(lo, hi)| (lo.unwrap_or(f64::NEG_INFINITY), hi.unwrap_or(f64::INFINITY)))
                .collect(),
        ))
    }
}

impl Rectangle {
    pub fn new(intervals: Vec<(f64, f64)>) -> Self {
        for &(lo, hi) in &intervals {
            assert!(lo <= hi, "interval [{lo}, {hi}] is empty");
        }
        Rectangle { intervals }
    }

    pub fn full(len: usize) -> Self {
        Rectangle {
            intervals: vec![(f64::NEG_INFINITY, f64::INFINITY); len],
        }
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn contains(&self, v: &[f64]) -> bool {
        self.intervals
            .iter()
            .zip(v)
            .all(|(&(lo, hi), &x)| x >= lo && x <= hi)
    }

    /// Largest absolute finite endpoint (0 when everything is infinite).
    pub fn max_radius(&self) -> f64 {
        self.intervals
            .iter()
            .flat_map(|&(lo, hi)| [lo, hi])
            .filter(|v| v.is_finite())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// A conditioning set `{x : q_i(x) in I_i for all i}` with level bookkeeping.
/// An empty polynomial list denotes the whole space.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Region {
    pub polys: Vec<HermitePoly>,
    pub rect: Rectangle,
    /// Remaining partition budget; a freshly partitioned region carries one
    /// less than its parent.
    pub level: u32,
    /// Empirical Gaussian mass and the sample count behind it.
    pub mass_estimate: f64,
    pub mass_samples: usize,
}

impl Region {
    pub fn full_space(dim: usize, level: u32) -> Self {
        let _ = dim;
        Region {
            polys: Vec::new(),
            rect: Rectangle::new(Vec::new()),
            level,
            mass_estimate: 1.0,
            mass_samples: usize::MAX,
        }
    }

    pub fn new(polys: Vec<HermitePoly>, rect: Rectangle, level: u32) -> Self {
        assert_eq!(polys.len(), rect.len());
        Region {
            polys,
            rect,
            level,
            mass_estimate: 0.0,
            mass_samples: 0,
        }
    }

    pub fn is_full_space(&self) -> bool {
        self.polys.is_empty()
    }

    pub fn contains(&self, x: &[f64]) -> Result<bool, PolyError> {
        for (p, &(lo, hi)) in self.polys.iter().zip(&self.rect.intervals) {
            let v = p.eval(x)?;
            if v < lo || v > hi {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Result of conditional rejection sampling.
pub struct ConditionalSample {
    pub points: Vec<Vec<f64>>,
    /// Accepted / drawn; this is the region's mass estimate.
    pub acceptance_rate: f64,
    pub drawn: usize,
}

/// Draws `n` points from `N(0, I)` conditioned on the region by rejection.
///
/// A probe batch measures the acceptance rate first; if it falls below
/// `floor` the region is reported as effectively empty rather than looping
/// forever.
pub fn sample_conditional(
    region: &Region,
    dim: usize,
    n: usize,
    seed: u64,
    floor: f64,
) -> Result<ConditionalSample, PartitionError> {
    assert!(n >= 1);
    let mut rng = rng::stream(seed, 0);
    let mut points = Vec::with_capacity(n);
    let mut drawn = 0usize;
    let probe = 200_000usize.max(4 * n);
    // Hard cap so that a region slightly above the floor still terminates.
    let max_draws = ((n as f64 / floor.max(1e-12)) as usize)
        .min(200_000_000)
        .max(probe);
    while points.len() < n {
        let x = rng::gaussian_vector(&mut rng, dim);
        drawn += 1;
        if region.contains(&x).map_err(PartitionError::Poly)? {
            points.push(x);
        }
        if drawn == probe || drawn >= max_draws {
            let rate = points.len() as f64 / drawn as f64;
            if rate < floor {
                return Err(PartitionError::AcceptanceTooLow { rate, floor });
            }
            if drawn >= max_draws && points.len() < n {
                break;
            }
        }
    }
    let acceptance_rate = points.len() as f64 / drawn as f64;
    Ok(ConditionalSample {
        points,
        acceptance_rate,
        drawn,
    })
}

/// Streams conditional draws into a fold without storing them; used by the
/// Monte-Carlo probes that only need running statistics.
pub fn fold_conditional<T>(
    region: &Region,
    dim: usize,
    n: usize,
    rng: &mut Stream,
    floor: f64,
    init: T,
    mut f: impl FnMut(T, &[f64]) -> T,
) -> Result<(T, f64), PartitionError> {
    let mut acc = init;
    let mut accepted = 0usize;
    let mut drawn = 0usize;
    let probe = 200_000usize.max(4 * n);
    let max_draws = ((n as f64 / floor.max(1e-12)) as usize)
        .min(200_000_000)
        .max(probe);
    while accepted < n && drawn < max_draws {
        let x = rng::gaussian_vector(rng, dim);
        drawn += 1;
        if region.contains(&x).map_err(PartitionError::Poly)? {
            accepted += 1;
            acc = f(acc, &x);
        }
        if drawn == probe {
            let rate = accepted as f64 / drawn as f64;
            if rate < floor {
                return Err(PartitionError::AcceptanceTooLow { rate, floor });
            }
        }
    }
    Ok((acc, accepted as f64 / drawn as f64))
}

/// Empirical small-ball profile of `g` on a region: for each `t`,
/// `Pr[|g(x)| < t * ||g||_{D,L2}]` under the conditional law, where the
/// conditional norm is estimated on an independent stream. The tail
/// counterpart `Pr[|g| > t * eps^{-1/K} ||g||_D]` shares the same norm.
pub struct AnticoncentrationProbe {
    pub conditional_norm: f64,
    pub small_ball: Vec<(f64, f64)>,
    pub tail: Vec<(f64, f64)>,
}

pub fn anticoncentration_probe(
    region: &Region,
    dim: usize,
    g: &HermitePoly,
    t_list: &[f64],
    n_mc: usize,
    seed: u64,
    tail_scale: f64,
) -> Result<AnticoncentrationProbe, PartitionError> {
    let floor = 1e-6;
    // Conditional L2 norm of g from a dedicated stream.
    let mut norm_rng = rng::stream(seed, 1);
    let (sum_sq, _) =
        fold_conditional(region, dim, n_mc, &mut norm_rng, floor, 0.0f64, |acc, x| {
            let v = g.eval(x).expect("dim checked");
            acc + v * v
        })?;
    let conditional_norm = (sum_sq / n_mc as f64).sqrt();

    let mut rng = rng::stream(seed, 2);
    let zeros = vec![0usize; t_list.len()];
    let ((small, tail), _) = fold_conditional(
        region,
        dim,
        n_mc,
        &mut rng,
        floor,
        (zeros.clone(), zeros),
        |(mut small, mut tail), x| {
            let v = g.eval(x).expect("dim checked").abs();
            for (i, &t) in t_list.iter().enumerate() {
                if t > 0.0 && v < t * conditional_norm {
                    small[i] += 1;
                }
                if v > t * tail_scale * conditional_norm {
                    tail[i] += 1;
                }
            }
            (small, tail)
        },
    )?;
    Ok(AnticoncentrationProbe {
        conditional_norm,
        small_ball: t_list
            .iter()
            .zip(small)
            .map(|(&t, c)| (t, c as f64 / n_mc as f64))
            .collect(),
        tail: t_list
            .iter()
            .zip(tail)
            .map(|(&t, c)| (t, c as f64 / n_mc as f64))
            .collect(),
    })
}
