//! Monte-Carlo tail and small-ball probes for polynomials under the
//! standard Gaussian.
//!
//! The tail probe estimates `Pr[|p(x)| > t ||p||]` (hypercontractive
//! concentration); the small-ball probe estimates `Pr[|p(x)| <= t ||p||]`
//! (Carbery-Wright anti-concentration). Both split their sample budget over
//! worker shards with independent RNG streams and merge by summation, so a
//! fixed `(seed, workers)` pair reproduces exactly.

use crate::poly::HermitePoly;
use crate::rng;

/// `Pr[|p(x)| > t ||p||_{L2}]` for each `t` in `t_list`.
pub fn mc_probe_concentration(
    p: &HermitePoly,
    t_list: &[f64],
    n_samples: usize,
    seed: u64,
    workers: usize,
) -> Vec<f64> {
    probe(p, t_list, n_samples, seed, workers, Side::Tail)
}

/// Small-ball probabilities `Pr[|p(x)| <= t ||p||_{L2}]` for each `t`.
pub fn mc_probe_anticoncentration(
    p: &HermitePoly,
    t_list: &[f64],
    n_samples: usize,
    seed: u64,
    workers: usize,
) -> Vec<f64> {
    probe(p, t_list, n_samples, seed, workers, Side::SmallBall)
}

#[derive(Clone, Copy)]
enum Side {
    Tail,
    SmallBall,
}

fn probe(
    p: &HermitePoly,
    t_list: &[f64],
    n_samples: usize,
    seed: u64,
    workers: usize,
    side: Side,
) -> Vec<f64> {
    assert!(
        n_samples >= 10_000,
        "probe budget below 10^4 is meaningless"
    );
    let norm = p.l2_norm();
    let dim = p.dim();
    let counts = rng::sharded_sum(seed, 0, n_samples, workers, t_list.len(), |rng, n| {
        let mut acc = vec![0.0; t_list.len()];
        for _ in 0..n {
            let x = rng::gaussian_vector(rng, dim);
            let v = p.eval(&x).expect("dim checked").abs();
            for (slot, &t) in acc.iter_mut().zip(t_list) {
                let hit = match side {
                    Side::Tail => v > t * norm,
                    Side::SmallBall => t > 0.0 && v <= t * norm,
                };
                if hit {
                    *slot += 1.0;
                }
            }
        }
        acc
    });
    counts.into_iter().map(|c| c / n_samples as f64).collect()
}
