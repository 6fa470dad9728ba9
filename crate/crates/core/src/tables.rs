//! Univariate Hermite coefficient tables and small combinatorial helpers.
//!
//! The Hermite polynomials here are probabilist's polynomials normalized to
//! unit Gaussian L2 norm: `H_0 = 1` and
//! `H_d(x) = (x H_{d-1}(x) - H'_{d-1}(x)) / sqrt(d)`.

use std::sync::RwLock;

static UNIVARIATE: RwLock<Vec<Vec<f64>>> = RwLock::new(Vec::new());
static INVERSE: RwLock<Vec<Vec<f64>>> = RwLock::new(Vec::new());

/// Monomial coefficients of `H_d`, lowest power first (length `d + 1`).
pub fn hermite_univariate(d: u32) -> Vec<f64> {
    {
        let cache = UNIVARIATE.read().unwrap();
        if let Some(row) = cache.get(d as usize) {
            return row.clone();
        }
    }
    let mut cache = UNIVARIATE.write().unwrap();
    if cache.is_empty() {
        cache.push(vec![1.0]);
    }
    while cache.len() <= d as usize {
        let prev = cache.last().unwrap();
        let k = cache.len() as u32; // building H_k
        let mut next = vec![0.0; k as usize + 1];
        // x * H_{k-1}
        for (p, &c) in prev.iter().enumerate() {
            next[p + 1] += c;
        }
        // - H'_{k-1}
        for (p, &c) in prev.iter().enumerate().skip(1) {
            next[p - 1] -= p as f64 * c;
        }
        let scale = 1.0 / (k as f64).sqrt();
        for c in &mut next {
            *c *= scale;
        }
        cache.push(next);
    }
    cache[d as usize].clone()
}

/// Hermite coefficients of the monomial `x^k`: `x^k = sum_j c_j H_j(x)`,
/// lowest degree first (length `k + 1`).
///
/// Built from the three-term recurrence `x H_j = sqrt(j+1) H_{j+1} + sqrt(j) H_{j-1}`.
pub fn monomial_to_hermite_univariate(k: u32) -> Vec<f64> {
    {
        let cache = INVERSE.read().unwrap();
        if let Some(row) = cache.get(k as usize) {
            return row.clone();
        }
    }
    let mut cache = INVERSE.write().unwrap();
    if cache.is_empty() {
        cache.push(vec![1.0]);
    }
    while cache.len() <= k as usize {
        let prev = cache.last().unwrap();
        let deg = cache.len(); // building x^deg
        let mut next = vec![0.0; deg + 1];
        for (j, &c) in prev.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            next[j + 1] += c * ((j + 1) as f64).sqrt();
            if j > 0 {
                next[j - 1] += c * (j as f64).sqrt();
            }
        }
        cache.push(next);
    }
    cache[k as usize].clone()
}

/// Evaluates `H_d` at `x` by the three-term recurrence, avoiding the
/// coefficient table entirely (used to cross-check the monomial route).
pub fn eval_hermite_univariate(d: u32, x: f64) -> f64 {
    let mut hm1 = 0.0; // H_{-1}
    let mut h = 1.0; // H_0
    for j in 1..=d {
        let jf = j as f64;
        let next = (x * h - (jf - 1.0).sqrt() * hm1) / jf.sqrt();
        hm1 = h;
        h = next;
    }
    h
}

/// `(2k - 1)!! = 1 * 3 * ... * (2k-1)`; the Gaussian moment `E[x^{2k}]`.
pub fn double_factorial_odd(k: u32) -> f64 {
    let mut acc = 1.0;
    let mut f = 1.0;
    for _ in 0..k {
        acc *= f;
        f += 2.0;
    }
    acc
}

/// Gaussian moment `E[x^m]` under the standard normal.
pub fn gaussian_moment(m: u32) -> f64 {
    if m % 2 == 1 {
        0.0
    } else {
        double_factorial_odd(m / 2)
    }
}

pub fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_degree_tables() {
        assert_eq!(hermite_univariate(0), vec![1.0]);
        assert_eq!(hermite_univariate(1), vec![0.0, 1.0]);
        let h2 = hermite_univariate(2);
        let s = std::f64::consts::SQRT_2;
        assert!((h2[0] + 1.0 / s).abs() < 1e-15);
        assert!((h2[2] - 1.0 / s).abs() < 1e-15);
        // H_3 = (x^3 - 3x) / sqrt(6)
        let h3 = hermite_univariate(3);
        let r6 = 6.0f64.sqrt();
        assert!((h3[1] + 3.0 / r6).abs() < 1e-15);
        assert!((h3[3] - 1.0 / r6).abs() < 1e-15);
    }

    #[test]
    fn max_coefficient_bound() {
        // The largest coefficient of H_d is at most 2^d.
        for d in 0..=8u32 {
            let mc = hermite_univariate(d)
                .iter()
                .fold(0.0f64, |m, c| m.max(c.abs()));
            assert!(mc <= (2.0f64).powi(d as i32) + 1e-12, "d={d} mc={mc}");
        }
    }

    #[test]
    fn inverse_table_round_trip() {
        // x^k expanded in H_j and re-expanded in powers must give back x^k.
        for k in 0..=8u32 {
            let inv = monomial_to_hermite_univariate(k);
            let mut powers = vec![0.0; k as usize + 1];
            for (j, &c) in inv.iter().enumerate() {
                for (p, &h) in hermite_univariate(j as u32).iter().enumerate() {
                    powers[p] += c * h;
                }
            }
            for (p, &c) in powers.iter().enumerate() {
                let expect = if p == k as usize { 1.0 } else { 0.0 };
                assert!((c - expect).abs() < 1e-10, "k={k} p={p} c={c}");
            }
        }
    }

    #[test]
    fn recurrence_eval_matches_table() {
        for d in 0..=6u32 {
            let table = hermite_univariate(d);
            for &x in &[-2.3f64, -0.5, 0.0, 0.9, 1.7] {
                let via_table: f64 = table
                    .iter()
                    .enumerate()
                    .map(|(p, &c)| c * x.powi(p as i32))
                    .sum();
                assert!((via_table - eval_hermite_univariate(d, x)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn moments() {
        assert_eq!(gaussian_moment(0), 1.0);
        assert_eq!(gaussian_moment(2), 1.0);
        assert_eq!(gaussian_moment(4), 3.0);
        assert_eq!(gaussian_moment(6), 15.0);
        assert_eq!(gaussian_moment(3), 0.0);
        assert_eq!(binomial(5, 2), 10.0);
    }
}
