//! Acceptance suite: one test per criterion, each printing a PASS line with
//! its measured quantities on success (visible with `--nocapture`).

use rand::Rng;

use ptf_core::adversary::{corrupt, gen_clean, random_ptf, CorruptionSpec, Strategy};
use ptf_core::decompose::{extend_decomposition, ExtendStatus};
use ptf_core::index::{indices_of_degree, indices_up_to, MultiIndex};
use ptf_core::learner::{learn_ptf, LearnerConfig};
use ptf_core::partition::{partition_region, PartitionParams};
use ptf_core::perceptron::{
    lift_and_whiten, perceptron_learn, robust_mean, ExitReason, PerceptronParams,
};
use ptf_core::poly::{gaussian_moment_inner_product, HermitePoly, PolyVec};
use ptf_core::region::Region;
use ptf_core::rng;
use ptf_core::shift::shift_split;
use ptf_core::snpt::{snpt_violation_search, SnptParams};
use ptf_core::split::{low_degree_split, low_degree_split_capped};
use ptf_core::tables;

fn hb(dim: usize, a: &[u32]) -> HermitePoly {
    HermitePoly::hermite_basis(dim, MultiIndex::new(a.to_vec())).unwrap()
}

fn random_harmonic(dim: usize, k: u32, rng: &mut rng::Stream) -> HermitePoly {
    let terms: Vec<(MultiIndex, f64)> = indices_of_degree(dim, k)
        .into_iter()
        .map(|a| (a, rng.gen_range(-1.0..1.0)))
        .collect();
    HermitePoly::from_hermite_terms(dim, terms)
        .unwrap()
        .normalized()
        .unwrap()
}

#[test]
fn criterion_01_hermite_algebra_exactness() {
    // Orthonormality through the closed-form Gaussian-moment oracle.
    let indices = indices_up_to(3, 4);
    for a in &indices {
        for b in &indices {
            let pa = HermitePoly::hermite_basis(3, a.clone()).unwrap();
            let pb = HermitePoly::hermite_basis(3, b.clone()).unwrap();
            let ip = gaussian_moment_inner_product(&pa, &pb);
            let expect = f64::from(a == b);
            assert!(
                (ip - expect).abs() <= 1e-10,
                "<H_{a:?}, H_{b:?}> = {ip}, want {expect}"
            );
        }
    }
    // Basis round trips within 1e-10 per coefficient.
    let mut r = rng::stream(11, 0);
    for _ in 0..20 {
        let terms: Vec<(MultiIndex, f64)> = indices_up_to(3, 4)
            .into_iter()
            .map(|a| (a, r.gen_range(-2.0..2.0)))
            .collect();
        let p = HermitePoly::from_monomial_terms(3, terms.clone()).unwrap();
        let back = HermitePoly::from_hermite_terms(
            3,
            p.hermite_coeffs().iter().map(|(a, &c)| (a.clone(), c)),
        )
        .unwrap();
        for (a, c) in &terms {
            let got = back.monomial_coeffs().get(a).copied().unwrap_or(0.0);
            assert!(
                (got - c).abs() <= 1e-10,
                "round trip at {a:?}: {got} vs {c}"
            );
        }
    }
    // Addition formula at 100 random instances.
    for trial in 0..100 {
        let dim = 1 + (trial % 3);
        let total = 1 + (trial % 4) as u32;
        let s = {
            let opts = indices_of_degree(dim, total);
            opts[trial % opts.len()].clone()
        };
        let theta: f64 = r.gen_range(0.1..1.4);
        let (a, b) = (theta.cos().abs().max(1e-3), theta.sin().abs().max(1e-3));
        let scale = (a * a + b * b).sqrt();
        let (a, b) = (a / scale, b / scale);
        let x = rng::gaussian_vector(&mut r, dim);
        let y = rng::gaussian_vector(&mut r, dim);
        let mixed: Vec<f64> = x.iter().zip(&y).map(|(xi, yi)| a * xi + b * yi).collect();
        let lhs = hb(dim, &s.to_dense(dim)).eval(&mixed).unwrap();
        // RHS: sum over k <= s of sqrt(binom(s,k)) a^{|s-k|} b^{|k|} H_{s-k}(x) H_k(y).
        let mut rhs = 0.0;
        let dense = s.to_dense(dim);
        let mut k = vec![0u32; dim];
        loop {
            let mut weight = 1.0;
            let mut hsk = 1.0;
            let mut hk = 1.0;
            let mut k_total = 0;
            for i in 0..dim {
                weight *= tables::binomial(dense[i], k[i]).sqrt();
                hsk *= tables::eval_hermite_univariate(dense[i] - k[i], x[i]);
                hk *= tables::eval_hermite_univariate(k[i], y[i]);
                k_total += k[i];
            }
            rhs += weight
                * a.powi((s.total_degree() - k_total) as i32)
                * b.powi(k_total as i32)
                * hsk
                * hk;
            let mut pos = 0;
            loop {
                if pos == dim {
                    break;
                }
                if k[pos] < dense[pos] {
                    k[pos] += 1;
                    break;
                }
                k[pos] = 0;
                pos += 1;
            }
            if pos == dim {
                break;
            }
        }
        assert!(
            (lhs - rhs).abs() <= 1e-8 * lhs.abs().max(1.0),
            "addition formula: {lhs} vs {rhs}"
        );
    }
    println!("criterion 1 (hermite algebra exactness): PASS");
}

#[test]
fn criterion_02_gradient_norm_identity() {
    let mut r = rng::stream(21, 0);
    for trial in 0..50 {
        let dim = 2 + (trial % 3);
        let d = 1 + (trial % 4) as u32;
        let p = random_harmonic(dim, d, &mut r);
        let lhs: f64 = p.gradient().iter().map(|g| g.l2_norm().powi(2)).sum();
        let rhs = d as f64 * p.l2_norm().powi(2);
        assert!(
            (lhs - rhs).abs() <= 1e-9 * rhs.max(1e-9),
            "harmonic equality: {lhs} vs {rhs}"
        );
    }
    for trial in 0..50 {
        let dim = 2 + (trial % 3);
        let d = 2 + (trial % 3) as u32;
        // Mixed degrees with at least 20% mass below the top level.
        let top = random_harmonic(dim, d, &mut r).scale(0.8);
        let low = random_harmonic(dim, d - 1, &mut r).scale(0.6);
        let p = top.add(&low);
        let lhs: f64 = p.gradient().iter().map(|g| g.l2_norm().powi(2)).sum();
        let rhs = d as f64 * p.l2_norm().powi(2);
        assert!(rhs - lhs > 1e-3, "mixed strictness: gap {}", rhs - lhs);
    }
    println!("criterion 2 (gradient norm identity): PASS");
}

#[test]
fn criterion_03_shift_split() {
    let cases = [hb(1, &[2]), hb(1, &[3]), hb(2, &[2, 1])];
    let mut r = rng::stream(31, 0);
    for q in &cases {
        let d = q.harmonic_degree().unwrap();
        let qv = PolyVec::new(vec![q.clone()]).unwrap();
        for delta in [0.1, 0.01] {
            let split = shift_split(&qv, delta).unwrap();
            // Error norm bound, exactly in coefficient space.
            let e_norm = split.e.components()[0].l2_norm();
            assert!(
                e_norm <= 2.0f64.powf(d as f64 / 2.0) * delta * delta + 1e-15,
                "e norm {e_norm} for d={d}, delta={delta}"
            );
            // Reconstruction identity at 100 random points.
            let a = (1.0 - delta * delta).sqrt();
            for _ in 0..100 {
                let x = rng::gaussian_vector(&mut r, q.dim());
                let z = rng::gaussian_vector(&mut r, q.dim());
                let shifted: Vec<f64> = x
                    .iter()
                    .zip(&z)
                    .map(|(xi, zi)| a * xi + delta * zi)
                    .collect();
                let lhs = q.eval(&shifted).unwrap();
                let rhs = split.reconstruct(&qv, 0, &x, &z).unwrap();
                assert!(
                    (lhs - rhs).abs() <= 1e-8 * lhs.abs().max(1.0),
                    "reconstruction {lhs} vs {rhs}"
                );
            }
        }
    }
    println!("criterion 3 (correlated-shift split): PASS");
}

#[test]
fn criterion_04_snpt_falsification() {
    // Independent coordinates never certify.
    let coords: Vec<HermitePoly> = (0..5).map(|i| HermitePoly::coordinate(5, i)).collect();
    let params = SnptParams {
        grid_step: 0.05,
        n_mc: 10_000,
        ..SnptParams::new(0.5, 2, 1)
    };
    assert!(snpt_violation_search(&coords, &params).unwrap().is_none());

    // The near-collinear pair certifies along the difference direction,
    // across three seeds.
    let eta = 0.01f64;
    let q1 = hb(2, &[2, 0]);
    let q2 = hb(2, &[2, 0])
        .add(&hb(2, &[0, 2]).scale(eta))
        .scale(1.0 / (1.0 + eta * eta).sqrt());
    let polys = [q1, q2];
    for seed in [7, 8, 9] {
        let params = SnptParams {
            grid_step: 0.05,
            n_mc: 10_000,
            ..SnptParams::new(0.05, 2, seed)
        };
        let cert = snpt_violation_search(&polys, &params)
            .unwrap()
            .expect("certificate");
        assert_eq!(cert.k, 2);
        let along = ((cert.a[0] - cert.a[1]) / 2.0f64.sqrt()).abs();
        assert!(along >= 0.95, "seed {seed}: |a . (1,-1)/sqrt2| = {along}");
    }
    println!("criterion 4 (snpt falsification): PASS");
}

#[test]
fn criterion_05_split_energy_accounting() {
    let mut r = rng::stream(51, 0);
    for trial in 0..20 {
        let dim = 2 + (trial % 4);
        let k = 2 + (trial % 3) as u32;
        let q = random_harmonic(dim, k, &mut r);
        // Untruncated split reconstructs the top harmonic mass.
        let full = low_degree_split(&q, 1e-9).unwrap();
        assert!(
            full.residual_high.l2_norm() <= 1e-7,
            "trial {trial}: residual {}",
            full.residual_high.l2_norm()
        );
        // Truncated split: the residual equals the harmonic mass of the
        // dropped layers, computed through the independent route of
        // rebuilding the dropped products directly.
        let keep = full.pairs.len().saturating_sub(1).max(1);
        let cut = low_degree_split_capped(&q, 1e-9, keep).unwrap();
        let mut dropped_recon = HermitePoly::zero(dim);
        for pair in &cut.dropped {
            dropped_recon = dropped_recon.add(&pair.alpha.mul(&pair.beta));
        }
        let dropped_energy = dropped_recon.harmonic_component(k).l2_norm();
        let residual = cut.residual_high.l2_norm();
        assert!(
            (residual - dropped_energy).abs() <= 1e-7,
            "trial {trial}: residual {residual} vs dropped energy {dropped_energy}"
        );
    }
    // The tied-spectrum example: dropping one of two equal singular values
    // of (H2(x1) + H2(x2))/sqrt2 leaves exactly sqrt(sigma^2 / k) = 1/sqrt2.
    let q = hb(2, &[2, 0]).add(&hb(2, &[0, 2])).scale(0.5f64.sqrt());
    let cut = low_degree_split_capped(&q, 1e-9, 1).unwrap();
    assert!((cut.residual_high.l2_norm() - 0.5f64.sqrt()).abs() <= 1e-9);
    println!("criterion 5 (split energy accounting): PASS");
}

#[test]
fn criterion_06_extend_decomposition_contract() {
    let eps = 0.1;
    let big_m = 3;
    let mut converged = 0;
    let mut exhausted = 0;
    for seed in 0..10u64 {
        let mut r = rng::stream(600 + seed, 0);
        let dim = 2 + (seed as usize % 4); // 2..=5
                                           // Mix of instances: protected prefixes, rank-one quadratics that
                                           // force rewrites, and generic quadratics.
        let (initial, p): (Vec<HermitePoly>, HermitePoly) = match seed % 4 {
            0 => (vec![], {
                let q = random_harmonic(dim, 2, &mut r).scale(0.7);
                q.add(&random_harmonic(dim, 1, &mut r).scale(0.3))
            }),
            1 => (vec![], hb(dim, &[2])), // rank-one quadratic, cascades
            2 => (
                vec![HermitePoly::coordinate(dim, 0)],
                hb(dim, &[1, 1])
                    .scale(0.9)
                    .add(&HermitePoly::coordinate(dim, 0).scale(0.1)),
            ),
            _ => (
                vec![
                    HermitePoly::coordinate(dim, 0),
                    HermitePoly::coordinate(dim, 1),
                ],
                random_harmonic(dim, 2, &mut r),
            ),
        };
        let p = p.normalized().unwrap();
        let params = SnptParams {
            grid_step: 0.05,
            n_mc: 10_000,
            ..SnptParams::new(eps, 2, 600 + seed)
        };
        let ext = extend_decomposition(&initial, &p, big_m, &params, 60).unwrap();

        // Prefix preserved bit-exactly.
        for (i, q) in initial.iter().enumerate() {
            assert_eq!(
                format!("{:?}", q.extend_dim(dim).hermite_coeffs()),
                format!("{:?}", ext.decomposition.primitives[i].hermite_coeffs()),
                "seed {seed}: prefix slot {i} modified"
            );
        }
        if ext.status == ExtendStatus::BudgetExhausted {
            exhausted += 1;
            println!("  seed {seed}: BudgetExhausted (reported, not failed)");
            continue;
        }
        converged += 1;
        // Monte-Carlo residual against (eps^M)^2 * 1.1.
        let mut rr = rng::stream(700 + seed, 0);
        let mut acc = 0.0;
        let n = 100_000;
        for _ in 0..n {
            let x = rng::gaussian_vector(&mut rr, dim);
            let d = p.eval(&x).unwrap() - ext.decomposition.eval_composition(&x).unwrap();
            acc += d * d;
        }
        let mc_sq = acc / n as f64;
        let bound = eps.powi(2 * big_m as i32) * 1.1;
        assert!(
            mc_sq <= bound,
            "seed {seed}: MC residual^2 {mc_sq} > {bound}"
        );
        // Coefficient bounds on every rewrite.
        for rec in &ext.trace {
            assert!(rec.coeffs.gamma_max < 1.0 / eps, "seed {seed}: gamma");
            assert!(rec.coeffs.theta.abs() <= 1.0 + 1e-12, "seed {seed}: theta");
            assert!(
                rec.coeffs.zeta_max <= 1.0 / eps + 1e-12,
                "seed {seed}: zeta"
            );
            assert!(
                rec.coeffs.lambda_max <= (1.0 / eps).sqrt() + 1e-12,
                "seed {seed}: lambda"
            );
            assert!(rec.coeffs.iota_max <= 1.0 + 1e-12, "seed {seed}: iota");
        }
        // Per-degree potential vector strictly lexicographically decreasing.
        let mut prev: Option<&Vec<u64>> = None;
        for rec in &ext.trace {
            if let Some(p) = prev {
                assert!(rec.potential < *p, "seed {seed}: potential not decreasing");
            }
            prev = Some(&rec.potential);
        }
    }
    println!(
        "criterion 6 (extendible decomposition contract): PASS ({converged} converged, {exhausted} budget-exhausted)"
    );
}

#[test]
fn criterion_07_figure_one_reproduction() {
    let eps = 0.01;
    let report = ptf_core::adversary::figure1_demo(eps, 1_000_000, 71).unwrap();
    assert!(
        report.conditional_small_ball >= 0.2,
        "conditional small-ball {} < 0.2",
        report.conditional_small_ball
    );
    assert!(
        report.band_mass >= 0.05 && report.band_mass <= 0.3,
        "band mass {}",
        report.band_mass
    );
    let bound = 5.0 * eps.powf(0.25);
    assert!(
        report.max_cell_small_ball <= bound,
        "per-cell small-ball {} > {bound}",
        report.max_cell_small_ball
    );
    println!(
        "criterion 7 (figure-1 reproduction): PASS (before {:.3}, after {:.3}, mass {:.3})",
        report.conditional_small_ball, report.max_cell_small_ball, report.band_mass
    );
}

#[test]
fn criterion_08_partition_conditions() {
    let eps = 0.1;
    let tol_base = 3.0 * eps * eps;
    for seed in 0..5u64 {
        let mut r = rng::stream(800 + seed, 0);
        let dim = 2 + (seed as usize % 2);
        // Instances 0-2: full space; instances 3-4: condition on a slab from
        // a first-round partition so containment is non-vacuous, with the
        // second-round polynomial a perturbation of the first (mirroring the
        // learner's recursion, where successive margin polynomials overlap).
        let (p, region) = if seed < 3 {
            let p = random_harmonic(dim, 2, &mut r)
                .scale(0.8)
                .add(&random_harmonic(dim, 1, &mut r).scale(0.44))
                .normalized()
                .unwrap();
            (p, Region::full_space(dim, 1))
        } else {
            let root = Region::full_space(dim, 2);
            let pre = random_harmonic(dim, 2, &mut r)
                .scale(0.7)
                .add(&random_harmonic(dim, 1, &mut r).scale(0.5))
                .normalized()
                .unwrap();
            // Parent pinned at the same fine scale as the child cells, so
            // the child's margin polynomial cannot drift across the
            // parent's un-subdivided coordinates.
            let mut pp = PartitionParams::new(0.1, 801 + seed);
            pp.n_mc = 400_000;
            pp.max_cells = 8192;
            pp.mass_floor = 2e-5;
            pp.cell_side = Some(0.05);
            let (cells, _) = partition_region(&pre, &root, &pp).unwrap();
            let slab = cells
                .into_iter()
                .max_by(|a, b| a.mass_estimate.partial_cmp(&b.mass_estimate).unwrap())
                .expect("at least one cell");
            // A second-round margin polynomial crosses zero inside its
            // region; anchor a fresh quadratic at a point of the slab.
            let g = random_harmonic(dim, 2, &mut r)
                .scale(0.75)
                .add(&random_harmonic(dim, 1, &mut r).scale(0.4));
            let anchor = ptf_core::region::sample_conditional(&slab, dim, 1, 803 + seed, 1e-6)
                .expect("slab non-empty")
                .points
                .remove(0);
            let g0 = g.eval(&anchor).unwrap();
            let p = g.sub(&HermitePoly::constant(dim, g0)).normalized().unwrap();
            (p, slab)
        };
        let mut params = PartitionParams::new(eps, 810 + seed);
        params.n_mc = 1_000_000;
        params.max_cells = 8192;
        params.mass_floor = 2e-5;
        params.cell_side = Some(0.05);
        let (cells, report) = match partition_region(&p, &region, &params) {
            Ok(v) => v,
            Err(e) => panic!("seed {seed}: partition failed: {e}"),
        };
        // Disjointness: distinct grid cells.
        let mut ids: Vec<_> = report.kept.iter().map(|c| c.id.clone()).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), report.kept.len(), "seed {seed}: duplicate cells");
        // Containment: the first ell coordinates stay inside the parent.
        for cell in &cells {
            for (i, &(lo, hi)) in region.rect.intervals.iter().enumerate() {
                let (clo, chi) = cell.rect.intervals[i];
                assert!(
                    clo >= lo - 1e-12 && chi <= hi + 1e-12,
                    "seed {seed}: containment"
                );
            }
            assert_eq!(cell.level, region.level - 1, "seed {seed}: level decrement");
        }
        // Coverage and overshoot at 3 eps^2 plus three sigmas of counting noise.
        let n = report.region_count as f64;
        let sigma = (tol_base * (1.0 - tol_base) / n).sqrt();
        assert!(
            report.coverage_loss <= tol_base + 3.0 * sigma,
            "seed {seed}: coverage loss {} > {}",
            report.coverage_loss,
            tol_base + 3.0 * sigma
        );
        assert!(
            report.overshoot <= tol_base + 3.0 * sigma,
            "seed {seed}: overshoot {} > {}",
            report.overshoot,
            tol_base + 3.0 * sigma
        );
    }
    println!("criterion 8 (partition conditions): PASS");
}

#[test]
fn criterion_09_robust_mean() {
    for seed in 0..5u64 {
        let mut r = rng::stream(900 + seed, 0);
        let clean: Vec<Vec<f64>> = (0..100_000)
            .map(|_| rng::gaussian_vector(&mut r, 10))
            .collect();
        let mu = robust_mean(&clean, None, 0.1, 9.0).unwrap();
        let err = |m: &[f64]| m.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(err(&mu) <= 0.05, "seed {seed}: clean error {}", err(&mu));

        let mut contaminated = clean.clone();
        for p in contaminated.iter_mut().take(10_000) {
            *p = vec![0.0; 10];
            p[0] = 10.0;
        }
        let naive = robust_mean(&contaminated, None, 0.0, 9.0).unwrap();
        let filtered = robust_mean(&contaminated, None, 0.1, 9.0).unwrap();
        assert!(
            err(&filtered) <= 0.5 * err(&naive),
            "seed {seed}: filtered {} vs naive {}",
            err(&filtered),
            err(&naive)
        );
    }
    println!("criterion 9 (robust mean): PASS");
}

#[test]
fn criterion_10_perceptron_contraction_and_exit() {
    let eps = 0.05;
    let k = 100;
    for (seed, opt) in [(101u64, 0.0), (102, 0.02)] {
        let truth = random_ptf(5, 1, seed);
        let clean = gen_clean(&truth, 60_000, seed + 10);
        let data = if opt > 0.0 {
            corrupt(
                &clean,
                &truth,
                &CorruptionSpec::new(opt, Strategy::LabelFlipBoundary, seed + 20),
            )
        } else {
            clean.clone()
        };
        let mut r = rng::stream(seed + 30, 0);
        let oracle: Vec<Vec<f64>> = (0..30_000)
            .map(|_| rng::gaussian_vector(&mut r, 5))
            .collect();
        let (lifted, wt) = lift_and_whiten(&data.labeled(), &oracle, 1).unwrap();
        let oracle_lifted: Vec<Vec<f64>> = oracle.iter().map(|x| wt.apply(x)).collect();
        let params = PerceptronParams::new(eps, k);
        let (w, gamma, report) = perceptron_learn(&lifted, &oracle_lifted, &params).unwrap();
        // Exit with band error below 2F.
        assert_eq!(report.exit, ExitReason::BandErrorBelowThreshold);
        assert!(report.final_band_error < 2.0 * report.big_f);
        // Quadratic contraction on every accepted iteration.
        for pair in report.iterations.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if a.qp_dot <= -(gamma * a.f_hat / 2.0) * a.q_norm {
                assert!(b.q_norm <= a.q_norm * (1.0 + 1e-9));
            }
        }
        if opt == 0.0 {
            // Band error on a clean 1e5-point test within 2F + 3 sigma.
            let test = gen_clean(&truth, 100_000, seed + 40);
            let w_norm = {
                let acc: f64 = oracle_lifted
                    .iter()
                    .map(|z| {
                        let d: f64 = w.iter().zip(z).map(|(a, b)| a * b).sum();
                        d * d
                    })
                    .sum();
                (acc / oracle_lifted.len() as f64).sqrt()
            };
            let (mut band, mut wrong) = (0usize, 0usize);
            for s in test.labeled() {
                let z = wt.apply(&s.x);
                let v: f64 = w.iter().zip(&z).map(|(a, b)| a * b).sum();
                if v.abs() >= gamma * w_norm {
                    band += 1;
                    if (v >= 0.0) != (s.y == 1) {
                        wrong += 1;
                    }
                }
            }
            let band_err = wrong as f64 / band.max(1) as f64;
            let band_mass = band as f64 / 100_000.0;
            let sigma =
                (band_err.max(0.01) * (1.0 - band_err.max(0.01)) / band.max(1) as f64).sqrt();
            assert!(band_err <= 2.0 * report.big_f + 3.0 * sigma);
            assert!(band_mass >= 0.5, "band mass {band_mass}");
        }
    }

    // Update-path coverage: from an adversarial start the loop must run,
    // contract on accepted steps, and terminate within the cap.
    let truth = random_ptf(5, 1, 111);
    let data = gen_clean(&truth, 40_000, 112);
    let mut r = rng::stream(113, 0);
    let oracle: Vec<Vec<f64>> = (0..20_000)
        .map(|_| rng::gaussian_vector(&mut r, 5))
        .collect();
    let (lifted, wt) = lift_and_whiten(&data.labeled(), &oracle, 1).unwrap();
    let oracle_lifted: Vec<Vec<f64>> = oracle.iter().map(|x| wt.apply(x)).collect();
    let chow: Vec<Vec<f64>> = lifted
        .iter()
        .map(|(z, y)| z.iter().map(|v| v * *y as f64).collect())
        .collect();
    let target = robust_mean(&chow, None, 0.0, 9.0).unwrap();
    let tnorm: f64 = target.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut q0: Vec<f64> = target.iter().map(|v| -0.9 * v).collect();
    q0[1] += 0.4 * tnorm;
    let mut params = PerceptronParams::new(0.01, 100);
    params.initial_iterate = Some(q0);
    params.max_iters = 300;
    let (_w, gamma, report) = perceptron_learn(&lifted, &oracle_lifted, &params).unwrap();
    assert!(!report.iterations.is_empty(), "update loop must run");
    assert!(report.iterations.len() <= params.max_iters);
    for pair in report.iterations.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if a.qp_dot <= -(gamma * a.f_hat / 2.0) * a.q_norm {
            assert!(b.q_norm <= a.q_norm * (1.0 + 1e-9));
        }
    }
    println!(
        "criterion 10 (perceptron contraction and exit): PASS ({} adversarial-start iterations)",
        report.iterations.len()
    );
}

#[test]
fn criterion_11_end_to_end_monotonicity() {
    let truth = random_ptf(3, 2, 101);
    let train = gen_clean(&truth, 200_000, 102);
    let test = gen_clean(&truth, 100_000, 103);
    let test_samples = test.labeled();

    // The pipeline is itself Monte-Carlo (oracle draws, partition sampling);
    // its noise at fixed data is measured by replicating the opt = 0 run
    // under different internal seeds. Error means per opt level use the
    // first two replicate seeds.
    let seeds = [105u64, 106, 107];
    let run = |opt: f64, learner_seed: u64| {
        let spec = CorruptionSpec::new(opt, Strategy::LabelFlipBoundary, 104);
        let bad = if opt > 0.0 {
            corrupt(&train, &truth, &spec)
        } else {
            train.clone()
        };
        let config = LearnerConfig::new(0.01, learner_seed);
        let (h, report) = learn_ptf(&bad.labeled(), 3, 2, &config).unwrap();
        (h.evaluate(&test_samples), report)
    };

    let clean_reps: Vec<f64> = seeds.iter().map(|&s| run(0.0, s).0).collect();
    let construction_noise = clean_reps.iter().map(|&e| e).fold(f64::MIN, f64::max)
        - clean_reps.iter().copied().fold(f64::MAX, f64::min);
    let sigma_eval = (clean_reps[0] * (1.0 - clean_reps[0]) / 100_000.0).sqrt();
    let tolerance = construction_noise + 2.0 * sigma_eval * 2.0f64.sqrt();

    let mut errors = Vec::new();
    for opt in [0.0, 0.02, 0.05] {
        let mut level = Vec::new();
        for &s in &seeds[..2] {
            let (err, report) = run(opt, s);
            level.push(err);
            assert!(
                report.list_length <= report.length_bound,
                "list length {} > bound {}",
                report.list_length,
                report.length_bound
            );
            // Mass accounting: classified + constant + residual covers the
            // space within Monte-Carlo tolerance.
            let total = report.classified_mass + report.constant_mass + report.residual_mass;
            assert!((total - 1.0).abs() <= 0.05, "mass accounting off: {total}");
            // Discard-budget replay: constant-labeled mass weighted by its
            // measured noise floor stays within the corruption budget plus
            // the constant-region tolerance.
            let discard_weighted: f64 = report
                .regions
                .iter()
                .filter(|r| r.outcome != "learned")
                .map(|r| r.mass_estimate * r.minority_fraction.unwrap_or(0.0))
                .sum();
            assert!(
                discard_weighted <= opt + 0.05,
                "discard-weighted noise {discard_weighted} exceeds budget at opt {opt}"
            );
        }
        errors.push(level.iter().sum::<f64>() / level.len() as f64);
    }
    assert!(errors[0] <= 0.1, "clean error {} > 0.1", errors[0]);
    for pair in errors.windows(2) {
        assert!(
            pair[1] >= pair[0] - tolerance,
            "errors decreased beyond pipeline noise: {:?} (tolerance {})",
            errors,
            tolerance
        );
    }
    println!(
        "criterion 11 (end-to-end monotonicity): PASS (errors {:?}, noise tolerance {:.4})",
        errors, tolerance
    );
}
