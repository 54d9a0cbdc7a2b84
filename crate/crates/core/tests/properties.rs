mod common;

use common::*;
use proptest::prelude::*;

use nonsig::bounds::{
    gamma2_tilde_1, nu_alpha, nu_corr, nu_tilde, nu_tilde_eps, quantum_to_local_decomposition, BoundConfig, Certificate,
};
use nonsig::correlation::span_residual;
use nonsig::lp::solve_lp;
use nonsig::simulate::{run_smp_classical, SmpPlan};
use nonsig::{
    affine_basis, enumerate_local_vertices, from_correlation_rep, statistical_distance, symmetrize_marginals,
    to_correlation_rep, AffineModel, Alphabets, ConditionalDistribution, DEFAULT_VERTEX_CAP,
};

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig { cases: n, ..ProptestConfig::default() }
}

fn model_of(p: &ConditionalDistribution) -> AffineModel {
    match nu_tilde(p).unwrap().primal_certificate {
        Certificate::Affine { model } => model,
        _ => unreachable!(),
    }
}

/// Largest event discrepancy per input pair, by subset enumeration.
fn tv_by_events(p: &ConditionalDistribution, q: &ConditionalDistribution) -> f64 {
    let s = p.alphabets();
    let cells = s.na * s.nb;
    let mut best: f64 = 0.0;
    for x in 0..s.nx {
        for y in 0..s.ny {
            let (ps, qs) = (p.slice(x, y), q.slice(x, y));
            for mask in 0u32..(1 << cells) {
                let d: f64 = (0..cells).filter(|k| mask >> k & 1 == 1).map(|k| ps[k] - qs[k]).sum();
                best = best.max(d.abs());
            }
        }
    }
    best
}

proptest! {
    #![proptest_config(cases(64))]

    #[test]
    fn correlation_round_trip(seed in any::<u64>(), nx in 1usize..4, ny in 1usize..4) {
        let mut r = rng(seed);
        let p = random_ns(&mut r, Alphabets::binary(nx, ny).unwrap());
        let back = from_correlation_rep(&to_correlation_rep(&p).unwrap()).unwrap();
        prop_assert!(back.max_abs_diff(&p).unwrap() <= 1e-12);
    }

    #[test]
    fn symmetrize_keeps_c_and_zeroes_marginals(seed in any::<u64>(), nx in 1usize..4, ny in 1usize..4) {
        let mut r = rng(seed);
        let p = random_ns(&mut r, Alphabets::binary(nx, ny).unwrap());
        let rep = to_correlation_rep(&p).unwrap();
        let sym = to_correlation_rep(&symmetrize_marginals(&p).unwrap()).unwrap();
        for x in 0..nx {
            for y in 0..ny {
                prop_assert!((sym.c[x][y] - rep.c[x][y]).abs() <= 1e-15);
            }
        }
        prop_assert!(sym.ma.iter().chain(&sym.mb).all(|&m| m == 0.0));
    }

    #[test]
    fn tv_matches_event_definition(seed in any::<u64>()) {
        let mut r = rng(seed);
        let s = random_alphabets(&mut r, 2, 4);
        prop_assume!(s.na * s.nb <= 16);
        let p = random_ns(&mut r, s);
        let q = random_ns(&mut r, s);
        let d = statistical_distance(&p, &q).unwrap();
        prop_assert!((d - tv_by_events(&p, &q)).abs() <= 1e-12);
        prop_assert!((d - statistical_distance(&q, &p).unwrap()).abs() <= 1e-15);
        let w = random_ns(&mut r, s);
        prop_assert!(d <= statistical_distance(&p, &w).unwrap() + statistical_distance(&w, &q).unwrap() + 1e-12);
        // Mixing in 2 eps of anything moves at most 2 eps.
        let eps = 0.1;
        let mixed = p.combine(1.0 - 2.0 * eps, &q, 2.0 * eps).unwrap();
        prop_assert!(statistical_distance(&p, &mixed).unwrap() <= 2.0 * eps + 1e-12);
    }

    #[test]
    fn lp_matches_vertex_enumeration(seed in any::<u64>()) {
        let mut r = rng(seed);
        let lp = random_small_lp(&mut r);
        let sol = solve_lp(&lp);
        prop_assert!(sol.is_optimal(), "{:?}", sol.status);
        let brute = brute_force_lp(&lp).unwrap();
        prop_assert!((sol.objective - brute).abs() <= 1e-6, "{} vs {}", sol.objective, brute);
        prop_assert!(sol.duality_gap.abs() <= 1e-7 * (1.0 + sol.objective.abs()));
        prop_assert!(sol.primal_residual <= 1e-8);
    }
}

proptest! {
    #![proptest_config(cases(24))]

    #[test]
    fn nu_primal_equals_dual_and_sandwich(seed in any::<u64>()) {
        let mut r = rng(seed);
        let s = random_alphabets(&mut r, 3, 3);
        let p = random_ns(&mut r, s);
        let nu = nu_tilde(&p).unwrap();
        prop_assert!((nu.value - nu.dual_value).abs() <= 1e-5);
        prop_assert!(nu.diagnostics.dual_normalization <= 1.0 + 1e-6);
        model_of(&p).check(&p, 1e-7).unwrap();
        let g = gamma2_tilde_1(&p).unwrap();
        prop_assert!(g.value >= 1.0 - 1e-5 && g.value <= nu.value + 1e-5, "{} {}", g.value, nu.value);
    }

    #[test]
    fn extension_leaves_nu_unchanged(seed in any::<u64>()) {
        let mut r = rng(seed);
        let s = random_alphabets(&mut r, 2, 2);
        let p = random_ns(&mut r, s);
        let padded = p.pad_outcomes(1, r.random_range(0..2));
        prop_assert!((nu_tilde(&p).unwrap().value - nu_tilde(&padded).unwrap().value).abs() <= 1e-6);
    }

    #[test]
    fn composition(seed in any::<u64>()) {
        let mut r = rng(seed);
        let s = random_alphabets(&mut r, 2, 3);
        let parts: Vec<ConditionalDistribution> = (0..3).map(|_| random_ns(&mut r, s)).collect();
        let w: Vec<f64> = (0..3).map(|_| r.random_range(0.0..1.0)).collect();
        let total: f64 = w.iter().sum();
        let mut p = parts[0].combine(w[0] / total, &parts[1], w[1] / total).unwrap();
        p = p.combine(1.0, &parts[2], w[2] / total).unwrap();
        let rhs: f64 = parts.iter().zip(&w).map(|(q, wi)| wi / total * nu_tilde(q).unwrap().value).sum();
        prop_assert!(nu_tilde(&p).unwrap().value <= rhs + 1e-6);

        // One negative weight, kept small enough for p to stay a distribution.
        let u = ConditionalDistribution::uniform(s);
        let floor = parts[0].table().iter().copied().fold(f64::INFINITY, f64::min);
        let t = 0.5 * floor * (s.na * s.nb) as f64;
        let q = parts[0].combine(1.0 + t, &u, -t).unwrap();
        if q.validate().is_valid() {
            let rhs = (1.0 + t) * nu_tilde(&parts[0]).unwrap().value + t;
            prop_assert!(nu_tilde(&q).unwrap().value <= rhs + 1e-6);
        }
    }

    #[test]
    fn symmetrizing_never_raises_nu(seed in any::<u64>(), nx in 1usize..4, ny in 1usize..4) {
        let mut r = rng(seed);
        let p = random_ns(&mut r, Alphabets::binary(nx, ny).unwrap());
        let sym = symmetrize_marginals(&p).unwrap();
        prop_assert!(nu_tilde(&sym).unwrap().value <= nu_tilde(&p).unwrap().value + 1e-6);
    }

    #[test]
    fn nu_eps_is_monotone(seed in any::<u64>()) {
        let mut r = rng(seed);
        let s = random_alphabets(&mut r, 2, 2);
        let p = random_ns(&mut r, s);
        let mut last = f64::INFINITY;
        for eps in [0.0, 0.02, 0.05, 0.1, 0.2, 0.3] {
            let v = nu_tilde_eps(&p, eps).unwrap().value;
            prop_assert!(v <= last + 1e-7);
            prop_assert!(v >= 1.0 - 1e-7);
            last = v;
        }
    }

    #[test]
    fn decomposition_identity(seed in any::<u64>()) {
        let mut r = rng(seed);
        let s = Alphabets::new(r.random_range(1..3), r.random_range(1..3), r.random_range(2..4), r.random_range(2..4)).unwrap();
        let p = random_ns(&mut r, s);
        let d = quantum_to_local_decomposition(&p, None).unwrap();
        prop_assert!(d.residual <= 1e-10);
        let local = |q: &ConditionalDistribution| Ok(model_of(q));
        let d = quantum_to_local_decomposition(&p, Some(&local)).unwrap();
        prop_assert!(d.residual <= 1e-7);
        prop_assert!(d.model.components.iter().all(|(_, c)| c.is_sampleable()));
    }
}

proptest! {
    #![proptest_config(cases(12))]

    #[test]
    fn sign_matrix_conversions(seed in any::<u64>(), nx in 1usize..4, ny in 1usize..4) {
        let mut r = rng(seed);
        let c = random_sign_matrix(&mut r, nx, ny);
        let p = from_signs(&c);
        let nt = nu_tilde(&p).unwrap().value;
        let nc = nu_corr(&c).unwrap().value;
        if nt > 1.0 + 1e-6 {
            prop_assert!((nt - nc).abs() <= 1e-5);
        }
        let cfg = BoundConfig::default();
        let eps = r.random_range(0.01..0.2);
        let alpha = 1.0 / (1.0 - 2.0 * eps);
        let ne = nu_tilde_eps(&p, eps).unwrap().value;
        let na = nu_alpha(&c, alpha, &cfg).unwrap();
        if ne > 1.0 + 1e-6 {
            prop_assert!((na - ne / (1.0 - 2.0 * eps)).abs() <= 1e-5, "{na} vs {ne}");
        } else {
            prop_assert!(na * (1.0 - 2.0 * eps) <= 1.0 + 1e-5);
        }
    }
}

#[test]
fn vertices_validate_and_lie_in_the_basis_span() {
    for (nx, ny) in [(1, 1), (2, 2), (2, 3), (3, 3)] {
        let s = Alphabets::binary(nx, ny).unwrap();
        let basis = affine_basis(nx, ny).unwrap();
        for v in enumerate_local_vertices(s, DEFAULT_VERTEX_CAP).unwrap() {
            let p = v.to_distribution(s);
            let rep = p.validate();
            assert!(rep.is_valid() && rep.max_normalization_violation == 0.0 && rep.max_signaling_alice == 0.0);
            assert!(span_residual(&basis, &to_correlation_rep(&p).unwrap()).unwrap() <= 1e-9);
        }
    }
}

#[test]
fn classical_estimator_is_unbiased() {
    let pr = ConditionalDistribution::pr_box();
    let model = model_of(&pr);
    let (trials, seeds) = (2_000u64, 200u64);
    let plan = SmpPlan::classical(pr.alphabets(), model.mass(), 0.0, 0.1).unwrap().with_trials(trials).with_replays(1);
    let mut mean = [0.0; 16];
    for seed in 0..seeds {
        let out = run_smp_classical(&model, &plan, &pr, seed).unwrap();
        for x in 0..2 {
            for y in 0..2 {
                for k in 0..4 {
                    mean[(x * 2 + y) * 4 + k] += out.estimates[x][y][k] / seeds as f64;
                }
            }
        }
    }
    let tol = 5.0 / ((trials * seeds) as f64).sqrt();
    for (m, p) in mean.iter().zip(pr.table()) {
        assert!((m - p).abs() <= tol, "{m} vs {p}");
    }
}

#[test]
fn one_bit_pr_protocol() {
    // With one bit the PR box is local up to half the uniform distribution:
    // pr = 2 p_l - u for p_l = pr/2 + u/2, which is local, giving mass 3.
    let pr = ConditionalDistribution::pr_box();
    let u = ConditionalDistribution::uniform(pr.alphabets());
    let pl = pr.combine(0.5, &u, 0.5).unwrap();
    assert!((nu_tilde(&pl).unwrap().value - 1.0).abs() <= 1e-7);
    let model =
        nonsig::bounds::scaled_local_reconstruction(&pr, 1, &pl, &vec![vec![0.5, 0.5]; 2], &vec![vec![0.5, 0.5]; 2])
            .unwrap();
    model.check(&pr, 1e-9).unwrap();
    assert!((model.mass() - 3.0).abs() <= 1e-12);
    assert!(nu_tilde(&pr).unwrap().value <= model.mass() + 1e-9);
}

use rand::Rng;
