//! One line per acceptance criterion. Runs without the libtest harness so
//! the lines are always printed; exits non-zero if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use common::*;
use rand::Rng;

use nonsig::bounds::{
    dual_bell, gamma2_tilde_1, nu_alpha, nu_corr, nu_tilde, nu_tilde_eps, quantum_to_local_decomposition, BoundConfig,
    Certificate, GrothendieckInterval,
};
use nonsig::correlation::{rank_of, span_residual};
use nonsig::games::{classical_bias, quantum_bias, XorGame};
use nonsig::lp::solve_lp;
use nonsig::sdp::{solve_sdp, BlockSpec, SdpProgram, Term};
use nonsig::simulate::{run_smp_boolean, run_smp_classical, run_smp_quantum_sim, swap_test_statistic, SmpPlan};
use nonsig::{
    affine_basis, enumerate_local_vertices, to_correlation_rep, AffineModel, Alphabets, BoundClass,
    ConditionalDistribution, DEFAULT_VERTEX_CAP,
};

type Criterion<'a> = (&'static str, Option<Duration>, Box<dyn Fn() -> Verdict + 'a>);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn within_time(v: Verdict, elapsed: Duration, limit: Option<Duration>) -> Verdict {
    match limit {
        Some(l) if elapsed > l => verdict(false, format!("{}; too slow: {:.1?} > {:.0?}", v.detail, elapsed, l)),
        _ => v,
    }
}

fn pr_model() -> AffineModel {
    match nu_tilde(&ConditionalDistribution::pr_box()).unwrap().primal_certificate {
        Certificate::Affine { model } => model,
        _ => unreachable!(),
    }
}

fn pr_box_suite() -> Verdict {
    let pr = ConditionalDistribution::pr_box();
    let nu = nu_tilde(&pr).unwrap();
    let bell = dual_bell(&pr, BoundClass::Local).unwrap();
    let bell_value = bell.evaluate(&pr).unwrap();
    let bell_norm = bell.local_bound(DEFAULT_VERTEX_CAP).unwrap();
    let g = gamma2_tilde_1(&pr).unwrap();
    let chsh = XorGame::chsh();
    let cb = classical_bias(&chsh).unwrap().bias;
    let qb = quantum_bias(&chsh, &BoundConfig::default()).unwrap().bias;
    let pass = (nu.value - 2.0).abs() <= 1e-5
        && (bell_value - 2.0).abs() <= 1e-5
        && bell_norm <= 1.0 + 1e-9
        && (g.value - 2f64.sqrt()).abs() <= 1e-3
        && cb == 0.5
        && (qb - 0.5f64.sqrt()).abs() <= 1e-4;
    verdict(
        pass,
        format!(
            "nu~={:.9} B(p)={:.9} max|B| on L={:.9} gamma2~={:.6} classical={} quantum={:.7}",
            nu.value, bell_value, bell_norm, g.value, cb, qb
        ),
    )
}

fn membership() -> Verdict {
    let mut r = rng(2);
    let mut worst_local: f64 = 0.0;
    for _ in 0..200 {
        let s = random_alphabets(&mut r, 3, 3);
        let k = r.random_range(1..=8);
        let p = local_mixture(&mut r, s, k);
        worst_local = worst_local.max((nu_tilde(&p).unwrap().value - 1.0).abs());
    }
    let mut min_outside = f64::INFINITY;
    let mut outside = 0;
    while outside < 50 {
        let s =
            Alphabets::new(r.random_range(2..=3), r.random_range(2..=3), r.random_range(2..=3), r.random_range(2..=3))
                .unwrap();
        let (p, success) = nonlocal_point(&mut r, s);
        // Rejection: only points certified outside L by the shift-box game.
        if success <= 0.75 + 1e-3 {
            continue;
        }
        outside += 1;
        min_outside = min_outside.min(nu_tilde(&p).unwrap().value);
    }
    verdict(
        worst_local <= 1e-5 && min_outside > 1.0 + 1e-5,
        format!("max |nu~-1| over 200 local = {worst_local:.2e}; min nu~ over 50 outside = {min_outside:.6}"),
    )
}

/// Random non-signaling instances shared by the duality and sandwich checks.
fn instances() -> Vec<ConditionalDistribution> {
    let mut r = rng(3);
    (0..100)
        .map(|i| {
            let s = if i % 2 == 0 {
                Alphabets::binary(r.random_range(1..=3), r.random_range(1..=3)).unwrap()
            } else {
                random_alphabets(&mut r, 3, 3)
            };
            random_ns(&mut r, s)
        })
        .collect()
}

fn duality(ps: &[ConditionalDistribution]) -> Verdict {
    let mut worst_gap: f64 = 0.0;
    let mut worst_norm: f64 = 0.0;
    for p in ps {
        let res = nu_tilde(p).unwrap();
        let b = &res.dual_certificate;
        worst_gap = worst_gap.max((res.value - b.evaluate(p).unwrap()).abs());
        worst_norm = worst_norm.max(b.local_bound(DEFAULT_VERTEX_CAP).unwrap());
    }
    verdict(
        worst_gap <= 1e-5 && worst_norm <= 1.0 + 1e-5,
        format!("max |nu~ - B(p)| = {worst_gap:.2e}; max over L of |B| = {worst_norm:.9}"),
    )
}

fn sandwich(ps: &[ConditionalDistribution]) -> Verdict {
    let k = GrothendieckInterval::UPPER;
    let mut worst_sandwich = f64::NEG_INFINITY;
    let mut worst_gap = f64::NEG_INFINITY;
    let mut binary = 0;
    for p in ps {
        let nu = nu_tilde(p).unwrap().value;
        let g = gamma2_tilde_1(p).unwrap().value;
        worst_sandwich = worst_sandwich.max(g - nu);
        if p.alphabets().is_binary() {
            binary += 1;
            worst_gap = worst_gap.max(nu - (2.0 * k + 1.0) * g);
        }
    }
    verdict(
        worst_sandwich <= 1e-5 && worst_gap <= 1e-4 && binary > 0,
        format!("max gamma2~ - nu~ = {worst_sandwich:.2e}; max nu~ - (2K+1)gamma2~ = {worst_gap:.3} over {binary} binary instances"),
    )
}

fn conversions() -> Verdict {
    let mut r = rng(5);
    let cfg = BoundConfig::default();
    let (mut worst4, mut worst5): (f64, f64) = (0.0, 0.0);
    let (mut n4, mut n5) = (0, 0);
    for _ in 0..20 {
        let (nx, ny) = (r.random_range(2..=4), r.random_range(2..=4));
        let c = random_sign_matrix(&mut r, nx, ny);
        let p = from_signs(&c);
        let nt = nu_tilde(&p).unwrap().value;
        let nc = nu_corr(&c).unwrap().value;
        if nt > 1.0 + 1e-6 {
            n4 += 1;
            worst4 = worst4.max((nt - nc).abs());
        } else {
            worst4 = worst4.max((nc - 1.0).abs());
        }
        let eps = r.random_range(0.01..0.2);
        let alpha = 1.0 / (1.0 - 2.0 * eps);
        let ne = nu_tilde_eps(&p, eps).unwrap().value;
        let na = nu_alpha(&c, alpha, &cfg).unwrap();
        if ne > 1.0 + 1e-6 {
            n5 += 1;
            worst5 = worst5.max((na - ne / (1.0 - 2.0 * eps)).abs());
        }
    }
    verdict(
        worst4 <= 1e-5 && worst5 <= 1e-5,
        format!("nu vs nu~: max diff {worst4:.2e} ({n4} above 1); nu^alpha vs nu~^eps/(1-2eps): max diff {worst5:.2e} ({n5} above 1)"),
    )
}

fn decomposition() -> Verdict {
    let mut r = rng(6);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let s =
            Alphabets::new(r.random_range(1..=3), r.random_range(1..=3), r.random_range(2..=3), r.random_range(2..=3))
                .unwrap();
        let p = random_ns(&mut r, s);
        worst = worst.max(quantum_to_local_decomposition(&p, None).unwrap().residual);
    }
    verdict(worst <= 1e-10, format!("max residual over 50 instances = {worst:.2e}"))
}

fn smp_classical() -> Verdict {
    let pr = ConditionalDistribution::pr_box();
    let model = pr_model();
    let plan = SmpPlan::classical(pr.alphabets(), model.mass(), 0.0, 0.1).unwrap();
    let mut ok = 0;
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let d = run_smp_classical(&model, &plan, &pr, seed).unwrap().empirical_distance;
        worst = worst.max(d);
        ok += usize::from(d <= 0.1);
    }
    verdict(
        plan.trials == 259_849 && ok >= 95,
        format!("T={} beta={}; {ok}/100 runs with empirical delta <= 0.1 (worst {worst:.4})", plan.trials, plan.beta),
    )
}

fn smp_quantum() -> Verdict {
    let pr = ConditionalDistribution::pr_box();
    let model = pr_model();
    let plan = SmpPlan::quantum(pr.alphabets(), model.mass(), 0.0, 0.2).unwrap();
    let mut ok = 0;
    let mut pools_ok = 0;
    for seed in 0..100 {
        let out = run_smp_quantum_sim(&model, &plan, &pr, seed).unwrap();
        ok += usize::from(out.empirical_distance <= 0.2);
        pools_ok += usize::from(out.pool_ok == Some(true));
    }
    // E[1 - 2 Zbar] = overlap^2 for every overlap.
    let (trials, seeds) = (1_000u64, 400u64);
    let tol = 5.0 / ((trials * seeds) as f64).sqrt();
    let mut worst_bias: f64 = 0.0;
    for overlap in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let mut r = rng(8);
        let mean: f64 =
            (0..seeds).map(|_| swap_test_statistic(overlap, trials, &mut r).unwrap()).sum::<f64>() / seeds as f64;
        worst_bias = worst_bias.max((mean - overlap * overlap).abs());
    }
    verdict(
        ok >= 90 && worst_bias <= tol,
        format!(
            "T={} L={}; {ok}/100 runs with empirical delta <= 0.2; {pools_ok}/100 pools within delta/(2 Lambda); swap-test bias {worst_bias:.2e} <= {tol:.2e}",
            plan.trials,
            plan.pool_size.unwrap()
        ),
    )
}

fn smp_boolean() -> Verdict {
    let model = pr_model();
    let c = to_correlation_rep(&ConditionalDistribution::pr_box()).unwrap().c;
    let plan = SmpPlan::boolean(model.alphabets, model.mass(), 0.0, 0.05).unwrap().with_replays(1_000);
    let mut ok = 0;
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let out = run_smp_boolean(&c, &model, &plan, seed).unwrap();
        worst = worst.max(out.max_error_rate);
        ok += usize::from(out.max_error_rate <= 0.05);
    }
    verdict(
        plan.trials == 48 && ok >= 95,
        format!("T'={}; {ok}/100 runs with every per-input error <= 0.05 (worst {worst:.4})", plan.trials),
    )
}

fn engine_oracles() -> Verdict {
    let mut r = rng(10);
    let mut worst_lp: f64 = 0.0;
    for _ in 0..50 {
        let lp = random_small_lp(&mut r);
        let sol = solve_lp(&lp);
        let brute = brute_force_lp(&lp).unwrap();
        worst_lp = worst_lp.max(if sol.is_optimal() { (sol.objective - brute).abs() } else { f64::INFINITY });
    }

    let mut eig = SdpProgram::new();
    let b = eig.add_block(BlockSpec::Psd(2));
    eig.add_objective(Term::new(b, 0, 0, 1.0));
    eig.add_constraint(vec![Term::new(b, 0, 0, 1.0), Term::new(b, 1, 1, -1.0)], 0.0);
    eig.add_constraint(vec![Term::new(b, 0, 1, 1.0)], 1.0);
    let e1 = solve_sdp(&eig);

    let mut diag = SdpProgram::new();
    let b = diag.add_block(BlockSpec::Psd(2));
    diag.add_objective(Term::new(b, 0, 1, -2.0));
    diag.add_constraint(vec![Term::new(b, 0, 0, 1.0)], 1.0);
    diag.add_constraint(vec![Term::new(b, 1, 1, 1.0)], 1.0);
    let e2 = solve_sdp(&diag);

    let e3 = quantum_bias(&XorGame::chsh(), &BoundConfig::default()).unwrap().bias;
    let d1 = if e1.is_optimal() { (e1.objective - 1.0).abs() } else { f64::INFINITY };
    let d2 = if e2.is_optimal() { (-e2.objective - 2.0).abs() } else { f64::INFINITY };
    let d3 = (e3 - 0.5f64.sqrt()).abs();
    verdict(
        worst_lp <= 1e-6 && d1.max(d2).max(d3) <= 1e-4,
        format!("LP max |simplex - brute force| = {worst_lp:.2e}; SDP errors {d1:.1e}, {d2:.1e}, {d3:.1e}"),
    )
}

fn basis() -> Verdict {
    let mut pass = true;
    let mut worst: f64 = 0.0;
    for nx in 1..=4 {
        for ny in 1..=4 {
            let basis = affine_basis(nx, ny).unwrap();
            pass &= rank_of(&basis) == nx * ny + nx + ny;
            let s = Alphabets::binary(nx, ny).unwrap();
            for v in enumerate_local_vertices(s, DEFAULT_VERTEX_CAP).unwrap() {
                let rep = to_correlation_rep(&v.to_distribution(s)).unwrap();
                worst = worst.max(span_residual(&basis, &rep).unwrap());
            }
        }
    }
    verdict(pass && worst <= 1e-9, format!("ranks all nx*ny+nx+ny: {pass}; max vertex residual {worst:.2e}"))
}

fn main() {
    let ps = instances();
    let criteria: Vec<Criterion> = vec![
        ("pr-box suite", Some(Duration::from_secs(10)), Box::new(pr_box_suite)),
        ("membership of local mixtures", Some(Duration::from_secs(120)), Box::new(membership)),
        ("primal-dual agreement", None, Box::new(|| duality(&ps))),
        ("sandwich and Grothendieck gap", None, Box::new(|| sandwich(&ps))),
        ("sign-matrix conversions", None, Box::new(conversions)),
        ("binary-block decomposition identity", None, Box::new(decomposition)),
        ("classical SMP protocol", Some(Duration::from_secs(300)), Box::new(smp_classical)),
        ("quantum SMP protocol (simulated)", None, Box::new(smp_quantum)),
        ("boolean SMP protocol", None, Box::new(smp_boolean)),
        ("engine oracles", None, Box::new(engine_oracles)),
        ("affine basis rank and span", None, Box::new(basis)),
    ];
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = within_time(run(), start.elapsed(), *limit);
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {tag} {name} [{:.2?}]: {}", i + 1, start.elapsed(), v.detail);
        failed += usize::from(!v.pass);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
