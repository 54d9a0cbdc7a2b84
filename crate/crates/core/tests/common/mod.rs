#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nonsig::lp::LinearProgram;
use nonsig::{Alphabets, ConditionalDistribution, LocalVertex};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_alphabets(rng: &mut ChaCha8Rng, max_inputs: usize, max_outcomes: usize) -> Alphabets {
    Alphabets::new(
        rng.random_range(1..=max_inputs),
        rng.random_range(1..=max_inputs),
        rng.random_range(2..=max_outcomes),
        rng.random_range(2..=max_outcomes),
    )
    .unwrap()
}

pub fn random_vertex(rng: &mut ChaCha8Rng, s: Alphabets) -> LocalVertex {
    LocalVertex::from_index(s, rng.random_range(0..s.vertex_count()))
}

fn simplex_weights(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| -rng.random::<f64>().max(1e-12).ln()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

/// Convex mixture of `k` random local deterministic points.
pub fn local_mixture(rng: &mut ChaCha8Rng, s: Alphabets, k: usize) -> ConditionalDistribution {
    let verts: Vec<LocalVertex> = (0..k).map(|_| random_vertex(rng, s)).collect();
    let w = simplex_weights(rng, k);
    ConditionalDistribution::from_fn(s, |a, b, x, y| verts.iter().zip(&w).map(|(v, wi)| wi * v.prob(a, b, x, y)).sum())
        .unwrap()
}

/// `1/d` on `b = a + f(x, y) mod d` with `d = min(na, nb)`; non-signaling for
/// every shift table `f`.
pub fn shift_box(s: Alphabets, f: &[Vec<usize>]) -> ConditionalDistribution {
    let d = s.na.min(s.nb);
    ConditionalDistribution::from_fn(
        s,
        |a, b, x, y| {
            if a < d && b < d && b == (a + f[x][y]) % d {
                1.0 / d as f64
            } else {
                0.0
            }
        },
    )
    .unwrap()
}

/// Random non-signaling point: a random shift box mixed with local noise
/// and the uniform distribution.
pub fn random_ns(rng: &mut ChaCha8Rng, s: Alphabets) -> ConditionalDistribution {
    let d = s.na.min(s.nb);
    let f: Vec<Vec<usize>> = (0..s.nx).map(|_| (0..s.ny).map(|_| rng.random_range(0..d)).collect()).collect();
    let w = simplex_weights(rng, 3);
    let k = rng.random_range(1..=4);
    let bx = shift_box(s, &f);
    let loc = local_mixture(rng, s, k);
    let u = ConditionalDistribution::uniform(s);
    bx.combine(w[0], &loc, w[1]).unwrap().combine(1.0, &u, w[2]).unwrap()
}

/// Weight `v` on the shift box with `f = x*y` on inputs `{0,1}^2`, rest
/// local noise. Success on `b - a = xy` exceeds 3/4 whenever `v > 3/4`,
/// which no local point achieves.
pub fn nonlocal_point(rng: &mut ChaCha8Rng, s: Alphabets) -> (ConditionalDistribution, f64) {
    assert!(s.nx >= 2 && s.ny >= 2);
    let d = s.na.min(s.nb);
    let f: Vec<Vec<usize>> = (0..s.nx)
        .map(|x| (0..s.ny).map(|y| if x < 2 && y < 2 { x * y % d } else { rng.random_range(0..d) }).collect())
        .collect();
    let v = rng.random_range(0.8..1.0);
    let k = rng.random_range(1..=3);
    let p = shift_box(s, &f).combine(v, &local_mixture(rng, s, k), 1.0 - v).unwrap();
    let mut success = 0.0;
    for x in 0..2 {
        for y in 0..2 {
            for a in 0..d {
                success += 0.25 * p.get(a, (a + x * y) % d, x, y);
            }
        }
    }
    (p, success)
}

pub fn random_sign_matrix(rng: &mut ChaCha8Rng, nx: usize, ny: usize) -> Vec<Vec<f64>> {
    (0..nx).map(|_| (0..ny).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()).collect()
}

/// `p(a,b|x,y) = (1 + ab C(x,y)) / 4`.
pub fn from_signs(c: &[Vec<f64>]) -> ConditionalDistribution {
    let s = Alphabets::binary(c.len(), c[0].len()).unwrap();
    let sign = |i: usize| if i == 0 { 1.0 } else { -1.0 };
    ConditionalDistribution::from_fn(s, |a, b, x, y| (1.0 + sign(a) * sign(b) * c[x][y]) / 4.0).unwrap()
}

/// Small random program `min c.v` over `A_ub v <= b_ub`, `A_eq v = b_eq`,
/// `0 <= v <= u`, feasible by construction (the rows are tight or slack at a
/// random interior point).
pub fn random_small_lp(rng: &mut ChaCha8Rng) -> LinearProgram {
    let n = rng.random_range(2..=5);
    let m_ub = rng.random_range(1..=4);
    let m_eq = rng.random_range(0..=1.min(n - 1));
    let x0: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..2.0)).collect();
    let c: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
    let mut lp = LinearProgram::minimize(c);
    for _ in 0..m_ub {
        let row: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let lhs: f64 = row.iter().zip(&x0).map(|(a, x)| a * x).sum();
        lp.add_le(row, lhs + rng.random_range(0.0..1.5));
    }
    for _ in 0..m_eq {
        let row: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let lhs: f64 = row.iter().zip(&x0).map(|(a, x)| a * x).sum();
        lp.add_eq(row, lhs);
    }
    for j in 0..n {
        lp.bounds(j, Some(0.0), Some(rng.random_range(2.0..4.0)));
    }
    lp
}

/// Minimum of `c.v` over the vertices of the polytope, found by solving every
/// square subsystem of active constraints. Programs must be bounded.
pub fn brute_force_lp(lp: &LinearProgram) -> Option<f64> {
    let n = lp.num_vars();
    // All inequalities as g.v <= h.
    let mut g: Vec<Vec<f64>> = lp.a_ub.clone();
    let mut h: Vec<f64> = lp.b_ub.clone();
    for j in 0..n {
        let mut e = vec![0.0; n];
        if let Some(l) = lp.lower[j] {
            e[j] = -1.0;
            g.push(e.clone());
            h.push(-l);
        }
        if let Some(u) = lp.upper[j] {
            e[j] = 1.0;
            g.push(e);
            h.push(u);
        }
    }
    let k = n - lp.a_eq.len();
    let mut best: Option<f64> = None;
    let mut choose = vec![0usize; k];
    fn next(choose: &mut [usize], m: usize) -> bool {
        let k = choose.len();
        for i in (0..k).rev() {
            if choose[i] < m - k + i {
                choose[i] += 1;
                for j in i + 1..k {
                    choose[j] = choose[j - 1] + 1;
                }
                return true;
            }
        }
        false
    }
    for (i, c) in choose.iter_mut().enumerate() {
        *c = i;
    }
    if k > g.len() {
        return None;
    }
    loop {
        let rows: Vec<(&Vec<f64>, f64)> =
            lp.a_eq.iter().zip(lp.b_eq.iter().copied()).chain(choose.iter().map(|&i| (&g[i], h[i]))).collect();
        let a = DMatrix::from_fn(n, n, |r, c| rows[r].0[c]);
        let b = DVector::from_iterator(n, rows.iter().map(|r| r.1));
        if a.clone().svd(false, false).singular_values.min() > 1e-9 {
            if let Some(v) = a.lu().solve(&b) {
                let feasible =
                    g.iter()
                        .zip(&h)
                        .all(|(gi, hi)| gi.iter().zip(v.iter()).map(|(p, q)| p * q).sum::<f64>() <= hi + 1e-9)
                        && lp.a_eq.iter().zip(&lp.b_eq).all(|(r, bi)| {
                            (r.iter().zip(v.iter()).map(|(p, q)| p * q).sum::<f64>() - bi).abs() <= 1e-9
                        });
                if feasible {
                    let obj: f64 = lp.objective.iter().zip(v.iter()).map(|(p, q)| p * q).sum();
                    best = Some(best.map_or(obj, |b: f64| b.min(obj)));
                }
            }
        }
        if k == 0 || !next(&mut choose, g.len()) {
            break;
        }
    }
    best
}
