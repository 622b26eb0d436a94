//! Shared test oracles, kept independent of the implementation paths they
//! check: eigenvalues via cyclic Jacobi sweeps, erf via Simpson quadrature,
//! and a seeded generator of strongly connected pinned digraphs.
#![allow(dead_code)] // each suite uses its own subset

use nalgebra::DMatrix;
use ppfsync_core::graph::Digraph;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Eigenvalues of a symmetric matrix by the classical cyclic Jacobi method,
/// sorted ascending.
pub fn jacobi_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    assert_eq!(n, m.ncols());
    let mut a = m.clone();
    let scale: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
    for _sweep in 0..200 {
        let off: f64 = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off.sqrt() < 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eigs: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    eigs.sort_by(|x, y| x.partial_cmp(y).unwrap());
    eigs
}

/// Singular values of a matrix via the Jacobi eigenvalues of `m^T m`,
/// returned as (min, max).
pub fn singular_values_oracle(m: &DMatrix<f64>) -> (f64, f64) {
    let mtm = m.transpose() * m;
    let eigs = jacobi_eigenvalues(&mtm);
    let lo = eigs.first().unwrap().max(0.0).sqrt();
    let hi = eigs.last().unwrap().max(0.0).sqrt();
    (lo, hi)
}

/// erf by composite Simpson quadrature of the defining integral; absolute
/// error far below 1e-12 at the node count used.
pub fn erf_quadrature(x: f64) -> f64 {
    if x < 0.0 {
        return -erf_quadrature(-x);
    }
    if x > 6.0 {
        return 1.0;
    }
    let n = 20_000usize; // even
    let h = x / n as f64;
    let f = |t: f64| (-t * t).exp();
    let mut acc = f(0.0) + f(x);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(k as f64 * h);
    }
    2.0 / std::f64::consts::PI.sqrt() * acc * h / 3.0
}

/// Random strongly connected digraph with at least one pinned node: a random
/// permutation cycle guarantees connectivity, extra edges and pinning are
/// sprinkled on top.
pub fn random_strongly_connected(rng: &mut ChaCha8Rng, n: usize) -> Digraph {
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let mut edges = Vec::new();
    if n > 1 {
        for k in 0..n {
            let from = order[k];
            let to = order[(k + 1) % n];
            edges.push((from, to, rng.random_range(0.3..2.5)));
        }
        for from in 0..n {
            for to in 0..n {
                if from == to || edges.iter().any(|&(f, t, _)| f == from && t == to) {
                    continue;
                }
                if rng.random::<f64>() < 0.25 {
                    edges.push((from, to, rng.random_range(0.3..2.5)));
                }
            }
        }
    }
    let mut pinning = Vec::new();
    for node in 0..n {
        if rng.random::<f64>() < 0.35 {
            pinning.push((node, rng.random_range(0.3..2.0)));
        }
    }
    if pinning.is_empty() {
        pinning.push((rng.random_range(0..n), rng.random_range(0.3..2.0)));
    }
    Digraph::from_edges(n, &edges, &pinning).expect("generator produces valid digraphs")
}

/// Deterministic generator seeded per test.
pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
