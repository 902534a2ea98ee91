//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use homogvi::fem::CsrMatrix;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Obstacle problem instance `min ½uᵀKu − fᵀu` subject to `u ≥ ψ`.
pub struct Instance {
    pub k: CsrMatrix,
    pub f: Vec<f64>,
    pub psi: Vec<f64>,
}

/// Weighted graph Laplacian of a path plus random chords, shifted by a
/// positive diagonal (a sparse M-matrix).
pub fn m_matrix(rng: &mut impl Rng, n: usize) -> CsrMatrix {
    let mut t = Vec::new();
    let mut diag = vec![0.0; n];
    let mut edge = |i: usize, j: usize, w: f64, t: &mut Vec<(usize, usize, f64)>| {
        t.push((i, j, -w));
        t.push((j, i, -w));
        diag[i] += w;
        diag[j] += w;
    };
    for i in 1..n {
        edge(i - 1, i, rng.gen_range(0.5..2.0), &mut t);
    }
    for _ in 0..n / 4 {
        let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if i != j {
            edge(i, j, rng.gen_range(0.1..1.0), &mut t);
        }
    }
    for (i, d) in diag.iter().enumerate() {
        t.push((i, i, d + rng.gen_range(0.01..0.5)));
    }
    CsrMatrix::from_triplets(n, t)
}

/// Dense `BᵀB + δI` with a random `B` (SPD but generally not an M-matrix).
pub fn dense_spd(rng: &mut impl Rng, n: usize) -> CsrMatrix {
    let b = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let k = b.transpose() * &b + DMatrix::identity(n, n) * (0.5 * n as f64);
    let rows: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| k[(i, j)]).collect()).collect();
    CsrMatrix::from_dense(&rows)
}

pub fn random_instance(rng: &mut impl Rng, k: CsrMatrix) -> Instance {
    let n = k.n();
    let f = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let psi = (0..n)
        .map(|_| if rng.gen_bool(0.1) { f64::NEG_INFINITY } else { rng.gen_range(-1.0..0.5) })
        .collect();
    Instance { k, f, psi }
}

fn to_dense(k: &CsrMatrix) -> DMatrix<f64> {
    let rows = k.to_dense();
    DMatrix::from_fn(k.n(), k.n(), |i, j| rows[i][j])
}

/// Enumerates all `2ⁿ` active sets and returns the unique KKT point.
pub fn brute_force(inst: &Instance) -> Vec<f64> {
    let n = inst.k.n();
    assert!(n <= 16, "brute force is exponential");
    let k = to_dense(&inst.k);
    let f = DVector::from_column_slice(&inst.f);
    let constrained: Vec<usize> = (0..n).filter(|&i| inst.psi[i] > f64::NEG_INFINITY).collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << constrained.len()) {
        let active: Vec<usize> = (0..constrained.len())
            .filter(|b| mask & (1 << b) != 0)
            .map(|b| constrained[b])
            .collect();
        let free: Vec<usize> = (0..n).filter(|i| !active.contains(i)).collect();
        let mut u = DVector::zeros(n);
        for &i in &active {
            u[i] = inst.psi[i];
        }
        if !free.is_empty() {
            let kff = DMatrix::from_fn(free.len(), free.len(), |a, b| k[(free[a], free[b])]);
            let rhs = DVector::from_fn(free.len(), |a, _| {
                f[free[a]] - active.iter().map(|&j| k[(free[a], j)] * inst.psi[j]).sum::<f64>()
            });
            let sol = kff.cholesky().expect("SPD principal submatrix").solve(&rhs);
            for (a, &i) in free.iter().enumerate() {
                u[i] = sol[a];
            }
        }
        let r = &k * &u - &f;
        let tol = 1e-12 * (1.0 + f.amax() + k.amax() * u.amax());
        let primal = constrained.iter().all(|&i| u[i] >= inst.psi[i] - tol);
        let dual = active.iter().all(|&i| r[i] >= -tol);
        if primal && dual {
            let e = 0.5 * u.dot(&(&k * &u)) - f.dot(&u);
            if best.as_ref().map_or(true, |(b, _)| e < *b) {
                best = Some((e, u.iter().copied().collect()));
            }
        }
    }
    best.expect("a strictly convex problem has a KKT point").1
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Composite midpoint rule on `[0, 1)` with `n` points.
pub fn midpoint(n: usize, f: impl Fn(f64) -> f64) -> f64 {
    (0..n).map(|i| f((i as f64 + 0.5) / n as f64)).sum::<f64>() / n as f64
}

/// Iterated harmonic mean of a 1D two-scale coefficient with `ny·nz` points.
pub fn iterated_harmonic_mean(a: impl Fn(f64, f64) -> f64, ny: usize, nz: usize) -> f64 {
    let inner = |y: f64| 1.0 / midpoint(nz, |z| 1.0 / a(y, z));
    1.0 / midpoint(ny, |y| 1.0 / inner(y))
}
