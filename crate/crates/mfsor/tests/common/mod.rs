// SPDX-License-Identifier: MIT

//! Test-side oracles that do not reuse library numerics.

#![allow(dead_code)]

use std::sync::Arc;

use mfsor::analysis::StructuredMatrix;
use mfsor::discretization::{assemble, ProblemSpec, Stencil};
use mfsor::grid::build_uniform_grid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dense matrix of the stencil equations, built row by row from the links.
pub fn dense_from_stencil(st: &Stencil) -> Vec<Vec<f64>> {
    let n = st.len();
    let mut a = vec![vec![0.0; n]; n];
    for q in 0..n {
        a[q][q] = st.center[q];
        for axis in 0..st.dim {
            for side in [-1i8, 1] {
                if let Some(r) = st.neighbor(q, axis, side) {
                    a[q][r] = -st.coefficient(q, axis, side);
                }
            }
        }
    }
    a
}

/// Dense copy of a structured matrix.
pub fn dense(m: &StructuredMatrix) -> Vec<Vec<f64>> {
    let n = m.dim();
    (0..n).map(|i| (0..n).map(|j| m.get(i, j)).collect()).collect()
}

/// Gaussian elimination with partial pivoting on a copy of `a`.
pub fn gauss_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().zip(b).map(|(row, &r)| row.iter().copied().chain([r]).collect()).collect();
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs())).unwrap();
        m.swap(c, p);
        assert!(m[c][c].abs() > 1e-300, "singular matrix in oracle");
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..=n {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| m[i][j] * x[j]).sum();
        x[i] = (m[i][n] - s) / m[i][i];
    }
    x
}

/// `a x`.
pub fn matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(x).map(|(u, v)| u * v).sum()).collect()
}

/// Largest absolute entry difference.
pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Largest absolute entry.
pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Diffusion-reaction problem with smooth random coefficients on a uniform
/// grid with `interior[a] + 2` nodes per axis.
pub fn random_stencil(dim: usize, interior: &[usize], seed: u64) -> Stencil {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c: Vec<f64> = (0..12).map(|_| rng.gen_range(-0.6..0.6)).collect();
    let beta = if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(0.0..3.0) };
    let ca = c.clone();
    let alpha = Arc::new(move |axis: usize, x: [f64; 3]| {
        1.0 + ca[axis] * (3.0 * x[0] + ca[3 + axis] * x[1]).sin() + 0.3 * ca[6 + axis] * (2.0 * x[2] + x[1]).cos()
    });
    let cs = c.clone();
    let source = Arc::new(move |x: [f64; 3]| cs[9] * x[0] + cs[10] * x[1] * x[1] - cs[11] * x[2]);
    let cb = c;
    let boundary = Arc::new(move |x: [f64; 3]| 1.0 + cb[0] * x[0] - cb[1] * x[1] + cb[2] * x[0] * x[2]);
    let problem = ProblemSpec { dim, alpha, beta, source, boundary, exact: None };
    let nodes: Vec<usize> = interior.iter().map(|n| n + 2).collect();
    let grid = build_uniform_grid(dim, &nodes, &vec![1.0; dim]).unwrap();
    assemble(&problem, &grid).unwrap()
}

/// Reproducible random vector in `[-1, 1)`.
pub fn random_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}
