// SPDX-License-Identifier: MIT

//! Solver and analysis results checked against independent dense oracles.

mod common;

use common::*;
use mfsor::analysis::{build_splitting, iteration_factors, iteration_matrix, spectral_radius_power};
use mfsor::discretization::Field;
use mfsor::grid::{frontal_order, natural_order, snake_order, Decomposition, Point, SweepDirection, SweepSchedule};
use mfsor::solvers_par::{assemble_coupled, parallel_iteration, solve_coupled, solve_parallel, HaloField};
use mfsor::solvers_seq::{solve_sequential, sweep, Ordering, RelaxationSet, StopRule, SweepPlan};

fn flat(shape: Point, p: Point) -> usize {
    p[0] + shape[0] * (p[1] + shape[1] * p[2])
}

#[test]
fn converged_iterates_match_dense_solution() {
    let cases: [(usize, &[usize], &str, f64); 4] =
        [(1, &[9], "SSOR", 1.4), (2, &[7, 6], "FSOR", 1.2), (2, &[5, 8], "SGS", 1.0), (3, &[4, 3, 5], "RSOR", 1.3)];
    for (i, (dim, interior, label, w)) in cases.into_iter().enumerate() {
        let st = random_stencil(dim, interior, 100 + i as u64);
        let exact = gauss_solve(&dense_from_stencil(&st), &st.rhs);
        let plan = SweepPlan::from_label(dim, label).unwrap();
        let relax = RelaxationSet::uniform(dim, w).unwrap();
        let stop = StopRule::ResidualL1 { threshold: 1e-10 };
        let r = solve_sequential(&st, &Field::zeros(st.shape), label, &plan, &relax, &stop, 20_000).unwrap();
        assert!(r.converged, "{label} did not converge");
        let d = max_diff(&r.solution, &exact);
        assert!(d < 1e-9 * max_abs(&exact).max(1.0), "{label}: deviation {d}");
    }
}

#[test]
fn sweeps_match_node_by_node_relaxation() {
    for (dim, interior) in [(1usize, vec![7usize]), (2, vec![5, 4]), (3, vec![3, 4, 3])] {
        let st = random_stencil(dim, &interior, 7 + dim as u64);
        let shape = st.shape;
        for dir in SweepDirection::all(dim) {
            for ordering in [Ordering::NaturalRowWise, Ordering::SymmetricRowWise, Ordering::Frontal] {
                let u0 = random_vec(st.len(), 3);
                let w = 1.37;
                let mut u = Field::from_vec(shape, u0.clone()).unwrap();
                sweep(&st, &mut u, ordering, dir, w).unwrap();
                let nodes = match ordering {
                    Ordering::NaturalRowWise => natural_order([0; 3], shape, dir),
                    Ordering::SymmetricRowWise => snake_order([0; 3], shape, dir),
                    Ordering::Frontal => frontal_order([0; 3], shape, dir),
                };
                let mut v = u0;
                for p in nodes {
                    let q = flat(shape, p);
                    let mut acc = st.rhs[q];
                    for a in 0..dim {
                        for side in [-1i8, 1] {
                            if let Some(r) = st.neighbor(q, a, side) {
                                acc += st.coefficient(q, a, side) * v[r];
                            }
                        }
                    }
                    v[q] = (1.0 - w) * v[q] + w * acc / st.center[q];
                }
                let d = max_diff(u.as_slice(), &v);
                assert!(d < 1e-13, "{dim}D {} {ordering:?}: {d}", dir.name());
            }
        }
    }
}

#[test]
fn ascending_sweep_is_a_forward_substitution() {
    for (dim, interior) in [(1usize, vec![9usize]), (2, vec![6, 5]), (3, vec![3, 3, 4])] {
        let st = random_stencil(dim, &interior, 31 + dim as u64);
        let a = dense_from_stencil(&st);
        let n = st.len();
        let u0 = random_vec(n, 5);
        let mut u = Field::from_vec(st.shape, u0.clone()).unwrap();
        sweep(&st, &mut u, Ordering::NaturalRowWise, SweepDirection::ascending(dim), 1.0).unwrap();
        // (D + L) x = f - U u0 with L, U the strict triangles in flat order.
        let mut rhs = st.rhs.clone();
        for i in 0..n {
            for j in i + 1..n {
                rhs[i] -= a[i][j] * u0[j];
            }
        }
        let mut x = vec![0.0; n];
        for i in 0..n {
            let s: f64 = (0..i).map(|j| a[i][j] * x[j]).sum();
            x[i] = (rhs[i] - s) / a[i][i];
        }
        assert!(max_diff(u.as_slice(), &x) < 1e-12, "{dim}D");
    }
}

#[test]
fn parallel_iterations_follow_the_matrix_recurrence() {
    let cases: [(usize, &[usize], &[usize], &[f64]); 6] = [
        (1, &[8], &[2], &[1.0]),
        (1, &[8], &[3], &[1.3, 0.7]),
        (1, &[7], &[7], &[1.1]),
        (2, &[8, 8], &[2, 2], &[1.25]),
        (2, &[7, 5], &[3, 2], &[1.2, 0.8, 1.5, 1.0]),
        (2, &[6, 8], &[1, 4], &[1.4]),
    ];
    for (i, (dim, interior, parts, w)) in cases.into_iter().enumerate() {
        let st = random_stencil(dim, interior, 50 + i as u64);
        let decomp = Decomposition::new(dim, st.shape, parts).unwrap();
        let relax = RelaxationSet::from_values(dim, w).unwrap();
        let split = build_splitting(&st, &decomp).unwrap();
        let sched = SweepSchedule::new(dim);
        let u0 = random_vec(st.len(), 9 + i as u64);
        let mut halo = HaloField::new(&st, &decomp, &Field::from_vec(st.shape, u0.clone()).unwrap(), 1).unwrap();
        let mut x = u0;
        for k in 0..2 * sched.cycle_len() {
            parallel_iteration(&st, &mut halo, &decomp, &sched, k, &relax, None).unwrap();
            let kk = k % sched.cycle_len();
            let (p, q, wv) = iteration_factors(&split, kk, &relax).unwrap();
            let mut rhs = matvec(&dense(&q), &x);
            for (j, r) in rhs.iter_mut().enumerate() {
                *r += wv[j] * st.rhs[j];
            }
            x = gauss_solve(&dense(&p), &rhs);
            let d = max_diff(halo.gather().as_slice(), &x);
            assert!(d < 1e-12 * max_abs(&x).max(1.0), "case {i} iteration {k}: {d}");
        }
    }
}

#[test]
fn single_domain_parallel_run_equals_sequential_bitwise() {
    for (dim, interior) in [(1usize, vec![30usize]), (2, vec![17, 12]), (3, vec![7, 6, 8])] {
        let st = random_stencil(dim, &interior, 70 + dim as u64);
        let decomp = Decomposition::new(dim, st.shape, &vec![1; dim]).unwrap();
        let exact = random_vec(st.len(), 1);
        let stop = StopRule::ErrorL1 { exact, divisor: 1.0, threshold: 0.0 };
        let u0 = Field::from_vec(st.shape, random_vec(st.len(), 2)).unwrap();
        for w in [vec![1.0], vec![1.3], (0..1 << dim).map(|i| 0.8 + 0.1 * i as f64).collect::<Vec<_>>()] {
            let relax = RelaxationSet::from_values(dim, &w).unwrap();
            let par = solve_parallel(&st, &u0, "p1", &decomp, &relax, &stop, 37, 1).unwrap();
            let seq = solve_sequential(&st, &u0, "seq", &SweepPlan::schedule_cycle(dim), &relax, &stop, 37).unwrap();
            assert_eq!(par.iterations, seq.iterations);
            let same = par.solution.iter().zip(&seq.solution).all(|(a, b)| a.to_bits() == b.to_bits());
            assert!(same, "{dim}D w={w:?}: solutions differ");
            let errs = par.errors.iter().zip(&seq.errors).all(|(a, b)| a.to_bits() == b.to_bits());
            assert!(errs, "{dim}D w={w:?}: error histories differ");
        }
    }
}

#[test]
fn spectral_radius_matches_observed_contraction() {
    let cases: [(usize, &[usize], &[usize], &[f64]); 4] = [
        (1, &[8], &[2], &[1.0]),
        (1, &[8], &[2], &[1.2, 1.5]),
        (2, &[6, 5], &[2, 2], &[1.0]),
        (2, &[8, 6], &[2, 1], &[1.3]),
    ];
    for (i, (dim, interior, parts, w)) in cases.into_iter().enumerate() {
        let mut st = random_stencil(dim, interior, 90 + i as u64);
        st.rhs.iter_mut().for_each(|v| *v = 0.0);
        let decomp = Decomposition::new(dim, st.shape, parts).unwrap();
        let relax = RelaxationSet::from_values(dim, w).unwrap();
        let split = build_splitting(&st, &decomp).unwrap();
        let rho = iteration_matrix(&split, &relax).unwrap().rho;
        let sched = SweepSchedule::new(dim);
        let u0 = Field::from_vec(st.shape, random_vec(st.len(), 4)).unwrap();
        let mut halo = HaloField::new(&st, &decomp, &u0, 1).unwrap();
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let (warm, window) = (200, 100);
        let mut before = 0.0;
        for c in 0..warm + window {
            if c == warm {
                before = norm(halo.gather().as_slice());
            }
            for k in 0..sched.cycle_len() {
                parallel_iteration(&st, &mut halo, &decomp, &sched, c * sched.cycle_len() + k, &relax, None).unwrap();
            }
        }
        let after = norm(halo.gather().as_slice());
        let observed = (after / before).powf(1.0 / window as f64);
        assert!((observed - rho).abs() <= 0.05 * rho, "case {i}: rho {rho} observed {observed}");
        let power = spectral_radius_power(&split, &relax, 20_000, 1e-12).unwrap();
        assert!((power - rho).abs() <= 0.05 * rho, "case {i}: rho {rho} power {power}");
    }
}

#[test]
fn coupled_corner_system_matches_dense_oracle() {
    let st = random_stencil(2, &[6, 6], 5);
    let decomp = Decomposition::new(2, st.shape, &[2, 2]).unwrap();
    let sched = SweepSchedule::new(2);
    let relax = RelaxationSet::from_values(2, &[1.1, 1.2, 1.3, 1.4]).unwrap();
    let u = random_vec(st.len(), 6);
    let sets = mfsor::solvers_par::identify_coupling_sets(&decomp, &sched, 0);
    let corner = sets.iter().flatten().find(|s| s.size() == 4).expect("a four-node corner set");
    let value = |p: [isize; 3]| {
        if p[0] < 0 || p[1] < 0 || p[0] >= 6 || p[1] >= 6 {
            0.0
        } else {
            u[p[0] as usize + 6 * p[1] as usize]
        }
    };
    let system = assemble_coupled(&st, &relax, corner, &value).unwrap();
    let x = solve_coupled(&system).unwrap();
    let m: Vec<Vec<f64>> = (0..4).map(|r| system.matrix[r * 4..r * 4 + 4].to_vec()).collect();
    assert!(max_diff(&x, &gauss_solve(&m, &system.rhs)) < 1e-14);
    for r in 0..4 {
        assert_eq!(m[r][r], 1.0);
    }
}
