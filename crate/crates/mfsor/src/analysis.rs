// SPDX-License-Identifier: MIT

//! Explicit-matrix view of the relaxation methods.
//!
//! [`assemble_matrix`] turns a stencil into a banded matrix `A`.
//! [`build_splitting`] writes every iteration of the parallel sweep cycle as
//! `P_k u^{k+1} = Q_k u^k + W_k f` with `P_k = diag(b) - W_k Lambda_k + W_k G_k`,
//! where `G_k` holds the couplings each node treats implicitly in iteration
//! `k` (diagonal: sum of the upstream link coefficients, boundary links
//! included) and `W_k` the per-row relaxation factors. Consecutive
//! iterations of a pair sweep in opposite directions, so
//! `G_{2j} + diag(beta) + G_{2j+1} = A`.
//!
//! The module also certifies block-triangular structure, forms iteration
//! matrices and their spectral radii, and compares symmetric Gauss-Seidel
//! with ILU(0).

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::io::Write;

use nalgebra::{Complex, DMatrix, DVector, Schur};

use crate::discretization::Stencil;
use crate::error::{MfsorError, Result};
use crate::grid::{flat_index, unflatten, Decomposition, Point, SweepDirection, SweepSchedule};
use crate::solvers_par::{identify_coupling_sets, solve_dense};
use crate::solvers_seq::RelaxationSet;

/// Largest dimension for which dense algebra is attempted.
pub const DENSE_LIMIT: usize = 4096;

fn dense_guard(n: usize) -> Result<()> {
    if n > DENSE_LIMIT {
        return Err(MfsorError::Guard(format!("dense algebra refused for N = {n} > {DENSE_LIMIT}")));
    }
    Ok(())
}

/// Square matrix stored by diagonals: `band(o)[i] = M[i][i + o]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredMatrix {
    n: usize,
    bands: BTreeMap<isize, Vec<f64>>,
}

impl StructuredMatrix {
    /// The `n x n` zero matrix.
    pub fn zeros(n: usize) -> Self {
        let mut bands = BTreeMap::new();
        bands.insert(0, vec![0.0; n]);
        Self { n, bands }
    }

    /// Diagonal matrix with entries `d`.
    pub fn from_diagonal(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        m.bands.insert(0, d.to_vec());
        m
    }

    /// Copies the nonzero entries of a dense matrix.
    pub fn from_dense(d: &DMatrix<f64>) -> Result<Self> {
        if d.nrows() != d.ncols() {
            return Err(MfsorError::ShapeMismatch { expected: d.nrows(), found: d.ncols() });
        }
        let mut m = Self::zeros(d.nrows());
        for i in 0..d.nrows() {
            for j in 0..d.ncols() {
                if d[(i, j)] != 0.0 {
                    m.set(i, j, d[(i, j)]);
                }
            }
        }
        Ok(m)
    }

    /// Dimension `N`.
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Stored diagonal offsets in increasing order.
    pub fn offsets(&self) -> Vec<isize> {
        self.bands.keys().copied().collect()
    }

    /// Stored diagonal at offset `o`.
    pub fn band(&self, o: isize) -> Option<&[f64]> {
        self.bands.get(&o).map(Vec::as_slice)
    }

    /// Entry `(i, j)`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let o = j as isize - i as isize;
        self.bands.get(&o).map_or(0.0, |b| b[i])
    }

    /// Sets entry `(i, j)`, creating its diagonal when needed.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let n = self.n;
        let o = j as isize - i as isize;
        self.bands.entry(o).or_insert_with(|| vec![0.0; n])[i] = v;
    }

    /// Adds `v` to entry `(i, j)`.
    pub fn add_to(&mut self, i: usize, j: usize, v: f64) {
        let n = self.n;
        let o = j as isize - i as isize;
        self.bands.entry(o).or_insert_with(|| vec![0.0; n])[i] += v;
    }

    /// Main diagonal.
    pub fn diagonal(&self) -> Vec<f64> {
        self.bands[&0].clone()
    }

    /// Nonzero entries of row `i` as `(column, value)` in column order.
    pub fn row(&self, i: usize) -> Vec<(usize, f64)> {
        self.bands
            .iter()
            .filter_map(|(&o, b)| {
                let j = i as isize + o;
                (j >= 0 && (j as usize) < self.n && b[i] != 0.0).then(|| (j as usize, b[i]))
            })
            .collect()
    }

    /// Nonzero entries in row-major order.
    pub fn entries(&self) -> Vec<(usize, usize, f64)> {
        (0..self.n).flat_map(|i| self.row(i).into_iter().map(move |(j, v)| (i, j, v))).collect()
    }

    /// `M x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for (&o, b) in &self.bands {
            for (i, yi) in y.iter_mut().enumerate() {
                let j = i as isize + o;
                if j >= 0 && (j as usize) < self.n {
                    *yi += b[i] * x[j as usize];
                }
            }
        }
        y
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let mut out = self.clone();
        for (i, j, v) in other.entries() {
            out.add_to(i, j, s * v);
        }
        Ok(out)
    }

    /// `diag(s) M`.
    pub fn scale_rows(&self, s: &[f64]) -> Self {
        let mut out = self.clone();
        for b in out.bands.values_mut() {
            for (v, f) in b.iter_mut().zip(s) {
                *v *= f;
            }
        }
        out
    }

    /// Product `self * other`, computed band by band.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let mut out = Self::zeros(self.n);
        for i in 0..self.n {
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    out.add_to(i, j, a * b);
                }
            }
        }
        Ok(out)
    }

    /// Transpose.
    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.n);
        for (i, j, v) in self.entries() {
            out.set(j, i, v);
        }
        out
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.bands.values().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Frobenius norm.
    pub fn frobenius(&self) -> f64 {
        self.bands.values().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest distance between the offsets of nonzero entries and the diagonal.
    pub fn bandwidth(&self) -> usize {
        self.entries().iter().map(|&(i, j, _)| i.abs_diff(j)).max().unwrap_or(0)
    }

    /// Whether `|M - M^T| <= tol` entrywise.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.entries().iter().all(|&(i, j, v)| (v - self.get(j, i)).abs() <= tol)
    }

    /// Whether the nonzero pattern is symmetric.
    pub fn has_symmetric_pattern(&self) -> bool {
        self.entries().iter().all(|&(i, j, _)| self.get(j, i) != 0.0)
    }

    /// Weak diagonal dominance in every row, strict in at least one, and a
    /// connected adjacency graph.
    pub fn is_irreducibly_diagonally_dominant(&self) -> bool {
        let mut strict = false;
        for i in 0..self.n {
            let off: f64 = self.row(i).iter().filter(|e| e.0 != i).map(|e| e.1.abs()).sum();
            let d = self.get(i, i).abs();
            // Centres are sums of the links, so equality only holds up to rounding.
            let slack = 1e-12 * off;
            if d < off - slack {
                return false;
            }
            strict |= d > off + slack;
        }
        if self.n == 0 {
            return true;
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for (j, _) in self.row(i) {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        strict && seen.iter().all(|s| *s)
    }

    /// Dense copy (refused above [`DENSE_LIMIT`]).
    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        dense_guard(self.n)?;
        let mut d = DMatrix::zeros(self.n, self.n);
        for (i, j, v) in self.entries() {
            d[(i, j)] = v;
        }
        Ok(d)
    }

    /// Writes `row col value` lines (0-based indices) for every nonzero entry.
    pub fn write_coordinate<W: Write>(&self, mut w: W) -> Result<()> {
        for (i, j, v) in self.entries() {
            writeln!(w, "{i} {j} {v:e}")?;
        }
        Ok(())
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.n != other.n {
            return Err(MfsorError::ShapeMismatch { expected: self.n, found: other.n });
        }
        Ok(())
    }
}

/// Matrix of the stencil equations in natural row-wise order; boundary
/// values are not part of `A` because they are folded into the right-hand side.
pub fn assemble_matrix(stencil: &Stencil) -> StructuredMatrix {
    let n = stencil.len();
    let mut m = StructuredMatrix::from_diagonal(&stencil.center);
    for q in 0..n {
        for a in 0..stencil.dim {
            for side in [-1i8, 1] {
                if let Some(r) = stencil.neighbor(q, a, side) {
                    m.set(q, r, -stencil.coefficient(q, a, side));
                }
            }
        }
    }
    m
}

/// Implicit part of one iteration of a sweep cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct Splitting {
    /// Iteration index within the cycle.
    pub iteration: usize,
    /// The matrix `G_k`.
    pub g: StructuredMatrix,
    /// Its diagonal `Lambda_k` (directional link sums).
    pub lambda: Vec<f64>,
    /// Sweep direction index of every row, selecting its relaxation factor.
    pub directions: Vec<usize>,
    /// Update units (coupled sets and single nodes) in an order in which
    /// every unit only depends on earlier ones.
    pub units: Vec<Vec<usize>>,
}

impl Splitting {
    /// Unit sizes in update order, the splitting set of the update-order certificate.
    pub fn unit_sizes(&self) -> Vec<usize> {
        self.units.iter().map(Vec::len).collect()
    }

    /// Permutation listing the rows unit by unit in update order.
    pub fn update_order(&self) -> Vec<usize> {
        self.units.iter().flatten().copied().collect()
    }
}

/// Splittings of every iteration of a sweep cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitAnalysis {
    /// Spatial dimension.
    pub dim: usize,
    /// Interior shape.
    pub shape: Point,
    /// The system matrix.
    pub a: StructuredMatrix,
    /// Diagonal remainder `beta` with `G_{2j} + diag(beta) + G_{2j+1} = A`.
    pub beta: Vec<f64>,
    /// One splitting per iteration of the cycle.
    pub splittings: Vec<Splitting>,
    /// Sub-domain sizes in box order.
    pub xi: Vec<usize>,
    /// Permutation listing the nodes box by box (natural order inside a box).
    pub box_order: Vec<usize>,
}

impl SplitAnalysis {
    /// Number of unknowns.
    pub fn len(&self) -> usize {
        self.a.dim()
    }

    /// Whether there are no unknowns.
    pub fn is_empty(&self) -> bool {
        self.a.dim() == 0
    }

    /// Largest entry of `|G_{2j} + diag(beta) + G_{2j+1} - A|` over all pairs,
    /// relative to the largest entry of `A`.
    pub fn splitting_defect(&self) -> Result<f64> {
        let scale = self.a.max_abs().max(f64::MIN_POSITIVE);
        let d = StructuredMatrix::from_diagonal(&self.beta);
        let mut worst = 0.0f64;
        for pair in self.splittings.chunks(2) {
            let mut s = d.axpy(1.0, &pair[0].g)?;
            if let Some(second) = pair.get(1) {
                s = s.axpy(1.0, &second.g)?;
            }
            worst = worst.max(s.axpy(-1.0, &self.a)?.max_abs() / scale);
        }
        Ok(worst)
    }

    /// Explicit part `A - diag(beta) - G_k` of iteration `k`.
    pub fn explicit_part(&self, k: usize) -> Result<StructuredMatrix> {
        let d = StructuredMatrix::from_diagonal(&self.beta);
        self.a.axpy(-1.0, &d)?.axpy(-1.0, &self.splittings[k].g)
    }
}

/// Orders update units so that each depends only on earlier ones, breaking
/// ties by smallest node index. Units caught in a dependency cycle are
/// appended in index order so that a certificate check can refute them.
fn order_units(g: &StructuredMatrix, units: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    let n = g.dim();
    let mut unit_of = vec![0usize; n];
    for (u, members) in units.iter().enumerate() {
        for &m in members {
            unit_of[m] = u;
        }
    }
    let mut indegree = vec![0usize; units.len()];
    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); units.len()];
    for (i, j, _) in g.entries() {
        let (ui, uj) = (unit_of[i], unit_of[j]);
        if ui != uj {
            succ[uj].push(ui);
            indegree[ui] += 1;
        }
    }
    let key = |u: usize| units[u].iter().copied().min().unwrap_or(usize::MAX);
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> =
        (0..units.len()).filter(|&u| indegree[u] == 0).map(|u| Reverse((key(u), u))).collect();
    let mut done = vec![false; units.len()];
    let mut order = Vec::with_capacity(units.len());
    while let Some(Reverse((_, u))) = heap.pop() {
        done[u] = true;
        order.push(u);
        for &v in &succ[u] {
            indegree[v] -= 1;
            if indegree[v] == 0 {
                heap.push(Reverse((key(v), v)));
            }
        }
    }
    let mut rest: Vec<usize> = (0..units.len()).filter(|&u| !done[u]).collect();
    rest.sort_by_key(|&u| key(u));
    order.extend(rest);
    order.into_iter().map(|u| units[u].clone()).collect()
}

/// Splittings of the parallel sweep cycle on `decomp`.
///
/// In iteration `k` node `x` of box `B` treats the link to its upstream
/// neighbour on axis `a` implicitly. That neighbour is inside `B`, or it is
/// the partner across a starting face that borders another box (both then
/// belong to one coupled set), or it is a boundary node whose link only
/// enters the diagonal.
pub fn build_splitting(stencil: &Stencil, decomp: &Decomposition) -> Result<SplitAnalysis> {
    if decomp.dim() != stencil.dim || decomp.shape() != stencil.shape {
        return Err(MfsorError::InvalidDecomposition(format!(
            "decomposition of {:?} in {}D does not match the stencil shape {:?} in {}D",
            decomp.shape(),
            decomp.dim(),
            stencil.shape,
            stencil.dim
        )));
    }
    let n = stencil.len();
    let a = assemble_matrix(stencil);
    let sched = SweepSchedule::new(stencil.dim);
    let mut beta = stencil.center.clone();
    for (q, b) in beta.iter_mut().enumerate() {
        for ax in 0..stencil.dim {
            *b -= stencil.minus[ax][q] + stencil.plus[ax][q];
        }
    }
    let owner: Vec<usize> = (0..n).map(|q| decomp.box_of(unflatten(stencil.shape, q))).collect();
    let mut splittings = Vec::with_capacity(sched.cycle_len());
    for k in 0..sched.cycle_len() {
        let dirs: Vec<SweepDirection> = decomp.boxes().iter().map(|b| sched.direction(b.part, k)).collect();
        let mut g = StructuredMatrix::zeros(n);
        for q in 0..n {
            let dir = dirs[owner[q]];
            for ax in 0..stencil.dim {
                let side = -dir.sign(ax);
                let c = stencil.coefficient(q, ax, side);
                g.add_to(q, q, c);
                if let Some(r) = stencil.neighbor(q, ax, side) {
                    g.set(q, r, -c);
                }
            }
        }
        let mut in_set = vec![false; n];
        let mut units: Vec<Vec<usize>> = Vec::new();
        for per_box in identify_coupling_sets(decomp, &sched, k) {
            for set in per_box {
                let members: Vec<usize> = set.members.iter().map(|m| flat_index(stencil.shape, *m)).collect();
                if !in_set[members[0]] {
                    for &m in &members {
                        in_set[m] = true;
                    }
                    units.push(members);
                }
            }
        }
        units.extend((0..n).filter(|&q| !in_set[q]).map(|q| vec![q]));
        let units = order_units(&g, units);
        splittings.push(Splitting {
            iteration: k,
            lambda: g.diagonal(),
            g,
            directions: (0..n).map(|q| dirs[owner[q]].index()).collect(),
            units,
        });
    }
    let mut box_order = Vec::with_capacity(n);
    for b in decomp.boxes() {
        for z in b.lo[2]..b.hi[2] {
            for y in b.lo[1]..b.hi[1] {
                for x in b.lo[0]..b.hi[0] {
                    box_order.push(flat_index(stencil.shape, [x, y, z]));
                }
            }
        }
    }
    Ok(SplitAnalysis {
        dim: stencil.dim,
        shape: stencil.shape,
        a,
        beta,
        splittings,
        xi: decomp.boxes().iter().map(|b| b.volume()).collect(),
        box_order,
    })
}

/// Splittings of a single-domain sweep cycle for a general matrix whose
/// unknowns live on the grid `shape`: entry `(i, j)` is implicit in
/// iteration `k` when node `j` precedes node `i` in the nested-loop order
/// from the cycle's `k`-th starting corner. The diagonal of `G_k` is the sum
/// of `-a_ij` over its implicit entries, and `beta` is the row sum of `A`.
pub fn sequential_splitting(a: &StructuredMatrix, dim: usize, shape: Point) -> Result<SplitAnalysis> {
    let n: usize = shape.iter().product();
    if a.dim() != n {
        return Err(MfsorError::ShapeMismatch { expected: n, found: a.dim() });
    }
    let sched = SweepSchedule::new(dim);
    let beta: Vec<f64> = (0..n).map(|i| a.row(i).iter().map(|e| e.1).sum()).collect();
    let mut splittings = Vec::with_capacity(sched.cycle_len());
    for k in 0..sched.cycle_len() {
        let dir = sched.base_direction(k);
        let step = |q: usize| {
            let p = unflatten(shape, q);
            let mut s = 0;
            for ax in (0..dim).rev() {
                s = s * shape[ax] + dir.sweep_coord(ax, p[ax], 0, shape[ax]);
            }
            s
        };
        let mut g = StructuredMatrix::zeros(n);
        for (i, j, v) in a.entries() {
            if i != j && step(j) < step(i) {
                g.set(i, j, v);
                g.add_to(i, i, -v);
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&q| step(q));
        splittings.push(Splitting {
            iteration: k,
            lambda: g.diagonal(),
            g,
            directions: vec![dir.index(); n],
            units: order.into_iter().map(|q| vec![q]).collect(),
        });
    }
    Ok(SplitAnalysis { dim, shape, a: a.clone(), beta, splittings, xi: vec![n], box_order: (0..n).collect() })
}

/// Shape of one level of a multilevel splitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelShape {
    /// The block above the trailing diagonal block is zero.
    BlockLower,
    /// The block left of the trailing diagonal block is zero.
    BlockUpper,
}

/// Shape of a leaf diagonal block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeafShape {
    /// Diagonal.
    Diagonal,
    /// Lower triangular.
    Lower,
    /// Upper triangular.
    Upper,
    /// Neither.
    Dense,
}

/// Successful certificate: level shapes from the outermost level inwards
/// and the shape of every leaf block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriangularCertificate {
    /// One entry per level, outermost (last block peeled first) first.
    pub levels: Vec<LevelShape>,
    /// Shape of each diagonal block in order.
    pub leaves: Vec<LeafShape>,
}

/// Entry that prevents a certificate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Refutation {
    /// Level (0 = outermost) or leaf index at which the check failed.
    pub level: usize,
    /// Row of the violating entry (in permuted numbering).
    pub row: usize,
    /// Column of the violating entry (in permuted numbering).
    pub col: usize,
    /// Its value.
    pub value: f64,
    /// Whether the failure is in a leaf block rather than at a level.
    pub in_leaf: bool,
}

/// Outcome of a block-triangularity check.
#[derive(Debug, Clone, PartialEq)]
pub enum Certification {
    /// The structure holds.
    Certified(TriangularCertificate),
    /// The structure is violated.
    Refuted(Refutation),
}

impl Certification {
    /// Whether a certificate was found.
    pub fn is_certified(&self) -> bool {
        matches!(self, Self::Certified(_))
    }
}

fn leaf_shape(entries: &[(usize, usize, f64)]) -> (LeafShape, Option<(usize, usize, f64)>) {
    let upper = entries.iter().find(|e| e.1 > e.0).copied();
    let lower = entries.iter().find(|e| e.1 < e.0).copied();
    match (lower, upper) {
        (None, None) => (LeafShape::Diagonal, None),
        (Some(_), None) => (LeafShape::Lower, None),
        (None, Some(_)) => (LeafShape::Upper, None),
        (Some(l), Some(_)) => (LeafShape::Dense, Some(l)),
    }
}

fn certify(m: &StructuredMatrix, perm: Option<&[usize]>, xi: &[usize], dense_leaves: bool) -> Result<Certification> {
    let n = m.dim();
    let total: usize = xi.iter().sum();
    if total != n || xi.contains(&0) {
        return Err(MfsorError::SplittingSize { sum: total, dim: n });
    }
    let mut pos = vec![0usize; n];
    match perm {
        Some(p) => {
            let mut seen = vec![false; n];
            if p.len() != n {
                return Err(MfsorError::ShapeMismatch { expected: n, found: p.len() });
            }
            for (new, &old) in p.iter().enumerate() {
                if old >= n || seen[old] {
                    return Err(MfsorError::Config("ordering is not a permutation".into()));
                }
                seen[old] = true;
                pos[old] = new;
            }
        }
        None => pos.iter_mut().enumerate().for_each(|(i, p)| *p = i),
    }
    let mut block_of = vec![0usize; n];
    let mut start = 0;
    for (b, &s) in xi.iter().enumerate() {
        block_of[start..start + s].iter_mut().for_each(|x| *x = b);
        start += s;
    }
    let nb = xi.len();
    let mut upper_right: Vec<Option<(usize, usize, f64)>> = vec![None; nb];
    let mut lower_left: Vec<Option<(usize, usize, f64)>> = vec![None; nb];
    let mut leaf_entries: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); nb];
    for (i, j, v) in m.entries() {
        let (r, c) = (pos[i], pos[j]);
        let (bi, bj) = (block_of[r], block_of[c]);
        if bi == bj {
            leaf_entries[bi].push((r, c, v));
        } else if bj > bi {
            upper_right[bj].get_or_insert((r, c, v));
        } else {
            lower_left[bi].get_or_insert((r, c, v));
        }
    }
    let mut levels = Vec::with_capacity(nb.saturating_sub(1));
    for (level, t) in (1..nb).rev().enumerate() {
        match (upper_right[t], lower_left[t]) {
            (None, _) => levels.push(LevelShape::BlockLower),
            (Some(_), None) => levels.push(LevelShape::BlockUpper),
            (Some((row, col, value)), Some(_)) => {
                return Ok(Certification::Refuted(Refutation { level, row, col, value, in_leaf: false }))
            }
        }
    }
    let mut leaves = Vec::with_capacity(nb);
    for (b, entries) in leaf_entries.iter().enumerate() {
        let (shape, witness) = leaf_shape(entries);
        if let (false, Some((row, col, value))) = (dense_leaves, witness) {
            return Ok(Certification::Refuted(Refutation { level: b, row, col, value, in_leaf: true }));
        }
        leaves.push(shape);
    }
    Ok(Certification::Certified(TriangularCertificate { levels, leaves }))
}

/// Checks whether `m` is alternatively block lower-upper triangular under
/// the splitting set `xi` (consecutive diagonal block sizes summing to `N`).
///
/// The trailing block is peeled level by level; each level must have a zero
/// upper-right or a zero lower-left block, and every leaf block must be
/// triangular so that the eigenvalues are the diagonal entries.
pub fn is_alt_block_triangular(m: &StructuredMatrix, xi: &[usize]) -> Result<Certification> {
    certify(m, None, xi, false)
}

/// Same level check as [`is_alt_block_triangular`] after reordering the rows
/// and columns by `perm` (`perm[new] = old`); leaf blocks may be dense when
/// `dense_leaves` is set.
pub fn block_certificate(
    m: &StructuredMatrix,
    perm: &[usize],
    xi: &[usize],
    dense_leaves: bool,
) -> Result<Certification> {
    certify(m, Some(perm), xi, dense_leaves)
}

/// Eigenvalues of a dense matrix by shifted QR iteration, or `None` when
/// the iteration does not settle within `100 N` steps.
///
/// Highly symmetric inputs can make the shifts cycle; those are retried once
/// on `H M H` with a fixed Householder reflection `H`, which has the same
/// spectrum.
pub fn dense_eigenvalues(m: &DMatrix<f64>) -> Option<Vec<Complex<f64>>> {
    let n = m.nrows();
    if n == 0 {
        return Some(Vec::new());
    }
    let cap = 100 * n.max(10);
    let schur = Schur::try_new(m.clone(), f64::EPSILON, cap).or_else(|| {
        let v = DVector::from_fn(n, |i, _| 1.0 + (i as f64 * 0.7).sin());
        let h = DMatrix::identity(n, n) - (&v * v.transpose()) * (2.0 / v.norm_squared());
        Schur::try_new(&h * m * &h, f64::EPSILON, cap)
    })?;
    Some(schur.complex_eigenvalues().iter().copied().collect())
}

/// Largest distance in a greedy nearest-neighbour matching of two
/// eigenvalue multisets (infinite when the sizes differ).
pub fn spectrum_distance(a: &[Complex<f64>], b: &[Complex<f64>]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut sa = a.to_vec();
    sa.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    let mut used = vec![false; b.len()];
    let mut worst = 0.0f64;
    for x in sa {
        let (best, d) = b
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .map(|(i, y)| (i, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .expect("sizes match");
        used[best] = true;
        worst = worst.max(d);
    }
    worst
}

/// Spectral comparison for one splitting matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumCheck {
    /// Iteration index of the splitting.
    pub iteration: usize,
    /// Diagonal entries of `G`.
    pub diagonal: Vec<f64>,
    /// Union of the eigenvalues of the diagonal blocks in update order.
    pub block_spectrum: Vec<Complex<f64>>,
    /// Distance between the block spectrum and the diagonal multiset.
    pub diagonal_deviation: f64,
    /// Distance between a dense eigensolve of `G` and the block spectrum
    /// (`None` when the dense eigensolve did not converge).
    pub dense_deviation: Option<f64>,
    /// Whether the update-order certificate (dense leaves allowed) holds.
    pub block_certified: bool,
    /// Number of update units larger than one node.
    pub coupled_units: usize,
}

/// Result of [`eigen_diag_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDiagReport {
    /// One entry per splitting.
    pub checks: Vec<SpectrumCheck>,
    /// Absolute tolerance used (`1e-8` times the largest entry of `A`).
    pub tolerance: f64,
}

impl EigenDiagReport {
    /// Whether every spectrum equals its diagonal within the tolerance.
    pub fn diagonal_pass(&self) -> bool {
        self.checks.iter().all(|c| c.diagonal_deviation <= self.tolerance)
    }

    /// Whether every splitting is block triangular in update order.
    pub fn block_pass(&self) -> bool {
        self.checks.iter().all(|c| c.block_certified)
    }
}

/// Compares the eigenvalues of every `G_k` with its diagonal.
///
/// The spectrum is taken as the union of the eigenvalues of the diagonal
/// blocks in update order, which equals the spectrum of `G_k` when the
/// update-order certificate holds. A dense eigensolve of the whole matrix is
/// reported alongside; it can be inaccurate because single-node chains
/// with equal diagonal entries form Jordan-like blocks.
pub fn eigen_diag_check(split: &SplitAnalysis) -> Result<EigenDiagReport> {
    dense_guard(split.len())?;
    let tolerance = 1e-8 * split.a.max_abs();
    let mut checks = Vec::with_capacity(split.splittings.len());
    for s in &split.splittings {
        let cert = block_certificate(&s.g, &s.update_order(), &s.unit_sizes(), true)?;
        let mut block_spectrum = Vec::with_capacity(split.len());
        for unit in &s.units {
            if unit.len() == 1 {
                block_spectrum.push(Complex::new(s.g.get(unit[0], unit[0]), 0.0));
            } else {
                let b = DMatrix::from_fn(unit.len(), unit.len(), |r, c| s.g.get(unit[r], unit[c]));
                block_spectrum.extend(dense_eigenvalues(&b).ok_or_else(|| {
                    MfsorError::Config(format!("eigensolve of a {}-node coupled block failed", unit.len()))
                })?);
            }
        }
        let diag: Vec<Complex<f64>> = s.lambda.iter().map(|&d| Complex::new(d, 0.0)).collect();
        let dense = dense_eigenvalues(&s.g.to_dense()?);
        checks.push(SpectrumCheck {
            iteration: s.iteration,
            diagonal: s.lambda.clone(),
            diagonal_deviation: spectrum_distance(&block_spectrum, &diag),
            dense_deviation: dense.map(|d| spectrum_distance(&d, &block_spectrum)),
            block_spectrum,
            block_certified: cert.is_certified(),
            coupled_units: s.units.iter().filter(|u| u.len() > 1).count(),
        });
    }
    Ok(EigenDiagReport { checks, tolerance })
}

fn check_relax(split: &SplitAnalysis, relax: &RelaxationSet) -> Result<()> {
    if relax.dim() != split.dim {
        return Err(MfsorError::InvalidRelaxation(format!(
            "relaxation set of dimension {} used on a {}-dimensional splitting",
            relax.dim(),
            split.dim
        )));
    }
    Ok(())
}

/// Factors of iteration `k`: `P_k = diag(b) - W Lambda_k + W G_k`,
/// `Q_k = diag((1 - w) b) + W Lambda'_k - W G'_k` with `G'_k` the explicit
/// part, and the per-row factors `w`.
pub fn iteration_factors(
    split: &SplitAnalysis,
    k: usize,
    relax: &RelaxationSet,
) -> Result<(StructuredMatrix, StructuredMatrix, Vec<f64>)> {
    check_relax(split, relax)?;
    let s = &split.splittings[k];
    let b = split.a.diagonal();
    let w: Vec<f64> = s.directions.iter().map(|&d| relax.get(SweepDirection::from_index(split.dim, d))).collect();
    let explicit = split.explicit_part(k)?;
    let lam_imp = StructuredMatrix::from_diagonal(&s.lambda);
    let lam_exp = StructuredMatrix::from_diagonal(&explicit.diagonal());
    let p = StructuredMatrix::from_diagonal(&b).axpy(1.0, &s.g.axpy(-1.0, &lam_imp)?.scale_rows(&w))?;
    let keep: Vec<f64> = b.iter().zip(&w).map(|(b, w)| (1.0 - w) * b).collect();
    let q = StructuredMatrix::from_diagonal(&keep).axpy(-1.0, &explicit.axpy(-1.0, &lam_exp)?.scale_rows(&w))?;
    Ok((p, q, w))
}

/// One iteration `u <- P_k^{-1} (Q_k u + W f)` of the matrix recurrence,
/// solved unit by unit in update order.
pub fn matrix_iteration_step(
    split: &SplitAnalysis,
    k: usize,
    relax: &RelaxationSet,
    u: &[f64],
    f: &[f64],
) -> Result<Vec<f64>> {
    let n = split.len();
    if u.len() != n || f.len() != n {
        return Err(MfsorError::ShapeMismatch { expected: n, found: u.len().min(f.len()) });
    }
    let (p, q, w) = iteration_factors(split, k, relax)?;
    let mut rhs = q.matvec(u);
    for i in 0..n {
        rhs[i] += w[i] * f[i];
    }
    let mut next = vec![0.0; n];
    let mut done = vec![false; n];
    for (step, unit) in split.splittings[k].units.iter().enumerate() {
        let s = unit.len();
        let mut mat = vec![0.0; s * s];
        let mut r = vec![0.0; s];
        for (a, &i) in unit.iter().enumerate() {
            r[a] = rhs[i];
            for (j, v) in p.row(i) {
                if let Some(c) = unit.iter().position(|&m| m == j) {
                    mat[a * s + c] = v;
                } else if done[j] {
                    r[a] -= v * next[j];
                } else {
                    return Err(MfsorError::Config(format!(
                        "row {i} depends on row {j}, which is not updated before it"
                    )));
                }
            }
        }
        let x = solve_dense(s, &mat, &r).map_err(|e| match e {
            MfsorError::SingularSystem { size, pivot, .. } => MfsorError::SingularSystem { size, step, pivot },
            other => other,
        })?;
        for (a, &i) in unit.iter().enumerate() {
            next[i] = x[a];
            done[i] = true;
        }
    }
    Ok(next)
}

/// How a spectral radius was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RhoMethod {
    /// Dense eigensolve of the formed iteration matrix.
    Dense,
    /// Power iteration on the matrix-free cycle operator.
    Power,
}

/// Iteration matrix of a full sweep cycle and its spectral data.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationMatrixReport {
    /// `T = prod_k P_k^{-1} Q_k` (last iteration leftmost); absent above [`DENSE_LIMIT`].
    pub t: Option<DMatrix<f64>>,
    /// Spectral radius of `T`.
    pub rho: f64,
    /// How `rho` was computed.
    pub method: RhoMethod,
    /// `prod_i |1 - w_i|` over the direction factors.
    pub bound: f64,
    /// Implicit and explicit factors `(P_k, Q_k)` of every iteration.
    pub factors: Vec<(StructuredMatrix, StructuredMatrix)>,
    /// Diagonals of the `P_k` (expected: `b`).
    pub lambda_plus: Vec<Vec<f64>>,
    /// Diagonals of the `Q_k` (expected: `(1 - w) b`).
    pub lambda_minus: Vec<Vec<f64>>,
    /// Largest deviation of those diagonals from their expected values.
    pub identity_defect: f64,
}

impl IterationMatrixReport {
    /// Whether the cycle converges (`rho < 1`).
    pub fn converges(&self) -> bool {
        self.rho < 1.0
    }

    /// Whether `rho <= bound` (recorded, not an invariant).
    pub fn within_bound(&self) -> bool {
        self.rho <= self.bound + 1e-12
    }
}

/// Forms the cycle's iteration matrix and its spectral radius; above
/// [`DENSE_LIMIT`] unknowns `T` is not formed and power iteration is used.
pub fn iteration_matrix(split: &SplitAnalysis, relax: &RelaxationSet) -> Result<IterationMatrixReport> {
    let n = split.len();
    let b = split.a.diagonal();
    let mut factors = Vec::with_capacity(split.splittings.len());
    let mut lambda_plus = Vec::new();
    let mut lambda_minus = Vec::new();
    let mut identity_defect = 0.0f64;
    for k in 0..split.splittings.len() {
        let (p, q, w) = iteration_factors(split, k, relax)?;
        let (dp, dq) = (p.diagonal(), q.diagonal());
        for i in 0..n {
            identity_defect = identity_defect.max((dp[i] - b[i]).abs()).max((dq[i] - (1.0 - w[i]) * b[i]).abs());
        }
        lambda_plus.push(dp);
        lambda_minus.push(dq);
        factors.push((p, q));
    }
    let bound = relax.product_bound();
    if n > DENSE_LIMIT {
        let rho = spectral_radius_power(split, relax, 20_000, 1e-10)?;
        return Ok(IterationMatrixReport {
            t: None,
            rho,
            method: RhoMethod::Power,
            bound,
            factors,
            lambda_plus,
            lambda_minus,
            identity_defect,
        });
    }
    let mut t = DMatrix::<f64>::identity(n, n);
    for (k, (p, q)) in factors.iter().enumerate() {
        let rhs = q.to_dense()? * &t;
        t = p.to_dense()?.lu().solve(&rhs).ok_or(MfsorError::SingularSystem { size: n, step: k, pivot: 0.0 })?;
    }
    let (rho, method) = match dense_eigenvalues(&t) {
        Some(ev) => (ev.iter().map(|z| z.norm()).fold(0.0, f64::max), RhoMethod::Dense),
        None => (spectral_radius_power(split, relax, 20_000, 1e-10)?, RhoMethod::Power),
    };
    Ok(IterationMatrixReport { t: Some(t), rho, method, bound, factors, lambda_plus, lambda_minus, identity_defect })
}

/// Estimates `rho(T)` by power iteration on the homogeneous cycle.
///
/// The estimate is the geometric mean growth over a trailing window of
/// cycles, which also settles for complex dominant pairs; iteration stops
/// when successive estimates agree to `tol` or after `max_cycles` cycles.
pub fn spectral_radius_power(split: &SplitAnalysis, relax: &RelaxationSet, max_cycles: usize, tol: f64) -> Result<f64> {
    let n = split.len();
    let zero = vec![0.0; n];
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 101) as f64 / 101.0).collect();
    let window = 8;
    let mut logs: Vec<f64> = vec![0.0];
    let mut log_norm = 0.0;
    let mut last = f64::NAN;
    for cycle in 1..=max_cycles {
        for k in 0..split.splittings.len() {
            x = matrix_iteration_step(split, k, relax, &x, &zero)?;
        }
        let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nrm == 0.0 {
            return Ok(0.0);
        }
        if !nrm.is_finite() {
            return Err(MfsorError::Config("power iteration overflowed".into()));
        }
        log_norm += nrm.ln();
        x.iter_mut().for_each(|v| *v /= nrm);
        logs.push(log_norm);
        if cycle >= window {
            let est = ((logs[cycle] - logs[cycle - window]) / window as f64).exp();
            if (est - last).abs() <= tol * est.max(1e-300) {
                return Ok(est);
            }
            last = est;
        }
    }
    Ok(last)
}

/// Zero-fill incomplete factors: unit lower `L` and upper `U`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ilu0 {
    /// Unit lower-triangular factor (unit diagonal stored).
    pub l: StructuredMatrix,
    /// Upper-triangular factor.
    pub u: StructuredMatrix,
}

/// ILU(0) of `m` on its nonzero pattern.
pub fn ilu0_factor(m: &StructuredMatrix) -> Result<Ilu0> {
    let n = m.dim();
    let mut w = m.clone();
    let pattern = |i: usize, j: usize| m.get(i, j) != 0.0;
    for i in 0..n {
        let row = m.row(i);
        for &(k, _) in row.iter().filter(|e| e.0 < i) {
            let pivot = w.get(k, k);
            if pivot.abs() < f64::MIN_POSITIVE {
                return Err(MfsorError::SingularSystem { size: n, step: k, pivot });
            }
            let lik = w.get(i, k) / pivot;
            w.set(i, k, lik);
            for (j, ukj) in w.row(k) {
                if j > k && pattern(i, j) {
                    w.add_to(i, j, -lik * ukj);
                }
            }
        }
        if w.get(i, i) == 0.0 {
            return Err(MfsorError::SingularSystem { size: n, step: i, pivot: 0.0 });
        }
    }
    let mut l = StructuredMatrix::from_diagonal(&vec![1.0; n]);
    let mut u = StructuredMatrix::zeros(n);
    for (i, j, v) in w.entries() {
        if j < i {
            l.set(i, j, v);
        } else {
            u.set(i, j, v);
        }
    }
    Ok(Ilu0 { l, u })
}

fn lower_solve(l: &StructuredMatrix, r: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; r.len()];
    for i in 0..r.len() {
        let mut s = r[i];
        for (j, v) in l.row(i) {
            if j < i {
                s -= v * x[j];
            }
        }
        x[i] = s / l.get(i, i);
    }
    x
}

fn upper_solve(u: &StructuredMatrix, r: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; r.len()];
    for i in (0..r.len()).rev() {
        let mut s = r[i];
        for (j, v) in u.row(i) {
            if j > i {
                s -= v * x[j];
            }
        }
        x[i] = s / u.get(i, i);
    }
    x
}

/// Preconditioned Richardson run of [`ssgs_vs_ilu0_report`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RichardsonRun {
    /// Iterations performed.
    pub iterations: usize,
    /// Final relative residual.
    pub relative_residual: f64,
    /// Whether the target was reached.
    pub converged: bool,
}

/// Comparison of the symmetric Gauss-Seidel and ILU(0) preconditioners.
#[derive(Debug, Clone, PartialEq)]
pub struct SsgsIluReport {
    /// `|M_SSGS - L U|_F` with `M_SSGS = (D + L_M) D^{-1} (D + U_M)`.
    pub discrepancy: f64,
    /// `discrepancy / |M|_F`.
    pub relative_discrepancy: f64,
    /// Richardson iteration preconditioned by `M_SSGS`.
    pub ssgs: RichardsonRun,
    /// Richardson iteration preconditioned by `L U`.
    pub ilu0: RichardsonRun,
}

/// Builds both preconditioners of `m` and runs the preconditioned Richardson
/// iteration `x <- x + M^{-1} (f - A x)` from zero with `f = A 1` until the
/// relative residual drops below `1e-8` (at most `max_iters` steps).
pub fn ssgs_vs_ilu0_report(m: &StructuredMatrix, max_iters: usize) -> Result<SsgsIluReport> {
    let n = m.dim();
    let d = m.diagonal();
    if let Some(i) = d.iter().position(|v| *v == 0.0) {
        return Err(MfsorError::SingularSystem { size: n, step: i, pivot: 0.0 });
    }
    let mut lower = StructuredMatrix::from_diagonal(&d);
    let mut upper = StructuredMatrix::from_diagonal(&d);
    for (i, j, v) in m.entries() {
        if j < i {
            lower.set(i, j, v);
        } else if j > i {
            upper.set(i, j, v);
        }
    }
    let inv_d: Vec<f64> = d.iter().map(|v| 1.0 / v).collect();
    let m_ssgs = lower.mul(&StructuredMatrix::from_diagonal(&inv_d).mul(&upper)?)?;
    let ilu = ilu0_factor(m)?;
    let m_ilu = ilu.l.mul(&ilu.u)?;
    let discrepancy = m_ssgs.axpy(-1.0, &m_ilu)?.frobenius();
    let f = m.matvec(&vec![1.0; n]);
    let fnorm = f.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let run = |apply: &dyn Fn(&[f64]) -> Vec<f64>| -> RichardsonRun {
        let mut x = vec![0.0; n];
        let mut rel = 1.0;
        for it in 0..=max_iters {
            let ax = m.matvec(&x);
            let r: Vec<f64> = f.iter().zip(&ax).map(|(a, b)| a - b).collect();
            rel = r.iter().map(|v| v * v).sum::<f64>().sqrt() / fnorm;
            if rel < 1e-8 {
                return RichardsonRun { iterations: it, relative_residual: rel, converged: true };
            }
            if it == max_iters || !rel.is_finite() {
                break;
            }
            let z = apply(&r);
            x.iter_mut().zip(&z).for_each(|(a, b)| *a += b);
        }
        RichardsonRun { iterations: max_iters, relative_residual: rel, converged: false }
    };
    let ssgs = run(&|r| {
        let y = lower_solve(&lower, r);
        let z: Vec<f64> = y.iter().zip(&d).map(|(a, b)| a * b).collect();
        upper_solve(&upper, &z)
    });
    let ilu0 = run(&|r| upper_solve(&ilu.u, &lower_solve(&ilu.l, r)));
    Ok(SsgsIluReport {
        discrepancy,
        relative_discrepancy: discrepancy / m.frobenius().max(f64::MIN_POSITIVE),
        ssgs,
        ilu0,
    })
}

/// Nine-point matrix on an `nx x ny` grid in natural order. `link(i, dx, dy)`
/// gives the non-negative strength of the connection from node `i` to its
/// neighbour at offset `(dx, dy)`; the entry is its negative, and the
/// diagonal is the sum of all links of the row (out-of-grid ones included)
/// plus `excess(i)`.
pub fn nine_point_matrix(
    nx: usize,
    ny: usize,
    mut link: impl FnMut(usize, isize, isize) -> f64,
    mut excess: impl FnMut(usize) -> f64,
) -> StructuredMatrix {
    let n = nx * ny;
    let mut m = StructuredMatrix::zeros(n);
    for y in 0..ny {
        for x in 0..nx {
            let i = x + nx * y;
            let mut diag = excess(i);
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let c = link(i, dx, dy);
                    diag += c;
                    let (xx, yy) = (x as isize + dx, y as isize + dy);
                    if xx >= 0 && yy >= 0 && (xx as usize) < nx && (yy as usize) < ny {
                        m.set(i, xx as usize + nx * yy as usize, -c);
                    }
                }
            }
            m.set(i, i, diag);
        }
    }
    m
}

/// Dense-oracle helper: `M x` for a dense matrix.
pub fn dense_matvec(m: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (m * DVector::from_column_slice(x)).iter().copied().collect()
}
