// SPDX-License-Identifier: MIT

//! Parallel multi-frontal SOR engine.
//!
//! Every iteration proceeds in three phases per sub-domain:
//! 1. ghost layers of width two are refreshed from a snapshot of the previous
//!    iteration;
//! 2. the box is swept from its starting corner; nodes on a starting face
//!    that borders another sub-domain are updated together with their
//!    partners across the interface by solving a small dense system (2, 4 or
//!    8 unknowns), and all other nodes are relaxed in place;
//! 3. the layers other boxes read as ghosts are written back to the snapshot.
//!
//! Coupled systems are solved redundantly by every participating box from
//! identical inputs with rows in a canonical order, so the result does not
//! depend on the number of worker threads.

use std::time::Instant;

use rayon::prelude::*;

use crate::discretization::{residual_norm, Field, Stencil};
use crate::error::{MfsorError, Result};
use crate::grid::{flat_index, Decomposition, Point, SubBox, SweepDirection, SweepSchedule, MAX_DIM};
use crate::kernel::{copy_in, copy_out, l1_sum_box, sweep_box_dyn, CoupledHandler, Layout};
use crate::solvers_seq::{RelaxationSet, SolveReport, StopRule};

/// Pivot magnitude below which a coupled system is declared singular.
pub const SINGULAR_PIVOT: f64 = 1e-14;

/// Nodes that must be updated simultaneously, in canonical (flat index) order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoupledSkeleton {
    /// Participating interior nodes.
    pub members: Vec<Point>,
    /// Box id owning each member.
    pub owners: Vec<usize>,
    /// Sweep direction of each member's box.
    pub directions: Vec<SweepDirection>,
}

impl CoupledSkeleton {
    /// Number of unknowns.
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

/// Dense system `M x = r` of a coupled set; each row is the relaxation
/// formula of one member with the new values of its partners moved to the
/// left-hand side.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledSystem {
    /// Number of unknowns.
    pub size: usize,
    /// Row-major `size x size` matrix with unit diagonal.
    pub matrix: Vec<f64>,
    /// Right-hand side.
    pub rhs: Vec<f64>,
    /// Participating nodes in row order.
    pub members: Vec<Point>,
    /// Relaxation factor of each row.
    pub omegas: Vec<f64>,
    /// Sweep direction of each row.
    pub directions: Vec<SweepDirection>,
}

/// Starting-face indices of `b` that border another box when sweeping in `dir`.
pub(crate) fn coupled_faces(decomp: &Decomposition, b: &SubBox, dir: SweepDirection) -> [Option<usize>; 3] {
    let parts = decomp.parts();
    let mut faces = [None; 3];
    for (a, face) in faces.iter_mut().enumerate().take(decomp.dim()) {
        if dir.sign(a) > 0 {
            if b.part[a] > 0 {
                *face = Some(b.lo[a]);
            }
        } else if b.part[a] + 1 < parts[a] {
            *face = Some(b.hi[a] - 1);
        }
    }
    faces
}

/// Coupled set of node `p` of a box sweeping in `dir`, whose coupled axes are
/// the set bits of `mask`: `p` and its images across every subset of those
/// interfaces.
pub(crate) fn coupled_members(decomp: &Decomposition, p: Point, dir: SweepDirection, mask: u8) -> CoupledSkeleton {
    let set = SmallSet::new(decomp.shape(), p, dir, mask);
    let members = set.members[..set.n].to_vec();
    CoupledSkeleton {
        owners: members.iter().map(|&y| decomp.box_of(y)).collect(),
        directions: set.directions[..set.n].to_vec(),
        members,
    }
}

/// Coupled set of at most eight nodes held inline, members in flat order.
struct SmallSet {
    n: usize,
    members: [Point; 8],
    directions: [SweepDirection; 8],
}

impl SmallSet {
    fn new(shape: Point, p: Point, dir: SweepDirection, mask: u8) -> Self {
        let mut keys = [0usize; 8];
        let mut set = Self { n: 0, members: [[0; 3]; 8], directions: [dir; 8] };
        for subset in 0..8u8 {
            if subset & !mask != 0 {
                continue;
            }
            let mut y = p;
            let mut d = dir;
            for a in 0..MAX_DIM {
                if subset & (1 << a) != 0 {
                    y[a] = if dir.sign(a) > 0 { y[a] - 1 } else { y[a] + 1 };
                    d = d.flipped(a);
                }
            }
            let key = flat_index(shape, y);
            let mut at = set.n;
            while at > 0 && keys[at - 1] > key {
                keys[at] = keys[at - 1];
                set.members[at] = set.members[at - 1];
                set.directions[at] = set.directions[at - 1];
                at -= 1;
            }
            keys[at] = key;
            set.members[at] = y;
            set.directions[at] = d;
            set.n += 1;
        }
        set
    }
}

/// Lists, per box and in processing order, the coupled sets of iteration `k`.
///
/// A box whose starting corner lies inside the domain first meets the corner
/// set (`2^c` nodes, `c` the number of coupled axes), then the sets along its
/// starting edges and faces in sweep order. Boxes starting at a physical
/// boundary have no sets on that boundary.
pub fn identify_coupling_sets(decomp: &Decomposition, sched: &SweepSchedule, k: usize) -> Vec<Vec<CoupledSkeleton>> {
    decomp
        .boxes()
        .iter()
        .map(|b| {
            let dir = sched.direction(b.part, k);
            let faces = coupled_faces(decomp, b, dir);
            crate::grid::natural_order(b.lo, b.hi, dir)
                .into_iter()
                .filter_map(|p| {
                    let mask = face_mask(&faces, p);
                    (mask != 0).then(|| coupled_members(decomp, p, dir, mask))
                })
                .collect()
        })
        .collect()
}

#[inline]
fn face_mask(faces: &[Option<usize>; 3], p: Point) -> u8 {
    let mut m = 0u8;
    for a in 0..MAX_DIM {
        if faces[a] == Some(p[a]) {
            m |= 1 << a;
        }
    }
    m
}

/// Assembles the dense system of `skeleton`.
///
/// `value` returns the current value at a (signed) global interior index and
/// must return zero outside the domain. Values of non-member neighbours are
/// taken as they are, so upstream neighbours must already hold their new
/// values and downstream neighbours their old ones.
pub fn assemble_coupled(
    stencil: &Stencil,
    relax: &RelaxationSet,
    skeleton: &CoupledSkeleton,
    value: &dyn Fn([isize; 3]) -> f64,
) -> Result<CoupledSystem> {
    let s = skeleton.size();
    let mut matrix = vec![0.0; s * s];
    let mut rhs = vec![0.0; s];
    let mut omegas = vec![0.0; s];
    fill_system(stencil, relax, &skeleton.members, &skeleton.directions, value, &mut matrix, &mut rhs, &mut omegas)?;
    Ok(CoupledSystem {
        size: s,
        matrix,
        rhs,
        members: skeleton.members.clone(),
        omegas,
        directions: skeleton.directions.clone(),
    })
}

/// Writes the rows of the coupled system of `members` into `matrix`
/// (zeroed, row-major), `rhs` and `omegas`.
#[allow(clippy::too_many_arguments)]
fn fill_system(
    stencil: &Stencil,
    relax: &RelaxationSet,
    members: &[Point],
    directions: &[SweepDirection],
    value: &dyn Fn([isize; 3]) -> f64,
    matrix: &mut [f64],
    rhs: &mut [f64],
    omegas: &mut [f64],
) -> Result<()> {
    let s = members.len();
    let signed = |p: Point| [p[0] as isize, p[1] as isize, p[2] as isize];
    for r in 0..s {
        let y = members[r];
        let t = directions[r];
        let w = relax.get(t);
        omegas[r] = w;
        let q = flat_index(stencil.shape, y);
        let ap = stencil.center[q];
        let mut acc = stencil.rhs[q];
        for a in 0..stencil.dim {
            for side in [-1i8, 1] {
                let mut nb = signed(y);
                nb[a] += side as isize;
                let coef = stencil.coefficient(q, a, side);
                let col = members.iter().position(|m| signed(*m) == nb);
                match col {
                    Some(c) => {
                        if side != -t.sign(a) {
                            return Err(MfsorError::InvalidDecomposition(format!(
                                "coupled partner {nb:?} of {y:?} lies downstream"
                            )));
                        }
                        matrix[r * s + c] = -w * coef / ap;
                    }
                    None => acc += coef * value(nb),
                }
            }
        }
        matrix[r * s + r] = 1.0;
        rhs[r] = (1.0 - w) * value(signed(y)) + w * (acc / ap);
    }
    Ok(())
}

/// Solves a coupled system by Gaussian elimination with partial pivoting.
pub fn solve_coupled(system: &CoupledSystem) -> Result<Vec<f64>> {
    solve_dense(system.size, &system.matrix, &system.rhs)
}

/// Dense `n x n` solve with partial pivoting (row-major input).
pub fn solve_dense(n: usize, matrix: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let mut m = matrix.to_vec();
    let mut x = rhs.to_vec();
    solve_in_place(n, &mut m, &mut x)?;
    Ok(x)
}

/// Gaussian elimination with partial pivoting overwriting `m` and leaving
/// the solution in `x`.
fn solve_in_place(n: usize, m: &mut [f64], x: &mut [f64]) -> Result<()> {
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if m[r * n + col].abs() > m[piv * n + col].abs() {
                piv = r;
            }
        }
        let pv = m[piv * n + col];
        if pv.abs() < SINGULAR_PIVOT {
            return Err(MfsorError::SingularSystem { size: n, step: col, pivot: pv });
        }
        if piv != col {
            for c in 0..n {
                m.swap(col * n + c, piv * n + c);
            }
            x.swap(col, piv);
        }
        for r in col + 1..n {
            let f = m[r * n + col] / pv;
            if f != 0.0 {
                for c in col..n {
                    m[r * n + c] -= f * m[col * n + c];
                }
                x[r] -= f * x[col];
            }
        }
    }
    for col in (0..n).rev() {
        let mut s = x[col];
        for c in col + 1..n {
            s -= m[col * n + c] * x[c];
        }
        x[col] = s / m[col * n + col];
    }
    Ok(())
}

/// Contiguous run of cells along axis 0: buffer offset, flat offset, length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Segment {
    buf: usize,
    flat: usize,
    len: usize,
}

#[derive(Debug, Clone)]
struct BoxState {
    sub: SubBox,
    layout: Layout,
    buf: Vec<f64>,
    ghosts: Vec<Segment>,
    band: Vec<Segment>,
}

impl BoxState {
    fn new(decomp: &Decomposition, sub: &SubBox, init: &[f64]) -> Self {
        let dim = decomp.dim();
        let shape = decomp.shape();
        let parts = decomp.parts();
        let mut blo = [0isize; 3];
        let mut bhi = [1isize; 3];
        for a in 0..dim {
            let width_lo = if sub.part[a] > 0 { 2 } else { 1 };
            let width_hi = if sub.part[a] + 1 < parts[a] { 2 } else { 1 };
            blo[a] = (sub.lo[a] as isize - width_lo).max(-1);
            bhi[a] = (sub.hi[a] as isize + width_hi).min(shape[a] as isize + 1);
        }
        let ext = [(bhi[0] - blo[0]) as usize, (bhi[1] - blo[1]) as usize, (bhi[2] - blo[2]) as usize];
        let layout = Layout::new(blo, ext);
        let mut buf = vec![0.0; layout.size()];
        copy_in(&mut buf, &layout, shape, sub.lo, sub.hi, init);
        let inside = |a: usize, v: isize| v >= 0 && v < shape[a] as isize;
        let mut ghosts = Vec::new();
        for k in blo[2]..bhi[2] {
            for j in blo[1]..bhi[1] {
                if !inside(1, j) || !inside(2, k) {
                    continue;
                }
                let row_owned = (j as usize) >= sub.lo[1]
                    && (j as usize) < sub.hi[1]
                    && (k as usize) >= sub.lo[2]
                    && (k as usize) < sub.hi[2];
                let x0 = blo[0].max(0);
                let x1 = bhi[0].min(shape[0] as isize);
                let mut push = |from: isize, to: isize| {
                    if to > from {
                        let p = [from as usize, j as usize, k as usize];
                        ghosts.push(Segment {
                            buf: layout.index(p),
                            flat: flat_index(shape, p),
                            len: (to - from) as usize,
                        });
                    }
                };
                if row_owned {
                    push(x0, sub.lo[0] as isize);
                    push(sub.hi[0] as isize, x1);
                } else {
                    push(x0, x1);
                }
            }
        }
        let near_face = |a: usize, v: usize| -> bool {
            (sub.part[a] > 0 && v < sub.lo[a] + 2) || (sub.part[a] + 1 < parts[a] && v + 2 >= sub.hi[a])
        };
        let mut band = Vec::new();
        for k in sub.lo[2]..sub.hi[2] {
            for j in sub.lo[1]..sub.hi[1] {
                let whole = (dim >= 2 && near_face(1, j)) || (dim >= 3 && near_face(2, k));
                let mut push = |from: usize, to: usize| {
                    if to > from {
                        let p = [from, j, k];
                        band.push(Segment { buf: layout.index(p), flat: flat_index(shape, p), len: to - from });
                    }
                };
                if whole {
                    push(sub.lo[0], sub.hi[0]);
                } else {
                    let lo_end = if sub.part[0] > 0 { (sub.lo[0] + 2).min(sub.hi[0]) } else { sub.lo[0] };
                    let hi_start =
                        if sub.part[0] + 1 < parts[0] { sub.hi[0].saturating_sub(2).max(lo_end) } else { sub.hi[0] };
                    push(sub.lo[0], lo_end);
                    push(hi_start, sub.hi[0]);
                }
            }
        }
        Self { sub: sub.clone(), layout, buf, ghosts, band }
    }
}

/// Per-box sweep statistics of one iteration.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct BoxStats {
    updates: u64,
    sets: u64,
    halo_bytes: u64,
    error_sum: f64,
}

/// Aggregate statistics of one parallel iteration.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IterationStats {
    /// Bytes copied into ghost layers.
    pub halo_bytes: u64,
    /// Interior nodes written by their owners.
    pub updates: u64,
    /// Coupled systems solved, counting redundant solves.
    pub coupled_solves: u64,
    /// `sum |u - exact|` after the iteration, when an exact field was supplied.
    pub error_sum: Option<f64>,
}

struct SetSolver<'a> {
    st: &'a Stencil,
    relax: &'a RelaxationSet,
    layout: &'a Layout,
    dir: SweepDirection,
    owner: &'a SubBox,
    owned_writes: u64,
    sets: u64,
}

impl CoupledHandler for SetSolver<'_> {
    fn handle(&mut self, u: &mut [f64], p: Point, mask: u8) -> Result<()> {
        let shape = self.st.shape;
        let layout = self.layout;
        let set = SmallSet::new(shape, p, self.dir, mask);
        let n = set.n;
        let mut matrix = [0.0; 64];
        let mut x = [0.0; 8];
        let mut omegas = [0.0; 8];
        {
            let buf: &[f64] = u;
            let value = |y: [isize; 3]| -> f64 {
                if (0..MAX_DIM).all(|a| y[a] >= 0 && y[a] < shape[a] as isize) {
                    buf[layout.index_signed(y)]
                } else {
                    0.0
                }
            };
            fill_system(
                self.st,
                self.relax,
                &set.members[..n],
                &set.directions[..n],
                &value,
                &mut matrix[..n * n],
                &mut x[..n],
                &mut omegas[..n],
            )?;
        }
        solve_in_place(n, &mut matrix[..n * n], &mut x[..n])?;
        for (r, m) in set.members[..n].iter().enumerate() {
            u[layout.index(*m)] = x[r];
            if self.owner.contains(*m) {
                self.owned_writes += 1;
            }
        }
        self.sets += 1;
        Ok(())
    }
}

/// Sub-domain buffers with width-two ghost layers and the shared snapshot
/// they are refreshed from.
#[derive(Debug)]
pub struct HaloField {
    shape: Point,
    boxes: Vec<BoxState>,
    snapshot: Vec<f64>,
    pool: Option<rayon::ThreadPool>,
}

impl HaloField {
    /// Distributes `u0` over the boxes of `decomp`, to be processed by
    /// `workers` threads (1 runs everything on the calling thread).
    pub fn new(stencil: &Stencil, decomp: &Decomposition, u0: &Field, workers: usize) -> Result<Self> {
        if u0.len() != stencil.len() || decomp.shape() != stencil.shape {
            return Err(MfsorError::ShapeMismatch { expected: stencil.len(), found: u0.len() });
        }
        let boxes = decomp.boxes().iter().map(|b| BoxState::new(decomp, b, u0.as_slice())).collect();
        let pool = if workers > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .build()
                    .map_err(|e| MfsorError::Config(format!("cannot start {workers} workers: {e}")))?,
            )
        } else {
            None
        };
        Ok(Self { shape: stencil.shape, boxes, snapshot: u0.as_slice().to_vec(), pool })
    }

    /// Current iterate assembled from the owned parts of every box.
    pub fn gather(&self) -> Field {
        let mut out = vec![0.0; self.shape.iter().product()];
        for b in &self.boxes {
            copy_out(&b.buf, &b.layout, self.shape, b.sub.lo, b.sub.hi, &mut out);
        }
        Field::from_vec(self.shape, out).expect("gathered field matches its shape")
    }

    /// Value a box currently holds for global point `p` (owned or ghost).
    pub fn ghost_value(&self, box_id: usize, p: Point) -> Option<f64> {
        let b = &self.boxes[box_id];
        let s = [p[0] as isize, p[1] as isize, p[2] as isize];
        b.layout.contains_signed(s).then(|| b.buf[b.layout.index_signed(s)])
    }
}

/// Performs iteration `k` (0-based) of the parallel method in place.
///
/// When `exact` is given, the returned statistics carry `sum |u - exact|`
/// accumulated per box in flat order and combined in box order.
pub fn parallel_iteration(
    stencil: &Stencil,
    halo: &mut HaloField,
    decomp: &Decomposition,
    sched: &SweepSchedule,
    k: usize,
    relax: &RelaxationSet,
    exact: Option<&[f64]>,
) -> Result<IterationStats> {
    let snapshot = &halo.snapshot;
    let work = |b: &mut BoxState| -> Result<BoxStats> {
        let mut stats = BoxStats::default();
        for g in &b.ghosts {
            b.buf[g.buf..g.buf + g.len].copy_from_slice(&snapshot[g.flat..g.flat + g.len]);
            stats.halo_bytes += (g.len * std::mem::size_of::<f64>()) as u64;
        }
        let dir = sched.direction(b.sub.part, k);
        let faces = coupled_faces(decomp, &b.sub, dir);
        let mut solver =
            SetSolver { st: stencil, relax, layout: &b.layout, dir, owner: &b.sub, owned_writes: 0, sets: 0 };
        let relaxed =
            sweep_box_dyn(&mut b.buf, &b.layout, stencil, b.sub.lo, b.sub.hi, dir, relax.get(dir), faces, &mut solver)?;
        stats.updates = relaxed as u64 + solver.owned_writes;
        stats.sets = solver.sets;
        if let Some(e) = exact {
            stats.error_sum = l1_sum_box(&b.buf, &b.layout, stencil.shape, b.sub.lo, b.sub.hi, e);
        }
        Ok(stats)
    };
    let results: Vec<Result<BoxStats>> = match &halo.pool {
        Some(pool) => pool.install(|| halo.boxes.par_iter_mut().map(work).collect()),
        None => halo.boxes.iter_mut().map(work).collect(),
    };
    let mut total = IterationStats { error_sum: exact.map(|_| 0.0), ..Default::default() };
    for r in results {
        let s = r?;
        total.halo_bytes += s.halo_bytes;
        total.updates += s.updates;
        total.coupled_solves += s.sets;
        if let Some(e) = total.error_sum.as_mut() {
            *e += s.error_sum;
        }
    }
    for b in &halo.boxes {
        for seg in &b.band {
            halo.snapshot[seg.flat..seg.flat + seg.len].copy_from_slice(&b.buf[seg.buf..seg.buf + seg.len]);
        }
    }
    Ok(total)
}

/// Iterates the parallel method over its sweep cycle until `stop` is met.
///
/// Each iteration counts once; the report records per-iteration ghost bytes
/// and owned update counts.
#[allow(clippy::too_many_arguments)]
pub fn solve_parallel(
    stencil: &Stencil,
    u0: &Field,
    label: &str,
    decomp: &Decomposition,
    relax: &RelaxationSet,
    stop: &StopRule,
    max_iters: usize,
    workers: usize,
) -> Result<SolveReport> {
    if relax.dim() != stencil.dim || decomp.dim() != stencil.dim {
        return Err(MfsorError::InvalidDecomposition(format!(
            "stencil, decomposition and relaxation set dimensions differ ({}, {}, {})",
            stencil.dim,
            decomp.dim(),
            relax.dim()
        )));
    }
    let sched = SweepSchedule::new(stencil.dim);
    let mut halo = HaloField::new(stencil, decomp, u0, workers)?;
    let (exact, divisor) = match stop {
        StopRule::ErrorL1 { exact, divisor, .. } => {
            if exact.len() != stencil.len() {
                return Err(MfsorError::ShapeMismatch { expected: stencil.len(), found: exact.len() });
            }
            (Some(exact.as_slice()), *divisor)
        }
        StopRule::ResidualL1 { .. } => (None, 1.0),
    };
    let measure = |halo: &HaloField, sum: Option<f64>| -> Result<f64> {
        match sum {
            Some(s) => Ok(s / divisor),
            None => residual_norm(stencil, &halo.gather()),
        }
    };
    let threshold = stop.threshold();
    let start = Instant::now();
    let initial = exact.map(|e| crate::discretization::l1_sum(u0.as_slice(), e));
    let mut err = measure(&halo, initial)?;
    let mut converged = err < threshold;
    let mut errors = Vec::new();
    let mut halo_bytes = Vec::new();
    let mut updates = Vec::new();
    let mut k = 0;
    while !converged && k < max_iters {
        let stats = parallel_iteration(stencil, &mut halo, decomp, &sched, k, relax, exact)?;
        k += 1;
        err = measure(&halo, stats.error_sum)?;
        errors.push(err);
        halo_bytes.push(stats.halo_bytes);
        updates.push(stats.updates);
        converged = err < threshold;
        if !err.is_finite() {
            break;
        }
    }
    let seconds = start.elapsed().as_secs_f64();
    Ok(SolveReport {
        label: label.to_string(),
        iterations: k,
        errors,
        final_error: err,
        seconds,
        converged,
        halo_bytes,
        updates,
        solution: halo.gather().into_vec(),
    })
}
