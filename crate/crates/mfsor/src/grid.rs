// SPDX-License-Identifier: MIT

//! Tensor-product structured grids, their Cartesian decomposition into
//! sub-domain boxes, sweep directions, the per-iteration sweep schedule and
//! frontal (wavefront) node orderings.
//!
//! Index conventions used throughout the crate:
//! * points are `[usize; 3]` interior indices `(i, j, k)`; axes beyond the
//!   grid dimension have extent 1 and index 0;
//! * the flat interior offset of `(i, j, k)` is `i + j * m_x + k * m_x * m_y`;
//! * axis 0 runs West to East, axis 1 South to North, axis 2 Back to Front.

use crate::error::{MfsorError, Result};

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 3;

/// Interior index triple `(i, j, k)`.
pub type Point = [usize; 3];

/// Tensor-product grid given by strictly increasing node coordinates per axis.
///
/// Coordinates include both boundary nodes, so an axis with `n` nodes has
/// `n - 2` interior (unknown) nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredGrid {
    dim: usize,
    coords: Vec<Vec<f64>>,
}

impl StructuredGrid {
    /// Builds a grid from explicit per-axis coordinates.
    pub fn new(coords: Vec<Vec<f64>>) -> Result<Self> {
        let dim = coords.len();
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(MfsorError::InvalidGrid(format!("dimension {dim} not in 1..=3")));
        }
        for (axis, c) in coords.iter().enumerate() {
            if c.len() < 3 {
                return Err(MfsorError::InvalidGrid(format!(
                    "axis {axis} has {} nodes, at least 3 are required",
                    c.len()
                )));
            }
            if c.iter().any(|x| !x.is_finite()) {
                return Err(MfsorError::InvalidGrid(format!("axis {axis} has a non-finite coordinate")));
            }
            if let Some(w) = c.windows(2).position(|w| w[1] <= w[0]) {
                return Err(MfsorError::InvalidGrid(format!(
                    "axis {axis} coordinates not strictly increasing at node {}",
                    w + 1
                )));
            }
        }
        Ok(Self { dim, coords })
    }

    /// Spatial dimension (1, 2 or 3).
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Node coordinates of `axis`, boundary nodes included.
    pub fn coords(&self, axis: usize) -> &[f64] {
        &self.coords[axis]
    }

    /// Total node count of `axis`, boundary nodes included.
    pub fn nodes(&self, axis: usize) -> usize {
        self.coords[axis].len()
    }

    /// Spacings `dx_i = x_{i+1} - x_i` of `axis`.
    pub fn spacings(&self, axis: usize) -> Vec<f64> {
        self.coords[axis].windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Interior node counts, padded with 1 beyond the grid dimension.
    pub fn interior_shape(&self) -> Point {
        let mut s = [1; 3];
        for (a, slot) in s.iter_mut().enumerate().take(self.dim) {
            *slot = self.coords[a].len() - 2;
        }
        s
    }

    /// Number of interior nodes.
    pub fn interior_count(&self) -> usize {
        self.interior_shape().iter().product()
    }

    /// Total number of nodes including the boundary layer.
    pub fn total_count(&self) -> usize {
        self.coords.iter().map(Vec::len).product()
    }

    /// Physical coordinates of the interior node `p`, padded with 0.
    pub fn position(&self, p: Point) -> [f64; 3] {
        let mut x = [0.0; 3];
        for (a, slot) in x.iter_mut().enumerate().take(self.dim) {
            *slot = self.coords[a][p[a] + 1];
        }
        x
    }
}

/// Builds an equispaced grid on `[0, extent]` per axis with the requested total
/// node counts.
pub fn build_uniform_grid(dim: usize, nodes_per_axis: &[usize], extents: &[f64]) -> Result<StructuredGrid> {
    if !(1..=MAX_DIM).contains(&dim) {
        return Err(MfsorError::InvalidGrid(format!("dimension {dim} not in 1..=3")));
    }
    if nodes_per_axis.len() != dim || extents.len() != dim {
        return Err(MfsorError::InvalidGrid(format!(
            "expected {dim} node counts and extents, got {} and {}",
            nodes_per_axis.len(),
            extents.len()
        )));
    }
    let mut coords = Vec::with_capacity(dim);
    for a in 0..dim {
        let n = nodes_per_axis[a];
        let l = extents[a];
        if n < 3 {
            return Err(MfsorError::InvalidGrid(format!("axis {a} requests {n} nodes, at least 3 are required")));
        }
        if !(l > 0.0 && l.is_finite()) {
            return Err(MfsorError::InvalidGrid(format!("axis {a} extent {l} must be positive")));
        }
        let h = l / (n - 1) as f64;
        let mut c: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
        c[n - 1] = l;
        coords.push(c);
    }
    StructuredGrid::new(coords)
}

/// Flat interior offset of `p` in a field of interior shape `shape`.
#[inline]
pub fn flat_index(shape: Point, p: Point) -> usize {
    p[0] + shape[0] * (p[1] + shape[1] * p[2])
}

/// Inverse of [`flat_index`].
#[inline]
pub fn unflatten(shape: Point, q: usize) -> Point {
    [q % shape[0], (q / shape[0]) % shape[1], q / (shape[0] * shape[1])]
}

/// One sub-domain: a half-open box of interior indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubBox {
    /// Row-wise id counted from the bottom-left box, `qx + px * (qy + py * qz)`.
    pub id: usize,
    /// Per-axis part index `(qx, qy, qz)`.
    pub part: Point,
    /// Inclusive lower interior index per axis.
    pub lo: Point,
    /// Exclusive upper interior index per axis.
    pub hi: Point,
}

impl SubBox {
    /// Node count along `axis`.
    pub fn len(&self, axis: usize) -> usize {
        self.hi[axis] - self.lo[axis]
    }

    /// Number of nodes in the box.
    pub fn volume(&self) -> usize {
        (0..MAX_DIM).map(|a| self.len(a)).product()
    }

    /// Whether `p` lies inside the box.
    pub fn contains(&self, p: Point) -> bool {
        (0..MAX_DIM).all(|a| self.lo[a] <= p[a] && p[a] < self.hi[a])
    }
}

/// Neighbouring box reference: `offset` is the part-index difference per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Neighbor {
    /// Id of the neighbouring box.
    pub id: usize,
    /// Part-index offset per axis, each in `{-1, 0, 1}`.
    pub offset: [i8; 3],
    /// Number of non-zero offsets: 1 face, 2 edge, 3 corner neighbour.
    pub degree: u8,
}

/// Cartesian split of the interior nodes into balanced boxes.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    dim: usize,
    shape: Point,
    parts: Point,
    cuts: [Vec<usize>; 3],
    owner: [Vec<usize>; 3],
    boxes: Vec<SubBox>,
    neighbors: Vec<Vec<Neighbor>>,
}

/// Splits the interior of `grid` into `parts_per_axis` boxes per axis.
///
/// Extents differ by at most one node per axis and the earlier boxes along an
/// axis receive the extra nodes when the count does not divide evenly.
pub fn decompose(grid: &StructuredGrid, parts_per_axis: &[usize]) -> Result<Decomposition> {
    Decomposition::new(grid.dim(), grid.interior_shape(), parts_per_axis)
}

impl Decomposition {
    /// Builds a decomposition directly from an interior shape.
    pub fn new(dim: usize, shape: Point, parts_per_axis: &[usize]) -> Result<Self> {
        if parts_per_axis.len() != dim {
            return Err(MfsorError::InvalidDecomposition(format!(
                "expected {dim} part counts, got {}",
                parts_per_axis.len()
            )));
        }
        let mut parts = [1; 3];
        let mut cuts: [Vec<usize>; 3] = Default::default();
        let mut owner: [Vec<usize>; 3] = Default::default();
        for a in 0..MAX_DIM {
            let p = if a < dim { parts_per_axis[a] } else { 1 };
            let n = shape[a];
            if p == 0 || p > n {
                return Err(MfsorError::InvalidDecomposition(format!(
                    "axis {a}: {p} parts requested for {n} interior nodes"
                )));
            }
            parts[a] = p;
            let (q, r) = (n / p, n % p);
            let mut c = vec![0];
            for b in 0..p {
                let len = if b < r { q + 1 } else { q };
                c.push(c[b] + len);
            }
            let mut o = vec![0; n];
            for b in 0..p {
                o[c[b]..c[b + 1]].fill(b);
            }
            cuts[a] = c;
            owner[a] = o;
        }
        let mut boxes = Vec::with_capacity(parts.iter().product());
        for qz in 0..parts[2] {
            for qy in 0..parts[1] {
                for qx in 0..parts[0] {
                    let part = [qx, qy, qz];
                    let id = qx + parts[0] * (qy + parts[1] * qz);
                    let lo = [cuts[0][qx], cuts[1][qy], cuts[2][qz]];
                    let hi = [cuts[0][qx + 1], cuts[1][qy + 1], cuts[2][qz + 1]];
                    boxes.push(SubBox { id, part, lo, hi });
                }
            }
        }
        let neighbors = boxes
            .iter()
            .map(|b| {
                let mut list = Vec::new();
                for dz in -1i64..=1 {
                    for dy in -1i64..=1 {
                        for dx in -1i64..=1 {
                            let off = [dx, dy, dz];
                            if off == [0, 0, 0] {
                                continue;
                            }
                            let mut q = [0usize; 3];
                            let mut ok = true;
                            for a in 0..MAX_DIM {
                                let v = b.part[a] as i64 + off[a];
                                if v < 0 || v >= parts[a] as i64 {
                                    ok = false;
                                    break;
                                }
                                q[a] = v as usize;
                            }
                            if ok {
                                list.push(Neighbor {
                                    id: q[0] + parts[0] * (q[1] + parts[1] * q[2]),
                                    offset: [dx as i8, dy as i8, dz as i8],
                                    degree: off.iter().filter(|&&o| o != 0).count() as u8,
                                });
                            }
                        }
                    }
                }
                list
            })
            .collect();
        Ok(Self { dim, shape, parts, cuts, owner, boxes, neighbors })
    }

    /// Spatial dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Interior shape covered by the decomposition.
    pub fn shape(&self) -> Point {
        self.shape
    }

    /// Part counts per axis (1 beyond the dimension).
    pub fn parts(&self) -> Point {
        self.parts
    }

    /// Cut indices of `axis`: box `b` spans `cuts[b]..cuts[b + 1]`.
    pub fn cuts(&self, axis: usize) -> &[usize] {
        &self.cuts[axis]
    }

    /// All boxes ordered by id.
    pub fn boxes(&self) -> &[SubBox] {
        &self.boxes
    }

    /// Neighbours of box `id` (face, edge and corner neighbours).
    pub fn neighbors(&self, id: usize) -> &[Neighbor] {
        &self.neighbors[id]
    }

    /// Part index along `axis` of interior index `i`.
    #[inline]
    pub fn part_of(&self, axis: usize, i: usize) -> usize {
        self.owner[axis][i]
    }

    /// Id of the box containing `p`.
    pub fn box_of(&self, p: Point) -> usize {
        let q = [self.part_of(0, p[0]), self.part_of(1, p[1]), self.part_of(2, p[2])];
        q[0] + self.parts[0] * (q[1] + self.parts[1] * q[2])
    }

    /// Smallest box extent over all split axes (axes with more than one part).
    pub fn min_split_extent(&self) -> Option<usize> {
        (0..MAX_DIM)
            .filter(|&a| self.parts[a] > 1)
            .flat_map(|a| self.cuts[a].windows(2).map(|w| w[1] - w[0]).collect::<Vec<_>>())
            .min()
    }
}

/// A frontal sweep direction: one orientation per axis.
///
/// `+1` means the sweep starts at the low end of the axis (West, South, Back)
/// and marches upwards; `-1` starts at the high end. Directions are named by
/// their starting corner, so `NE` starts at the north-east corner and marches
/// towards the south-west.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SweepDirection {
    dim: usize,
    signs: [i8; 3],
}

impl SweepDirection {
    /// Builds a direction from per-axis signs; entries beyond `dim` are ignored.
    pub fn new(dim: usize, signs: [i8; 3]) -> Self {
        let mut s = [1i8; 3];
        for a in 0..dim {
            s[a] = if signs[a] < 0 { -1 } else { 1 };
        }
        Self { dim, signs: s }
    }

    /// Direction with every axis ascending.
    pub fn ascending(dim: usize) -> Self {
        Self::new(dim, [1, 1, 1])
    }

    /// Direction with every axis descending.
    pub fn descending(dim: usize) -> Self {
        Self::new(dim, [-1, -1, -1])
    }

    /// Dimension the direction belongs to.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Orientation of `axis` (`+1` ascending, `-1` descending; `+1` beyond the dimension).
    #[inline]
    pub fn sign(&self, axis: usize) -> i8 {
        self.signs[axis]
    }

    /// All per-axis signs.
    pub fn signs(&self) -> [i8; 3] {
        self.signs
    }

    /// Dense index in `0..2^dim`: bit `a` is set when axis `a` descends.
    pub fn index(&self) -> usize {
        (0..self.dim).filter(|&a| self.signs[a] < 0).map(|a| 1 << a).sum()
    }

    /// Inverse of [`SweepDirection::index`].
    pub fn from_index(dim: usize, index: usize) -> Self {
        let mut s = [1i8; 3];
        for (a, slot) in s.iter_mut().enumerate().take(dim) {
            if index & (1 << a) != 0 {
                *slot = -1;
            }
        }
        Self { dim, signs: s }
    }

    /// All `2^dim` directions in index order.
    pub fn all(dim: usize) -> Vec<Self> {
        (0..1usize << dim).map(|i| Self::from_index(dim, i)).collect()
    }

    /// Full reversal of every axis.
    pub fn reversed(&self) -> Self {
        let mut s = self.signs;
        for v in s.iter_mut().take(self.dim) {
            *v = -*v;
        }
        Self { dim: self.dim, signs: s }
    }

    /// Direction with `axis` reversed.
    pub fn flipped(&self, axis: usize) -> Self {
        let mut s = self.signs;
        if axis < self.dim {
            s[axis] = -s[axis];
        }
        Self { dim: self.dim, signs: s }
    }

    /// Conventional name: `LR`/`RL` in 1D, the starting corner (`SW`, `NE`,
    /// ...) in 2D and the starting octant (`BSW`, `FNE`, ...) in 3D.
    pub fn name(&self) -> String {
        let x = if self.signs[0] > 0 { 'W' } else { 'E' };
        match self.dim {
            1 => if self.signs[0] > 0 { "LR" } else { "RL" }.to_string(),
            2 => {
                let y = if self.signs[1] > 0 { 'S' } else { 'N' };
                format!("{y}{x}")
            }
            _ => {
                let y = if self.signs[1] > 0 { 'S' } else { 'N' };
                let z = if self.signs[2] > 0 { 'B' } else { 'F' };
                format!("{z}{y}{x}")
            }
        }
    }

    /// Parses a name produced by [`SweepDirection::name`].
    pub fn parse(dim: usize, name: &str) -> Option<Self> {
        Self::all(dim).into_iter().find(|d| d.name().eq_ignore_ascii_case(name))
    }

    /// Local sweep coordinate of index `i` on `axis` within `[lo, hi)`: the
    /// distance from the starting face.
    #[inline]
    pub fn sweep_coord(&self, axis: usize, i: usize, lo: usize, hi: usize) -> usize {
        if self.signs[axis] > 0 {
            i - lo
        } else {
            hi - 1 - i
        }
    }
}

/// Per-iteration assignment of sweep directions to sub-domains.
///
/// The cycle has `2^dim` iterations grouped in pairs: the second member of a
/// pair is the full reversal of the first, and successive pairs visit every
/// diagonal. Box `(qx, qy, qz)` takes the cycle's base direction with axis
/// `a` reversed whenever `q_a` is odd, so axis-adjacent boxes always sweep in
/// opposite senses along the axis they share.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSchedule {
    dim: usize,
    base: Vec<SweepDirection>,
}

/// Builds the schedule of a decomposition.
pub fn schedule(decomp: &Decomposition, dim: usize) -> SweepSchedule {
    debug_assert_eq!(decomp.dim(), dim);
    SweepSchedule::new(dim)
}

impl SweepSchedule {
    /// Schedule for dimension `dim`.
    ///
    /// In 1D the first box sweeps left to right at the first iteration. In 2D
    /// and 3D the first box starts from its high corner (`NE`, `FNE`) and the
    /// pairs then change diagonal by reversing axis 0, then axis 1, then both.
    pub fn new(dim: usize) -> Self {
        let mut base = Vec::with_capacity(1 << dim);
        if dim == 1 {
            let lr = SweepDirection::ascending(1);
            base.push(lr);
            base.push(lr.reversed());
        } else {
            for pair in 0..1usize << (dim - 1) {
                let mut d = SweepDirection::descending(dim);
                for a in 0..dim - 1 {
                    if pair & (1 << a) != 0 {
                        d = d.flipped(a);
                    }
                }
                base.push(d);
                base.push(d.reversed());
            }
        }
        Self { dim, base }
    }

    /// Cycle length `2^dim`.
    pub fn cycle_len(&self) -> usize {
        self.base.len()
    }

    /// Dimension of the schedule.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Direction of the box with part index `part` at iteration `k` (0-based).
    pub fn direction(&self, part: Point, k: usize) -> SweepDirection {
        let mut d = self.base[k % self.base.len()];
        for (a, &q) in part.iter().enumerate().take(self.dim) {
            if q % 2 == 1 {
                d = d.flipped(a);
            }
        }
        d
    }

    /// Direction of the first box at iteration `k`.
    pub fn base_direction(&self, k: usize) -> SweepDirection {
        self.base[k % self.base.len()]
    }
}

/// Frontal (wavefront) ordering of the box `[lo, hi)` for `direction`.
///
/// Nodes are grouped by anti-diagonal wavefronts counted from the starting
/// corner. Within a wavefront the order is ascending in axis 0, then axis 1,
/// then axis 2.
pub fn frontal_order(lo: Point, hi: Point, direction: SweepDirection) -> Vec<Point> {
    let mut nodes: Vec<(usize, Point)> = Vec::with_capacity((0..3).map(|a| hi[a] - lo[a]).product());
    for k in lo[2]..hi[2] {
        for j in lo[1]..hi[1] {
            for i in lo[0]..hi[0] {
                let p = [i, j, k];
                let level: usize = (0..MAX_DIM).map(|a| direction.sweep_coord(a, p[a], lo[a], hi[a])).sum();
                nodes.push((level, p));
            }
        }
    }
    nodes.sort_by_key(|&(level, p)| (level, p[0], p[1], p[2]));
    nodes.into_iter().map(|(_, p)| p).collect()
}

/// Natural row-wise ordering of `[lo, hi)` for `direction`: nested loops with
/// axis 0 innermost, each axis traversed in its sweep sense.
pub fn natural_order(lo: Point, hi: Point, direction: SweepDirection) -> Vec<Point> {
    let range = |a: usize| -> Vec<usize> {
        if direction.sign(a) > 0 {
            (lo[a]..hi[a]).collect()
        } else {
            (lo[a]..hi[a]).rev().collect()
        }
    };
    let (xs, ys, zs) = (range(0), range(1), range(2));
    let mut out = Vec::with_capacity(xs.len() * ys.len() * zs.len());
    for &k in &zs {
        for &j in &ys {
            for &i in &xs {
                out.push([i, j, k]);
            }
        }
    }
    out
}

/// Symmetric row-wise (boustrophedon) ordering starting at the corner named by
/// `direction`.
///
/// Rows along axis 0 alternate their sense after every row, counting rows
/// across planes continuously; in 3D the rows of successive planes also
/// alternate along axis 1, so the path is a single continuous snake.
pub fn snake_order(lo: Point, hi: Point, direction: SweepDirection) -> Vec<Point> {
    let n = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
    let mut out = Vec::with_capacity(n[0] * n[1] * n[2]);
    let pick = |a: usize, t: usize, ascending: bool| if ascending { lo[a] + t } else { hi[a] - 1 - t };
    let mut line = 0usize;
    for tz in 0..n[2] {
        let k = pick(2, tz, direction.sign(2) > 0);
        let y_up = (direction.sign(1) > 0) == (tz % 2 == 0);
        for ty in 0..n[1] {
            let j = pick(1, ty, y_up);
            let x_up = (direction.sign(0) > 0) == (line % 2 == 0);
            for tx in 0..n[0] {
                out.push([pick(0, tx, x_up), j, k]);
            }
            line += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_grid_three_nodes() {
        let g = build_uniform_grid(1, &[3], &[1.0]).unwrap();
        assert_eq!(g.coords(0), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn uniform_grid_spacing() {
        let g = build_uniform_grid(1, &[41], &[1.0]).unwrap();
        for h in g.spacings(0) {
            assert!((h - 1.0 / 40.0).abs() < 1e-15);
        }
        assert_eq!(g.nodes(0), 41);
    }

    #[test]
    fn uniform_grid_interior_shape() {
        let g = build_uniform_grid(2, &[51, 51], &[1.0, 1.0]).unwrap();
        assert_eq!(g.interior_shape(), [49, 49, 1]);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(build_uniform_grid(1, &[2], &[1.0]).is_err());
        assert!(build_uniform_grid(1, &[5], &[0.0]).is_err());
        assert!(build_uniform_grid(4, &[5; 4], &[1.0; 4]).is_err());
        assert!(StructuredGrid::new(vec![vec![0.0, 0.5, 0.5, 1.0]]).is_err());
    }

    #[test]
    fn decompose_uneven_1d() {
        let d = Decomposition::new(1, [39, 1, 1], &[2]).unwrap();
        let lens: Vec<usize> = d.boxes().iter().map(|b| b.len(0)).collect();
        assert_eq!(lens, vec![20, 19]);
    }

    #[test]
    fn decompose_fourteen_parts() {
        let d = Decomposition::new(1, [39, 1, 1], &[14]).unwrap();
        let lens: Vec<usize> = d.boxes().iter().map(|b| b.len(0)).collect();
        let mut expected = vec![3; 11];
        expected.extend([2, 2, 2]);
        assert_eq!(lens, expected);
    }

    #[test]
    fn decompose_six_by_six_two_by_two() {
        let d = Decomposition::new(2, [6, 6, 1], &[2, 2]).unwrap();
        assert_eq!(d.boxes().len(), 4);
        for b in d.boxes() {
            assert_eq!((b.len(0), b.len(1)), (3, 3));
        }
        assert_eq!(d.boxes()[1].lo, [3, 0, 0]);
        assert_eq!(d.boxes()[2].lo, [0, 3, 0]);
        assert_eq!(d.neighbors(0).len(), 3);
    }

    #[test]
    fn decompose_rejects_too_many_parts() {
        assert!(Decomposition::new(1, [3, 1, 1], &[4]).is_err());
        assert!(Decomposition::new(2, [3, 3, 1], &[0, 1]).is_err());
    }

    #[test]
    fn neighbor_counts_bounded() {
        let d = Decomposition::new(3, [9, 9, 9], &[3, 3, 3]).unwrap();
        assert_eq!(d.neighbors(13).len(), 26);
        let d2 = Decomposition::new(2, [9, 9, 1], &[3, 3]).unwrap();
        assert_eq!(d2.neighbors(4).len(), 8);
    }

    #[test]
    fn direction_names_and_indices() {
        let names: Vec<String> = SweepDirection::all(2).iter().map(|d| d.name()).collect();
        assert_eq!(names, vec!["SW", "SE", "NW", "NE"]);
        assert_eq!(SweepDirection::all(3).len(), 8);
        assert_eq!(SweepDirection::all(1)[1].name(), "RL");
        assert_eq!(SweepDirection::ascending(3).name(), "BSW");
        assert_eq!(SweepDirection::descending(3).name(), "FNE");
        for d in SweepDirection::all(3) {
            assert_eq!(SweepDirection::parse(3, &d.name()), Some(d));
        }
    }

    #[test]
    fn schedule_two_by_two_example() {
        let d = Decomposition::new(2, [6, 6, 1], &[2, 2]).unwrap();
        let s = schedule(&d, 2);
        let at = |k| d.boxes().iter().map(|b| s.direction(b.part, k).name()).collect::<Vec<_>>();
        assert_eq!(at(0), vec!["NE", "NW", "SE", "SW"]);
        assert_eq!(at(1), vec!["SW", "SE", "NW", "NE"]);
    }

    #[test]
    fn schedule_single_domain_cycle() {
        let s = SweepSchedule::new(2);
        let names: Vec<String> = (0..4).map(|k| s.direction([0, 0, 0], k).name()).collect();
        assert_eq!(names, vec!["NE", "SW", "NW", "SE"]);
        let s1 = SweepSchedule::new(1);
        assert_eq!(s1.direction([0, 0, 0], 0).name(), "LR");
        assert_eq!(s1.direction([1, 0, 0], 0).name(), "RL");
    }

    #[test]
    fn frontal_order_three_by_three() {
        let o = frontal_order([0, 0, 0], [3, 3, 1], SweepDirection::ascending(2));
        let expected: Vec<Point> =
            vec![[0, 0, 0], [0, 1, 0], [1, 0, 0], [0, 2, 0], [1, 1, 0], [2, 0, 0], [1, 2, 0], [2, 1, 0], [2, 2, 0]];
        assert_eq!(o, expected);
    }

    #[test]
    fn snake_order_two_dimensional() {
        let o = snake_order([0, 0, 0], [3, 2, 1], SweepDirection::ascending(2));
        assert_eq!(o, vec![[0, 0, 0], [1, 0, 0], [2, 0, 0], [2, 1, 0], [1, 1, 0], [0, 1, 0]]);
        let r = snake_order([0, 0, 0], [3, 3, 1], SweepDirection::descending(2));
        assert_eq!(r[0], [2, 2, 0]);
        assert_eq!(r[3], [0, 1, 0]);
    }
}
