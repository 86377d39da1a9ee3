// SPDX-License-Identifier: MIT

//! Point-relaxation kernel shared by the sequential and parallel solvers.
//!
//! Values live in padded buffers that cover a rectangular window of global
//! interior indices, possibly extending past the domain. Cells outside the
//! domain hold zero because Dirichlet data is already folded into the
//! stencil's right-hand side. Both solver families go through
//! [`update_node`], so a single-domain parallel run performs bit-for-bit the
//! same arithmetic as a sequential sweep.

use crate::discretization::Stencil;
use crate::error::Result;
use crate::grid::{Point, SweepDirection, MAX_DIM};

/// Window of global interior indices covered by a padded buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Layout {
    /// Global index of the first buffer cell per axis (may be negative).
    pub blo: [isize; 3],
    /// Buffer extent per axis.
    pub ext: [usize; 3],
    /// Buffer strides per axis.
    pub strides: [usize; 3],
}

impl Layout {
    /// Window `[blo, blo + ext)`.
    pub fn new(blo: [isize; 3], ext: [usize; 3]) -> Self {
        Self { blo, ext, strides: [1, ext[0], ext[0] * ext[1]] }
    }

    /// Window covering the whole interior of `shape` plus one boundary layer
    /// on every active axis.
    pub fn padded(dim: usize, shape: Point) -> Self {
        let mut blo = [0isize; 3];
        let mut ext = [1usize; 3];
        for a in 0..dim {
            blo[a] = -1;
            ext[a] = shape[a] + 2;
        }
        Self::new(blo, ext)
    }

    /// Number of cells.
    pub fn size(&self) -> usize {
        self.ext.iter().product()
    }

    /// Buffer offset of the global point `p` (given with signed components).
    #[inline]
    pub fn index_signed(&self, p: [isize; 3]) -> usize {
        let mut o = 0;
        for a in 0..MAX_DIM {
            debug_assert!(p[a] >= self.blo[a] && p[a] < self.blo[a] + self.ext[a] as isize);
            o += (p[a] - self.blo[a]) as usize * self.strides[a];
        }
        o
    }

    /// Buffer offset of the global interior point `p`.
    #[inline]
    pub fn index(&self, p: Point) -> usize {
        self.index_signed([p[0] as isize, p[1] as isize, p[2] as isize])
    }

    /// Whether the signed global point lies in the window.
    #[inline]
    pub fn contains_signed(&self, p: [isize; 3]) -> bool {
        (0..MAX_DIM).all(|a| p[a] >= self.blo[a] && p[a] < self.blo[a] + self.ext[a] as isize)
    }
}

/// Relaxes node `q` stored at buffer offset `p` in place:
/// `u <- (1 - w) u + w (f + sum c_nb u_nb) / a_P`, neighbours accumulated
/// axis by axis, low side before high side.
#[inline(always)]
pub(crate) fn update_node<const D: usize>(
    u: &mut [f64],
    strides: &[usize; 3],
    st: &Stencil,
    p: usize,
    q: usize,
    omega: f64,
) {
    let mut acc = st.rhs[q];
    acc += st.minus[0][q] * u[p - 1];
    acc += st.plus[0][q] * u[p + 1];
    if D >= 2 {
        let s = strides[1];
        acc += st.minus[1][q] * u[p - s];
        acc += st.plus[1][q] * u[p + s];
    }
    if D >= 3 {
        let s = strides[2];
        acc += st.minus[2][q] * u[p - s];
        acc += st.plus[2][q] * u[p + s];
    }
    u[p] = (1.0 - omega) * u[p] + omega * (acc / st.center[q]);
}

/// Dispatches [`update_node`] on the runtime dimension.
#[inline]
pub(crate) fn update_node_dyn(
    dim: usize,
    u: &mut [f64],
    strides: &[usize; 3],
    st: &Stencil,
    p: usize,
    q: usize,
    omega: f64,
) {
    match dim {
        1 => update_node::<1>(u, strides, st, p, q, omega),
        2 => update_node::<2>(u, strides, st, p, q, omega),
        _ => update_node::<3>(u, strides, st, p, q, omega),
    }
}

/// Callback for nodes that belong to a coupled set.
pub(crate) trait CoupledHandler {
    /// Handles node `p` whose coupled axes are the set bits of `mask`.
    fn handle(&mut self, u: &mut [f64], p: Point, mask: u8) -> Result<()>;
}

/// Handler for sweeps without coupled sets.
pub(crate) struct NoCoupling;

impl CoupledHandler for NoCoupling {
    fn handle(&mut self, _: &mut [f64], _: Point, _: u8) -> Result<()> {
        unreachable!("sweep without coupled faces reported a coupled node")
    }
}

/// Relaxes the box `[lo, hi)` with nested loops (axis 0 innermost), each
/// axis traversed in the sense of `dir`.
///
/// `coupled_face[a]` holds the index of the starting face on axis `a` when
/// that face borders another sub-domain; nodes on such faces are passed to
/// `handler` instead of being relaxed in place. Returns the number of nodes
/// relaxed in place.
#[allow(clippy::too_many_arguments)]
pub(crate) fn sweep_box<const D: usize, H: CoupledHandler>(
    u: &mut [f64],
    layout: &Layout,
    st: &Stencil,
    lo: Point,
    hi: Point,
    dir: SweepDirection,
    omega: f64,
    coupled_face: [Option<usize>; 3],
    handler: &mut H,
) -> Result<usize> {
    let shape = st.shape;
    let n = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
    let pick = |a: usize, t: usize| if dir.sign(a) > 0 { lo[a] + t } else { hi[a] - 1 - t };
    let strides = layout.strides;
    let mut relaxed = 0;
    let fx = coupled_face[0];
    for tz in 0..n[2] {
        let k = pick(2, tz);
        let mz = matches!(coupled_face[2], Some(f) if f == k) as u8;
        for ty in 0..n[1] {
            let j = pick(1, ty);
            let my = matches!(coupled_face[1], Some(f) if f == j) as u8;
            let row_mask = (my << 1) | (mz << 2);
            // Buffer and flat offsets of the row start `lo[0]`.
            let p0 = layout.index([lo[0], j, k]);
            let q0 = lo[0] + shape[0] * (j + shape[1] * k);
            if row_mask == 0 && fx.is_none() {
                if dir.sign(0) > 0 {
                    for t in 0..n[0] {
                        update_node::<D>(u, &strides, st, p0 + t, q0 + t, omega);
                    }
                } else {
                    for t in (0..n[0]).rev() {
                        update_node::<D>(u, &strides, st, p0 + t, q0 + t, omega);
                    }
                }
                relaxed += n[0];
                continue;
            }
            for tx in 0..n[0] {
                let i = pick(0, tx);
                let mask = row_mask | matches!(fx, Some(f) if f == i) as u8;
                if mask == 0 {
                    update_node::<D>(u, &strides, st, p0 + (i - lo[0]), q0 + (i - lo[0]), omega);
                    relaxed += 1;
                } else {
                    handler.handle(u, [i, j, k], mask)?;
                }
            }
        }
    }
    Ok(relaxed)
}

/// Dispatches [`sweep_box`] on the runtime dimension.
#[allow(clippy::too_many_arguments)]
pub(crate) fn sweep_box_dyn<H: CoupledHandler>(
    u: &mut [f64],
    layout: &Layout,
    st: &Stencil,
    lo: Point,
    hi: Point,
    dir: SweepDirection,
    omega: f64,
    coupled_face: [Option<usize>; 3],
    handler: &mut H,
) -> Result<usize> {
    match st.dim {
        1 => sweep_box::<1, H>(u, layout, st, lo, hi, dir, omega, coupled_face, handler),
        2 => sweep_box::<2, H>(u, layout, st, lo, hi, dir, omega, coupled_face, handler),
        _ => sweep_box::<3, H>(u, layout, st, lo, hi, dir, omega, coupled_face, handler),
    }
}

/// Sum of `|u - exact|` over the box `[lo, hi)` in flat interior order.
pub(crate) fn l1_sum_box(u: &[f64], layout: &Layout, shape: Point, lo: Point, hi: Point, exact: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in lo[2]..hi[2] {
        for j in lo[1]..hi[1] {
            let p0 = layout.index([lo[0], j, k]);
            let q0 = lo[0] + shape[0] * (j + shape[1] * k);
            for t in 0..hi[0] - lo[0] {
                s += (u[p0 + t] - exact[q0 + t]).abs();
            }
        }
    }
    s
}

/// Copies the box `[lo, hi)` from the padded buffer into flat interior storage.
pub(crate) fn copy_out(u: &[f64], layout: &Layout, shape: Point, lo: Point, hi: Point, out: &mut [f64]) {
    for k in lo[2]..hi[2] {
        for j in lo[1]..hi[1] {
            let p0 = layout.index([lo[0], j, k]);
            let q0 = lo[0] + shape[0] * (j + shape[1] * k);
            let w = hi[0] - lo[0];
            out[q0..q0 + w].copy_from_slice(&u[p0..p0 + w]);
        }
    }
}

/// Copies the box `[lo, hi)` from flat interior storage into the padded buffer.
pub(crate) fn copy_in(u: &mut [f64], layout: &Layout, shape: Point, lo: Point, hi: Point, src: &[f64]) {
    for k in lo[2]..hi[2] {
        for j in lo[1]..hi[1] {
            let p0 = layout.index([lo[0], j, k]);
            let q0 = lo[0] + shape[0] * (j + shape[1] * k);
            let w = hi[0] - lo[0];
            u[p0..p0 + w].copy_from_slice(&src[q0..q0 + w]);
        }
    }
}
