// SPDX-License-Identifier: MIT

//! Finite-difference stencils for `-div(alpha grad u) + beta u = f` with
//! Dirichlet boundaries on tensor-product grids, plus nodal fields and error
//! norms.
//!
//! Coefficients follow the variable-spacing three-point formula per axis with
//! harmonic averaging of the diffusivity at mid-points. Dirichlet values are
//! folded into the right-hand side, so the stencil only couples interior
//! nodes.

use std::fmt;
use std::sync::Arc;

use crate::error::{MfsorError, Result};
use crate::grid::{flat_index, unflatten, Point, StructuredGrid};

/// Scalar function of a position (padded to three coordinates).
pub type ScalarFn = Arc<dyn Fn([f64; 3]) -> f64 + Send + Sync>;

/// Per-axis diffusivity: `alpha(axis, position)`.
pub type AxisFn = Arc<dyn Fn(usize, [f64; 3]) -> f64 + Send + Sync>;

/// Continuous problem data.
#[derive(Clone)]
pub struct ProblemSpec {
    /// Spatial dimension.
    pub dim: usize,
    /// Diffusivity per axis, must be positive at every node.
    pub alpha: AxisFn,
    /// Reaction coefficient, must be non-negative.
    pub beta: f64,
    /// Source term.
    pub source: ScalarFn,
    /// Dirichlet boundary values.
    pub boundary: ScalarFn,
    /// Exact solution, when known, for error measurement.
    pub exact: Option<ScalarFn>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("dim", &self.dim)
            .field("beta", &self.beta)
            .field("has_exact", &self.exact.is_some())
            .finish()
    }
}

impl ProblemSpec {
    /// Laplace problem (`alpha = 1`, `beta = 0`, `f = 0`) with the given
    /// boundary values, which are also used as the exact solution.
    pub fn laplace(dim: usize, boundary: ScalarFn) -> Self {
        Self {
            dim,
            alpha: Arc::new(|_, _| 1.0),
            beta: 0.0,
            source: Arc::new(|_| 0.0),
            exact: Some(boundary.clone()),
            boundary,
        }
    }

    /// Nodal values of the exact solution on the interior of `grid`.
    pub fn exact_field(&self, grid: &StructuredGrid) -> Option<Field> {
        let exact = self.exact.as_ref()?;
        let shape = grid.interior_shape();
        let data = (0..grid.interior_count()).map(|q| exact(grid.position(unflatten(shape, q)))).collect();
        Some(Field { shape, data })
    }
}

/// Nodal values over the interior nodes, stored flat as
/// `i + j * m_x + k * m_x * m_y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    shape: Point,
    data: Vec<f64>,
}

impl Field {
    /// Zero field of the given interior shape.
    pub fn zeros(shape: Point) -> Self {
        Self { shape, data: vec![0.0; shape.iter().product()] }
    }

    /// Wraps existing values; fails when the length does not match the shape.
    pub fn from_vec(shape: Point, data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if data.len() != n {
            return Err(MfsorError::ShapeMismatch { expected: n, found: data.len() });
        }
        Ok(Self { shape, data })
    }

    /// Interior shape.
    pub fn shape(&self) -> Point {
        self.shape
    }

    /// Flat values.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Mutable flat values.
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Consumes the field and returns the flat values.
    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Value at `p`.
    pub fn get(&self, p: Point) -> f64 {
        self.data[flat_index(self.shape, p)]
    }

    /// Sets the value at `p`.
    pub fn set(&mut self, p: Point, v: f64) {
        let q = flat_index(self.shape, p);
        self.data[q] = v;
    }

    /// Number of interior nodes.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    /// Whether the field has no nodes.
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Assembled five/seven/three-point stencil over the interior nodes.
///
/// `minus[a][q]` and `plus[a][q]` are the coefficients of the neighbours of
/// node `q` on the low and high side of axis `a` (`c_i`/`a_i` in 1D,
/// `a^W`/`a^E`, `a^S`/`a^N`, back/front in higher dimensions). Links that
/// reach a boundary node keep their coefficient, whose contribution is
/// already folded into `rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    /// Spatial dimension.
    pub dim: usize,
    /// Interior shape.
    pub shape: Point,
    /// Centre coefficient per node (`b_i`, `a^P`).
    pub center: Vec<f64>,
    /// Low-side neighbour coefficients per axis (empty beyond the dimension).
    pub minus: [Vec<f64>; 3],
    /// High-side neighbour coefficients per axis (empty beyond the dimension).
    pub plus: [Vec<f64>; 3],
    /// Right-hand side with Dirichlet contributions folded in.
    pub rhs: Vec<f64>,
    /// Reaction coefficient.
    pub beta: f64,
}

/// Harmonic mean `2 a b / (a + b)` used for mid-point diffusivities.
pub fn harmonic_midpoint(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

/// Assembles the stencil of `problem` on `grid`.
pub fn assemble(problem: &ProblemSpec, grid: &StructuredGrid) -> Result<Stencil> {
    let dim = grid.dim();
    if problem.dim != dim {
        return Err(MfsorError::InvalidProblem(format!(
            "problem dimension {} does not match grid dimension {dim}",
            problem.dim
        )));
    }
    if !(problem.beta >= 0.0 && problem.beta.is_finite()) {
        return Err(MfsorError::InvalidProblem(format!("beta = {} must be non-negative", problem.beta)));
    }
    let shape = grid.interior_shape();
    let n = grid.interior_count();
    let mut center = vec![0.0; n];
    let mut minus: [Vec<f64>; 3] = Default::default();
    let mut plus: [Vec<f64>; 3] = Default::default();
    for a in 0..dim {
        minus[a] = vec![0.0; n];
        plus[a] = vec![0.0; n];
    }
    let mut rhs = vec![0.0; n];
    let node_position = |g: [usize; 3]| -> [f64; 3] {
        let mut x = [0.0; 3];
        for (a, slot) in x.iter_mut().enumerate().take(dim) {
            *slot = grid.coords(a)[g[a]];
        }
        x
    };
    let alpha_at = |axis: usize, g: [usize; 3]| -> Result<f64> {
        let v = (problem.alpha)(axis, node_position(g));
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(MfsorError::InvalidProblem(format!("alpha = {v} on axis {axis} at node {g:?}")))
        }
    };
    for q in 0..n {
        let p = unflatten(shape, q);
        let mut g = [0usize; 3];
        for a in 0..dim {
            g[a] = p[a] + 1;
        }
        let x = node_position(g);
        let mut acc = 0.0;
        let mut b = (problem.source)(x);
        for a in 0..dim {
            let c = grid.coords(a);
            let i = g[a];
            let d_lo = c[i] - c[i - 1];
            let d_hi = c[i + 1] - c[i];
            let alpha_here = alpha_at(a, g)?;
            let mut g_lo = g;
            g_lo[a] -= 1;
            let mut g_hi = g;
            g_hi[a] += 1;
            let alpha_lo = harmonic_midpoint(alpha_here, alpha_at(a, g_lo)?);
            let alpha_hi = harmonic_midpoint(alpha_here, alpha_at(a, g_hi)?);
            let cm = 2.0 * alpha_lo / (d_lo * (d_hi + d_lo));
            let cp = 2.0 * alpha_hi / (d_hi * (d_hi + d_lo));
            minus[a][q] = cm;
            plus[a][q] = cp;
            acc += cm;
            acc += cp;
            if p[a] == 0 {
                b += cm * (problem.boundary)(node_position(g_lo));
            }
            if p[a] + 1 == shape[a] {
                b += cp * (problem.boundary)(node_position(g_hi));
            }
        }
        center[q] = acc + problem.beta;
        rhs[q] = b;
    }
    Ok(Stencil { dim, shape, center, minus, plus, rhs, beta: problem.beta })
}

impl Stencil {
    /// Number of interior nodes.
    pub fn len(&self) -> usize {
        self.center.len()
    }

    /// Whether the stencil has no nodes.
    pub fn is_empty(&self) -> bool {
        self.center.is_empty()
    }

    /// Flat index of the neighbour of `q` on `side` (`-1` or `+1`) of `axis`,
    /// or `None` when that neighbour is a boundary node.
    #[inline]
    pub fn neighbor(&self, q: usize, axis: usize, side: i8) -> Option<usize> {
        let p = unflatten(self.shape, q);
        if side < 0 {
            if p[axis] == 0 {
                return None;
            }
        } else if p[axis] + 1 == self.shape[axis] {
            return None;
        }
        let stride = match axis {
            0 => 1,
            1 => self.shape[0],
            _ => self.shape[0] * self.shape[1],
        };
        Some(if side < 0 { q - stride } else { q + stride })
    }

    /// Coefficient of the link from `q` to its neighbour on `side` of `axis`.
    #[inline]
    pub fn coefficient(&self, q: usize, axis: usize, side: i8) -> f64 {
        if side < 0 {
            self.minus[axis][q]
        } else {
            self.plus[axis][q]
        }
    }

    /// `(A u)_q` for interior-only coupling (boundary values live in `rhs`).
    pub fn apply_at(&self, u: &[f64], q: usize) -> f64 {
        let mut s = self.center[q] * u[q];
        for a in 0..self.dim {
            for side in [-1i8, 1] {
                if let Some(r) = self.neighbor(q, a, side) {
                    s -= self.coefficient(q, a, side) * u[r];
                }
            }
        }
        s
    }

    /// Largest violation of `center = sum(neighbours) + beta` over all nodes.
    pub fn row_sum_defect(&self) -> f64 {
        (0..self.len())
            .map(|q| {
                let s: f64 = (0..self.dim).map(|a| self.minus[a][q] + self.plus[a][q]).sum();
                (self.center[q] - s - self.beta).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Whether every interior-interior link has a positive coefficient.
    pub fn links_positive(&self) -> bool {
        (0..self.len()).all(|q| {
            (0..self.dim)
                .all(|a| [-1i8, 1].iter().all(|&s| self.neighbor(q, a, s).is_none() || self.coefficient(q, a, s) > 0.0))
        })
    }
}

/// Mean absolute difference `sum |u - exact| / n` over the interior nodes.
pub fn l1_error(u: &Field, exact: &Field) -> Result<f64> {
    if u.len() != exact.len() {
        return Err(MfsorError::ShapeMismatch { expected: exact.len(), found: u.len() });
    }
    if u.is_empty() {
        return Ok(0.0);
    }
    Ok(l1_sum(u.as_slice(), exact.as_slice()) / u.len() as f64)
}

/// Sum of absolute differences, accumulated in index order.
#[inline]
pub fn l1_sum(u: &[f64], exact: &[f64]) -> f64 {
    let mut s = 0.0;
    for (a, b) in u.iter().zip(exact) {
        s += (a - b).abs();
    }
    s
}

/// L1 norm of the residual `f - A u`, computed by applying the stencil.
pub fn residual_norm(stencil: &Stencil, u: &Field) -> Result<f64> {
    if u.len() != stencil.len() {
        return Err(MfsorError::ShapeMismatch { expected: stencil.len(), found: u.len() });
    }
    let v = u.as_slice();
    Ok((0..stencil.len()).map(|q| (stencil.rhs[q] - stencil.apply_at(v, q)).abs()).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_uniform_grid;

    fn laplace(dim: usize) -> ProblemSpec {
        ProblemSpec::laplace(dim, Arc::new(|x: [f64; 3]| x[0] * x[1].max(0.0)))
    }

    #[test]
    fn uniform_1d_coefficients() {
        let g = build_uniform_grid(1, &[11], &[1.0]).unwrap();
        let s = assemble(&ProblemSpec::laplace(1, Arc::new(|x| x[0])), &g).unwrap();
        let h2 = 0.1f64 * 0.1;
        for q in 0..s.len() {
            assert!((s.plus[0][q] - 1.0 / h2).abs() < 1e-9);
            assert!((s.minus[0][q] - 1.0 / h2).abs() < 1e-9);
            assert!((s.center[q] - 2.0 / h2).abs() < 1e-9);
        }
    }

    #[test]
    fn harmonic_midpoint_value() {
        assert!((harmonic_midpoint(2.0, 4.0) - 8.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn uniform_2d_coefficients() {
        let g = build_uniform_grid(2, &[6, 6], &[1.0, 1.0]).unwrap();
        let s = assemble(&laplace(2), &g).unwrap();
        let inv_h2 = 25.0;
        for q in 0..s.len() {
            for a in 0..2 {
                assert!((s.plus[a][q] - inv_h2).abs() < 1e-9);
                assert!((s.minus[a][q] - inv_h2).abs() < 1e-9);
            }
            assert!((s.center[q] - 4.0 * inv_h2).abs() < 1e-9);
        }
        assert!(s.row_sum_defect() < 1e-12);
        assert!(s.links_positive());
    }

    #[test]
    fn rejects_bad_coefficients() {
        let g = build_uniform_grid(1, &[5], &[1.0]).unwrap();
        let mut p = ProblemSpec::laplace(1, Arc::new(|x| x[0]));
        p.beta = -1.0;
        assert!(assemble(&p, &g).is_err());
        let mut p = ProblemSpec::laplace(1, Arc::new(|x| x[0]));
        p.alpha = Arc::new(|_, _| 0.0);
        assert!(assemble(&p, &g).is_err());
    }

    #[test]
    fn l1_error_examples() {
        let e = Field::from_vec([2, 1, 1], vec![1.0, 3.0]).unwrap();
        let u = Field::zeros([2, 1, 1]);
        assert_eq!(l1_error(&u, &e).unwrap(), 2.0);
        assert_eq!(l1_error(&e, &e).unwrap(), 0.0);
        assert!(l1_error(&Field::zeros([3, 1, 1]), &e).is_err());
    }

    #[test]
    fn zero_problem_zero_residual() {
        let g = build_uniform_grid(2, &[5, 5], &[1.0, 1.0]).unwrap();
        let s = assemble(&ProblemSpec::laplace(2, Arc::new(|_| 0.0)), &g).unwrap();
        assert_eq!(residual_norm(&s, &Field::zeros(g.interior_shape())).unwrap(), 0.0);
    }
}
