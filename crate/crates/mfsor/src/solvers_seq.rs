// SPDX-License-Identifier: MIT

//! Sequential relaxation solvers: directional SOR and Gauss-Seidel sweeps with
//! natural row-wise, symmetric row-wise (boustrophedon) and frontal orderings
//! in one, two and three dimensions.

use std::time::Instant;

use crate::discretization::{residual_norm, Field, Stencil};
use crate::error::{MfsorError, Result};
use crate::grid::{flat_index, frontal_order, natural_order, snake_order, SweepDirection, SweepSchedule};
use crate::kernel::{copy_in, copy_out, l1_sum_box, sweep_box_dyn, update_node_dyn, Layout, NoCoupling};

/// One relaxation factor per sweep direction, indexed by
/// [`SweepDirection::index`]: `[L, R]` in 1D, `[SW, SE, NW, NE]` in 2D and
/// `[BSW, BSE, BNW, BNE, FSW, FSE, FNW, FNE]` in 3D.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationSet {
    dim: usize,
    values: Vec<f64>,
}

impl RelaxationSet {
    /// The same factor for every direction.
    pub fn uniform(dim: usize, omega: f64) -> Result<Self> {
        Self::from_values(dim, &[omega])
    }

    /// Builds a set from one shared factor or one factor per direction.
    pub fn from_values(dim: usize, values: &[f64]) -> Result<Self> {
        let n = 1usize << dim;
        let values = match values.len() {
            1 => vec![values[0]; n],
            l if l == n => values.to_vec(),
            l => {
                return Err(MfsorError::InvalidRelaxation(format!(
                    "{l} factors given, expected 1 or {n} for dimension {dim}"
                )))
            }
        };
        if let Some(w) = values.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(MfsorError::InvalidRelaxation(format!("factor {w} must be positive and finite")));
        }
        Ok(Self { dim, values })
    }

    /// Factor used when sweeping in `dir`.
    #[inline]
    pub fn get(&self, dir: SweepDirection) -> f64 {
        self.values[dir.index()]
    }

    /// All factors in direction-index order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Dimension the set belongs to.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `prod |1 - w_i|` over all directions.
    pub fn product_bound(&self) -> f64 {
        self.values.iter().map(|w| (1.0 - w).abs()).product()
    }

    /// Whether every direction uses the same factor.
    pub fn is_uniform(&self) -> bool {
        self.values.iter().all(|&w| w == self.values[0])
    }
}

/// Node ordering of one sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ordering {
    /// Nested loops with axis 0 innermost.
    NaturalRowWise,
    /// Boustrophedon rows forming one continuous path.
    SymmetricRowWise,
    /// Anti-diagonal wavefronts from the starting corner.
    Frontal,
}

/// One directional pass of a sweep plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pass {
    /// Node ordering.
    pub ordering: Ordering,
    /// Starting corner; selects the relaxation factor.
    pub direction: SweepDirection,
}

/// Cyclic sequence of passes; each pass counts as one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    /// Passes applied in turn.
    pub passes: Vec<Pass>,
}

impl SweepPlan {
    /// Plan for a sequential method label.
    ///
    /// * `LRGS`/`LRSOR` and `RLGS`/`RLSOR`: 1D sweeps from the left or right end;
    /// * `RGS`/`RSOR`: natural row-wise sweeps from the low corner every pass;
    /// * `SGS`/`SSOR`/`SSOUR`: symmetric row-wise sweeps alternating between
    ///   the low corner and the high corner (in 1D: left to right, then right to left);
    /// * `FGS`/`FSOR`: frontal sweeps alternating between the high corner and
    ///   the low corner.
    pub fn from_label(dim: usize, label: &str) -> Result<Self> {
        let asc = SweepDirection::ascending(dim);
        let desc = SweepDirection::descending(dim);
        let pass = |ordering, direction| Pass { ordering, direction };
        let up = label.to_ascii_uppercase();
        let passes = match up.as_str() {
            "LRGS" | "LRSOR" if dim == 1 => vec![pass(Ordering::NaturalRowWise, asc)],
            "RLGS" | "RLSOR" if dim == 1 => vec![pass(Ordering::NaturalRowWise, desc)],
            "RGS" | "RSOR" => vec![pass(Ordering::NaturalRowWise, asc)],
            "SGS" | "SSOR" | "SSOUR" => {
                vec![pass(Ordering::SymmetricRowWise, asc), pass(Ordering::SymmetricRowWise, desc)]
            }
            "FGS" | "FSOR" => vec![pass(Ordering::Frontal, desc), pass(Ordering::Frontal, asc)],
            _ => return Err(MfsorError::Config(format!("unknown sequential method {label:?} for dimension {dim}"))),
        };
        Ok(Self { passes })
    }

    /// Frontal passes following the single-domain sweep schedule; this is the
    /// sequential counterpart of a parallel run with one sub-domain.
    pub fn schedule_cycle(dim: usize) -> Self {
        let s = SweepSchedule::new(dim);
        let passes =
            (0..s.cycle_len()).map(|k| Pass { ordering: Ordering::Frontal, direction: s.base_direction(k) }).collect();
        Self { passes }
    }
}

/// Stopping rule evaluated after every pass.
#[derive(Debug, Clone, PartialEq)]
pub enum StopRule {
    /// Stop when `sum |u - exact| / divisor < threshold`.
    ErrorL1 {
        /// Exact nodal values over the interior.
        exact: Vec<f64>,
        /// Normalisation of the error sum.
        divisor: f64,
        /// Stopping threshold.
        threshold: f64,
    },
    /// Stop when the L1 norm of the residual falls below `threshold`.
    ResidualL1 {
        /// Stopping threshold.
        threshold: f64,
    },
}

impl StopRule {
    /// Error stop with the plain interior mean as normalisation.
    pub fn mean_error(exact: &Field, threshold: f64) -> Self {
        Self::ErrorL1 { exact: exact.as_slice().to_vec(), divisor: exact.len() as f64, threshold }
    }

    /// Stopping threshold.
    pub fn threshold(&self) -> f64 {
        match self {
            Self::ErrorL1 { threshold, .. } | Self::ResidualL1 { threshold } => *threshold,
        }
    }
}

/// Outcome of an iterative solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// Method label.
    pub label: String,
    /// Number of passes performed.
    pub iterations: usize,
    /// Error (or residual) after each pass.
    pub errors: Vec<f64>,
    /// Error after the last pass (initial error when no pass ran).
    pub final_error: f64,
    /// Wall-clock seconds spent iterating.
    pub seconds: f64,
    /// Whether the stopping rule was met.
    pub converged: bool,
    /// Bytes copied into ghost layers per iteration (parallel solver only).
    pub halo_bytes: Vec<u64>,
    /// Interior nodes written per iteration (parallel solver only).
    pub updates: Vec<u64>,
    /// Final iterate over the interior nodes.
    pub solution: Vec<f64>,
}

/// Precomputed buffer/flat index pairs of an ordering.
fn index_pairs(st: &Stencil, layout: &Layout, pass: Pass) -> Vec<(usize, usize)> {
    let hi = st.shape;
    let nodes = match pass.ordering {
        Ordering::NaturalRowWise => natural_order([0; 3], hi, pass.direction),
        Ordering::SymmetricRowWise => snake_order([0; 3], hi, pass.direction),
        Ordering::Frontal => frontal_order([0; 3], hi, pass.direction),
    };
    nodes.into_iter().map(|p| (layout.index(p), flat_index(st.shape, p))).collect()
}

fn apply_pass(
    st: &Stencil,
    layout: &Layout,
    buf: &mut [f64],
    pass: Pass,
    pairs: Option<&[(usize, usize)]>,
    omega: f64,
) -> Result<()> {
    match pairs {
        None => {
            sweep_box_dyn(buf, layout, st, [0; 3], st.shape, pass.direction, omega, [None; 3], &mut NoCoupling)?;
        }
        Some(list) => {
            for &(p, q) in list {
                update_node_dyn(st.dim, buf, &layout.strides, st, p, q, omega);
            }
        }
    }
    Ok(())
}

fn check_shape(st: &Stencil, u: &Field) -> Result<()> {
    if u.len() != st.len() || u.shape() != st.shape {
        return Err(MfsorError::ShapeMismatch { expected: st.len(), found: u.len() });
    }
    Ok(())
}

/// Applies one pass of `ordering` from the corner `direction` with factor
/// `omega`, updating `u` in place.
pub fn sweep(
    stencil: &Stencil,
    u: &mut Field,
    ordering: Ordering,
    direction: SweepDirection,
    omega: f64,
) -> Result<()> {
    check_shape(stencil, u)?;
    if direction.dim() != stencil.dim {
        return Err(MfsorError::InvalidProblem(format!(
            "direction of dimension {} used on a {}-dimensional stencil",
            direction.dim(),
            stencil.dim
        )));
    }
    let layout = Layout::padded(stencil.dim, stencil.shape);
    let mut buf = vec![0.0; layout.size()];
    copy_in(&mut buf, &layout, stencil.shape, [0; 3], stencil.shape, u.as_slice());
    let pass = Pass { ordering, direction };
    let pairs = (ordering != Ordering::NaturalRowWise).then(|| index_pairs(stencil, &layout, pass));
    apply_pass(stencil, &layout, &mut buf, pass, pairs.as_deref(), omega)?;
    copy_out(&buf, &layout, stencil.shape, [0; 3], stencil.shape, u.as_mut_slice());
    Ok(())
}

fn require_dim(stencil: &Stencil, dim: usize) -> Result<()> {
    if stencil.dim != dim {
        return Err(MfsorError::InvalidProblem(format!("expected a {dim}-dimensional stencil, got {}", stencil.dim)));
    }
    Ok(())
}

/// One 1D pass: `LR` uses the freshly updated left neighbour, `RL` the right one.
pub fn sweep_1d(stencil: &Stencil, u: &mut Field, direction: SweepDirection, omega: f64) -> Result<()> {
    require_dim(stencil, 1)?;
    sweep(stencil, u, Ordering::NaturalRowWise, direction, omega)
}

/// One 2D pass with the given ordering and starting corner.
pub fn sweep_2d(
    stencil: &Stencil,
    u: &mut Field,
    ordering: Ordering,
    corner: SweepDirection,
    omega: f64,
) -> Result<()> {
    require_dim(stencil, 2)?;
    sweep(stencil, u, ordering, corner, omega)
}

/// One 3D pass with the given ordering and starting octant.
pub fn sweep_3d(
    stencil: &Stencil,
    u: &mut Field,
    ordering: Ordering,
    corner: SweepDirection,
    omega: f64,
) -> Result<()> {
    require_dim(stencil, 3)?;
    sweep(stencil, u, ordering, corner, omega)
}

/// Evaluates the stopping quantity for the interior of a padded buffer.
pub(crate) fn stop_value(st: &Stencil, layout: &Layout, buf: &[f64], stop: &StopRule) -> Result<f64> {
    match stop {
        StopRule::ErrorL1 { exact, divisor, .. } => {
            if exact.len() != st.len() {
                return Err(MfsorError::ShapeMismatch { expected: st.len(), found: exact.len() });
            }
            Ok(l1_sum_box(buf, layout, st.shape, [0; 3], st.shape, exact) / divisor)
        }
        StopRule::ResidualL1 { .. } => {
            let mut out = vec![0.0; st.len()];
            copy_out(buf, layout, st.shape, [0; 3], st.shape, &mut out);
            residual_norm(st, &Field::from_vec(st.shape, out)?)
        }
    }
}

/// Runs `plan` from `u0` until `stop` is met or `max_iters` passes were made.
///
/// Non-convergence is reported through [`SolveReport::converged`], not as an error.
pub fn solve_sequential(
    stencil: &Stencil,
    u0: &Field,
    label: &str,
    plan: &SweepPlan,
    relax: &RelaxationSet,
    stop: &StopRule,
    max_iters: usize,
) -> Result<SolveReport> {
    check_shape(stencil, u0)?;
    if relax.dim() != stencil.dim {
        return Err(MfsorError::InvalidRelaxation(format!(
            "relaxation set of dimension {} used on a {}-dimensional stencil",
            relax.dim(),
            stencil.dim
        )));
    }
    if plan.passes.is_empty() {
        return Err(MfsorError::Config("sweep plan has no passes".into()));
    }
    let layout = Layout::padded(stencil.dim, stencil.shape);
    let mut buf = vec![0.0; layout.size()];
    copy_in(&mut buf, &layout, stencil.shape, [0; 3], stencil.shape, u0.as_slice());
    let pairs: Vec<Option<Vec<(usize, usize)>>> = plan
        .passes
        .iter()
        .map(|&p| (p.ordering != Ordering::NaturalRowWise).then(|| index_pairs(stencil, &layout, p)))
        .collect();
    let threshold = stop.threshold();
    let start = Instant::now();
    let mut errors = Vec::new();
    let mut err = stop_value(stencil, &layout, &buf, stop)?;
    let mut converged = err < threshold;
    let mut iterations = 0;
    while !converged && iterations < max_iters {
        let slot = iterations % plan.passes.len();
        let pass = plan.passes[slot];
        apply_pass(stencil, &layout, &mut buf, pass, pairs[slot].as_deref(), relax.get(pass.direction))?;
        iterations += 1;
        err = stop_value(stencil, &layout, &buf, stop)?;
        errors.push(err);
        converged = err < threshold;
        if !err.is_finite() {
            break;
        }
    }
    let seconds = start.elapsed().as_secs_f64();
    let mut solution = vec![0.0; stencil.len()];
    copy_out(&buf, &layout, stencil.shape, [0; 3], stencil.shape, &mut solution);
    Ok(SolveReport {
        label: label.to_string(),
        iterations,
        errors,
        final_error: err,
        seconds,
        converged,
        halo_bytes: Vec::new(),
        updates: Vec::new(),
        solution,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relaxation_set_shapes() {
        assert_eq!(RelaxationSet::uniform(2, 1.5).unwrap().values(), &[1.5; 4]);
        assert!(RelaxationSet::from_values(2, &[1.0, 1.0]).is_err());
        assert!(RelaxationSet::from_values(1, &[0.0]).is_err());
        let r = RelaxationSet::from_values(1, &[0.5, 1.5]).unwrap();
        assert_eq!(r.get(SweepDirection::descending(1)), 1.5);
        assert!((r.product_bound() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn plan_labels() {
        assert!(SweepPlan::from_label(2, "LRGS").is_err());
        assert_eq!(SweepPlan::from_label(2, "fgs").unwrap().passes.len(), 2);
        assert_eq!(SweepPlan::schedule_cycle(3).passes.len(), 8);
    }
}
