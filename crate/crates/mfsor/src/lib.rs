// SPDX-License-Identifier: MIT

//! Parallel multi-frontal SOR and Gauss-Seidel relaxation on structured grids.
//!
//! Modules:
//! * [`grid`]: tensor-product grids, box decompositions, sweep directions and schedules;
//! * [`discretization`]: finite-difference stencils, fields and error norms;
//! * [`solvers_seq`]: sequential directional SOR/Gauss-Seidel baselines;
//! * [`solvers_par`]: the parallel engine with halo exchange and coupled interface solves;
//! * [`analysis`]: explicit matrices, sweep splittings, iteration matrices and ILU(0);
//! * [`harness`]: model problem, table reproduction, relaxation-factor search and timing studies.

pub mod analysis;
pub mod discretization;
pub mod error;
pub mod grid;
pub mod harness;
mod kernel;
pub mod solvers_par;
pub mod solvers_seq;

pub use error::{MfsorError, Result};
