// SPDX-License-Identifier: MIT

//! Experiment driver: the Laplace model problem with product boundary data,
//! table reproduction with automatic comparison against reference counts,
//! relaxation-factor search, the cache-efficiency study and CSV/Markdown
//! emission.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;

use crate::discretization::{assemble, Field, ProblemSpec, Stencil};
use crate::error::{MfsorError, Result};
use crate::grid::{build_uniform_grid, Decomposition, StructuredGrid, SweepSchedule};
use crate::solvers_par::solve_parallel;
use crate::solvers_seq::{solve_sequential, Ordering, Pass, RelaxationSet, SolveReport, StopRule, SweepPlan};

/// Model problem instance: `sum_i d^2u/dx_i^2 = 0` on the unit cube with
/// `u = prod_i x_i` on the boundary.
#[derive(Debug, Clone)]
pub struct ModelProblem {
    /// Problem description.
    pub problem: ProblemSpec,
    /// Uniform grid (resolution counts boundary nodes).
    pub grid: StructuredGrid,
    /// Assembled stencil.
    pub stencil: Stencil,
    /// Exact nodal solution on the interior.
    pub exact: Field,
    /// Normalisation of the L1 error sum used by the stopping rule.
    pub divisor: f64,
}

/// Builds the model problem on a grid with `resolution[a]` nodes along axis
/// `a`, boundary nodes included.
///
/// The stopping error is `sum |u - exact| / (w * total nodes)` with
/// `w = 3` in two dimensions and `w = 1` otherwise.
pub fn model_problem(dim: usize, resolution: &[usize]) -> Result<ModelProblem> {
    let grid = build_uniform_grid(dim, resolution, &vec![1.0; dim])?;
    let problem = ProblemSpec::laplace(dim, Arc::new(move |x: [f64; 3]| x[..dim].iter().product()));
    let stencil = assemble(&problem, &grid)?;
    let exact = problem.exact_field(&grid).ok_or_else(|| MfsorError::InvalidProblem("no exact solution".into()))?;
    let w = if dim == 2 { 3.0 } else { 1.0 };
    let divisor = w * grid.total_count() as f64;
    Ok(ModelProblem { problem, grid, stencil, exact, divisor })
}

/// Method labels of the experiment tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// 1D Gauss-Seidel sweeping left to right.
    Lrgs,
    /// 1D Gauss-Seidel sweeping right to left.
    Rlgs,
    /// Symmetric Gauss-Seidel.
    Sgs,
    /// Row-wise Gauss-Seidel.
    Rgs,
    /// Frontal Gauss-Seidel.
    Fgs,
    /// 1D SOR sweeping left to right.
    Lrsor,
    /// 1D SOR sweeping right to left.
    Rlsor,
    /// Symmetric SOR.
    Ssor,
    /// Symmetric over/under-relaxation.
    Ssour,
    /// Row-wise SOR.
    Rsor,
    /// Frontal SOR.
    Fsor,
    /// Parallel Gauss-Seidel.
    Pgs,
    /// Parallel SOR.
    Psor,
    /// Parallel over/under-relaxation.
    Psour,
}

impl Method {
    /// Every label.
    pub const ALL: [Method; 14] = [
        Method::Lrgs,
        Method::Rlgs,
        Method::Sgs,
        Method::Rgs,
        Method::Fgs,
        Method::Lrsor,
        Method::Rlsor,
        Method::Ssor,
        Method::Ssour,
        Method::Rsor,
        Method::Fsor,
        Method::Pgs,
        Method::Psor,
        Method::Psour,
    ];

    /// Upper-case label.
    pub fn label(self) -> &'static str {
        match self {
            Method::Lrgs => "LRGS",
            Method::Rlgs => "RLGS",
            Method::Sgs => "SGS",
            Method::Rgs => "RGS",
            Method::Fgs => "FGS",
            Method::Lrsor => "LRSOR",
            Method::Rlsor => "RLSOR",
            Method::Ssor => "SSOR",
            Method::Ssour => "SSOUR",
            Method::Rsor => "RSOR",
            Method::Fsor => "FSOR",
            Method::Pgs => "PGS",
            Method::Psor => "PSOR",
            Method::Psour => "PSOUR",
        }
    }

    /// Whether the method runs on a decomposition.
    pub fn is_parallel(self) -> bool {
        matches!(self, Method::Pgs | Method::Psor | Method::Psour)
    }

    /// Whether the method fixes every relaxation factor to one.
    pub fn is_gauss_seidel(self) -> bool {
        matches!(self, Method::Lrgs | Method::Rlgs | Method::Sgs | Method::Rgs | Method::Fgs | Method::Pgs)
    }

    /// Whether the method exists in dimension `dim`.
    pub fn supports(self, dim: usize) -> bool {
        match self {
            Method::Lrgs | Method::Rlgs | Method::Lrsor | Method::Rlsor => dim == 1,
            _ => (1..=3).contains(&dim),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = MfsorError;

    fn from_str(s: &str) -> Result<Self> {
        let up = s.trim().to_ascii_uppercase();
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.label() == up)
            .ok_or_else(|| MfsorError::Config(format!("unknown method label {s:?}")))
    }
}

/// Parses `A[xBxC]` into per-axis integers, repeating a single value over
/// `dim` axes.
pub fn parse_axes(text: &str, dim: usize) -> Result<Vec<usize>> {
    let vals: Vec<usize> = text
        .trim()
        .split(['x', 'X', '*'])
        .map(|t| {
            t.trim().parse::<usize>().map_err(|e| MfsorError::Config(format!("bad integer {t:?} in {text:?}: {e}")))
        })
        .collect::<Result<_>>()?;
    match vals.len() {
        1 => Ok(vec![vals[0]; dim]),
        l if l == dim => Ok(vals),
        l => Err(MfsorError::Config(format!("{text:?} has {l} components, expected 1 or {dim}"))),
    }
}

/// Parses a `;`-separated list of relaxation factors.
pub fn parse_omegas(text: &str) -> Result<Vec<f64>> {
    text.split([';', ','])
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<f64>().map_err(|e| MfsorError::Config(format!("bad factor {t:?}: {e}"))))
        .collect()
}

fn join_axes(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join("x")
}

fn join_omegas(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(";")
}

/// One experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Spatial dimension.
    pub dimension: usize,
    /// Nodes per axis, boundary included.
    pub resolution: Vec<usize>,
    /// Method label.
    pub method: Method,
    /// Sub-domains per axis (all ones for sequential methods).
    pub topology: Vec<usize>,
    /// One shared factor or one per sweep direction.
    pub omega: Vec<f64>,
    /// Stopping threshold on the L1 error.
    pub threshold: f64,
    /// Iteration cap.
    pub max_iterations: usize,
    /// Worker threads for parallel methods.
    pub workers: usize,
    /// Timed repetitions (the median time is reported).
    pub repetitions: usize,
}

impl ExperimentConfig {
    /// Defaults: `omega = 1`, threshold `1e-3` (`1e-2` in 3D), one worker,
    /// one repetition, one sub-domain per axis.
    pub fn new(dimension: usize, resolution: &[usize], method: Method) -> Self {
        Self {
            dimension,
            resolution: resolution.to_vec(),
            method,
            topology: vec![1; dimension],
            omega: vec![1.0],
            threshold: if dimension == 3 { 1e-2 } else { 1e-3 },
            max_iterations: 100_000,
            workers: 1,
            repetitions: 1,
        }
    }

    /// Sets the topology.
    pub fn with_topology(mut self, topology: &[usize]) -> Self {
        self.topology = topology.to_vec();
        self
    }

    /// Sets the relaxation factors.
    pub fn with_omega(mut self, omega: &[f64]) -> Self {
        self.omega = omega.to_vec();
        self
    }

    /// Checks internal consistency.
    pub fn validate(&self) -> Result<()> {
        let d = self.dimension;
        if !(1..=3).contains(&d) {
            return Err(MfsorError::Config(format!("dimension {d} outside 1..=3")));
        }
        if !self.method.supports(d) {
            return Err(MfsorError::Config(format!("{} is not defined in {d}D", self.method)));
        }
        if self.resolution.len() != d || self.resolution.iter().any(|&r| r < 3) {
            return Err(MfsorError::Config(format!("resolution {:?} needs {d} values >= 3", self.resolution)));
        }
        if self.topology.len() != d || self.topology.contains(&0) {
            return Err(MfsorError::Config(format!("topology {:?} needs {d} positive values", self.topology)));
        }
        if !self.method.is_parallel() && self.topology.iter().any(|&p| p != 1) {
            return Err(MfsorError::Config(format!("{} is sequential; topology must be 1", self.method)));
        }
        if !(self.threshold > 0.0) {
            return Err(MfsorError::Config(format!("threshold {} must be positive", self.threshold)));
        }
        if self.workers == 0 || self.repetitions == 0 {
            return Err(MfsorError::Config("workers and repetitions must be at least 1".into()));
        }
        if self.method.is_gauss_seidel() && self.omega.iter().any(|&w| w != 1.0) {
            return Err(MfsorError::Config(format!("{} uses omega = 1", self.method)));
        }
        RelaxationSet::from_values(d, &self.omega)?;
        Ok(())
    }

    /// Row label such as `PGS(2x2)`.
    pub fn row_label(&self) -> String {
        if self.method.is_parallel() {
            let t = if self.dimension == 1 { self.topology[0].to_string() } else { join_axes(&self.topology) };
            format!("{}({t})", self.method)
        } else {
            self.method.to_string()
        }
    }

    /// Parses flat `key=value` text whose keys are the field names; blank
    /// lines and `#` comments are ignored. `dimension` and `method` are required.
    pub fn parse_key_value(text: &str) -> Result<Self> {
        let mut pairs: Vec<(String, String)> = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| MfsorError::Config(format!("line {}: expected key=value, got {line:?}", n + 1)))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        let get = |key: &str| pairs.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
        let dimension: usize = get("dimension")
            .ok_or_else(|| MfsorError::Config("missing key dimension".into()))?
            .parse()
            .map_err(|e| MfsorError::Config(format!("dimension: {e}")))?;
        let method: Method = get("method").ok_or_else(|| MfsorError::Config("missing key method".into()))?.parse()?;
        let resolution = parse_axes(get("resolution").unwrap_or("41"), dimension)?;
        let mut cfg = Self::new(dimension, &resolution, method);
        for (k, v) in &pairs {
            let num = |what: &str| MfsorError::Config(format!("{what}: cannot parse {v:?}"));
            match k.as_str() {
                "dimension" | "method" | "resolution" => {}
                "topology" => cfg.topology = parse_axes(v, dimension)?,
                "omega" => cfg.omega = parse_omegas(v)?,
                "threshold" => cfg.threshold = v.parse().map_err(|_| num(k))?,
                "max_iterations" => cfg.max_iterations = v.parse().map_err(|_| num(k))?,
                "workers" => cfg.workers = v.parse().map_err(|_| num(k))?,
                "repetitions" => cfg.repetitions = v.parse().map_err(|_| num(k))?,
                other => return Err(MfsorError::Config(format!("unknown key {other:?}"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Serialises to the `key=value` format.
    pub fn to_key_value(&self) -> String {
        format!(
            "dimension={}\nresolution={}\nmethod={}\ntopology={}\nomega={}\nthreshold={:e}\nmax_iterations={}\nworkers={}\nrepetitions={}\n",
            self.dimension,
            join_axes(&self.resolution),
            self.method,
            join_axes(&self.topology),
            join_omegas(&self.omega),
            self.threshold,
            self.max_iterations,
            self.workers,
            self.repetitions
        )
    }
}

/// Result row of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    /// Method label.
    pub method: String,
    /// Row label including the topology, e.g. `PSOR(4)`.
    pub label: String,
    /// Spatial dimension.
    pub dim: usize,
    /// Nodes per axis.
    pub resolution: Vec<usize>,
    /// Sub-domains per axis.
    pub topology: Vec<usize>,
    /// Relaxation factors used.
    pub omega_values: Vec<f64>,
    /// Iterations performed.
    pub iterations: usize,
    /// Final L1 error.
    pub l1_error: f64,
    /// Median wall seconds over the repetitions.
    pub seconds: f64,
    /// Whether the threshold was reached.
    pub converged: bool,
    /// Reference iteration count, when one exists.
    pub expected: Option<usize>,
}

impl TableRow {
    /// `iterations - expected`.
    pub fn diff(&self) -> Option<i64> {
        self.expected.map(|e| self.iterations as i64 - e as i64)
    }
}

/// Runs `config` sequentially or on its decomposition.
pub fn solve_config(config: &ExperimentConfig, model: &ModelProblem) -> Result<SolveReport> {
    config.validate()?;
    let relax = RelaxationSet::from_values(config.dimension, &config.omega)?;
    let stop = StopRule::ErrorL1 {
        exact: model.exact.as_slice().to_vec(),
        divisor: model.divisor,
        threshold: config.threshold,
    };
    let u0 = Field::zeros(model.grid.interior_shape());
    let label = config.row_label();
    if config.method.is_parallel() {
        let decomp = Decomposition::new(config.dimension, model.stencil.shape, &config.topology)?;
        solve_parallel(&model.stencil, &u0, &label, &decomp, &relax, &stop, config.max_iterations, config.workers)
    } else {
        let plan = SweepPlan::from_label(config.dimension, config.method.label())?;
        solve_sequential(&model.stencil, &u0, &label, &plan, &relax, &stop, config.max_iterations)
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Runs one experiment `repetitions` times and reports the median time.
/// Repeated runs must agree on the iteration count and error.
pub fn run_experiment(config: &ExperimentConfig) -> Result<(TableRow, SolveReport)> {
    config.validate()?;
    let model = model_problem(config.dimension, &config.resolution)?;
    let mut times = Vec::with_capacity(config.repetitions);
    let mut first: Option<SolveReport> = None;
    for _ in 0..config.repetitions {
        let r = solve_config(config, &model)?;
        times.push(r.seconds);
        match &first {
            None => first = Some(r),
            Some(f) if f.iterations != r.iterations || f.final_error.to_bits() != r.final_error.to_bits() => {
                return Err(MfsorError::Config(format!(
                    "{}: repeated runs disagree ({} vs {} iterations)",
                    config.row_label(),
                    f.iterations,
                    r.iterations
                )))
            }
            Some(_) => {}
        }
    }
    let report = first.expect("at least one repetition");
    let row = TableRow {
        method: config.method.to_string(),
        label: config.row_label(),
        dim: config.dimension,
        resolution: config.resolution.clone(),
        topology: config.topology.clone(),
        omega_values: config.omega.clone(),
        iterations: report.iterations,
        l1_error: report.final_error,
        seconds: median(times),
        converged: report.converged,
        expected: None,
    };
    Ok((row, report))
}

/// Experiment with an optional reference iteration count.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteEntry {
    /// Configuration.
    pub config: ExperimentConfig,
    /// Reference count from the published tables.
    pub expected: Option<usize>,
}

/// Runs every entry; a failing configuration aborts, non-convergence is
/// recorded in its row.
pub fn run_table(entries: &[SuiteEntry]) -> Result<Vec<TableRow>> {
    entries
        .iter()
        .map(|e| {
            let (mut row, _) = run_experiment(&e.config)?;
            row.expected = e.expected;
            Ok(row)
        })
        .collect()
}

/// CSV header.
pub const CSV_HEADER: [&str; 9] =
    ["method", "dim", "resolution", "topology", "omega_values", "iterations", "l1_error", "seconds", "converged"];

/// Writes rows with the header `method,dim,resolution,topology,omega_values,iterations,l1_error,seconds,converged`.
pub fn write_csv<W: Write>(rows: &[TableRow], w: W) -> Result<()> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    out.write_record(CSV_HEADER)?;
    for r in rows {
        out.write_record([
            r.method.clone(),
            r.dim.to_string(),
            join_axes(&r.resolution),
            join_axes(&r.topology),
            join_omegas(&r.omega_values),
            r.iterations.to_string(),
            format!("{:.6e}", r.l1_error),
            format!("{:.6}", r.seconds),
            r.converged.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Writes a Markdown table: one row per method with its iteration count,
/// L1 error and factors, plus the reference count and the difference.
pub fn write_markdown<W: Write>(title: &str, rows: &[TableRow], mut w: W) -> Result<()> {
    writeln!(w, "### {title}\n")?;
    writeln!(w, "| method | resolution | iteration | L1-error | omega | reference | diff |")?;
    writeln!(w, "|---|---|---:|---:|---|---:|---:|")?;
    for r in rows {
        let reference = r.expected.map_or("-".into(), |e| e.to_string());
        let diff = r.diff().map_or("-".into(), |d| format!("{d:+}"));
        let conv = if r.converged { "" } else { " (not converged)" };
        writeln!(
            w,
            "| {} | {} | {}{conv} | {:.5e} | {} | {reference} | {diff} |",
            r.label,
            join_axes(&r.resolution),
            r.iterations,
            r.l1_error,
            join_omegas(&r.omega_values)
        )?;
    }
    writeln!(w)?;
    Ok(())
}

/// Names of the built-in suites.
pub const SUITES: [&str; 11] = [
    "1d-gs",
    "1d-sor-41",
    "1d-sor-81",
    "1d-sor-161",
    "1d-ssour",
    "2d-gs",
    "2d-sor-1.25",
    "2d-sor-1.5",
    "3d-gs",
    "3d-sor-1.25",
    "3d-sor-1.5",
];

const P1D: [usize; 10] = [2, 4, 6, 8, 10, 14, 18, 24, 30, 36];

const GS1D: [(usize, [usize; 3], [Option<usize>; 10]); 3] = [
    (
        41,
        [979, 960, 976],
        [Some(975), Some(974), Some(974), Some(973), Some(973), Some(972), Some(970), None, None, None],
    ),
    (
        81,
        [3905, 3866, 3892],
        [
            Some(3891),
            Some(3890),
            Some(3890),
            Some(3890),
            Some(3889),
            Some(3888),
            Some(3887),
            Some(3885),
            Some(3884),
            Some(3882),
        ],
    ),
    (
        161,
        [15598, 15519, 15565],
        [
            Some(15563),
            Some(15561),
            Some(15559),
            Some(15557),
            Some(15555),
            Some(15551),
            Some(15547),
            Some(15541),
            Some(15535),
            Some(15529),
        ],
    ),
];

/// `(label, sub-domains, omega_L, omega_R, iterations)` rows of the 1D SOR tables.
type SorRow = (Method, usize, f64, f64, usize);

const SOR41: [SorRow; 10] = [
    (Method::Lrsor, 1, 1.86887, 0.0, 51),
    (Method::Rlsor, 1, 0.0, 1.86637, 31),
    (Method::Ssor, 1, 1.0, 1.87776, 62),
    (Method::Psor, 2, 1.84970, 1.92084, 31),
    (Method::Psor, 4, 1.0, 1.94890, 76),
    (Method::Psor, 6, 1.0, 1.94890, 78),
    (Method::Psor, 8, 1.0, 1.89379, 72),
    (Method::Psor, 10, 1.0, 1.88577, 71),
    (Method::Psor, 14, 1.0, 1.95591, 87),
    (Method::Psor, 18, 1.0, 1.90080, 71),
];

const SOR81: [SorRow; 13] = [
    (Method::Lrsor, 1, 1.93193, 0.0, 103),
    (Method::Rlsor, 1, 0.0, 1.93143, 61),
    (Method::Ssor, 1, 1.0, 1.93487, 120),
    (Method::Psor, 2, 1.90982, 1.95691, 80),
    (Method::Psor, 4, 1.0, 1.97194, 164),
    (Method::Psor, 6, 1.0, 1.96092, 129),
    (Method::Psor, 8, 1.0, 1.94589, 141),
    (Method::Psor, 10, 1.0, 1.94088, 140),
    (Method::Psor, 14, 1.0, 1.95992, 129),
    (Method::Psor, 18, 1.0, 1.95090, 138),
    (Method::Psor, 24, 1.0, 1.94790, 141),
    (Method::Psor, 30, 1.0, 1.97094, 180),
    (Method::Psor, 36, 1.0, 1.94389, 143),
];

const SOR161: [SorRow; 13] = [
    (Method::Lrsor, 1, 1.96593, 0.0, 208),
    (Method::Rlsor, 1, 0.0, 1.96493, 122),
    (Method::Ssor, 1, 1.19840, 1.96693, 236),
    (Method::Psor, 2, 1.0, 1.96593, 233),
    (Method::Psor, 4, 1.0, 1.98497, 342),
    (Method::Psor, 6, 1.0, 1.97996, 253),
    (Method::Psor, 8, 1.0, 1.97194, 279),
    (Method::Psor, 10, 1.0, 1.96994, 277),
    (Method::Psor, 14, 1.0, 1.96994, 280),
    (Method::Psor, 18, 1.0, 1.97495, 269),
    (Method::Psor, 24, 1.0, 1.97395, 277),
    (Method::Psor, 30, 1.0, 1.96894, 278),
    (Method::Psor, 36, 1.0, 1.97194, 281),
];

const SSOUR41: [SorRow; 10] = [
    (Method::Lrsor, 1, 1.86887, 0.0, 51),
    (Method::Rlsor, 1, 0.0, 1.86637, 31),
    (Method::Ssour, 1, 0.24825, 1.87087, 58),
    (Method::Psour, 2, 1.84785, 1.91892, 33),
    (Method::Psour, 4, 0.17317, 1.87588, 57),
    (Method::Psour, 6, 0.11712, 1.87387, 57),
    (Method::Psour, 8, 0.09910, 1.87087, 58),
    (Method::Psour, 10, 0.18118, 1.87287, 57),
    (Method::Psour, 14, 0.36837, 1.89590, 52),
    (Method::Psour, 18, 0.33233, 1.87988, 53),
];

/// `(label, topology, counts per resolution)` rows of the 2D and 3D tables.
type GridRow = (Method, &'static [usize], [usize; 3]);

const GS2D: [GridRow; 9] = [
    (Method::Rgs, &[1, 1], [1018, 4065, 9139]),
    (Method::Sgs, &[1, 1], [1006, 4038, 9097]),
    (Method::Fgs, &[1, 1], [1006, 4037, 9097]),
    (Method::Pgs, &[4, 1], [1020, 4066, 9140]),
    (Method::Pgs, &[2, 2], [1020, 4065, 9138]),
    (Method::Pgs, &[9, 1], [1038, 4103, 9195]),
    (Method::Pgs, &[3, 3], [1029, 4082, 9163]),
    (Method::Pgs, &[25, 1], [1088, 4219, 9371]),
    (Method::Pgs, &[5, 5], [1049, 4116, 9213]),
];

const SOR2D_125: [GridRow; 11] = [
    (Method::Rsor, &[1, 1], [616, 2450, 5501]),
    (Method::Ssor, &[1, 1], [606, 2425, 5461]),
    (Method::Fsor, &[1, 1], [605, 2424, 5460]),
    (Method::Psor, &[4, 1], [626, 2467, 5524]),
    (Method::Psor, &[2, 2], [626, 2465, 5521]),
    (Method::Psor, &[9, 1], [652, 2520, 5605]),
    (Method::Psor, &[3, 3], [637, 2487, 5556]),
    (Method::Psor, &[16, 1], [685, 2593, 5718]),
    (Method::Psor, &[4, 4], [648, 2512, 5590]),
    (Method::Psor, &[25, 1], [715, 2688, 5863]),
    (Method::Psor, &[5, 5], [662, 2535, 5624]),
];

const SOR2D_15: [GridRow; 11] = [
    (Method::Rsor, &[1, 1], [348, 1373, 3074]),
    (Method::Ssor, &[1, 1], [341, 1351, 3038]),
    (Method::Fsor, &[1, 1], [339, 1349, 3036]),
    (Method::Psor, &[4, 1], [369, 1415, 3133]),
    (Method::Psor, &[2, 2], [369, 1410, 3127]),
    (Method::Psor, &[9, 1], [407, 1498, 3259]),
    (Method::Psor, &[3, 3], [382, 1443, 3179]),
    (Method::Psor, &[16, 1], [453, 1606, 3432]),
    (Method::Psor, &[4, 4], [396, 1474, 3227]),
    (Method::Psor, &[25, 1], [477, 1736, 3645]),
    (Method::Psor, &[5, 5], [407, 1504, 3274]),
];

const GS3D: [GridRow; 11] = [
    (Method::Rgs, &[1, 1, 1], [110, 480, 1921]),
    (Method::Sgs, &[1, 1, 1], [104, 466, 1893]),
    (Method::Fgs, &[1, 1, 1], [104, 466, 1893]),
    (Method::Pgs, &[2, 2, 1], [105, 469, 1898]),
    (Method::Pgs, &[7, 1, 1], [107, 472, 1905]),
    (Method::Pgs, &[2, 2, 2], [106, 470, 1901]),
    (Method::Pgs, &[11, 1, 1], [108, 475, 1911]),
    (Method::Pgs, &[3, 2, 2], [107, 472, 1904]),
    (Method::Pgs, &[5, 3, 1], [108, 474, 1907]),
    (Method::Pgs, &[4, 2, 2], [108, 473, 1906]),
    (Method::Pgs, &[3, 3, 3], [109, 475, 1909]),
];

const SOR3D_125: [GridRow; 11] = [
    (Method::Rsor, &[1, 1, 1], [69, 293, 1164]),
    (Method::Ssor, &[1, 1, 1], [63, 281, 1137]),
    (Method::Fsor, &[1, 1, 1], [62, 280, 1136]),
    (Method::Psor, &[2, 2, 1], [65, 284, 1144]),
    (Method::Psor, &[7, 1, 1], [67, 289, 1154]),
    (Method::Psor, &[2, 2, 2], [66, 287, 1149]),
    (Method::Psor, &[11, 1, 1], [69, 293, 1164]),
    (Method::Psor, &[3, 2, 2], [67, 288, 1152]),
    (Method::Psor, &[5, 3, 1], [68, 291, 1157]),
    (Method::Psor, &[4, 2, 2], [68, 290, 1155]),
    (Method::Psor, &[3, 3, 3], [69, 292, 1159]),
];

const SOR3D_15: [GridRow; 11] = [
    (Method::Rsor, &[1, 1, 1], [41, 169, 659]),
    (Method::Ssor, &[1, 1, 1], [36, 157, 633]),
    (Method::Fsor, &[1, 1, 1], [35, 155, 631]),
    (Method::Psor, &[2, 2, 1], [38, 162, 644]),
    (Method::Psor, &[7, 1, 1], [41, 170, 659]),
    (Method::Psor, &[2, 2, 2], [40, 166, 651]),
    (Method::Psor, &[11, 1, 1], [44, 178, 675]),
    (Method::Psor, &[3, 2, 2], [41, 169, 655]),
    (Method::Psor, &[5, 3, 1], [42, 172, 662]),
    (Method::Psor, &[4, 2, 2], [42, 170, 660]),
    (Method::Psor, &[3, 3, 3], [43, 173, 664]),
];

fn sor_rows(res: usize, rows: &[SorRow]) -> Vec<SuiteEntry> {
    rows.iter()
        .map(|&(m, p, wl, wr, it)| {
            let omega = match m {
                Method::Lrsor => vec![wl],
                Method::Rlsor => vec![wr],
                _ => vec![wl, wr],
            };
            SuiteEntry {
                config: ExperimentConfig::new(1, &[res], m).with_topology(&[p]).with_omega(&omega),
                expected: Some(it),
            }
        })
        .collect()
}

fn grid_rows(
    dim: usize,
    resolutions: [usize; 3],
    omega: f64,
    rows: &[GridRow],
    keep: &dyn Fn(usize) -> bool,
) -> Vec<SuiteEntry> {
    let mut out = Vec::new();
    for (c, &res) in resolutions.iter().enumerate() {
        if !keep(res) {
            continue;
        }
        for &(m, topo, counts) in rows {
            out.push(SuiteEntry {
                config: ExperimentConfig::new(dim, &vec![res; dim], m).with_topology(topo).with_omega(&[omega]),
                expected: Some(counts[c]),
            });
        }
    }
    out
}

/// Entries of a built-in suite, restricted to the given resolutions when
/// `only` is set.
pub fn suite(name: &str, only: Option<&[usize]>) -> Result<Vec<SuiteEntry>> {
    let keep = |r: usize| only.map_or(true, |o| o.contains(&r));
    let entries = match name {
        "1d-gs" => {
            let mut v = Vec::new();
            for &(res, seq, par) in &GS1D {
                if !keep(res) {
                    continue;
                }
                for (m, it) in [Method::Lrgs, Method::Rlgs, Method::Sgs].into_iter().zip(seq) {
                    v.push(SuiteEntry { config: ExperimentConfig::new(1, &[res], m), expected: Some(it) });
                }
                for (&p, it) in P1D.iter().zip(par) {
                    if it.is_some() {
                        v.push(SuiteEntry {
                            config: ExperimentConfig::new(1, &[res], Method::Pgs).with_topology(&[p]),
                            expected: it,
                        });
                    }
                }
            }
            v
        }
        "1d-sor-41" => sor_rows(41, &SOR41),
        "1d-sor-81" => sor_rows(81, &SOR81),
        "1d-sor-161" => sor_rows(161, &SOR161),
        "1d-ssour" => sor_rows(41, &SSOUR41),
        "2d-gs" => grid_rows(2, [51, 101, 151], 1.0, &GS2D, &keep),
        "2d-sor-1.25" => grid_rows(2, [51, 101, 151], 1.25, &SOR2D_125, &keep),
        "2d-sor-1.5" => grid_rows(2, [51, 101, 151], 1.5, &SOR2D_15, &keep),
        "3d-gs" => grid_rows(3, [25, 51, 101], 1.0, &GS3D, &keep),
        "3d-sor-1.25" => grid_rows(3, [25, 51, 101], 1.25, &SOR3D_125, &keep),
        "3d-sor-1.5" => grid_rows(3, [25, 51, 101], 1.5, &SOR3D_15, &keep),
        other => return Err(MfsorError::Config(format!("unknown suite {other:?}; known: {}", SUITES.join(", ")))),
    };
    Ok(entries)
}

/// Outcome of [`omega_search`].
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaSearchResult {
    /// Best factors found.
    pub omega: Vec<f64>,
    /// Iterations with those factors.
    pub iterations: usize,
    /// Number of solves performed.
    pub evaluations: usize,
}

fn grid_values(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| ((lo + i as f64 * step) * 1e6).round() / 1e6).collect()
}

/// Searches the relaxation factors of `config` over `ranges` (one range per
/// factor, one or `2^d` factors).
///
/// A single factor is scanned exhaustively with step `1e-3`. Several factors
/// are scanned jointly on a `1e-2` lattice, then on a `1e-3` lattice within
/// `1e-2` of the coarse optimum. Non-converging candidates lose; ties go to
/// the lexicographically smaller factor list.
pub fn omega_search(config: &ExperimentConfig, ranges: &[(f64, f64)]) -> Result<OmegaSearchResult> {
    if ranges.is_empty() {
        return Err(MfsorError::Config("empty search space".into()));
    }
    for &(lo, hi) in ranges {
        if !(lo > 0.0 && hi < 2.0 && lo <= hi) {
            return Err(MfsorError::Config(format!("search range [{lo}, {hi}] must lie in (0, 2)")));
        }
    }
    let model = model_problem(config.dimension, &config.resolution)?;
    let mut best: Option<(usize, Vec<f64>)> = None;
    let mut evaluations = 0;
    let mut scan = |axes: Vec<Vec<f64>>, best: &mut Option<(usize, Vec<f64>)>| -> Result<()> {
        let total: usize = axes.iter().map(Vec::len).product();
        for idx in (0..total).rev() {
            let mut rem = idx;
            let mut w = vec![0.0; axes.len()];
            for a in (0..axes.len()).rev() {
                w[a] = axes[a][rem % axes[a].len()];
                rem /= axes[a].len();
            }
            let mut cfg = config.clone();
            cfg.omega = w.clone();
            cfg.max_iterations = best.as_ref().map_or(config.max_iterations, |b| b.0.min(config.max_iterations));
            evaluations += 1;
            let r = solve_config(&cfg, &model)?;
            if !r.converged {
                continue;
            }
            let better = match best {
                None => true,
                Some((it, bw)) => r.iterations < *it || (r.iterations == *it && w < *bw),
            };
            if better {
                *best = Some((r.iterations, w));
            }
        }
        Ok(())
    };
    if ranges.len() == 1 {
        scan(vec![grid_values(ranges[0].0, ranges[0].1, 1e-3)], &mut best)?;
    } else {
        scan(ranges.iter().map(|&(lo, hi)| grid_values(lo, hi, 1e-2)).collect(), &mut best)?;
        if let Some((_, centre)) = best.clone() {
            let fine = ranges
                .iter()
                .zip(&centre)
                .map(|(&(lo, hi), &c)| grid_values((c - 1e-2).max(lo), (c + 1e-2).min(hi), 1e-3))
                .collect();
            scan(fine, &mut best)?;
        }
    }
    let (iterations, omega) =
        best.ok_or_else(|| MfsorError::Config("no candidate converged within the iteration cap".into()))?;
    Ok(OmegaSearchResult { omega, iterations, evaluations })
}

/// Row of the cache-efficiency table.
#[derive(Debug, Clone, PartialEq)]
pub struct CacheBenchRow {
    /// Nodes per axis.
    pub resolution: usize,
    /// Number of sub-domains.
    pub subdomains: usize,
    /// Sub-domains per axis.
    pub topology: Vec<usize>,
    /// Iterations of the timed runs.
    pub iterations: usize,
    /// Iterations of an untimed reference run of the same configuration.
    pub untimed_iterations: usize,
    /// Median seconds over the repetitions.
    pub median_seconds: f64,
    /// Median seconds of the classic sequential solver.
    pub baseline_seconds: f64,
    /// `median_seconds / baseline_seconds`.
    pub efficiency_factor: f64,
}

/// Classic sequential counterpart of the decomposed solver: row-wise passes
/// in the directions of the single-domain sweep schedule.
pub fn classic_plan(dim: usize) -> SweepPlan {
    let s = SweepSchedule::new(dim);
    SweepPlan {
        passes: (0..s.cycle_len())
            .map(|k| Pass { ordering: Ordering::NaturalRowWise, direction: s.base_direction(k) })
            .collect(),
    }
}

fn cube_topology(p: usize) -> Result<Vec<usize>> {
    let k = (p as f64).cbrt().round() as usize;
    if k * k * k != p {
        return Err(MfsorError::Config(format!("{p} sub-domains do not form a k x k x k topology")));
    }
    Ok(vec![k; 3])
}

/// Times the 3D Gauss-Seidel model problem on one worker: the classic
/// sequential solver against the decomposed solver with `k^3` sub-domains
/// for each requested count. Each repetition runs every configuration once
/// so that slow drifts of the machine affect all of them alike.
pub fn cache_bench(resolutions: &[usize], subdomains: &[usize], repetitions: usize) -> Result<Vec<CacheBenchRow>> {
    if repetitions == 0 {
        return Err(MfsorError::Config("repetitions must be at least 1".into()));
    }
    let mut rows = Vec::new();
    for &res in resolutions {
        let model = model_problem(3, &[res; 3])?;
        let relax = RelaxationSet::uniform(3, 1.0)?;
        let stop =
            StopRule::ErrorL1 { exact: model.exact.as_slice().to_vec(), divisor: model.divisor, threshold: 1e-2 };
        let u0 = Field::zeros(model.grid.interior_shape());
        let plan = classic_plan(3);
        let mut runs = Vec::with_capacity(subdomains.len());
        for &p in subdomains {
            let topology = cube_topology(p)?;
            let decomp = Decomposition::new(3, model.stencil.shape, &topology)?;
            let untimed = solve_parallel(&model.stencil, &u0, "untimed", &decomp, &relax, &stop, 100_000, 1)?;
            runs.push((p, topology, decomp, untimed.iterations, Vec::with_capacity(repetitions), 0usize));
        }
        let mut base = Vec::with_capacity(repetitions);
        let mut base_iters = None;
        for _ in 0..repetitions {
            let r = solve_sequential(&model.stencil, &u0, "classic", &plan, &relax, &stop, 100_000)?;
            if *base_iters.get_or_insert(r.iterations) != r.iterations {
                return Err(MfsorError::Config("classic solver is not deterministic".into()));
            }
            base.push(r.seconds);
            for (_, _, decomp, _, times, iterations) in runs.iter_mut() {
                let r = solve_parallel(&model.stencil, &u0, "timed", decomp, &relax, &stop, 100_000, 1)?;
                *iterations = r.iterations;
                times.push(r.seconds);
            }
        }
        let baseline_seconds = median(base);
        for (p, topology, _, untimed_iterations, times, iterations) in runs {
            let median_seconds = median(times);
            rows.push(CacheBenchRow {
                resolution: res,
                subdomains: p,
                topology,
                iterations,
                untimed_iterations,
                median_seconds,
                baseline_seconds,
                efficiency_factor: median_seconds / baseline_seconds,
            });
        }
    }
    Ok(rows)
}

/// Writes the cache-efficiency table as CSV.
pub fn write_cache_csv<W: Write>(rows: &[CacheBenchRow], w: W) -> Result<()> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    out.write_record([
        "resolution",
        "subdomains",
        "topology",
        "iterations",
        "untimed_iterations",
        "median_seconds",
        "baseline_seconds",
        "efficiency_factor",
    ])?;
    for r in rows {
        out.write_record([
            r.resolution.to_string(),
            r.subdomains.to_string(),
            join_axes(&r.topology),
            r.iterations.to_string(),
            r.untimed_iterations.to_string(),
            format!("{:.6}", r.median_seconds),
            format!("{:.6}", r.baseline_seconds),
            format!("{:.4}", r.efficiency_factor),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.label().parse::<Method>().unwrap(), m);
        }
        assert!("XGS".parse::<Method>().is_err());
    }

    #[test]
    fn axes_and_factors() {
        assert_eq!(parse_axes("51", 2).unwrap(), vec![51, 51]);
        assert_eq!(parse_axes("2x3x4", 3).unwrap(), vec![2, 3, 4]);
        assert!(parse_axes("2x3", 3).is_err());
        assert_eq!(parse_omegas("1.0;1.5").unwrap(), vec![1.0, 1.5]);
    }

    #[test]
    fn key_value_round_trip() {
        let cfg = ExperimentConfig::new(2, &[51, 51], Method::Psor).with_topology(&[2, 2]).with_omega(&[1.25]);
        assert_eq!(ExperimentConfig::parse_key_value(&cfg.to_key_value()).unwrap(), cfg);
        assert!(ExperimentConfig::parse_key_value("dimension=1\nmethod=lrgs\nbogus=1\n").is_err());
        assert!(ExperimentConfig::parse_key_value("dimension=1\nmethod=pgs\nomega=1.2\n").is_err());
    }

    #[test]
    fn suites_are_known() {
        for s in SUITES {
            assert!(!suite(s, None).unwrap().is_empty(), "{s}");
        }
        assert_eq!(suite("2d-gs", Some(&[51])).unwrap().len(), 9);
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
