// SPDX-License-Identifier: MIT

//! `mfsor` command-line driver.
//!
//! Exit codes: 0 on success (including a non-converged solve), 1 on usage
//! or configuration errors, 2 when a size guard refuses the request.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use mfsor::analysis::{self, DENSE_LIMIT};
use mfsor::error::MfsorError;
use mfsor::grid::Decomposition;
use mfsor::harness::{self, ExperimentConfig, Method};
use mfsor::solvers_seq::RelaxationSet;

#[derive(Parser, Debug)]
#[command(name = "mfsor", version, about = "Multi-directional Gauss-Seidel/SOR solvers, analysis and benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the model problem once and report iterations and error.
    Solve(SolveArgs),
    /// Splitting, certificate and spectral report for a small decomposition.
    Analyze(AnalyzeArgs),
    /// Reproduce a built-in table suite and compare with reference counts.
    Bench(BenchArgs),
    /// Search the relaxation factors minimising the iteration count.
    OmegaSearch(OmegaArgs),
    /// Time decomposed single-worker solves against the classic solver.
    CacheBench(CacheArgs),
}

#[derive(Args, Debug, Clone, Default)]
struct ProblemArgs {
    /// Spatial dimension (1, 2 or 3).
    #[arg(long)]
    dim: Option<usize>,
    /// Nodes per axis including the boundary, `N` or `NxNxN`.
    #[arg(long)]
    res: Option<String>,
    /// Method label (LRGS, RLGS, SGS, RGS, FGS, LRSOR, RLSOR, SSOR, SSOUR, RSOR, FSOR, PGS, PSOR, PSOUR).
    #[arg(long)]
    method: Option<String>,
    /// Sub-domains per axis, `P[xQ[xR]]`.
    #[arg(long, visible_alias = "parts")]
    topo: Option<String>,
    /// Relaxation factors, one shared value or one per sweep direction separated by `;`.
    #[arg(long, allow_hyphen_values = true)]
    omega: Option<String>,
    /// Stopping threshold on the L1 error.
    #[arg(long)]
    threshold: Option<f64>,
    /// Iteration cap.
    #[arg(long)]
    max_iters: Option<usize>,
    /// Worker threads for parallel methods.
    #[arg(long)]
    workers: Option<usize>,
    /// Timed repetitions.
    #[arg(long)]
    reps: Option<usize>,
    /// `key=value` configuration file; explicit flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Directory receiving `solve.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    /// Spatial dimension (1, 2 or 3).
    #[arg(long)]
    dim: usize,
    /// Nodes per axis including the boundary.
    #[arg(long)]
    res: String,
    /// Sub-domains per axis.
    #[arg(long, visible_alias = "topo", default_value = "1")]
    parts: String,
    /// Relaxation factors, one shared value or one per sweep direction.
    #[arg(long, default_value = "1.0")]
    omega: String,
    /// Allow analysis above the dense-size guard.
    #[arg(long)]
    force: bool,
    /// Directory receiving the splitting matrices in coordinate format.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Suite name (see `--suite list`).
    #[arg(long)]
    suite: String,
    /// Comma-separated resolutions to keep (2D and 3D suites).
    #[arg(long)]
    res: Option<String>,
    /// Directory receiving `<suite>.csv` and `<suite>.md`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OmegaArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Search ranges `lo:hi`, one per factor separated by `;`.
    #[arg(long)]
    range: Option<String>,
}

#[derive(Args, Debug)]
struct CacheArgs {
    /// Comma-separated resolutions.
    #[arg(long, default_value = "51,101")]
    res: String,
    /// Comma-separated sub-domain counts (cubes).
    #[arg(long, default_value = "1,8,27,64")]
    parts: String,
    /// Timed repetitions per configuration.
    #[arg(long, default_value_t = 5)]
    reps: usize,
    /// Directory receiving `cache_bench.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn config_error(msg: impl Into<String>) -> anyhow::Error {
    MfsorError::Config(msg.into()).into()
}

fn parse_list(text: &str) -> anyhow::Result<Vec<usize>> {
    text.split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|e| config_error(format!("bad integer {t:?}: {e}"))))
        .collect()
}

fn build_config(p: &ProblemArgs) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &p.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ExperimentConfig::parse_key_value(&text)?
        }
        None => {
            let dim = p.dim.ok_or_else(|| config_error("--dim is required without --config"))?;
            let method: Method =
                p.method.as_deref().ok_or_else(|| config_error("--method is required without --config"))?.parse()?;
            let res = harness::parse_axes(
                p.res.as_deref().ok_or_else(|| config_error("--res is required without --config"))?,
                dim,
            )?;
            ExperimentConfig::new(dim, &res, method)
        }
    };
    if let Some(d) = p.dim {
        if d != cfg.dimension {
            cfg = ExperimentConfig { dimension: d, ..cfg };
            cfg.threshold = if d == 3 { 1e-2 } else { 1e-3 };
            cfg.topology = vec![1; d];
        }
    }
    let d = cfg.dimension;
    if let Some(m) = &p.method {
        cfg.method = m.parse()?;
    }
    if let Some(r) = &p.res {
        cfg.resolution = harness::parse_axes(r, d)?;
    }
    if let Some(t) = &p.topo {
        cfg.topology = harness::parse_axes(t, d)?;
    }
    if let Some(w) = &p.omega {
        cfg.omega = harness::parse_omegas(w)?;
    }
    if let Some(t) = p.threshold {
        cfg.threshold = t;
    }
    if let Some(m) = p.max_iters {
        cfg.max_iterations = m;
    }
    if let Some(w) = p.workers {
        cfg.workers = w;
    }
    if let Some(r) = p.reps {
        cfg.repetitions = r;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn ensure_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn cmd_solve(a: &SolveArgs) -> anyhow::Result<()> {
    let cfg = build_config(&a.problem)?;
    let (row, _) = harness::run_experiment(&cfg)?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "method={}", row.label)?;
    writeln!(out, "resolution={}", cfg.resolution.iter().map(usize::to_string).collect::<Vec<_>>().join("x"))?;
    writeln!(out, "iterations={}", row.iterations)?;
    writeln!(out, "l1_error={:.6e}", row.l1_error)?;
    if row.converged {
        writeln!(out, "converged=true")?;
    } else {
        writeln!(out, "converged=false (NOT CONVERGED within {} iterations)", cfg.max_iterations)?;
    }
    eprintln!("seconds={:.6}", row.seconds);
    if let Some(dir) = &a.out {
        ensure_dir(dir)?;
        harness::write_csv(&[row], fs::File::create(dir.join("solve.csv"))?)?;
    }
    Ok(())
}

fn fmt_vec(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("[{}]", items.join(", "))
}

fn cmd_analyze(a: &AnalyzeArgs) -> anyhow::Result<()> {
    let res = harness::parse_axes(&a.res, a.dim)?;
    let parts = harness::parse_axes(&a.parts, a.dim)?;
    let omega = harness::parse_omegas(&a.omega)?;
    let relax = RelaxationSet::from_values(a.dim, &omega)?;
    let model = harness::model_problem(a.dim, &res)?;
    let n = model.stencil.len();
    if n > DENSE_LIMIT && !a.force {
        return Err(MfsorError::Guard(format!(
            "{n} unknowns exceed the dense-analysis limit {DENSE_LIMIT}; pass --force"
        ))
        .into());
    }
    let decomp = Decomposition::new(a.dim, model.stencil.shape, &parts)?;
    let split = analysis::build_splitting(&model.stencil, &decomp)?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "unknowns={n}")?;
    writeln!(out, "boxes={} sizes={:?}", split.xi.len(), split.xi)?;
    let defect = split.splitting_defect()?;
    writeln!(out, "splitting identity defect={defect:.3e}: {}", if defect <= 1e-12 { "PASS" } else { "FAIL" })?;
    for s in &split.splittings {
        let cert = analysis::block_certificate(&s.g, &s.update_order(), &s.unit_sizes(), true)?;
        let coupled = s.units.iter().filter(|u| u.len() > 1).count();
        match cert {
            analysis::Certification::Certified(_) => {
                writeln!(out, "G{}: alt-block-triangular OK ({} units, {coupled} coupled)", s.iteration, s.units.len())?
            }
            analysis::Certification::Refuted(r) => writeln!(
                out,
                "G{}: alt-block-triangular REFUTED at ({}, {}) = {:.6}",
                s.iteration, r.row, r.col, r.value
            )?,
        }
        if n <= 64 {
            writeln!(out, "Lambda{} = {}", s.iteration, fmt_vec(&s.lambda))?;
        }
    }
    if n <= DENSE_LIMIT {
        let eig = analysis::eigen_diag_check(&split)?;
        for c in &eig.checks {
            let verdict = if c.diagonal_deviation <= eig.tolerance { "PASS" } else { "FAIL" };
            writeln!(
                out,
                "G{}: eig(G) vs diag(G) deviation={:.3e} ({} coupled units): {verdict}",
                c.iteration, c.diagonal_deviation, c.coupled_units
            )?;
        }
    }
    let report = analysis::iteration_matrix(&split, &relax)?;
    let method = match report.method {
        analysis::RhoMethod::Dense => "dense",
        analysis::RhoMethod::Power => "power",
    };
    let verdict = if report.converges() { "< 1: PASS" } else { ">= 1: FAIL" };
    writeln!(out, "rho(T)={:.10} {verdict} ({method})", report.rho)?;
    writeln!(out, "bound prod|1-w|={:.10} (rho within bound: {})", report.bound, report.within_bound())?;
    writeln!(out, "diagonal identity defect={:.3e}", report.identity_defect)?;
    if let Some(dir) = &a.out {
        ensure_dir(dir)?;
        split.a.write_coordinate(fs::File::create(dir.join("A.mtx"))?)?;
        for s in &split.splittings {
            s.g.write_coordinate(fs::File::create(dir.join(format!("G{}.mtx", s.iteration)))?)?;
        }
    }
    Ok(())
}

fn cmd_bench(a: &BenchArgs) -> anyhow::Result<()> {
    if a.suite == "list" {
        for s in harness::SUITES {
            println!("{s}");
        }
        return Ok(());
    }
    let only = a.res.as_deref().map(parse_list).transpose()?;
    let entries = harness::suite(&a.suite, only.as_deref())?;
    let rows = harness::run_table(&entries)?;
    harness::write_markdown(&a.suite, &rows, std::io::stdout().lock())?;
    if let Some(dir) = &a.out {
        ensure_dir(dir)?;
        harness::write_csv(&rows, fs::File::create(dir.join(format!("{}.csv", a.suite)))?)?;
        harness::write_markdown(&a.suite, &rows, fs::File::create(dir.join(format!("{}.md", a.suite)))?)?;
    }
    Ok(())
}

fn default_ranges(cfg: &ExperimentConfig) -> Vec<(f64, f64)> {
    match cfg.method {
        Method::Ssor | Method::Ssour | Method::Psor | Method::Psour if cfg.dimension == 1 => vec![(0.01, 1.99); 2],
        _ => vec![(0.01, 1.99)],
    }
}

fn parse_ranges(text: &str) -> anyhow::Result<Vec<(f64, f64)>> {
    text.split(';')
        .map(|r| {
            let (lo, hi) = r.split_once(':').ok_or_else(|| config_error(format!("range {r:?} is not lo:hi")))?;
            let p = |t: &str| t.trim().parse::<f64>().map_err(|e| config_error(format!("bad bound {t:?}: {e}")));
            Ok((p(lo)?, p(hi)?))
        })
        .collect()
}

fn cmd_omega_search(a: &OmegaArgs) -> anyhow::Result<()> {
    let mut problem = a.problem.clone();
    if problem.omega.is_none() {
        problem.omega = Some("1.0".into());
    }
    let mut cfg = build_config(&problem)?;
    if cfg.method.is_gauss_seidel() {
        return Err(config_error(format!("{} has no relaxation factor to search", cfg.method)));
    }
    let ranges = match &a.range {
        Some(r) => parse_ranges(r)?,
        None => default_ranges(&cfg),
    };
    cfg.omega = vec![1.0; ranges.len()];
    let best = harness::omega_search(&cfg, &ranges)?;
    let w: Vec<String> = best.omega.iter().map(|x| format!("{x:.3}")).collect();
    println!("method={}", cfg.row_label());
    println!("omega={}", w.join(";"));
    println!("iterations={}", best.iterations);
    println!("evaluations={}", best.evaluations);
    Ok(())
}

fn cmd_cache_bench(a: &CacheArgs) -> anyhow::Result<()> {
    let res = parse_list(&a.res)?;
    let parts = parse_list(&a.parts)?;
    let rows = harness::cache_bench(&res, &parts, a.reps)?;
    harness::write_cache_csv(&rows, std::io::stdout().lock())?;
    if let Some(dir) = &a.out {
        ensure_dir(dir)?;
        harness::write_cache_csv(&rows, fs::File::create(dir.join("cache_bench.csv"))?)?;
    }
    for r in &rows {
        if r.iterations != r.untimed_iterations {
            return Err(anyhow!("timed and untimed iteration counts differ at {} sub-domains", r.subdomains));
        }
    }
    Ok(())
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<MfsorError>() {
        Some(MfsorError::Guard(_)) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Bench(a) => cmd_bench(a),
        Command::OmegaSearch(a) => cmd_omega_search(a),
        Command::CacheBench(a) => cmd_cache_bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
