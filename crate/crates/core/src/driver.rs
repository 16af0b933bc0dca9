//! The solve-estimate-mark-refine loop and its CSV and mesh output.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};

use crate::assembly::mixed_representer;
use crate::config::{ProblemKind, RefineKind, RunConfig};
use crate::error::Error;
use crate::estimator::{
    doerfler_mark, energy, energy_diff_sqrt, exact_errors, guaranteed_bound, local_estimator, uniqueness_check,
    uniqueness_threshold, THRESHOLD_SQUARE_LITERAL,
};
use crate::mesh::{Mesh, Refinement};
use crate::problem::Problem;
use crate::solver::{hessian_extremes, linear_init, newton, NewtonOptions};
use crate::spaces::{prolongate, DiscreteState, Discretization, DofLayout};

pub const CSV_HEADER: &str = "level,ndof,newton_iters,eta,energy_diff_sqrt,vmax,error_energy,error_hdiv,lambda_min,lambda_max,guaranteed_bound,uniqueness_flag,wall_time";

/// One row of the results table.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub level: usize,
    pub ndof: usize,
    pub newton_iters: usize,
    pub eta: f64,
    pub energy_diff_sqrt: Option<f64>,
    pub vmax: f64,
    pub error_energy: Option<f64>,
    pub error_hdiv: Option<f64>,
    pub lambda_min: Option<f64>,
    pub lambda_max: Option<f64>,
    pub guaranteed_bound: Option<f64>,
    pub uniqueness_flag: Option<bool>,
    pub wall_time: f64,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub records: Vec<RunRecord>,
    /// Dual norms of the Newton iterates on every level.
    pub newton_history: Vec<Vec<f64>>,
    pub final_mesh: Option<Mesh>,
    pub threshold: Option<f64>,
    /// The bound uses a constant supplied by the user rather than a proven one.
    pub bound_conditional: bool,
    pub energy: Vec<f64>,
    /// Meshes of all levels, kept only when exporting them was requested.
    pub level_meshes: Vec<Mesh>,
}

/// A failed run with every level completed before the failure.
#[derive(Debug)]
pub struct RunFailure {
    pub error: Error,
    pub output: RunOutput,
}

pub fn build_problem(config: &RunConfig) -> Result<Problem, Error> {
    Ok(match &config.problem {
        ProblemKind::Square => Problem::square(config.model),
        ProblemKind::LShape => Problem::lshape(config.model),
        ProblemKind::MeshFile(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.clone(), source })?;
            let mesh = Mesh::read_text(&text)?;
            let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "custom".into());
            Problem::custom(name, mesh)
        }
    })
}

/// Runs the loop described by `config` without touching the filesystem
/// (apart from reading a custom mesh).
pub fn adaptive_loop(config: &RunConfig) -> Result<RunOutput, Box<RunFailure>> {
    let problem = match build_problem(config) {
        Ok(p) => p,
        Err(error) => {
            return Err(Box::new(RunFailure {
                error,
                output: RunOutput {
                    records: Vec::new(),
                    newton_history: Vec::new(),
                    final_mesh: None,
                    threshold: None,
                    bound_conditional: false,
                    energy: Vec::new(),
                    level_meshes: Vec::new(),
                },
            }))
        }
    };
    run_problem(config, &problem)
}

/// The loop on an already constructed problem.
pub fn run_problem(config: &RunConfig, problem: &Problem) -> Result<RunOutput, Box<RunFailure>> {
    let model = config.model;
    let c_f = config.c_f.or(problem.c_f);
    let c_df = config.c_df.or(problem.c_df);
    let e_ref = config.e_ref.or(problem.e_ref);
    let mut output = RunOutput {
        records: Vec::new(),
        newton_history: Vec::new(),
        final_mesh: None,
        threshold: c_f.map(|c| uniqueness_threshold(&model, c)),
        bound_conditional: config.c_df.is_some() && problem.c_df.is_none(),
        energy: Vec::new(),
        level_meshes: Vec::new(),
    };
    if output.bound_conditional {
        warn!("guaranteed bound uses the user-supplied C_dF = {} and is conditional", config.c_df.unwrap_or(0.0));
    }
    let opts = NewtonOptions { tol: config.newton_tol, maxiter: config.newton_maxiter };
    let mut mesh = problem.mesh.clone();
    let mut previous: Option<(Mesh, DofLayout, Refinement, DiscreteState)> = None;

    for level in 0..config.levels {
        let start = Instant::now();
        let fail = |error: Error, output: RunOutput| Box::new(RunFailure { error, output });
        let disc = Discretization::new(mesh.clone(), &*problem.f);
        let init = match previous.take() {
            Some((coarse, layout, refinement, state)) if !config.restart => {
                prolongate(&coarse, &layout, &refinement, &state)
            }
            _ => linear_init(&disc, config.init_weight()),
        };
        let init = match init {
            Ok(s) => s,
            Err(e) => return Err(fail(e, output)),
        };
        let report = match newton(&disc, &model, &init, opts) {
            Ok(r) => r,
            Err(f) => {
                output.newton_history.push(f.report.dual_norms.clone());
                return Err(fail(Error::Newton { level, source: f.error }, output));
            }
        };
        output.newton_history.push(report.dual_norms.clone());
        if !report.converged {
            let error =
                Error::NewtonNotConverged { level, iterations: report.iterations, dual_norm: report.final_dual_norm() };
            return Err(fail(error, output));
        }
        let state = report.state;
        let record = match evaluate_level(config, problem, &disc, &state, level, report.iterations, c_f, c_df, e_ref) {
            Ok((mut r, est, e)) => {
                r.wall_time = start.elapsed().as_secs_f64();
                output.energy.push(e);
                info!(
                    "level {level}: ndof {} newton {} eta {:.6e} vmax {:.6e} ({:.2}s)",
                    r.ndof, r.newton_iters, r.eta, r.vmax, r.wall_time
                );
                (r, est)
            }
            Err(e) => return Err(fail(e, output)),
        };
        let (record, eta_local) = record;
        output.records.push(record);
        output.final_mesh = Some(mesh.clone());
        if config.export_meshes {
            output.level_meshes.push(mesh.clone());
        }
        if level + 1 == config.levels {
            break;
        }
        let refinement = match config.refine {
            RefineKind::Uniform => mesh.refine_uniform(),
            RefineKind::Adaptive => {
                let eta2: Vec<f64> = eta_local.iter().map(|e| e * e).collect();
                mesh.refine_nvb(&doerfler_mark(&eta2, config.theta))
            }
        };
        let next_ndof = DofLayout::new(&refinement.mesh).ndof();
        if config.max_ndof.is_some_and(|n| next_ndof > n) {
            break;
        }
        let fine = refinement.mesh.clone();
        previous = Some((mesh, disc.layout, refinement, state));
        mesh = fine;
    }
    Ok(output)
}

#[allow(clippy::too_many_arguments)]
fn evaluate_level(
    config: &RunConfig,
    problem: &Problem,
    disc: &Discretization,
    state: &DiscreteState,
    level: usize,
    newton_iters: usize,
    c_f: Option<f64>,
    c_df: Option<f64>,
    e_ref: Option<f64>,
) -> Result<(RunRecord, Vec<f64>, f64), Error> {
    let model = config.model;
    let est = local_estimator(disc, &model, state)?;
    let v_rep = mixed_representer(disc, &model, state)?;
    let e = energy(disc, &model, state)?;
    let energy_diff = e_ref.and_then(|r| {
        let d = energy_diff_sqrt(e, r);
        if d.is_none() {
            warn!("level {level}: discrete energy {e} lies below the reference {r}");
        }
        d
    });
    let (vmax, flag) = match c_f {
        Some(c) => {
            let u = uniqueness_check(disc, &model, &v_rep, c);
            (u.vmax, Some(u.holds))
        }
        None => (uniqueness_check(disc, &model, &v_rep, 1.0).vmax, None),
    };
    let (error_energy, error_hdiv) = match &problem.exact {
        Some(exact) => {
            let (a, b) = exact_errors(disc, &model, state, exact.as_ref())?;
            (Some(a), Some(b))
        }
        None => (None, None),
    };
    let (lambda_min, lambda_max) = if disc.ndof() <= config.gevp_max_ndof {
        match hessian_extremes(disc, &model, state) {
            Ok(p) => (Some(p.lambda_min), Some(p.lambda_max)),
            Err(e) => {
                warn!("level {level}: eigenvalue certificate unavailable: {e}");
                (None, None)
            }
        }
    } else {
        (None, None)
    };
    let bound = match c_df {
        Some(c) => Some(guaranteed_bound(disc, &model, state, c, config.kappa)?),
        None => None,
    };
    let record = RunRecord {
        level,
        ndof: disc.ndof(),
        newton_iters,
        eta: est.eta_global,
        energy_diff_sqrt: energy_diff,
        vmax,
        error_energy,
        error_hdiv,
        lambda_min,
        lambda_max,
        guaranteed_bound: bound,
        uniqueness_flag: flag,
        wall_time: 0.0,
    };
    Ok((record, est.eta_local, e))
}

/// `x` with 12 significant digits in the shortest of fixed and scientific
/// notation, trailing zeros removed.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.11e}");
    let (mant, exp) = sci.split_once('e').expect("scientific notation");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim(&format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim(mant))
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(format_sig).unwrap_or_default()
}

pub fn csv_string(records: &[RunRecord]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in records {
        let flag = r.uniqueness_flag.map(|b| if b { "1" } else { "0" }).unwrap_or("");
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.level,
            r.ndof,
            r.newton_iters,
            format_sig(r.eta),
            opt(r.energy_diff_sqrt),
            format_sig(r.vmax),
            opt(r.error_energy),
            opt(r.error_hdiv),
            opt(r.lambda_min),
            opt(r.lambda_max),
            opt(r.guaranteed_bound),
            flag,
            format_sig(r.wall_time),
        )
        .expect("writing to a String");
    }
    s
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), Error> {
    let io = |source| Error::Io { path: path.to_path_buf(), source };
    let mut f = std::fs::File::create(path).map_err(io)?;
    f.write_all(contents).map_err(io)
}

pub fn export_csv(records: &[RunRecord], path: &Path) -> Result<(), Error> {
    write_file(path, csv_string(records).as_bytes())
}

pub fn export_mesh(mesh: &Mesh, path: &Path) -> Result<(), Error> {
    let mut buf = Vec::new();
    mesh.write_text(&mut buf).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    write_file(path, &buf)
}

/// Newton dual norms as `level,iteration,dual_norm`.
pub fn newton_csv_string(history: &[Vec<f64>]) -> String {
    let mut s = String::from("level,iteration,dual_norm\n");
    for (level, norms) in history.iter().enumerate() {
        for (j, n) in norms.iter().enumerate() {
            writeln!(s, "{level},{j},{}", format_sig(*n)).expect("writing to a String");
        }
    }
    s
}

fn summary_string(config: &RunConfig, output: &RunOutput) -> String {
    let mut s = String::new();
    writeln!(s, "model = {}", config.model).ok();
    if let Some(t) = output.threshold {
        writeln!(s, "uniqueness_threshold = {}", format_sig(t)).ok();
    }
    if config.problem == ProblemKind::Square {
        writeln!(s, "uniqueness_threshold_literal = {}", format_sig(THRESHOLD_SQUARE_LITERAL)).ok();
        if let Some(r) = output.records.iter().find(|r| r.vmax < THRESHOLD_SQUARE_LITERAL) {
            writeln!(s, "below_literal_threshold_from_level = {}", r.level).ok();
        }
    }
    if output.records.iter().any(|r| r.guaranteed_bound.is_some()) {
        let label = if output.bound_conditional { "conditional" } else { "proven constants" };
        writeln!(s, "guaranteed_bound = {label}").ok();
    }
    if let Some(last) = output.newton_history.last().and_then(|h| h.last()) {
        writeln!(s, "final_dual_norm = {}", format_sig(*last)).ok();
    }
    s
}

/// Writes `results.csv`, `newton.csv`, `summary.txt`, `config.txt` and the
/// final mesh into the configured output directory.
pub fn write_outputs(config: &RunConfig, output: &RunOutput) -> Result<Vec<PathBuf>, Error> {
    let dir = &config.out;
    std::fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.clone(), source })?;
    let mut written = Vec::new();
    let mut put = |name: &str, bytes: &[u8]| -> Result<(), Error> {
        let p = dir.join(name);
        write_file(&p, bytes)?;
        written.push(p);
        Ok(())
    };
    put("results.csv", csv_string(&output.records).as_bytes())?;
    put("newton.csv", newton_csv_string(&output.newton_history).as_bytes())?;
    put("summary.txt", summary_string(config, output).as_bytes())?;
    put("config.txt", config.to_text().as_bytes())?;
    if let Some(mesh) = &output.final_mesh {
        let mesh_path = dir.join("mesh_final.txt");
        export_mesh(mesh, &mesh_path)?;
        written.push(mesh_path);
    }
    Ok(written)
}

/// Runs `config` and, when requested, exports every level mesh on the way.
pub fn run_and_export(config: &RunConfig) -> Result<RunOutput, Box<RunFailure>> {
    let result = adaptive_loop(config);
    let output = match &result {
        Ok(o) => o,
        Err(f) => &f.output,
    };
    let written = write_outputs(config, output).and_then(|w| {
        for (level, mesh) in output.level_meshes.iter().enumerate() {
            export_mesh(mesh, &config.out.join(format!("mesh_{level}.txt")))?;
        }
        Ok(w)
    });
    match (result, written) {
        (Ok(o), Ok(_)) => Ok(o),
        (Ok(o), Err(error)) => Err(Box::new(RunFailure { error, output: o })),
        (Err(f), _) => Err(f),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(format_sig(12.4270271), "12.4270271");
        assert_eq!(format_sig(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_sig(2.0 / 3.0 * 1e-9), "6.66666666667e-10");
        assert_eq!(format_sig(123456789012345.0), "1.23456789012e14");
        assert_eq!(format_sig(-0.5), "-0.5");
        assert_eq!(format_sig(100.0), "100");
        assert_eq!(format_sig(0.0), "0");
    }

    #[test]
    fn empty_fields_for_missing_values() {
        let r = RunRecord {
            level: 0,
            ndof: 25,
            newton_iters: 3,
            eta: 1.5,
            energy_diff_sqrt: None,
            vmax: 0.25,
            error_energy: None,
            error_hdiv: None,
            lambda_min: Some(1.8),
            lambda_max: None,
            guaranteed_bound: None,
            uniqueness_flag: Some(false),
            wall_time: 0.125,
        };
        let s = csv_string(&[r]);
        let mut lines = s.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        assert_eq!(lines.next(), Some("0,25,3,1.5,,0.25,,,1.8,,,0,0.125"));
        assert_eq!(lines.next(), None);
    }
}
