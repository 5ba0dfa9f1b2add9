//! Convergence studies and single runs driven by a [`RunConfig`].

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use mdg_core::assembly::{assemble_system, AssemblyOptions, SaddlePointSystem};
use mdg_core::postprocess::{self, compute_errors, ConvergenceRow, ConvergenceTable};
use mdg_core::problems::{self, BrinkmanProblem, Example1Exact, KappaInvField, Shape};
use mdg_core::solver::{DiscreteSolution, SolveReport};
use mdg_core::Mesh;

use crate::config::{ProblemId, RunConfig};
use crate::csv::StudyTable;
use crate::error::CliError;
use crate::vtu;

/// Field files are written here by `run-single` unless configured.
pub const DEFAULT_VTU_DIR: &str = "fields";

/// One `(inv_kappa, nu)` combination of a configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Case {
    /// `None` for example 2, which has a closed-form field.
    pub inv_kappa: Option<f64>,
    pub nu: f64,
}

impl Case {
    /// Label for tables and file names.
    pub fn inv_kappa_label(&self) -> String {
        match self.inv_kappa {
            Some(v) => format!("{v}"),
            None => KappaInvField::example2().label(),
        }
    }
}

/// Every combination of configured values, `inv_kappa` outermost.
pub fn cases(cfg: &RunConfig) -> Vec<Case> {
    let nus = cfg.nu_values();
    let kappas: Vec<Option<f64>> = match cfg.problem {
        ProblemId::Example2 => vec![None],
        _ => cfg.inv_kappa_values().into_iter().map(Some).collect(),
    };
    kappas.iter().flat_map(|&inv_kappa| nus.iter().map(move |&nu| Case { inv_kappa, nu })).collect()
}

fn shapes(cfg: &RunConfig) -> Result<Vec<Shape>, CliError> {
    cfg.effective_regions().iter().map(|r| r.to_shape().map_err(CliError::config)).collect()
}

/// The problem in physical variables for one case.
pub fn build_problem(cfg: &RunConfig, case: Case) -> Result<BrinkmanProblem, CliError> {
    let ik = case.inv_kappa.unwrap_or(1.0);
    let mut problem = match cfg.problem {
        ProblemId::Example1 => {
            BrinkmanProblem::manufactured("example1", Arc::new(Example1Exact), KappaInvField::Constant(ik), case.nu)
        }
        ProblemId::Example2 => problems::example2(case.nu),
        ProblemId::Example3 => problems::example3(ik, &shapes(cfg)?),
        ProblemId::Example4 => problems::example4(ik, &shapes(cfg)?),
        ProblemId::Custom => {
            let regions = shapes(cfg)?
                .into_iter()
                .zip(cfg.effective_regions())
                .map(|(s, r)| (s, r.value.unwrap_or(ik)))
                .collect();
            let data = cfg.custom.clone().unwrap_or_default();
            problems::constant_data(
                "custom",
                KappaInvField::Regions { background: Some(ik), regions },
                case.nu,
                data.source,
                data.boundary,
            )
        }
    };
    problem.nu = case.nu;
    problem.validate()?;
    Ok(problem)
}

/// Assembled system of the unit-viscosity form of `problem`. The penalty
/// weights jumps of `sigma = nu * sigma_scaled`, so it becomes `nu * eta`.
pub fn assemble(cfg: &RunConfig, mesh: &Mesh, problem: &BrinkmanProblem) -> Result<SaddlePointSystem, CliError> {
    let scaled = problem.nu_scale()?;
    let options = AssemblyOptions { penalty: problem.nu * cfg.eta, extra_quadrature: cfg.quadrature_elevation };
    Ok(assemble_system(mesh, cfg.k, &scaled, &options)?)
}

fn write_file<F>(path: &Path, write: F) -> Result<(), CliError>
where
    F: FnOnce(BufWriter<File>) -> std::io::Result<()>,
{
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    write(BufWriter::new(file)).map_err(|e| CliError::io(path, e))
}

fn stem(cfg: &RunConfig, case: Case, n: usize) -> String {
    let ik = case.inv_kappa.map(|v| format!("_ik{v}")).unwrap_or_default();
    format!("{}_k{}_n{n}{ik}_nu{}", cfg.problem.name(), cfg.k, case.nu)
}

fn dump_matrix(cfg: &RunConfig, case: Case, n: usize, system: &SaddlePointSystem) -> Result<(), CliError> {
    let Some(dir) = &cfg.output.matrix_dir else { return Ok(()) };
    let path = dir.join(format!("{}.coo", stem(cfg, case, n)));
    let mut text = String::new();
    system.global_matrix().write_coordinate(&mut text).expect("writing to a string");
    write_file(&path, |mut w| std::io::Write::write_all(&mut w, text.as_bytes()))
}

/// Solution of one case on one mesh, in physical variables.
#[derive(Debug, Clone)]
pub struct Solved {
    pub problem: BrinkmanProblem,
    pub solution: DiscreteSolution,
    pub report: SolveReport,
    pub warnings: Vec<String>,
}

/// Assemble, solve and map back to viscosity `nu`; `n` names matrix dumps.
pub fn solve_case(cfg: &RunConfig, mesh: &Mesh, n: usize, case: Case) -> Result<Solved, CliError> {
    let problem = build_problem(cfg, case)?;
    let system = assemble(cfg, mesh, &problem)?;
    dump_matrix(cfg, case, n, &system)?;
    let (solution, report) =
        crate::solve::solve(&system, mesh, cfg.solver.method.into(), cfg.solver.tolerance)?;
    let solution = solution.nu_unscale(case.nu)?;
    Ok(Solved { problem, solution, report, warnings: system.warnings })
}

pub fn build_mesh(cfg: &RunConfig, n: usize) -> Result<Mesh, CliError> {
    Ok(Mesh::uniform_unit_square(n, cfg.diagonal.into())?)
}

/// One table per case, each over all mesh sizes. Solves run in order and
/// the tables come out in the order of [`cases`].
pub fn run_convergence(cfg: &RunConfig) -> Result<Vec<StudyTable>, CliError> {
    cfg.validate_convergence()?;
    let meshes = cfg.mesh_sizes.iter().map(|&n| build_mesh(cfg, n)).collect::<Result<Vec<_>, _>>()?;
    let qdeg = cfg.error_quadrature_degree();
    let mut tables = Vec::new();
    for case in cases(cfg) {
        let mut rows = Vec::with_capacity(meshes.len());
        for (mesh, &n) in meshes.iter().zip(&cfg.mesh_sizes) {
            let solved = solve_case(cfg, mesh, n, case)?;
            let errors = compute_errors(mesh, &solved.solution, &solved.problem, qdeg)?;
            rows.push(ConvergenceRow { n, errors });
        }
        tables.push(StudyTable {
            inv_kappa: case.inv_kappa_label(),
            nu: case.nu,
            k: cfg.k,
            table: ConvergenceTable::new(rows)?,
        });
    }
    Ok(tables)
}

/// Write the tables to the configured CSV path, or to `out` if none.
pub fn emit_tables<W: std::io::Write>(cfg: &RunConfig, tables: &[StudyTable], out: W) -> Result<(), CliError> {
    let csv_err = |path: &Path, e: ::csv::Error| match e.into_kind() {
        ::csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::io(path, std::io::Error::other(format!("{other:?}"))),
    };
    match &cfg.output.csv {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
            }
            let file = File::create(path).map_err(|e| CliError::io(path, e))?;
            crate::csv::write_tables(BufWriter::new(file), tables).map_err(|e| csv_err(path, e))
        }
        None => crate::csv::write_tables(out, tables).map_err(|e| csv_err(Path::new("<stdout>"), e)),
    }
}

/// Outcome of one case of a single run.
#[derive(Debug, Clone)]
pub struct SingleRun {
    pub case: Case,
    pub n: usize,
    pub solved: Solved,
    /// Mean `|u_h|` where `kappa^{-1} > 1`, if there is such a region.
    pub low_permeability_speed: Option<f64>,
    pub files: Vec<PathBuf>,
}

impl SingleRun {
    pub fn is_finite(&self) -> bool {
        let s = &self.solved.solution;
        s.sigma.values.iter().chain(&s.velocity.values).all(|v| v.is_finite()) && s.multiplier.is_finite()
    }
}

/// Solve every case on the finest configured mesh and write the velocity,
/// stress intensity and pressure fields of each.
pub fn run_single(cfg: &RunConfig) -> Result<(Mesh, Vec<SingleRun>), CliError> {
    cfg.validate()?;
    let n = *cfg.mesh_sizes.last().expect("validated non-empty");
    let mesh = build_mesh(cfg, n)?;
    let dir = cfg.output.vtu_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_VTU_DIR));
    let s = cfg.vtu_subdivisions;
    let mut runs = Vec::new();
    for case in cases(cfg) {
        let solved = solve_case(cfg, &mesh, n, case)?;
        let sol = &solved.solution;
        let kappa = &solved.problem.kappa_inv;
        let low_permeability_speed =
            postprocess::mean_speed(&mesh, &sol.velocity, 2 * cfg.k + 4, |x| kappa.value(x).is_some_and(|v| v > 1.0))?;
        let stem = stem(cfg, case, n);
        let fields = [
            (vtu::velocity_field(&mesh, &sol.velocity, s), None),
            (vtu::stress_intensity_field(&mesh, &sol.sigma, s), Some(vtu::STRESS_INTENSITY_NOTE)),
            (vtu::pressure_field(&mesh, &sol.sigma, s), None),
        ];
        let mut files = Vec::new();
        for (field, note) in &fields {
            let path = dir.join(format!("{stem}_{}.vtu", field.name));
            write_file(&path, |w| vtu::write_vtu(w, &mesh, s, field, *note))?;
            files.push(path);
        }
        runs.push(SingleRun { case, n, solved, low_permeability_speed, files });
    }
    Ok((mesh, runs))
}
