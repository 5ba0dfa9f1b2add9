use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mdg::config::{DiagonalChoice, MethodChoice, ProblemId, RunConfig};
use mdg::error::CliError;
use mdg::run;

/// Mixed discontinuous Galerkin solver for the Brinkman equations on the
/// unit square.
#[derive(Parser)]
#[command(name = "mdg-brinkman", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Error norms and rates over a sequence of meshes (examples 1 and 2).
    RunConvergence(Overrides),
    /// Solve on the finest mesh and write velocity, stress intensity and
    /// pressure fields.
    RunSingle(Overrides),
}

/// Flags override the corresponding configuration keys.
#[derive(Args)]
struct Overrides {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Used with problem defaults when no configuration file is given.
    #[arg(long, value_enum)]
    problem: Option<ProblemArg>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long = "mesh-sizes", value_delimiter = ',')]
    mesh_sizes: Option<Vec<usize>>,
    #[arg(long, value_enum)]
    diagonal: Option<DiagonalArg>,
    #[arg(long = "inv-kappa", value_delimiter = ',')]
    inv_kappa: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    nu: Option<Vec<f64>>,
    /// Penalty on jumps of the physical pseudostress.
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long, value_enum)]
    solver: Option<MethodArg>,
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long = "quadrature-elevation")]
    quadrature_elevation: Option<usize>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long = "vtu-dir")]
    vtu_dir: Option<PathBuf>,
    #[arg(long = "vtu-subdivisions")]
    vtu_subdivisions: Option<usize>,
    /// Write every assembled global matrix as `row col value` lines here.
    #[arg(long = "dump-matrix")]
    dump_matrix: Option<PathBuf>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ProblemArg {
    Example1,
    Example2,
    Example3,
    Example4,
    Custom,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum DiagonalArg {
    Right,
    Left,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum MethodArg {
    Direct,
    Minres,
}

impl Overrides {
    fn load(&self) -> Result<RunConfig, CliError> {
        let problem = self.problem.map(|p| match p {
            ProblemArg::Example1 => ProblemId::Example1,
            ProblemArg::Example2 => ProblemId::Example2,
            ProblemArg::Example3 => ProblemId::Example3,
            ProblemArg::Example4 => ProblemId::Example4,
            ProblemArg::Custom => ProblemId::Custom,
        });
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                let cfg: RunConfig = toml::from_str(&text)
                    .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
                if problem.is_some_and(|p| p != cfg.problem) {
                    return Err(CliError::config("--problem conflicts with the problem of the configuration file"));
                }
                cfg
            }
            None => RunConfig::for_problem(problem.unwrap_or(ProblemId::Example1)),
        };
        if let Some(k) = self.k {
            cfg.k = k;
        }
        if let Some(m) = &self.mesh_sizes {
            cfg.mesh_sizes = m.clone();
        }
        if let Some(d) = self.diagonal {
            cfg.diagonal = match d {
                DiagonalArg::Right => DiagonalChoice::Right,
                DiagonalArg::Left => DiagonalChoice::Left,
            };
        }
        if let Some(v) = &self.inv_kappa {
            cfg.inv_kappa = Some(v.clone());
        }
        if let Some(v) = &self.nu {
            cfg.nu = Some(v.clone());
        }
        if let Some(eta) = self.eta {
            cfg.eta = eta;
        }
        if let Some(m) = self.solver {
            cfg.solver.method = match m {
                MethodArg::Direct => MethodChoice::Direct,
                MethodArg::Minres => MethodChoice::Minres,
            };
        }
        if let Some(t) = self.tolerance {
            cfg.solver.tolerance = t;
        }
        if let Some(q) = self.quadrature_elevation {
            cfg.quadrature_elevation = q;
        }
        if let Some(p) = &self.csv {
            cfg.output.csv = Some(p.clone());
        }
        if let Some(p) = &self.vtu_dir {
            cfg.output.vtu_dir = Some(p.clone());
        }
        if let Some(s) = self.vtu_subdivisions {
            cfg.vtu_subdivisions = s;
        }
        if let Some(p) = &self.dump_matrix {
            cfg.output.matrix_dir = Some(p.clone());
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::RunConvergence(o) => {
            let cfg = o.load()?;
            let tables = run::run_convergence(&cfg)?;
            run::emit_tables(&cfg, &tables, io::stdout().lock())?;
            if let Some(path) = &cfg.output.csv {
                eprintln!("wrote {}", path.display());
            }
        }
        Command::RunSingle(o) => {
            let cfg = o.load()?;
            let (_, runs) = run::run_single(&cfg)?;
            let mut out = io::stdout().lock();
            for r in &runs {
                for w in &r.solved.warnings {
                    eprintln!("warning: {w}");
                }
                let speed = r.low_permeability_speed.map(|v| format!("{v:.6e}")).unwrap_or_else(|| "-".into());
                writeln!(
                    out,
                    "inv_kappa={} nu={} n={} residual={:.3e} time={:.2}s low_permeability_mean_speed={speed}",
                    r.case.inv_kappa_label(),
                    r.case.nu,
                    r.n,
                    r.solved.report.relative_residual,
                    r.solved.report.wall_time_seconds,
                )
                .map_err(|e| CliError::io("<stdout>", e))?;
                for f in &r.files {
                    writeln!(out, "  {}", f.display()).map_err(|e| CliError::io("<stdout>", e))?;
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
