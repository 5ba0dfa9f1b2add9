//! Run configuration, read from TOML.
//!
//! ```toml
//! problem = "example1"          # example1 | example2 | example3 | example4 | custom
//! k = 0                         # stress degree k + 1, velocity degree k
//! mesh_sizes = [4, 8, 16, 32]   # n, the unit square is split into n x n squares
//! diagonal = "right"            # right | left
//! inv_kappa = [1e-3, 1.0, 1e3]  # constant values, contrast values, or backgrounds
//! nu = [1.0]
//! eta = 1.0
//!
//! [solver]
//! method = "direct"             # direct | minres
//! tolerance = 1e-10
//!
//! [output]
//! csv = "table.csv"
//! vtu_dir = "fields"
//!
//! [[regions]]
//! shape = "rect"
//! x = [0.1, 0.2]
//! y = [0.1, 0.6]
//! ```
//!
//! For `example1` each `inv_kappa` entry is a constant inverse permeability.
//! `example2` uses its closed-form field and takes no `inv_kappa`. For
//! `example3` and `example4` the entries are the contrast values of the
//! regions (the obstacles in `example3`, the background in `example4`). For
//! `custom` they are background values, and each region carries its own
//! `value`.

use std::fmt;
use std::path::PathBuf;

use mdg_core::problems::Shape;
use mdg_core::solver::SolverMethod;
use mdg_core::Diagonal;
use serde::{Deserialize, Serialize};

/// Highest supported `k`.
pub const MAX_K: usize = 2;

const EXAMPLE3_REGIONS: &str = include_str!("../configs/example3.toml");
const EXAMPLE4_REGIONS: &str = include_str!("../configs/example4.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemId {
    Example1,
    Example2,
    Example3,
    Example4,
    Custom,
}

impl ProblemId {
    pub fn name(self) -> &'static str {
        match self {
            ProblemId::Example1 => "example1",
            ProblemId::Example2 => "example2",
            ProblemId::Example3 => "example3",
            ProblemId::Example4 => "example4",
            ProblemId::Custom => "custom",
        }
    }

    /// Whether an exact solution is available for error norms.
    pub fn has_exact_solution(self) -> bool {
        matches!(self, ProblemId::Example1 | ProblemId::Example2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiagonalChoice {
    Right,
    Left,
}

impl From<DiagonalChoice> for Diagonal {
    fn from(d: DiagonalChoice) -> Self {
        match d {
            DiagonalChoice::Right => Diagonal::Right,
            DiagonalChoice::Left => Diagonal::Left,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodChoice {
    Direct,
    Minres,
}

impl From<MethodChoice> for SolverMethod {
    fn from(m: MethodChoice) -> Self {
        match m {
            MethodChoice::Direct => SolverMethod::Direct,
            MethodChoice::Minres => SolverMethod::Minres,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub method: MethodChoice,
    /// Relative residual bound `|M x - b| / |b|`.
    pub tolerance: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { method: MethodChoice::Direct, tolerance: 1e-10 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Convergence table; printed to stdout when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    /// Directory for field files written by `run-single`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vtu_dir: Option<PathBuf>,
    /// Directory for coordinate dumps of every assembled global matrix.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    Rect,
    Disc,
}

/// One region of a piecewise constant inverse permeability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    pub shape: ShapeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    /// Inverse permeability inside the region; only for `custom`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
}

impl RegionConfig {
    pub fn rect(x: [f64; 2], y: [f64; 2]) -> Self {
        RegionConfig { shape: ShapeKind::Rect, x: Some(x), y: Some(y), center: None, radius: None, value: None }
    }

    /// The geometric shape, or a description of what is wrong with it.
    pub fn to_shape(&self) -> Result<Shape, String> {
        let finite = |v: &[f64]| v.iter().all(|a| a.is_finite());
        match self.shape {
            ShapeKind::Rect => {
                let (Some(x), Some(y)) = (self.x, self.y) else {
                    return Err("rect needs x = [x0, x1] and y = [y0, y1]".into());
                };
                if self.center.is_some() || self.radius.is_some() {
                    return Err("rect takes no center or radius".into());
                }
                if !finite(&x) || !finite(&y) || !(x[0] < x[1]) || !(y[0] < y[1]) {
                    return Err(format!("rect bounds must be finite and increasing, got x = {x:?}, y = {y:?}"));
                }
                Ok(Shape::Rect { x, y })
            }
            ShapeKind::Disc => {
                let (Some(center), Some(radius)) = (self.center, self.radius) else {
                    return Err("disc needs center = [cx, cy] and radius".into());
                };
                if self.x.is_some() || self.y.is_some() {
                    return Err("disc takes no x or y".into());
                }
                if !finite(&center) || !(radius > 0.0) || !radius.is_finite() {
                    return Err(format!("disc needs a finite center and positive radius, got {center:?}, {radius}"));
                }
                Ok(Shape::Disc { center, radius })
            }
        }
    }
}

/// Constant data of the `custom` problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CustomConfig {
    pub source: [f64; 2],
    pub boundary: [f64; 2],
}

impl Default for CustomConfig {
    fn default() -> Self {
        CustomConfig { source: [0.0, 0.0], boundary: [0.0, 0.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub problem: ProblemId,
    pub k: usize,
    pub mesh_sizes: Vec<usize>,
    pub diagonal: DiagonalChoice,
    /// Defaults to `[1e-3, 1, 1e3]` for example 1, `[10, 1e3, 1e5]` for
    /// examples 3 and 4 and `[1]` for `custom`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inv_kappa: Option<Vec<f64>>,
    /// Defaults to `[0.01]` for examples 3 and 4 and `[1.0]` otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<Vec<f64>>,
    /// Penalty on jumps of the physical pseudostress. The unit-viscosity
    /// system is assembled with `nu * eta`.
    pub eta: f64,
    /// Quadrature degree added to the polynomial degree for data integrals.
    pub quadrature_elevation: usize,
    /// Quadrature degree for error norms; defaults to `2 (k + 2) + 4`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_quadrature: Option<usize>,
    /// Sub-triangles per cell edge in field files.
    pub vtu_subdivisions: usize,
    pub solver: SolverConfig,
    pub output: OutputConfig,
    /// Region geometry for examples 3 and 4 and `custom`. The shipped
    /// geometry is used for the examples when empty.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub regions: Vec<RegionConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub custom: Option<CustomConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            problem: ProblemId::Example1,
            k: 0,
            mesh_sizes: vec![4, 8, 16, 32],
            diagonal: DiagonalChoice::Right,
            inv_kappa: None,
            nu: None,
            eta: 1.0,
            quadrature_elevation: 8,
            error_quadrature: None,
            vtu_subdivisions: 2,
            solver: SolverConfig::default(),
            output: OutputConfig::default(),
            regions: Vec::new(),
            custom: None,
        }
    }
}

/// Every problem found while validating a configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<String>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration:")?;
        for e in &self.0 {
            write!(f, "\n  - {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

#[derive(Deserialize)]
struct RegionFile {
    regions: Vec<RegionConfig>,
}

/// Shipped region geometry for examples 3 and 4.
pub fn default_regions(problem: ProblemId) -> Vec<RegionConfig> {
    let text = match problem {
        ProblemId::Example3 => EXAMPLE3_REGIONS,
        ProblemId::Example4 => EXAMPLE4_REGIONS,
        _ => return Vec::new(),
    };
    toml::from_str::<RegionFile>(text).map(|f| f.regions).unwrap_or_default()
}

/// Solver tolerance for the obstacle examples. At contrast `1e5` and
/// `n = 100` rounding alone leaves a relative residual of a few `1e-10`.
pub const HIGH_CONTRAST_TOLERANCE: f64 = 1e-8;

impl RunConfig {
    /// Defaults suited to a problem: the shipped geometry and the contrast
    /// values `10, 1e3, 1e5` at `n = 100` with `k = 1` and a solver tolerance
    /// of [`HIGH_CONTRAST_TOLERANCE`] for examples 3 and 4,
    /// `k = 1` with `nu` in `1e-2, 1e-1, 1` for example 2.
    pub fn for_problem(problem: ProblemId) -> Self {
        let base = RunConfig { problem, ..RunConfig::default() };
        match problem {
            ProblemId::Example1 => base,
            ProblemId::Example2 => {
                RunConfig { k: 1, nu: Some(vec![1e-2, 1e-1, 1.0]), ..base }
            }
            ProblemId::Example3 | ProblemId::Example4 => RunConfig {
                k: 1,
                mesh_sizes: vec![100],
                regions: default_regions(problem),
                solver: SolverConfig { tolerance: HIGH_CONTRAST_TOLERANCE, ..base.solver },
                ..base
            },
            ProblemId::Custom => RunConfig {
                k: 1,
                mesh_sizes: vec![16],
                custom: Some(CustomConfig::default()),
                ..base
            },
        }
    }

    /// Parse and validate.
    pub fn from_toml(text: &str) -> Result<Self, ConfigErrors> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigErrors(vec![e.to_string()]))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always representable")
    }

    pub fn inv_kappa_values(&self) -> Vec<f64> {
        self.inv_kappa.clone().unwrap_or_else(|| match self.problem {
            ProblemId::Example1 => vec![1e-3, 1.0, 1e3],
            ProblemId::Example2 => Vec::new(),
            ProblemId::Example3 | ProblemId::Example4 => vec![10.0, 1e3, 1e5],
            ProblemId::Custom => vec![1.0],
        })
    }

    pub fn nu_values(&self) -> Vec<f64> {
        self.nu.clone().unwrap_or_else(|| match self.problem {
            ProblemId::Example3 | ProblemId::Example4 => vec![1e-2],
            _ => vec![1.0],
        })
    }

    /// Regions in effect: the configured ones, or the shipped geometry.
    pub fn effective_regions(&self) -> Vec<RegionConfig> {
        if self.regions.is_empty() {
            default_regions(self.problem)
        } else {
            self.regions.clone()
        }
    }

    pub fn error_quadrature_degree(&self) -> usize {
        self.error_quadrature.unwrap_or_else(|| mdg_core::postprocess::error_quadrature_degree(self.k))
    }

    /// Check every field and report all problems at once.
    pub fn validate(&self) -> Result<(), ConfigErrors> {
        let mut errors = Vec::new();
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if self.k > MAX_K {
            errors.push(format!("k: must be between 0 and {MAX_K}, got {}", self.k));
        }
        if self.mesh_sizes.is_empty() {
            errors.push("mesh_sizes: at least one mesh size is required".into());
        }
        if self.mesh_sizes.contains(&0) {
            errors.push("mesh_sizes: every n must be at least 1".into());
        }
        match (&self.inv_kappa, self.problem) {
            (Some(_), ProblemId::Example2) => {
                errors.push("inv_kappa: example2 uses its closed-form field; remove inv_kappa".into())
            }
            (Some(v), _) if v.is_empty() => errors.push("inv_kappa: at least one value is required".into()),
            (Some(values), _) => {
                for v in values.iter().filter(|v| !positive(**v)) {
                    errors.push(format!("inv_kappa: values must be positive and finite, got {v}"));
                }
            }
            (None, _) => {}
        }
        match &self.nu {
            Some(nu) if nu.is_empty() => errors.push("nu: at least one value is required".into()),
            Some(nu) => {
                for v in nu.iter().filter(|v| !positive(**v)) {
                    errors.push(format!("nu: values must be positive and finite, got {v}"));
                }
            }
            None => {}
        }
        if !positive(self.eta) {
            errors.push(format!("eta: must be positive and finite, got {}", self.eta));
        }
        if !positive(self.solver.tolerance) {
            errors.push(format!("solver.tolerance: must be positive and finite, got {}", self.solver.tolerance));
        }
        if self.vtu_subdivisions == 0 {
            errors.push("vtu_subdivisions: must be at least 1".into());
        }
        if let Some(q) = self.error_quadrature {
            if q > mdg_core::quadrature::MAX_DEGREE {
                errors.push(format!(
                    "error_quadrature: at most {} is supported, got {q}",
                    mdg_core::quadrature::MAX_DEGREE
                ));
            }
        }
        let data_degree = 2 * (self.k + 2) + self.quadrature_elevation;
        if data_degree > mdg_core::quadrature::MAX_DEGREE {
            errors.push(format!(
                "quadrature_elevation: with k = {} at most {} is supported, got {}",
                self.k,
                mdg_core::quadrature::MAX_DEGREE.saturating_sub(2 * (self.k + 2)),
                self.quadrature_elevation
            ));
        }
        let uses_regions = matches!(self.problem, ProblemId::Example3 | ProblemId::Example4 | ProblemId::Custom);
        if !uses_regions && !self.regions.is_empty() {
            errors.push(format!("regions: {} does not take regions", self.problem.name()));
        }
        for (i, r) in self.regions.iter().enumerate() {
            if let Err(e) = r.to_shape() {
                errors.push(format!("regions[{i}]: {e}"));
            }
            match (self.problem, r.value) {
                (ProblemId::Custom, None) => errors.push(format!("regions[{i}].value: required for custom")),
                (ProblemId::Custom, Some(v)) if !positive(v) => {
                    errors.push(format!("regions[{i}].value: must be positive and finite, got {v}"))
                }
                (ProblemId::Custom, Some(_)) => {}
                (_, Some(_)) => errors.push(format!(
                    "regions[{i}].value: only custom regions carry values; {} takes them from inv_kappa",
                    self.problem.name()
                )),
                (_, None) => {}
            }
        }
        match (&self.custom, self.problem) {
            (Some(c), ProblemId::Custom) => {
                if !c.source.iter().chain(&c.boundary).all(|v| v.is_finite()) {
                    errors.push("custom: source and boundary must be finite".into());
                }
            }
            (Some(_), _) => errors.push(format!("custom: not allowed for {}", self.problem.name())),
            (None, _) => {}
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(ConfigErrors(errors))
        }
    }

    /// Extra checks for a convergence study.
    pub fn validate_convergence(&self) -> Result<(), ConfigErrors> {
        let mut errors = match self.validate() {
            Ok(()) => Vec::new(),
            Err(e) => e.0,
        };
        if !self.problem.has_exact_solution() {
            errors.push(format!("problem: {} has no exact solution for a convergence study", self.problem.name()));
        }
        if self.mesh_sizes.len() < 2 {
            errors.push("mesh_sizes: a convergence study needs at least two mesh sizes".into());
        }
        for w in self.mesh_sizes.windows(2) {
            if w[1] != 2 * w[0] {
                errors.push(format!("mesh_sizes: each n must double the previous one, got {} then {}", w[0], w[1]));
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(ConfigErrors(errors))
        }
    }
}
