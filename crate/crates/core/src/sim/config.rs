use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{BoundaryTags, Grid, GridError, Rect};
use crate::poisson::{BcKind, SolveOptions, SolverMethod, DEFAULT_TOL};
use crate::transport::DEFAULT_CFL_SAFETY;
use crate::velocity::PotentialSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot parse scenario: {0}")]
    Parse(String),
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("no built-in scenario named `{0}`")]
    UnknownScenario(String),
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    #[serde(default = "one")]
    pub ny: usize,
    /// Solid rectangles.
    #[serde(default)]
    pub obstacles: Vec<Rect>,
    #[serde(default)]
    pub boundary: BoundaryTags,
}

fn one() -> usize {
    1
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid, GridError> {
        Grid::new(self.nx, self.ny, &self.obstacles, self.boundary)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub rect: Rect,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    /// Zero everywhere except the listed regions; later regions win.
    Indicators { regions: Vec<Region> },
    /// Each fluid cell is 1 with probability `q`.
    Bernoulli { q: f64, seed: u64 },
    /// Row-major cell values.
    Explicit { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteppingConfig {
    #[serde(default = "default_safety")]
    pub cfl_safety: f64,
    pub t_end: f64,
    /// Time between snapshots.
    pub snapshot_every: f64,
    /// Step cap; the run ends early when it is reached.
    #[serde(default)]
    pub max_steps: Option<usize>,
    /// Stop once `||rho^{n+1} - rho^n||_1 / dt` stays below `steady_tol`.
    #[serde(default = "default_steady")]
    pub steady_tol: f64,
}

fn default_safety() -> f64 {
    DEFAULT_CFL_SAFETY
}

fn default_steady() -> f64 {
    1e-12
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Pgm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub directory: Option<String>,
    #[serde(default)]
    pub formats: Vec<OutputFormat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Mode {
    #[default]
    SingleActive,
    /// Two species with their own desired velocities and a shared
    /// correction; the second starts as `1 - rho`.
    TwoSpeciesExperimental { velocity2: PotentialSpec },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub method: SolverMethod,
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: DEFAULT_TOL,
            method: SolverMethod::Auto,
        }
    }
}

impl SolverConfig {
    pub fn options(&self) -> SolveOptions {
        SolveOptions {
            tol: self.tol,
            method: self.method,
            max_iterations: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub grid: GridConfig,
    /// Pressure boundary treatment; defaults to Dirichlet-left on 1D wall
    /// grids, periodic on periodic grids and Neumann otherwise.
    #[serde(default)]
    pub bc: Option<BcKind>,
    pub velocity: PotentialSpec,
    pub initial: InitialCondition,
    pub stepping: SteppingConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub solver: SolverConfig,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let config: ScenarioConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario configs always serialize")
    }

    pub fn bc_kind(&self, g: &Grid) -> BcKind {
        self.bc.unwrap_or(if g.is_fully_periodic() {
            BcKind::Periodic
        } else if g.is_1d() {
            BcKind::DirichletLeftNeumannRight1d
        } else {
            BcKind::NeumannAllWalls
        })
    }

    /// Checks every field and builds the grid.
    pub fn validate(&self) -> Result<Grid, ConfigError> {
        let g = self.grid.build()?;
        let s = &self.stepping;
        if !(s.t_end > 0.0 && s.t_end.is_finite()) {
            return Err(invalid("stepping.t_end", format!("must be positive, got {}", s.t_end)));
        }
        if !(s.snapshot_every > 0.0 && s.snapshot_every.is_finite()) {
            return Err(invalid(
                "stepping.snapshot_every",
                format!("must be positive, got {}", s.snapshot_every),
            ));
        }
        if !(s.cfl_safety > 0.0 && s.cfl_safety < 0.5) {
            return Err(invalid("stepping.cfl_safety", format!("must lie in (0, 0.5), got {}", s.cfl_safety)));
        }
        if !(s.steady_tol >= 0.0) {
            return Err(invalid("stepping.steady_tol", format!("must be non-negative, got {}", s.steady_tol)));
        }
        if !(self.solver.tol > 0.0) {
            return Err(invalid("solver.tol", format!("must be positive, got {}", self.solver.tol)));
        }
        match &self.initial {
            InitialCondition::Bernoulli { q, .. } => {
                if !(*q > 0.0 && *q < 1.0) {
                    return Err(invalid("initial.q", format!("must lie in (0, 1), got {q}")));
                }
            }
            InitialCondition::Indicators { regions } => {
                if let Some(r) = regions.iter().find(|r| !(0.0..=1.0).contains(&r.value)) {
                    return Err(invalid("initial.regions.value", format!("must lie in [0, 1], got {}", r.value)));
                }
            }
            InitialCondition::Explicit { values } => {
                if values.len() != g.cell_count() {
                    return Err(invalid(
                        "initial.values",
                        format!("expected {} values, got {}", g.cell_count(), values.len()),
                    ));
                }
                if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                    return Err(invalid("initial.values", format!("must lie in [0, 1], got {v}")));
                }
            }
        }
        for spec in self.velocity_specs() {
            if let PotentialSpec::ExplicitPotential { values } = spec {
                if values.len() != g.cell_count() {
                    return Err(invalid(
                        "velocity.values",
                        format!("expected {} values, got {}", g.cell_count(), values.len()),
                    ));
                }
            }
        }
        let kind = self.bc_kind(&g);
        let fits = match kind {
            BcKind::Periodic => g.is_fully_periodic(),
            BcKind::DirichletLeftNeumannRight1d => g.is_1d() && !g.is_fully_periodic(),
            BcKind::NeumannAllWalls => !g.is_fully_periodic(),
        };
        if !fits {
            return Err(invalid("bc", format!("{kind:?} does not fit the grid boundary")));
        }
        Ok(g)
    }

    pub fn velocity_specs(&self) -> Vec<&PotentialSpec> {
        match &self.mode {
            Mode::SingleActive => vec![&self.velocity],
            Mode::TwoSpeciesExperimental { velocity2 } => vec![&self.velocity, velocity2],
        }
    }

    /// Same scenario on an `nx` by `ny` grid. Cell arrays cannot be resampled.
    pub fn with_resolution(&self, nx: usize, ny: usize) -> Result<Self, ConfigError> {
        if matches!(self.initial, InitialCondition::Explicit { .. }) {
            return Err(invalid("initial", "explicit cell values cannot be resampled"));
        }
        if self
            .velocity_specs()
            .iter()
            .any(|s| matches!(s, PotentialSpec::ExplicitPotential { .. }))
        {
            return Err(invalid("velocity", "explicit potentials cannot be resampled"));
        }
        let mut out = self.clone();
        out.grid.nx = nx;
        out.grid.ny = ny;
        out.validate()?;
        Ok(out)
    }

    pub fn with_seed(&self, seed: u64) -> Result<Self, ConfigError> {
        let mut out = self.clone();
        match &mut out.initial {
            InitialCondition::Bernoulli { seed: s, .. } => *s = seed,
            _ => return Err(invalid("initial.seed", "only bernoulli initial conditions take a seed")),
        }
        Ok(out)
    }
}
