//! The time loop: desired velocity, pressure correction, CFL step, upwind
//! advection, repeated until the end time or a steady state.
//!
//! [`Simulation`] exposes single steps for callers that inspect every
//! intermediate field; [`run`] drives it to completion and records
//! snapshots on a fixed time cadence.

mod config;
pub mod output;
pub mod scenarios;

use log::{debug, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::grid::{total_mass, Axis, FaceField, Grid, ScalarField};
use crate::poisson::{BcSpec, PoissonError, SolveOptions};
use crate::projection::Projector;
use crate::transport::{advect_step, cfl_dt, StepParams, TransportError};
use crate::velocity::{DesiredVelocity, VelocityError};

pub use config::{
    ConfigError, GridConfig, InitialCondition, Mode, OutputConfig, OutputFormat, Region, ScenarioConfig,
    SolverConfig, SteppingConfig,
};

/// Density at or above which a cell counts as saturated.
pub const SATURATION_THRESHOLD: f64 = 0.99;

/// Consecutive quiet steps that end a run as steady.
pub const STEADY_WINDOW: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericalError {
    #[error(transparent)]
    Poisson(#[from] PoissonError),
    #[error(transparent)]
    Velocity(#[from] VelocityError),
    #[error(transparent)]
    Transport(#[from] TransportError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("step {step} at t = {time}: {source}")]
    Step {
        step: usize,
        time: f64,
        source: NumericalError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SimWarning {
    /// `max |rho1 + rho2 - 1|` grew faster than `10 dt` per unit time.
    ConstraintDrift { step: usize, time: f64, drift: f64 },
}

/// Independent Bernoulli draws on fluid cells, in cell order.
pub fn bernoulli_init(g: &Grid, q: f64, seed: u64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..g.cell_count())
        .map(|c| {
            if g.is_fluid(c) && rng.gen_bool(q) {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    ScalarField::from_values(g, values)
}

/// The initial density of the first species.
pub fn initial_density(init: &InitialCondition, g: &Grid) -> ScalarField {
    match init {
        InitialCondition::Indicators { regions } => ScalarField::from_fn(g, |x, y| {
            regions
                .iter()
                .rev()
                .find(|r| r.rect.contains(x, y))
                .map_or(0.0, |r| r.value)
        }),
        InitialCondition::Bernoulli { q, seed } => bernoulli_init(g, *q, *seed),
        InitialCondition::Explicit { values } => ScalarField::from_values(g, values.clone()),
    }
}

/// Number of 4-connected components of saturated cells.
pub fn saturated_components(rho: &ScalarField, g: &Grid) -> usize {
    g.count_components(|c| rho[c] >= SATURATION_THRESHOLD)
}

/// Fields used by one step, all taken at the start of the step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub dt: f64,
    /// Desired velocity of each species.
    pub u: Vec<FaceField>,
    pub w: FaceField,
    pub p: ScalarField,
    /// `||rho^{n+1} - rho^n||_1 / dt`, largest over species.
    pub change_rate: f64,
}

#[derive(Debug, Clone)]
struct Species {
    rho: ScalarField,
    desired: DesiredVelocity,
    /// Cached `U` for time-independent velocities.
    u: Option<FaceField>,
}

/// A running scenario.
#[derive(Debug, Clone)]
pub struct Simulation {
    grid: Grid,
    projector: Projector,
    opts: SolveOptions,
    params: StepParams,
    species: Vec<Species>,
    time: f64,
    step: usize,
}

impl Simulation {
    pub fn new(config: &ScenarioConfig) -> Result<Self, SimError> {
        let g = config.validate()?;
        let rho = initial_density(&config.initial, &g);
        let mut densities = vec![rho.clone()];
        if matches!(config.mode, Mode::TwoSpeciesExperimental { .. }) {
            densities.push(rho.complement(&g));
        }
        Self::with_densities(config, &g, densities)
    }

    /// Starts from the given densities, one per velocity of the config.
    pub fn with_densities(config: &ScenarioConfig, g: &Grid, densities: Vec<ScalarField>) -> Result<Self, SimError> {
        let fail = |source: NumericalError| SimError::Step {
            step: 0,
            time: 0.0,
            source,
        };
        let opts = config.solver.options();
        let specs = config.velocity_specs();
        assert_eq!(specs.len(), densities.len(), "one density per species");
        let mut species = Vec::new();
        for (spec, rho) in specs.into_iter().zip(densities) {
            let desired = DesiredVelocity::prepare(spec, g, &opts).map_err(|e| fail(e.into()))?;
            let u = match &desired {
                DesiredVelocity::Static(u) => Some(u.clone()),
                DesiredVelocity::Chemotaxis { .. } => None,
            };
            species.push(Species { rho, desired, u });
        }
        let projector = Projector::new(g, BcSpec::new(config.bc_kind(g))).map_err(|e| fail(e.into()))?;
        let params = StepParams::new(config.stepping.cfl_safety, None)
            .map_err(|e| fail(e.into()))?;
        Ok(Simulation {
            grid: g.clone(),
            projector,
            opts,
            params,
            species,
            time: 0.0,
            step: 0,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn steps(&self) -> usize {
        self.step
    }

    pub fn species_count(&self) -> usize {
        self.species.len()
    }

    /// Density of species `i`; species 0 is the active one.
    pub fn density(&self, i: usize) -> &ScalarField {
        &self.species[i].rho
    }

    /// Second density: the tracked species in two-species mode, `1 - rho`
    /// otherwise.
    pub fn passive_density(&self) -> ScalarField {
        match self.species.get(1) {
            Some(s) => s.rho.clone(),
            None => self.species[0].rho.complement(&self.grid),
        }
    }

    fn desired_velocities(&self) -> Result<Vec<FaceField>, NumericalError> {
        self.species
            .iter()
            .map(|s| match &s.u {
                Some(u) => Ok(u.clone()),
                None => Ok(s.desired.evaluate(&s.rho, &self.grid)?),
            })
            .collect()
    }

    fn wrap(&self, source: NumericalError) -> SimError {
        SimError::Step {
            step: self.step,
            time: self.time,
            source,
        }
    }

    /// `(U_i, w, p)` for the current state without advancing.
    pub fn velocities(&self) -> Result<(Vec<FaceField>, FaceField, ScalarField), SimError> {
        let u = self.desired_velocities().map_err(|e| self.wrap(e))?;
        let pairs: Vec<(&ScalarField, &FaceField)> = self.species.iter().map(|s| &s.rho).zip(&u).collect();
        let (w, p) = self
            .projector
            .correct_sum(&pairs, &self.opts)
            .map_err(|e| self.wrap(e.into()))?;
        Ok((u, w, p))
    }

    /// Advances one step of at most `max_dt`.
    pub fn advance(&mut self, max_dt: Option<f64>) -> Result<StepRecord, SimError> {
        let (u, w, p) = self.velocities()?;
        let params = match max_dt {
            Some(cap) => self.params.with_dt_cap(cap),
            None => self.params,
        };
        let mut dt = f64::INFINITY;
        for ui in &u {
            dt = dt.min(cfl_dt(ui, &w, &self.grid, &params).map_err(|e| self.wrap(e.into()))?);
        }
        let mut next = Vec::with_capacity(self.species.len());
        let mut change_rate: f64 = 0.0;
        for (s, ui) in self.species.iter().zip(&u) {
            let rho = advect_step(&s.rho, ui, &w, dt, &self.grid).map_err(|e| self.wrap(e.into()))?;
            change_rate = change_rate.max(rho.l1_distance(&s.rho, &self.grid) / dt);
            next.push(rho);
        }
        for (s, rho) in self.species.iter_mut().zip(next) {
            s.rho = rho;
        }
        self.time += dt;
        self.step += 1;
        Ok(StepRecord {
            dt,
            u,
            w,
            p,
            change_rate,
        })
    }

    fn diagnostics(&self, dt: f64, winf: f64) -> Diagnostics {
        let g = &self.grid;
        let rho = &self.species[0].rho;
        let (min, max) = rho.fluid_range(g);
        let second = self.passive_density();
        let drift = match self.species.get(1) {
            Some(s) => (0..g.cell_count())
                .filter(|&c| g.is_fluid(c))
                .map(|c| (rho[c] + s.rho[c] - 1.0).abs())
                .fold(0.0, f64::max),
            None => 0.0,
        };
        Diagnostics {
            time: self.time,
            dt,
            mass1: total_mass(rho, g),
            mass2: total_mass(&second, g),
            min,
            max,
            winf,
            components: saturated_components(rho, g),
            drift,
        }
    }
}

/// Quantities recorded with every snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub time: f64,
    /// Step that landed on this snapshot; 0 for the initial one.
    pub dt: f64,
    pub mass1: f64,
    /// Mass of the second species (`1 - rho` in single-active mode).
    pub mass2: f64,
    pub min: f64,
    pub max: f64,
    /// `max |w|` over faces at the last step.
    pub winf: f64,
    /// Saturated 4-connected components of the first species.
    pub components: usize,
    /// `max |rho1 + rho2 - 1|`; 0 in single-active mode.
    pub drift: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    /// One density per species.
    pub rho: Vec<ScalarField>,
    /// Pressure of the last step; zero for the initial snapshot.
    pub p: ScalarField,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    EndTime,
    Steady,
    StepCap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: Grid,
    pub snapshots: Vec<Snapshot>,
    pub dt_history: Vec<f64>,
    pub termination: Termination,
    pub warnings: Vec<SimWarning>,
}

impl Trajectory {
    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("a trajectory holds the initial snapshot")
    }

    /// The snapshot taken at time `t`, if any.
    pub fn at_time(&self, t: f64) -> Option<&Snapshot> {
        self.snapshots.iter().find(|s| (s.time - t).abs() <= 1e-12 * t.max(1.0))
    }
}

/// Runs a scenario to its end time or steady state.
pub fn run(config: &ScenarioConfig) -> Result<Trajectory, SimError> {
    let mut sim = Simulation::new(config)?;
    drive(&mut sim, config)
}

/// Runs a two-species scenario; the config's mode must name the second
/// velocity.
pub fn run_two_species(config: &ScenarioConfig) -> Result<Trajectory, SimError> {
    if !matches!(config.mode, Mode::TwoSpeciesExperimental { .. }) {
        return Err(ConfigError::Invalid {
            field: "mode",
            reason: "two-species runs need mode two_species_experimental".into(),
        }
        .into());
    }
    run(config)
}

/// Drives an existing simulation to the config's end time.
pub fn drive(sim: &mut Simulation, config: &ScenarioConfig) -> Result<Trajectory, SimError> {
    let stepping = &config.stepping;
    let snapshot = |sim: &Simulation, dt: f64, w: Option<&FaceField>, p: Option<&ScalarField>| Snapshot {
        step: sim.step,
        time: sim.time,
        rho: sim.species.iter().map(|s| s.rho.clone()).collect(),
        p: p.cloned().unwrap_or_else(|| ScalarField::zeros(&sim.grid)),
        diagnostics: sim.diagnostics(dt, w.map_or(0.0, |w| w.max_abs(Axis::X).max(w.max_abs(Axis::Y)))),
    };
    let mut snapshots = vec![snapshot(sim, 0.0, None, None)];
    let mut dt_history = Vec::new();
    let mut warnings = Vec::new();
    let mut quiet = 0;
    let mut next_index = 1usize;
    let termination = loop {
        let next_snapshot = (next_index as f64 * stepping.snapshot_every).min(stepping.t_end);
        let cap = next_snapshot - sim.time;
        let record = sim.advance(Some(cap))?;
        let landed = record.dt >= cap;
        if landed {
            sim.time = next_snapshot;
        }
        dt_history.push(record.dt);
        let drift = sim.diagnostics(record.dt, 0.0).drift;
        if sim.species.len() > 1 && drift > 10.0 * record.dt * sim.time {
            warn!("constraint drift {drift:e} at step {} (t = {})", sim.step, sim.time);
            warnings.push(SimWarning::ConstraintDrift {
                step: sim.step,
                time: sim.time,
                drift,
            });
        }
        quiet = if record.change_rate <= stepping.steady_tol { quiet + 1 } else { 0 };
        let steady = quiet >= STEADY_WINDOW;
        let at_end = landed && next_snapshot >= stepping.t_end;
        let capped = stepping.max_steps.is_some_and(|m| sim.step >= m);
        if landed {
            next_index += 1;
        }
        if landed || steady || at_end || capped {
            snapshots.push(snapshot(sim, record.dt, Some(&record.w), Some(&record.p)));
        }
        if at_end {
            break Termination::EndTime;
        }
        if steady {
            debug!("steady after {} steps at t = {}", sim.step, sim.time);
            break Termination::Steady;
        }
        if capped {
            break Termination::StepCap;
        }
    };
    Ok(Trajectory {
        grid: sim.grid.clone(),
        snapshots,
        dt_history,
        termination,
        warnings,
    })
}
