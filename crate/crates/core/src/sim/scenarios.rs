//! Built-in scenarios. Each comes at full resolution and as a `-desk`
//! variant that runs in seconds.

use crate::grid::{corridor_obstacles, BoundaryTags, Rect};
use crate::velocity::PotentialSpec;

use super::{
    ConfigError, GridConfig, InitialCondition, Mode, OutputConfig, OutputFormat, Region, ScenarioConfig,
    SolverConfig, SteppingConfig,
};

pub const KS_SEED: u64 = 20_240_601;

/// Target strip for the corridor's geodesic; it selects the last cell column.
pub const RIGHT_WALL: Rect = Rect::new(0.999, 1.0, 0.0, 1.0);

/// Names of every built-in, full resolution first.
pub fn names() -> Vec<String> {
    BASES
        .iter()
        .flat_map(|b| [b.to_string(), format!("{b}-desk")])
        .collect()
}

const BASES: [&str; 6] = ["wall-1d-a", "wall-1d-b", "square-u1", "corridor", "ks-q10", "ks-q50"];

pub fn builtin(name: &str) -> Result<ScenarioConfig, ConfigError> {
    let (base, desk) = match name.strip_suffix("-desk") {
        Some(b) => (b, true),
        None => (name, false),
    };
    let mut config = match base {
        "wall-1d-a" => wall_1d(
            vec![region(0.1, 0.9, 0.0, 1.0, 0.5), region(0.9, 1.0, 0.0, 1.0, 1.0)],
            if desk { 100 } else { 200 },
        ),
        "wall-1d-b" => wall_1d(vec![region(0.3, 0.5, 0.0, 1.0, 1.0)], if desk { 100 } else { 200 }),
        "square-u1" => square_u1(if desk { 64 } else { 300 }),
        "corridor" => corridor(if desk { 150 } else { 300 }),
        "ks-q10" => chemotaxis(0.1, if desk { 64 } else { 300 }),
        "ks-q50" => chemotaxis(0.5, if desk { 64 } else { 300 }),
        _ => return Err(ConfigError::UnknownScenario(name.to_string())),
    };
    config.name = name.to_string();
    Ok(config)
}

fn region(x0: f64, x1: f64, y0: f64, y1: f64, value: f64) -> Region {
    Region {
        rect: Rect::new(x0, x1, y0, y1),
        value,
    }
}

fn stepping(t_end: f64, snapshot_every: f64) -> SteppingConfig {
    SteppingConfig {
        cfl_safety: crate::transport::DEFAULT_CFL_SAFETY,
        t_end,
        snapshot_every,
        max_steps: None,
        steady_tol: 1e-12,
    }
}

fn base(grid: GridConfig, velocity: PotentialSpec, initial: InitialCondition, stepping: SteppingConfig) -> ScenarioConfig {
    ScenarioConfig {
        name: String::new(),
        grid,
        bc: None,
        velocity,
        initial,
        stepping,
        output: OutputConfig {
            directory: None,
            formats: vec![OutputFormat::Csv, OutputFormat::Pgm],
        },
        mode: Mode::SingleActive,
        solver: SolverConfig::default(),
    }
}

fn wall_1d(regions: Vec<Region>, nx: usize) -> ScenarioConfig {
    base(
        GridConfig {
            nx,
            ny: 1,
            obstacles: vec![],
            boundary: BoundaryTags::WALLS,
        },
        PotentialSpec::ConstantVector { vector: [1.0, 0.0] },
        InitialCondition::Indicators { regions },
        stepping(4.0, 0.1),
    )
}

fn square_u1(n: usize) -> ScenarioConfig {
    base(
        GridConfig {
            nx: n,
            ny: n,
            obstacles: vec![],
            boundary: BoundaryTags::WALLS,
        },
        PotentialSpec::ConstantVector { vector: [1.0, 0.0] },
        InitialCondition::Indicators {
            regions: vec![region(0.3, 0.5, 0.3, 0.7, 1.0)],
        },
        stepping(3.0, 0.1),
    )
}

fn corridor(n: usize) -> ScenarioConfig {
    base(
        GridConfig {
            nx: n,
            ny: n,
            obstacles: corridor_obstacles().to_vec(),
            boundary: BoundaryTags::WALLS,
        },
        PotentialSpec::GeodesicToTarget {
            target: vec![RIGHT_WALL],
        },
        InitialCondition::Indicators {
            regions: vec![region(0.1, 0.25, 0.3, 0.7, 1.0)],
        },
        stepping(6.0, 0.05),
    )
}

fn chemotaxis(q: f64, n: usize) -> ScenarioConfig {
    base(
        GridConfig {
            nx: n,
            ny: n,
            obstacles: vec![],
            boundary: BoundaryTags::PERIODIC,
        },
        PotentialSpec::Chemotaxis,
        InitialCondition::Bernoulli { q, seed: KS_SEED },
        stepping(80.0, 1.0),
    )
}
