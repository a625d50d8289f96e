use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use satmix::exact1d::{exact_entropy_solution, PiecewiseConstant1D};
use satmix::ot1d::{jko_step, Density1D, JkoParams};
use satmix::sim::output::write_trajectory;
use satmix::sim::scenarios;
use satmix::sim::{run, ConfigError, InitialCondition, OutputFormat, ScenarioConfig, SimError, Simulation};
use satmix::velocity::PotentialSpec;

/// Congestion-constrained transport of saturated mixtures.
#[derive(Parser)]
#[command(name = "satmix", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write snapshots and diagnostics.
    Run {
        /// Scenario file (JSON) or built-in name.
        config: String,
        /// Output directory; defaults to the config's, then `out/<name>`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed for Bernoulli initial data.
        #[arg(long)]
        seed: Option<u64>,
        /// Grid size as `NX` or `NX,NY`.
        #[arg(long)]
        resolution: Option<String>,
    },
    /// Compare a 1D scenario with its entropy solution over several grids.
    Oracle1d {
        config: String,
        /// Comparison time; defaults to 0.2 or the end time if sooner.
        #[arg(long)]
        time: Option<f64>,
        #[arg(long, value_delimiter = ',', default_value = "50,100,200,400")]
        resolutions: Vec<usize>,
    },
    /// Step a 1D scenario with JKO and the upwind solver side by side.
    Jko {
        config: String,
        #[arg(long, default_value_t = 10)]
        steps: usize,
        /// Number of cells, at most 64; defaults to the config's.
        #[arg(long)]
        resolution: Option<usize>,
        /// Directory for `fv.csv` and `jko.csv`, one row per step.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Built-in scenarios.
    Scenarios {
        #[command(subcommand)]
        action: ScenarioAction,
    },
}

#[derive(Subcommand)]
enum ScenarioAction {
    List,
    /// Print a built-in as JSON.
    Emit { name: String },
}

enum Failure {
    Config(String),
    Numerical(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(c) => c.into(),
            other => Failure::Numerical(other.to_string()),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Numerical(format!("cannot write {}: {e}", path.display()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            out,
            seed,
            resolution,
        } => cmd_run(&config, out, seed, resolution.as_deref()),
        Command::Oracle1d {
            config,
            time,
            resolutions,
        } => cmd_oracle1d(&config, time, &resolutions),
        Command::Jko {
            config,
            steps,
            resolution,
            out,
        } => cmd_jko(&config, steps, resolution, out),
        Command::Scenarios { action } => match action {
            ScenarioAction::List => Ok(scenarios::names().join("\n")),
            ScenarioAction::Emit { name } => scenarios::builtin(&name)
                .map(|c| c.to_json())
                .map_err(Failure::from),
        },
    };
    match result {
        Ok(text) => {
            let _ = writeln!(std::io::stdout(), "{text}");
            ExitCode::SUCCESS
        }
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
    }
}

/// Reads a scenario file, or a built-in when no such file exists.
fn load(source: &str) -> Result<ScenarioConfig, Failure> {
    let path = Path::new(source);
    if path.exists() {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
        Ok(ScenarioConfig::from_json(&text)?)
    } else {
        Ok(scenarios::builtin(source)?)
    }
}

fn parse_resolution(text: &str) -> Result<(usize, Option<usize>), Failure> {
    let bad = || Failure::Config(format!("invalid `--resolution`: expected NX or NX,NY, got `{text}`"));
    let mut parts = text.split(',').map(|p| p.trim().parse::<usize>().map_err(|_| bad()));
    let nx = parts.next().ok_or_else(bad)??;
    let ny = parts.next().transpose()?;
    if parts.next().is_some() {
        return Err(bad());
    }
    Ok((nx, ny))
}

fn cmd_run(source: &str, out: Option<PathBuf>, seed: Option<u64>, resolution: Option<&str>) -> Result<String, Failure> {
    let mut config = load(source)?;
    if let Some(text) = resolution {
        let (nx, ny) = parse_resolution(text)?;
        let ny = ny.unwrap_or(if config.grid.ny == 1 { 1 } else { nx });
        config = config.with_resolution(nx, ny)?;
    }
    if let Some(seed) = seed {
        config = config.with_seed(seed)?;
    }
    let dir = out
        .or_else(|| config.output.directory.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out").join(if config.name.is_empty() { "run" } else { &config.name }));
    let formats = if config.output.formats.is_empty() {
        vec![OutputFormat::Csv]
    } else {
        config.output.formats.clone()
    };
    let traj = run(&config)?;
    let written = write_trajectory(&traj, &dir, &formats).map_err(|e| io_failure(&dir, e))?;
    let last = traj.last();
    let d = last.diagnostics;
    let mut text = format!(
        "{}: {:?} after {} steps at t = {}\nmass {:.12} range [{:.3e}, {:.6}] components {}\n{} files in {}",
        if config.name.is_empty() { source } else { &config.name },
        traj.termination,
        last.step,
        last.time,
        d.mass1,
        d.min,
        d.max,
        d.components,
        written.len(),
        dir.display()
    );
    for w in &traj.warnings {
        write!(text, "\nwarning: {w:?}").unwrap();
    }
    Ok(text)
}

/// The 1D initial datum as a resolution-free profile.
fn profile_1d(config: &ScenarioConfig) -> Result<PiecewiseConstant1D, Failure> {
    let bad = |reason: &str| Failure::Config(reason.to_string());
    match &config.initial {
        InitialCondition::Indicators { regions } => {
            let mut cuts = vec![0.0, 1.0];
            for r in regions {
                cuts.extend([r.rect.x0.clamp(0.0, 1.0), r.rect.x1.clamp(0.0, 1.0)]);
            }
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            let values = cuts
                .windows(2)
                .map(|w| {
                    let x = 0.5 * (w[0] + w[1]);
                    regions
                        .iter()
                        .rev()
                        .find(|r| r.rect.contains(x, 0.5))
                        .map_or(0.0, |r| r.value)
                })
                .collect();
            PiecewiseConstant1D::new(cuts, values).map_err(|e| bad(&e.to_string()))
        }
        InitialCondition::Explicit { values } => {
            PiecewiseConstant1D::from_cells(values.clone()).map_err(|e| bad(&e.to_string()))
        }
        InitialCondition::Bernoulli { .. } => Err(bad("the 1D oracles need indicator or explicit initial data")),
    }
}

fn require_1d(config: &ScenarioConfig) -> Result<(), Failure> {
    if config.grid.ny != 1 || !config.grid.obstacles.is_empty() {
        return Err(Failure::Config("`grid`: the 1D oracles need an obstacle-free grid with ny = 1".into()));
    }
    Ok(())
}

fn cmd_oracle1d(source: &str, time: Option<f64>, resolutions: &[usize]) -> Result<String, Failure> {
    let config = load(source)?;
    require_1d(&config)?;
    let u = match config.velocity {
        PotentialSpec::ConstantVector { vector } => vector[0],
        _ => return Err(Failure::Config("`velocity`: the 1D oracle needs a constant vector".into())),
    };
    let t = time.unwrap_or(config.stepping.t_end.min(0.2));
    let profile = profile_1d(&config)?;
    let mut text = format!("{source} at t = {t}, U = {u}\n{:>6} {:>12} {:>12} {:>8}", "nx", "L1", "Linf", "order");
    let mut previous: Option<(usize, f64)> = None;
    for &nx in resolutions {
        let mut c = config.with_resolution(nx, 1)?;
        c.stepping.t_end = t;
        c.stepping.snapshot_every = t;
        c.stepping.max_steps = None;
        let traj = run(&c)?;
        let solver = traj.last().rho[0].values().to_vec();
        let oracle = exact_entropy_solution(&profile, u, t, nx).cell_averages(nx);
        let diffs: Vec<f64> = solver.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).collect();
        let l1 = diffs.iter().sum::<f64>() / nx as f64;
        let linf = diffs.iter().cloned().fold(0.0, f64::max);
        let order = previous.map(|(n0, e0)| (e0 / l1).ln() / (nx as f64 / n0 as f64).ln());
        let order = order.map_or("-".to_string(), |o| format!("{o:.2}"));
        write!(text, "\n{nx:>6} {l1:>12.4e} {linf:>12.4e} {order:>8}").unwrap();
        previous = Some((nx, l1));
    }
    Ok(text)
}

fn cmd_jko(source: &str, steps: usize, resolution: Option<usize>, out: Option<PathBuf>) -> Result<String, Failure> {
    let mut config = load(source)?;
    require_1d(&config)?;
    if let Some(nx) = resolution {
        config = config.with_resolution(nx, 1)?;
    }
    let n = config.grid.nx;
    if n > 64 {
        return Err(Failure::Config(format!("`grid.nx`: JKO runs need at most 64 cells, got {n}")));
    }
    let x = |k: usize| (k as f64 + 0.5) / n as f64;
    let d1: Vec<f64> = match &config.velocity {
        PotentialSpec::ConstantVector { vector } => (0..n).map(|k| -vector[0] * x(k)).collect(),
        PotentialSpec::ExplicitPotential { values } => values.clone(),
        _ => return Err(Failure::Config("`velocity`: JKO runs need a constant or explicit potential".into())),
    };
    let d2 = vec![0.0; n];
    let mut fv_config = config.clone();
    fv_config.velocity = PotentialSpec::ExplicitPotential { values: d1.clone() };
    fv_config.validate()?;
    let mut sim = Simulation::new(&fv_config)?;
    let numerical = |e: satmix::ot1d::OtError| Failure::Numerical(e.to_string());
    let mut jko = Density1D::new(sim.density(0).values().to_vec()).map_err(numerical)?;
    let mut fv_rows = vec![row(0.0, sim.density(0).values())];
    let mut jko_rows = vec![row(0.0, jko.values())];
    let mut text = format!("{:>4} {:>10} {:>14} {:>12} {:>10}", "step", "t", "objective", "L1 gap", "stop");
    for step in 1..=steps {
        let rec = sim.advance(None)?;
        let outcome = jko_step(&jko, &d1, &d2, &JkoParams::new(rec.dt)).map_err(numerical)?;
        jko = outcome.rho;
        let fv = Density1D::new(sim.density(0).values().to_vec()).map_err(numerical)?;
        write!(
            text,
            "\n{step:>4} {:>10.5} {:>14.6e} {:>12.4e} {:>10}",
            sim.time(),
            outcome.objective,
            jko.l1_distance(&fv),
            format!("{:?}", outcome.termination)
        )
        .unwrap();
        fv_rows.push(row(sim.time(), fv.values()));
        jko_rows.push(row(sim.time(), jko.values()));
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(&dir).map_err(|e| io_failure(&dir, e))?;
        for (name, rows) in [("fv.csv", fv_rows), ("jko.csv", jko_rows)] {
            let path = dir.join(name);
            std::fs::write(&path, rows.join("\n") + "\n").map_err(|e| io_failure(&path, e))?;
        }
    }
    Ok(text)
}

fn row(t: f64, values: &[f64]) -> String {
    std::iter::once(t)
        .chain(values.iter().copied())
        .map(|v| format!("{v:.16e}"))
        .collect::<Vec<_>>()
        .join(",")
}
