//! Snapshot and diagnostic files.
//!
//! Fields are written as `ny` comma-separated rows of `nx` values with 17
//! significant digits, the bottom row (`j = 0`) first. Images are binary
//! 8-bit PGM with `rho = 0` white and `rho = 1` black.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::grid::{Grid, ScalarField};

use super::{Diagnostics, OutputFormat, Trajectory};

/// Column header of `diag.csv`.
pub const DIAG_HEADER: &str = "time,dt,mass1,mass2,min,max,winf,components";

pub fn field_csv(field: &ScalarField, g: &Grid) -> String {
    let mut out = String::with_capacity(24 * field.len());
    for j in 0..g.ny() {
        for i in 0..g.nx() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&format!("{:.16e}", field[g.cell_index(i, j)]));
        }
        out.push('\n');
    }
    out
}

/// Parses the output of [`field_csv`] back into row-major values.
pub fn parse_field_csv(text: &str) -> Result<Vec<f64>, std::num::ParseFloatError> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .flat_map(|l| l.split(','))
        .map(|v| v.trim().parse())
        .collect()
}

/// Binary P5 image, top row of the image at `y = 1`.
pub fn field_pgm(field: &ScalarField, g: &Grid) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", g.nx(), g.ny()).into_bytes();
    for j in (0..g.ny()).rev() {
        for i in 0..g.nx() {
            let v = field[g.cell_index(i, j)].clamp(0.0, 1.0);
            out.push((255.0 * (1.0 - v)).round() as u8);
        }
    }
    out
}

pub fn diag_row(d: &Diagnostics) -> String {
    format!(
        "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
        d.time, d.dt, d.mass1, d.mass2, d.min, d.max, d.winf, d.components
    )
}

/// Writes every snapshot and `diag.csv` into `dir`, creating it if needed.
/// Returns the paths written.
pub fn write_trajectory(traj: &Trajectory, dir: &Path, formats: &[OutputFormat]) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let g = &traj.grid;
    let mut written = Vec::new();
    let mut diag = BufWriter::new(fs::File::create(dir.join("diag.csv"))?);
    writeln!(diag, "{DIAG_HEADER}")?;
    for snap in &traj.snapshots {
        writeln!(diag, "{}", diag_row(&snap.diagnostics))?;
        let step = snap.step;
        for format in formats {
            match format {
                OutputFormat::Csv => {
                    let path = dir.join(format!("rho_{step}.csv"));
                    fs::write(&path, field_csv(&snap.rho[0], g))?;
                    written.push(path);
                    if let Some(rho2) = snap.rho.get(1) {
                        let path = dir.join(format!("rho2_{step}.csv"));
                        fs::write(&path, field_csv(rho2, g))?;
                        written.push(path);
                    }
                    let path = dir.join(format!("p_{step}.csv"));
                    fs::write(&path, field_csv(&snap.p, g))?;
                    written.push(path);
                }
                OutputFormat::Pgm => {
                    let path = dir.join(format!("rho_{step}.pgm"));
                    fs::write(&path, field_pgm(&snap.rho[0], g))?;
                    written.push(path);
                }
            }
        }
    }
    diag.flush()?;
    written.push(dir.join("diag.csv"));
    Ok(written)
}
