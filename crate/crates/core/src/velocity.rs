//! Desired velocity fields: constant vectors, descent directions of a
//! potential, geodesic distance fields and chemotactic drift.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Axis, AxisBoundary, FaceField, Grid, Rect, ScalarField};
use crate::poisson::{assemble_laplacian, solve_chemoattractant_with, BcSpec, LinearSystem, PoissonError, SolveOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VelocityError {
    #[error("geodesic target contains no fluid cell")]
    EmptyTarget,
    #[error("geodesic target includes solid cell {0}")]
    TargetOnSolid(usize),
    #[error("explicit potential has {got} values, grid has {expected} cells")]
    PotentialLength { expected: usize, got: usize },
    #[error("{0} fluid cells are unreachable from the target")]
    UnreachableCells(usize),
    #[error(transparent)]
    Poisson(#[from] PoissonError),
}

/// How the desired velocity `U` is obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    /// The same vector on every open face.
    ConstantVector { vector: [f64; 2] },
    /// `U = -grad D` for cell values `D`, row-major.
    ExplicitPotential { values: Vec<f64> },
    /// `U = -grad D` with `D` the geodesic distance to the fluid cells
    /// overlapping any of the rectangles.
    GeodesicToTarget { target: Vec<Rect> },
    /// `U = grad S` with `-Lap S = rho - mean(rho)`, re-solved every step.
    Chemotaxis,
}

/// Two-point difference `(phi+ - phi-) / h` on every open face.
pub fn face_gradient(phi: &ScalarField, g: &Grid) -> FaceField {
    FaceField::from_open_faces(g, |axis, m, p| (phi[p] - phi[m]) / g.spacing(axis))
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Tentative {
    dist: f64,
    cell: usize,
}

impl Eq for Tentative {}

impl PartialOrd for Tentative {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Tentative {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist.total_cmp(&other.dist).then(self.cell.cmp(&other.cell))
    }
}

/// Chebyshev radius around each target cell that starts from exact
/// Euclidean distances.
const EXACT_RADIUS: isize = 2;

/// First-order fast marching solution of `|grad D| = 1` with `D = 0` on the
/// target cells. Fluid cells within two cells of the target, seen through an
/// all-fluid box, start from their exact distance. Solid cells report 0;
/// fluid cells the front never reaches hold `+inf`.
pub fn fast_march_distance(g: &Grid, target: &[bool]) -> Result<ScalarField, VelocityError> {
    let n = g.cell_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut accepted = vec![false; n];
    let mut heap = BinaryHeap::new();
    for c in (0..n).filter(|&c| target[c]) {
        if g.is_solid(c) {
            return Err(VelocityError::TargetOnSolid(c));
        }
        dist[c] = 0.0;
    }
    if !target.iter().any(|&t| t) {
        return Err(VelocityError::EmptyTarget);
    }
    let (dx, dy) = (g.dx(), g.dy());
    for c in (0..n).filter(|&c| target[c]) {
        for (nb, di, dj) in box_neighborhood(g, c) {
            let d = (di as f64 * dx).hypot(dj as f64 * dy);
            if d < dist[nb] {
                dist[nb] = d;
            }
        }
    }
    for c in (0..n).filter(|&c| dist[c].is_finite()) {
        heap.push(Reverse(Tentative { dist: dist[c], cell: c }));
    }
    while let Some(Reverse(Tentative { dist: d, cell })) = heap.pop() {
        if accepted[cell] || d > dist[cell] {
            continue;
        }
        accepted[cell] = true;
        for nb in g.neighbors(cell).into_iter().flatten() {
            if accepted[nb] {
                continue;
            }
            let [l, r, b, t] = g.neighbors(nb);
            let known = |c: Option<usize>| c.filter(|&c| accepted[c]).map_or(f64::INFINITY, |c| dist[c]);
            let a = known(l).min(known(r));
            let bb = known(b).min(known(t));
            let candidate = eikonal_update(a, dx, bb, dy);
            if candidate < dist[nb] {
                dist[nb] = candidate;
                heap.push(Reverse(Tentative { dist: candidate, cell: nb }));
            }
        }
    }
    for c in 0..n {
        if g.is_solid(c) {
            dist[c] = 0.0;
        }
    }
    Ok(ScalarField::from_raw(dist))
}

/// Cells at offsets `(di, dj)` within [`EXACT_RADIUS`] of `c` such that the
/// whole box spanned by `c` and the cell is fluid.
fn box_neighborhood(g: &Grid, c: usize) -> Vec<(usize, isize, isize)> {
    let (i, j) = g.cell_coords(c);
    let bc = g.boundary();
    let shift = |pos: usize, d: isize, n: usize, periodic: bool| -> Option<usize> {
        let q = pos as isize + d;
        if periodic {
            Some(q.rem_euclid(n as isize) as usize)
        } else {
            (0..n as isize).contains(&q).then_some(q as usize)
        }
    };
    let (px, py) = (bc.x == AxisBoundary::Periodic, bc.y == AxisBoundary::Periodic);
    let r = EXACT_RADIUS;
    let ry = if g.is_1d() { 0 } else { r };
    let mut out = Vec::new();
    for dj in -ry..=ry {
        for di in -r..=r {
            let fluid_box = (0..=di.abs()).all(|a| {
                (0..=dj.abs()).all(|b| {
                    let ci = shift(i, a * di.signum(), g.nx(), px);
                    let cj = shift(j, b * dj.signum(), g.ny(), py);
                    matches!((ci, cj), (Some(ci), Some(cj)) if g.is_fluid(g.cell_index(ci, cj)))
                })
            });
            if fluid_box {
                let ci = shift(i, di, g.nx(), px).unwrap();
                let cj = shift(j, dj, g.ny(), py).unwrap();
                out.push((g.cell_index(ci, cj), di, dj));
            }
        }
    }
    out
}

/// Upwind solution of `((D - a)/dx)^2 + ((D - b)/dy)^2 = 1`, dropping a
/// direction whose neighbor is unknown or too far behind.
fn eikonal_update(a: f64, dx: f64, b: f64, dy: f64) -> f64 {
    let one_sided = (a + dx).min(b + dy);
    if !a.is_finite() || !b.is_finite() {
        return one_sided;
    }
    let (wa, wb) = (1.0 / (dx * dx), 1.0 / (dy * dy));
    let qa = wa + wb;
    let qb = -2.0 * (a * wa + b * wb);
    let qc = a * a * wa + b * b * wb - 1.0;
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < 0.0 {
        return one_sided;
    }
    let d = (-qb + disc.sqrt()) / (2.0 * qa);
    if d >= a.max(b) {
        d
    } else {
        one_sided
    }
}

/// Fluid cells that overlap any of the rectangles with positive area, so a
/// thin strip along a wall selects the boundary cells at every resolution.
pub fn cells_in(g: &Grid, rects: &[Rect]) -> Vec<bool> {
    let (hx, hy) = (0.5 * g.dx(), 0.5 * g.dy());
    let overlaps = |a0: f64, a1: f64, b0: f64, b1: f64| a1.min(b1) - a0.max(b0) > 1e-9;
    (0..g.cell_count())
        .map(|c| {
            let (x, y) = g.cell_center(c);
            g.is_fluid(c)
                && rects
                    .iter()
                    .any(|r| overlaps(x - hx, x + hx, r.x0, r.x1) && overlaps(y - hy, y + hy, r.y0, r.y1))
        })
        .collect()
}

/// A desired velocity prepared for repeated evaluation: static fields are
/// computed once, chemotaxis keeps its Laplacian.
#[derive(Debug, Clone)]
pub enum DesiredVelocity {
    Static(FaceField),
    Chemotaxis { system: LinearSystem, opts: SolveOptions },
}

impl DesiredVelocity {
    pub fn prepare(spec: &PotentialSpec, g: &Grid, opts: &SolveOptions) -> Result<Self, VelocityError> {
        Ok(match spec {
            PotentialSpec::ConstantVector { vector } => {
                DesiredVelocity::Static(FaceField::from_open_faces(g, |axis, _, _| match axis {
                    Axis::X => vector[0],
                    Axis::Y => vector[1],
                }))
            }
            PotentialSpec::ExplicitPotential { values } => {
                if values.len() != g.cell_count() {
                    return Err(VelocityError::PotentialLength {
                        expected: g.cell_count(),
                        got: values.len(),
                    });
                }
                let d = ScalarField::from_values(g, values.clone());
                DesiredVelocity::Static(face_gradient(&d, g).scaled(-1.0))
            }
            PotentialSpec::GeodesicToTarget { target } => {
                let d = fast_march_distance(g, &cells_in(g, target))?;
                let unreachable = (0..g.cell_count()).filter(|&c| g.is_fluid(c) && d[c].is_infinite()).count();
                if unreachable > 0 {
                    return Err(VelocityError::UnreachableCells(unreachable));
                }
                DesiredVelocity::Static(face_gradient(&d, g).scaled(-1.0))
            }
            PotentialSpec::Chemotaxis => DesiredVelocity::Chemotaxis {
                system: assemble_laplacian(g, &BcSpec::for_grid(g))?,
                opts: *opts,
            },
        })
    }

    pub fn is_time_dependent(&self) -> bool {
        matches!(self, DesiredVelocity::Chemotaxis { .. })
    }

    pub fn evaluate(&self, rho: &ScalarField, g: &Grid) -> Result<FaceField, VelocityError> {
        match self {
            DesiredVelocity::Static(u) => Ok(u.clone()),
            DesiredVelocity::Chemotaxis { system, opts } => {
                let s = solve_chemoattractant_with(system, g, rho, opts)?;
                Ok(face_gradient(&s, g))
            }
        }
    }
}

/// One-shot evaluation of a desired velocity for the density `rho`.
pub fn desired_velocity(spec: &PotentialSpec, rho: &ScalarField, g: &Grid) -> Result<FaceField, VelocityError> {
    DesiredVelocity::prepare(spec, g, &SolveOptions::default())?.evaluate(rho, g)
}
