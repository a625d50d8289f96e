//! Masked Cartesian grids on the unit square and the field containers that
//! live on them.
//!
//! Cells are stored row-major: cell `(i, j)` has index `j * nx + i`, with `i`
//! running along x and `j` along y. A grid with `ny == 1` is one-dimensional
//! and has no y-faces.
//!
//! Faces are stored per axis. Along x, face `f` of row `j` separates cell
//! `f - 1` (its *minus* side) from cell `f` (its *plus* side). A wall axis has
//! `nx + 1` faces per row, the first and last being boundary faces; a periodic
//! axis has `nx` faces per row and face `0` wraps around to cell `nx - 1`.
//! A face is *open* when both sides exist and are fluid. Every stencil in the
//! crate iterates over open faces only, which is how walls and obstacles
//! become no-flux boundaries.

use std::collections::VecDeque;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid needs nx >= 3 and ny >= 1, got {nx}x{ny}")]
    TooSmall { nx: usize, ny: usize },
    #[error("mask rectangle {0:?} is not a valid sub-rectangle of the unit square")]
    BadRectangle([f64; 4]),
    #[error("mask leaves fewer than two fluid cells")]
    NoFluid,
    #[error("fluid region splits into {components} disconnected components")]
    Disconnected { components: usize },
}

/// Boundary treatment of one axis. Opposite sides of an axis always share
/// the same tag, so periodic sides come in pairs by construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AxisBoundary {
    #[default]
    Wall,
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct BoundaryTags {
    #[serde(default)]
    pub x: AxisBoundary,
    #[serde(default)]
    pub y: AxisBoundary,
}

impl BoundaryTags {
    pub const WALLS: BoundaryTags = BoundaryTags {
        x: AxisBoundary::Wall,
        y: AxisBoundary::Wall,
    };
    pub const PERIODIC: BoundaryTags = BoundaryTags {
        x: AxisBoundary::Periodic,
        y: AxisBoundary::Periodic,
    };
}

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]` inside the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub const fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Rect { x0, x1, y0, y1 }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    fn is_valid(&self) -> bool {
        let ok = |a: f64, b: f64| a.is_finite() && b.is_finite() && 0.0 <= a && a <= b && b <= 1.0;
        ok(self.x0, self.x1) && ok(self.y0, self.y1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
}

/// The cells on either side of a face. `None` marks the outside of a wall.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct FaceCells {
    minus: Option<usize>,
    plus: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    nx: usize,
    ny: usize,
    dx: f64,
    dy: f64,
    solid: Vec<bool>,
    bc: BoundaryTags,
    x_faces: Vec<FaceCells>,
    y_faces: Vec<FaceCells>,
}

impl Grid {
    /// Builds a grid on the unit square. Cells whose centers fall inside any
    /// of `obstacles` are solid.
    pub fn new(nx: usize, ny: usize, obstacles: &[Rect], bc: BoundaryTags) -> Result<Self, GridError> {
        if nx < 3 || ny < 1 {
            return Err(GridError::TooSmall { nx, ny });
        }
        if let Some(r) = obstacles.iter().find(|r| !r.is_valid()) {
            return Err(GridError::BadRectangle([r.x0, r.x1, r.y0, r.y1]));
        }
        // y periodicity is meaningless on a single row
        let bc = if ny == 1 {
            BoundaryTags { x: bc.x, y: AxisBoundary::Wall }
        } else {
            bc
        };
        let dx = 1.0 / nx as f64;
        let dy = 1.0 / ny as f64;
        let mut solid = vec![false; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let (x, y) = ((i as f64 + 0.5) * dx, (j as f64 + 0.5) * dy);
                solid[j * nx + i] = obstacles.iter().any(|r| r.contains(x, y));
            }
        }

        let nfx = axis_face_count(nx, bc.x);
        let mut x_faces = Vec::with_capacity(nfx * ny);
        for j in 0..ny {
            for f in 0..nfx {
                let (m, p) = face_sides(f, nx, bc.x);
                x_faces.push(FaceCells {
                    minus: m.map(|i| j * nx + i),
                    plus: p.map(|i| j * nx + i),
                });
            }
        }
        let nfy = if ny == 1 { 0 } else { axis_face_count(ny, bc.y) };
        let mut y_faces = Vec::with_capacity(nfy * nx);
        for g in 0..nfy {
            let (m, p) = face_sides(g, ny, bc.y);
            for i in 0..nx {
                y_faces.push(FaceCells {
                    minus: m.map(|j| j * nx + i),
                    plus: p.map(|j| j * nx + i),
                });
            }
        }

        let grid = Grid {
            nx,
            ny,
            dx,
            dy,
            solid,
            bc,
            x_faces,
            y_faces,
        };
        grid.check_connected()?;
        Ok(grid)
    }

    /// Unobstructed grid.
    pub fn uniform(nx: usize, ny: usize, bc: BoundaryTags) -> Result<Self, GridError> {
        Self::new(nx, ny, &[], bc)
    }

    fn check_connected(&self) -> Result<(), GridError> {
        if self.fluid_count() < 2 {
            return Err(GridError::NoFluid);
        }
        let components = self.count_components(|c| self.is_fluid(c));
        if components > 1 {
            return Err(GridError::Disconnected { components });
        }
        Ok(())
    }

    /// Number of 4-connected components (through open faces, periodic wrap
    /// included) among the fluid cells selected by `member`.
    pub fn count_components(&self, member: impl Fn(usize) -> bool) -> usize {
        let mut seen = vec![false; self.cell_count()];
        let mut queue = VecDeque::new();
        let mut components = 0;
        for start in 0..self.cell_count() {
            if seen[start] || !self.is_fluid(start) || !member(start) {
                continue;
            }
            components += 1;
            seen[start] = true;
            queue.push_back(start);
            while let Some(c) = queue.pop_front() {
                for n in self.neighbors(c).into_iter().flatten() {
                    if !seen[n] && member(n) {
                        seen[n] = true;
                        queue.push_back(n);
                    }
                }
            }
        }
        components
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dy(&self) -> f64 {
        self.dy
    }

    pub fn spacing(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.dx,
            Axis::Y => self.dy,
        }
    }

    pub fn min_spacing(&self) -> f64 {
        if self.is_1d() {
            self.dx
        } else {
            self.dx.min(self.dy)
        }
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx * self.dy
    }

    pub fn is_1d(&self) -> bool {
        self.ny == 1
    }

    pub fn boundary(&self) -> BoundaryTags {
        self.bc
    }

    /// True when every axis of the grid wraps around.
    pub fn is_fully_periodic(&self) -> bool {
        self.bc.x == AxisBoundary::Periodic && (self.is_1d() || self.bc.y == AxisBoundary::Periodic)
    }

    pub fn cell_count(&self) -> usize {
        self.nx * self.ny
    }

    pub fn fluid_count(&self) -> usize {
        self.solid.iter().filter(|s| !**s).count()
    }

    pub fn is_fluid(&self, cell: usize) -> bool {
        !self.solid[cell]
    }

    pub fn is_solid(&self, cell: usize) -> bool {
        self.solid[cell]
    }

    pub fn cell_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nx && j < self.ny);
        j * self.nx + i
    }

    pub fn cell_coords(&self, cell: usize) -> (usize, usize) {
        (cell % self.nx, cell / self.nx)
    }

    pub fn cell_center(&self, cell: usize) -> (f64, f64) {
        let (i, j) = self.cell_coords(cell);
        ((i as f64 + 0.5) * self.dx, (j as f64 + 0.5) * self.dy)
    }

    pub fn face_count(&self, axis: Axis) -> usize {
        match axis {
            Axis::X => self.x_faces.len(),
            Axis::Y => self.y_faces.len(),
        }
    }

    /// Faces per row (x) or per column (y).
    pub fn faces_per_line(&self, axis: Axis) -> usize {
        match axis {
            Axis::X => axis_face_count(self.nx, self.bc.x),
            Axis::Y if self.is_1d() => 0,
            Axis::Y => axis_face_count(self.ny, self.bc.y),
        }
    }

    /// Index of x-face `f` in row `j`, or y-face `g` in column `i`.
    pub fn face_index(&self, axis: Axis, line_pos: usize, line: usize) -> usize {
        match axis {
            Axis::X => line * self.faces_per_line(Axis::X) + line_pos,
            Axis::Y => line_pos * self.nx + line,
        }
    }

    /// Inverse of [`Grid::face_index`]: `(position along the axis, line)`.
    pub fn face_coords(&self, axis: Axis, face: usize) -> (usize, usize) {
        match axis {
            Axis::X => {
                let n = self.faces_per_line(Axis::X);
                (face % n, face / n)
            }
            Axis::Y => (face / self.nx, face % self.nx),
        }
    }

    /// The `(minus, plus)` fluid cells of an open face, `None` for wall,
    /// boundary and fluid/solid faces.
    pub fn open_face(&self, axis: Axis, face: usize) -> Option<(usize, usize)> {
        let fc = match axis {
            Axis::X => self.x_faces[face],
            Axis::Y => self.y_faces[face],
        };
        match (fc.minus, fc.plus) {
            (Some(m), Some(p)) if !self.solid[m] && !self.solid[p] => Some((m, p)),
            _ => None,
        }
    }

    /// Open faces of one axis as `(face, minus, plus)`.
    pub fn open_faces(&self, axis: Axis) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        (0..self.face_count(axis)).filter_map(move |f| self.open_face(axis, f).map(|(m, p)| (f, m, p)))
    }

    /// The fluid cell of a face with exactly one fluid side (a wall face or a
    /// fluid/solid face), paired with the outward normal sign seen from that
    /// cell: `+1.0` when the face is on the cell's high side.
    pub fn boundary_face(&self, axis: Axis, face: usize) -> Option<(usize, f64)> {
        let fc = match axis {
            Axis::X => self.x_faces[face],
            Axis::Y => self.y_faces[face],
        };
        let fluid = |c: Option<usize>| c.filter(|&c| !self.solid[c]);
        match (fluid(fc.minus), fluid(fc.plus)) {
            (Some(m), None) => Some((m, 1.0)),
            (None, Some(p)) => Some((p, -1.0)),
            _ => None,
        }
    }

    /// Fluid neighbors of a fluid cell in the order left, right, down, up.
    pub fn neighbors(&self, cell: usize) -> [Option<usize>; 4] {
        let (i, j) = self.cell_coords(cell);
        let (nx, ny) = (self.nx, self.ny);
        let wrap_x = self.bc.x == AxisBoundary::Periodic;
        let wrap_y = self.bc.y == AxisBoundary::Periodic && ny > 1;
        let left = match i {
            0 if wrap_x => Some(cell + nx - 1),
            0 => None,
            _ => Some(cell - 1),
        };
        let right = match i + 1 {
            n if n == nx && wrap_x => Some(cell + 1 - nx),
            n if n == nx => None,
            _ => Some(cell + 1),
        };
        let down = match j {
            _ if ny == 1 => None,
            0 if wrap_y => Some(cell + (ny - 1) * nx),
            0 => None,
            _ => Some(cell - nx),
        };
        let up = match j + 1 {
            _ if ny == 1 => None,
            n if n == ny && wrap_y => Some(i),
            n if n == ny => None,
            _ => Some(cell + nx),
        };
        [left, right, down, up].map(|n| n.filter(|&c| !self.solid[c]))
    }
}

fn axis_face_count(n: usize, bc: AxisBoundary) -> usize {
    match bc {
        AxisBoundary::Wall => n + 1,
        AxisBoundary::Periodic => n,
    }
}

fn face_sides(f: usize, n: usize, bc: AxisBoundary) -> (Option<usize>, Option<usize>) {
    match bc {
        AxisBoundary::Periodic => (Some(if f == 0 { n - 1 } else { f - 1 }), Some(f)),
        AxisBoundary::Wall => (f.checked_sub(1), (f < n).then_some(f)),
    }
}

/// One value per cell. Solid cells hold 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(g: &Grid) -> Self {
        ScalarField {
            values: vec![0.0; g.cell_count()],
        }
    }

    pub fn constant(g: &Grid, value: f64) -> Self {
        Self::from_fn(g, |_, _| value)
    }

    /// Samples `f(x, y)` at fluid cell centers.
    pub fn from_fn(g: &Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..g.cell_count())
            .map(|c| {
                if g.is_fluid(c) {
                    let (x, y) = g.cell_center(c);
                    f(x, y)
                } else {
                    0.0
                }
            })
            .collect();
        ScalarField { values }
    }

    /// Wraps raw values, zeroing solid cells.
    ///
    /// # Panics
    ///
    /// If `values.len()` differs from the grid's cell count.
    pub fn from_values(g: &Grid, mut values: Vec<f64>) -> Self {
        assert_eq!(values.len(), g.cell_count(), "field length does not match grid");
        for (c, v) in values.iter_mut().enumerate() {
            if g.is_solid(c) {
                *v = 0.0;
            }
        }
        ScalarField { values }
    }

    /// Wraps values already known to be zero on solid cells.
    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        ScalarField { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Pointwise `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &ScalarField, b: f64) -> ScalarField {
        ScalarField {
            values: self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect(),
        }
    }

    /// `1 - self` on fluid cells.
    pub fn complement(&self, g: &Grid) -> ScalarField {
        ScalarField::from_values(g, self.values.iter().map(|v| 1.0 - v).collect())
    }

    /// Min and max over fluid cells.
    pub fn fluid_range(&self, g: &Grid) -> (f64, f64) {
        self.values
            .iter()
            .enumerate()
            .filter(|(c, _)| g.is_fluid(*c))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, &v)| (lo.min(v), hi.max(v)))
    }

    /// Mean over fluid cells.
    pub fn fluid_mean(&self, g: &Grid) -> f64 {
        let sum: f64 = (0..g.cell_count()).filter(|&c| g.is_fluid(c)).map(|c| self.values[c]).sum();
        sum / g.fluid_count() as f64
    }

    /// `sum |self - other| * cell volume` over fluid cells.
    pub fn l1_distance(&self, other: &ScalarField, g: &Grid) -> f64 {
        (0..g.cell_count())
            .filter(|&c| g.is_fluid(c))
            .map(|c| (self.values[c] - other.values[c]).abs())
            .sum::<f64>()
            * g.cell_volume()
    }

    pub fn max_abs_diff(&self, other: &ScalarField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Index<usize> for ScalarField {
    type Output = f64;
    fn index(&self, cell: usize) -> &f64 {
        &self.values[cell]
    }
}

impl IndexMut<usize> for ScalarField {
    fn index_mut(&mut self, cell: usize) -> &mut f64 {
        &mut self.values[cell]
    }
}

/// Face-normal values on the staggered grid. Closed faces (walls, boundary,
/// fluid/solid) hold 0.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceField {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl FaceField {
    pub fn zeros(g: &Grid) -> Self {
        FaceField {
            x: vec![0.0; g.face_count(Axis::X)],
            y: vec![0.0; g.face_count(Axis::Y)],
        }
    }

    /// Evaluates `f(axis, minus, plus)` on every open face.
    pub fn from_open_faces(g: &Grid, f: impl Fn(Axis, usize, usize) -> f64) -> Self {
        let mut field = FaceField::zeros(g);
        for axis in [Axis::X, Axis::Y] {
            for (face, m, p) in g.open_faces(axis) {
                field.axis_mut(axis)[face] = f(axis, m, p);
            }
        }
        field
    }

    pub fn axis(&self, axis: Axis) -> &[f64] {
        match axis {
            Axis::X => &self.x,
            Axis::Y => &self.y,
        }
    }

    pub fn axis_mut(&mut self, axis: Axis) -> &mut [f64] {
        match axis {
            Axis::X => &mut self.x,
            Axis::Y => &mut self.y,
        }
    }

    pub fn x_values(&self) -> &[f64] {
        &self.x
    }

    pub fn y_values(&self) -> &[f64] {
        &self.y
    }

    /// Largest absolute face value on one axis.
    pub fn max_abs(&self, axis: Axis) -> f64 {
        self.axis(axis).iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Sum of the per-axis maxima.
    pub fn max_speed_sum(&self) -> f64 {
        self.max_abs(Axis::X) + self.max_abs(Axis::Y)
    }

    pub fn scaled(&self, a: f64) -> FaceField {
        FaceField {
            x: self.x.iter().map(|v| a * v).collect(),
            y: self.y.iter().map(|v| a * v).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &FaceField) -> f64 {
        self.x
            .iter()
            .zip(&other.x)
            .chain(self.y.iter().zip(&other.y))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// `sum over fluid cells of rho * dx * dy`.
pub fn total_mass(rho: &ScalarField, g: &Grid) -> f64 {
    (0..g.cell_count())
        .filter(|&c| g.is_fluid(c))
        .map(|c| rho[c])
        .sum::<f64>()
        * g.cell_volume()
}

/// Obstacles of the two-room geometry: rooms on either side of a 0.1-wide
/// horizontal corridor through `x in [0.3, 0.7]`.
pub fn corridor_obstacles() -> [Rect; 2] {
    [Rect::new(0.3, 0.7, 0.0, 0.45), Rect::new(0.3, 0.7, 0.55, 1.0)]
}
