//! Discrete Laplacian problems on masked grids.
//!
//! The operator is the standard second difference per axis, assembled from
//! the open faces of the grid: every open face couples its two cells with
//! weight `1 / h^2`, and closed faces (walls, obstacles) contribute nothing,
//! which is the homogeneous Neumann condition. Prescribed boundary normal
//! derivatives enter through the right-hand side.
//!
//! Two solvers sit behind [`solve_pressure_with`]: a direct envelope Cholesky
//! factorization, computed once per [`LinearSystem`] and cached, and a
//! Jacobi-preconditioned conjugate gradient for systems whose envelope would
//! not fit the memory budget.

mod envelope;

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Axis, AxisBoundary, FaceField, Grid, ScalarField};
use envelope::{reverse_cuthill_mckee, EnvelopeCholesky};

/// Default residual tolerance of the pressure and chemoattractant solves.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Largest factor envelope (in stored entries) the `Auto` method will build.
const ENVELOPE_BUDGET: usize = 24_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PoissonError {
    #[error("right-hand side is incompatible with the Neumann/periodic problem: imbalance {imbalance:e} exceeds {allowed:e}")]
    IncompatibleRhs { imbalance: f64, allowed: f64 },
    #[error("conjugate gradient stopped after {iterations} iterations with residual {residual:e}")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("boundary condition {kind:?} does not fit this grid: {reason}")]
    BcMismatch { kind: BcKind, reason: &'static str },
    #[error("Laplacian factorization failed at row {0}")]
    Factorization(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BcKind {
    /// 1D: `p = 0` at `x = 0` (ghost reflection), Neumann at `x = 1`.
    DirichletLeftNeumannRight1d,
    /// Neumann on every wall and obstacle face.
    NeumannAllWalls,
    Periodic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BcSpec {
    pub kind: BcKind,
    /// Outward normal derivative `dp/dn` on faces with exactly one fluid
    /// side. Absent means homogeneous.
    pub neumann_data: Option<FaceField>,
}

impl BcSpec {
    pub fn new(kind: BcKind) -> Self {
        BcSpec {
            kind,
            neumann_data: None,
        }
    }

    /// Periodic on fully periodic grids, Neumann otherwise.
    pub fn for_grid(g: &Grid) -> Self {
        if g.is_fully_periodic() {
            Self::new(BcKind::Periodic)
        } else {
            Self::new(BcKind::NeumannAllWalls)
        }
    }

    pub fn with_neumann_data(mut self, data: FaceField) -> Self {
        self.neumann_data = Some(data);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Nullspace {
    None,
    Constants,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    /// Direct factorization when it fits the memory budget, else CG.
    #[default]
    Auto,
    Direct,
    ConjugateGradient,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub method: SolverMethod,
    /// CG iteration cap; `None` picks a size-based default.
    pub max_iterations: Option<usize>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: DEFAULT_TOL,
            method: SolverMethod::Auto,
            max_iterations: None,
        }
    }
}

impl SolveOptions {
    pub fn with_tol(tol: f64) -> Self {
        SolveOptions {
            tol,
            ..Self::default()
        }
    }
}

#[derive(Debug)]
struct DirectFactor {
    /// `perm[new] = old` over unknowns.
    perm: Vec<usize>,
    chol: EnvelopeCholesky,
}

/// The discrete Laplacian on the fluid cells of a grid, applied matrix-free.
#[derive(Debug)]
pub struct LinearSystem {
    cell_count: usize,
    cell_volume: f64,
    /// Cell index of each unknown.
    cells: Vec<usize>,
    /// Unknown index of each cell, `usize::MAX` on solid cells.
    unknown: Vec<usize>,
    /// Symmetric couplings `(a, b, 1/h^2)` between unknowns.
    links: Vec<(usize, usize, f64)>,
    /// Diagonal of `-L`.
    diag: Vec<f64>,
    /// Ghost-reflection term of the Dirichlet cell: `(unknown, 2/dx^2)`.
    dirichlet: Option<(usize, f64)>,
    nullspace: Nullspace,
    /// Per boundary face: the fluid unknown, and `1/h` weight, for folding
    /// Neumann data into the right-hand side.
    boundary: Vec<(Axis, usize, usize, f64)>,
    direct: OnceLock<Option<Result<DirectFactor, PoissonError>>>,
}

impl Clone for LinearSystem {
    fn clone(&self) -> Self {
        LinearSystem {
            cell_count: self.cell_count,
            cell_volume: self.cell_volume,
            cells: self.cells.clone(),
            unknown: self.unknown.clone(),
            links: self.links.clone(),
            diag: self.diag.clone(),
            dirichlet: self.dirichlet,
            nullspace: self.nullspace,
            boundary: self.boundary.clone(),
            direct: OnceLock::new(),
        }
    }
}

/// Assembles the Laplacian for `g` under `bc`.
pub fn assemble_laplacian(g: &Grid, bc: &BcSpec) -> Result<LinearSystem, PoissonError> {
    let mismatch = |reason| PoissonError::BcMismatch { kind: bc.kind, reason };
    match bc.kind {
        BcKind::DirichletLeftNeumannRight1d => {
            if !g.is_1d() || g.boundary().x != AxisBoundary::Wall {
                return Err(mismatch("needs a 1D grid with walls"));
            }
            if g.is_solid(0) {
                return Err(mismatch("the leftmost cell must be fluid"));
            }
        }
        BcKind::Periodic if !g.is_fully_periodic() => return Err(mismatch("grid is not periodic on every axis")),
        BcKind::NeumannAllWalls if g.is_fully_periodic() => return Err(mismatch("grid has no walls")),
        _ => {}
    }

    let mut unknown = vec![usize::MAX; g.cell_count()];
    let mut cells = Vec::with_capacity(g.fluid_count());
    for c in (0..g.cell_count()).filter(|&c| g.is_fluid(c)) {
        unknown[c] = cells.len();
        cells.push(c);
    }
    let mut links = Vec::new();
    let mut diag = vec![0.0; cells.len()];
    let mut boundary = Vec::new();
    for axis in [Axis::X, Axis::Y] {
        let h = g.spacing(axis);
        let w = 1.0 / (h * h);
        for (_, m, p) in g.open_faces(axis) {
            let (a, b) = (unknown[m], unknown[p]);
            links.push((a, b, w));
            diag[a] += w;
            diag[b] += w;
        }
        for f in 0..g.face_count(axis) {
            if let Some((c, _)) = g.boundary_face(axis, f) {
                boundary.push((axis, f, unknown[c], 1.0 / h));
            }
        }
    }
    let (nullspace, dirichlet) = if bc.kind == BcKind::DirichletLeftNeumannRight1d {
        // ghost value -p_0 puts p = 0 on the left boundary face
        let w = 2.0 / (g.dx() * g.dx());
        diag[unknown[0]] += w;
        boundary.retain(|&(axis, f, _, _)| !(axis == Axis::X && f == 0));
        (Nullspace::None, Some((unknown[0], w)))
    } else {
        (Nullspace::Constants, None)
    };

    Ok(LinearSystem {
        cell_count: g.cell_count(),
        cell_volume: g.cell_volume(),
        cells,
        unknown,
        links,
        diag,
        dirichlet,
        nullspace,
        boundary,
        direct: OnceLock::new(),
    })
}

impl LinearSystem {
    pub fn nullspace(&self) -> Nullspace {
        self.nullspace
    }

    pub fn unknown_count(&self) -> usize {
        self.cells.len()
    }

    /// `L p` on fluid cells.
    pub fn apply(&self, p: &ScalarField) -> ScalarField {
        let x = self.gather(p.values());
        let mut y = vec![0.0; x.len()];
        self.apply_unknowns(&x, &mut y);
        self.scatter(&y)
    }

    fn apply_unknowns(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        // difference form: constants map to exactly zero
        for &(a, b, w) in &self.links {
            let flux = w * (x[b] - x[a]);
            y[a] += flux;
            y[b] -= flux;
        }
        if let Some((u, w)) = self.dirichlet {
            y[u] -= w * x[u];
        }
    }

    fn gather(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.cell_count, "field does not match the system's grid");
        self.cells.iter().map(|&c| values[c]).collect()
    }

    fn scatter(&self, x: &[f64]) -> ScalarField {
        let mut out = vec![0.0; self.cell_count];
        for (&c, v) in self.cells.iter().zip(x) {
            out[c] = *v;
        }
        ScalarField::from_raw(out)
    }

    fn direct_factor(&self, method: SolverMethod) -> Option<Result<&DirectFactor, PoissonError>> {
        let slot = self.direct.get_or_init(|| {
            let n = self.cells.len();
            let mut adj = vec![Vec::new(); n];
            for &(a, b, _) in &self.links {
                if a != b {
                    adj[a].push(b);
                    adj[b].push(a);
                }
            }
            let perm = reverse_cuthill_mckee(&adj);
            let mut new_of = vec![0; n];
            for (new, &old) in perm.iter().enumerate() {
                new_of[old] = new;
            }
            let mut first: Vec<usize> = (0..n).collect();
            let mut entries = Vec::with_capacity(self.links.len());
            for &(a, b, w) in &self.links {
                let (ra, rb) = (new_of[a], new_of[b]);
                if ra == rb {
                    continue;
                }
                let (r, c) = if ra > rb { (ra, rb) } else { (rb, ra) };
                first[r] = first[r].min(c);
                entries.push((r, c, -w));
            }
            if method == SolverMethod::Auto && EnvelopeCholesky::envelope_size(&first) > ENVELOPE_BUDGET {
                return None;
            }
            let mut diag: Vec<f64> = perm.iter().map(|&old| self.diag[old]).collect();
            // Grounding one unknown makes the singular Neumann operator
            // definite; for a compatible right-hand side the grounded value
            // comes out as exactly zero, so the original equations still hold.
            if self.nullspace == Nullspace::Constants {
                diag[0] += self.diag[perm[0]];
            }
            Some(
                EnvelopeCholesky::factor(&diag, &entries)
                    .map(|chol| DirectFactor { perm, chol })
                    .map_err(|e| PoissonError::Factorization(e.row)),
            )
        });
        slot.as_ref().map(|r| r.as_ref().map_err(Clone::clone))
    }

    fn direct_solve(&self, factor: &DirectFactor, rhs: &[f64]) -> Vec<f64> {
        // L p = rhs  <=>  (-L) p = -rhs
        let mut y: Vec<f64> = factor.perm.iter().map(|&old| -rhs[old]).collect();
        factor.chol.solve_in_place(&mut y);
        let mut x = vec![0.0; y.len()];
        for (new, &old) in factor.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }

    fn residual(&self, x: &[f64], rhs: &[f64]) -> Vec<f64> {
        let mut r = vec![0.0; x.len()];
        self.apply_unknowns(x, &mut r);
        for (ri, b) in r.iter_mut().zip(rhs) {
            *ri = b - *ri;
        }
        r
    }

    /// Jacobi-preconditioned CG on `-L x = -rhs`, starting from `x`.
    fn conjugate_gradient(&self, x: &mut [f64], rhs: &[f64], abs_tol: f64, max_iter: usize) -> Result<(), PoissonError> {
        let n = x.len();
        let project = |v: &mut [f64]| {
            if self.nullspace == Nullspace::Constants {
                remove_mean(v);
            }
        };
        // r = b - A x with A = -L, b = -rhs  =>  r = -(rhs - L x)
        let mut r: Vec<f64> = self.residual(x, rhs).iter().map(|v| -v).collect();
        project(&mut r);
        let mut z: Vec<f64> = r.iter().zip(&self.diag).map(|(ri, d)| ri / d).collect();
        project(&mut z);
        let mut d = z.clone();
        let mut rz = dot(&r, &z);
        let mut ad = vec![0.0; n];
        for it in 0..max_iter {
            if max_abs(&r) <= abs_tol {
                return Ok(());
            }
            self.apply_unknowns(&d, &mut ad);
            ad.iter_mut().for_each(|v| *v = -*v);
            let dad = dot(&d, &ad);
            if dad <= 0.0 {
                return Err(PoissonError::NoConvergence {
                    iterations: it,
                    residual: max_abs(&r),
                });
            }
            let alpha = rz / dad;
            for i in 0..n {
                x[i] += alpha * d[i];
                r[i] -= alpha * ad[i];
            }
            project(&mut r);
            for i in 0..n {
                z[i] = r[i] / self.diag[i];
            }
            project(&mut z);
            let rz_next = dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            for i in 0..n {
                d[i] = z[i] + beta * d[i];
            }
        }
        let residual = max_abs(&r);
        if residual <= abs_tol {
            Ok(())
        } else {
            Err(PoissonError::NoConvergence {
                iterations: max_iter,
                residual,
            })
        }
    }
}

/// Solves `L p = rhs` (the sign convention of the pressure equation: the
/// discrete Laplacian of `p` equals the divergence of the upwinded flux)
/// with the default solver settings.
pub fn solve_pressure(sys: &LinearSystem, rhs: &ScalarField, bc: &BcSpec, tol: f64) -> Result<ScalarField, PoissonError> {
    solve_pressure_with(sys, rhs, bc, &SolveOptions::with_tol(tol))
}

/// Solves `L p = rhs` under `bc`. The residual max-norm of the returned
/// field is at most `tol * max(1, max|rhs|)`; for Neumann and periodic
/// problems the solution has zero mean over fluid cells.
pub fn solve_pressure_with(
    sys: &LinearSystem,
    rhs: &ScalarField,
    bc: &BcSpec,
    opts: &SolveOptions,
) -> Result<ScalarField, PoissonError> {
    solve_inner(sys, rhs, bc, opts, true)
}

fn solve_inner(
    sys: &LinearSystem,
    rhs: &ScalarField,
    bc: &BcSpec,
    opts: &SolveOptions,
    check_compatibility: bool,
) -> Result<ScalarField, PoissonError> {
    let mut b = sys.gather(rhs.values());
    let rhs_scale = max_abs(&b).max(1.0);
    if let Some(data) = &bc.neumann_data {
        for &(axis, f, u, inv_h) in &sys.boundary {
            b[u] -= data.axis(axis)[f] * inv_h;
        }
    }
    if sys.nullspace == Nullspace::Constants {
        let imbalance = b.iter().sum::<f64>().abs() * sys.cell_volume;
        let allowed = 1e-10 * b.iter().map(|v| v.abs()).sum::<f64>() * sys.cell_volume;
        if check_compatibility && imbalance > allowed {
            return Err(PoissonError::IncompatibleRhs { imbalance, allowed });
        }
        remove_mean(&mut b);
    }
    if b.iter().all(|v| *v == 0.0) {
        return Ok(ScalarField::from_raw(vec![0.0; sys.cell_count]));
    }

    let abs_tol = opts.tol * rhs_scale;
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut solved = false;
    if opts.method != SolverMethod::ConjugateGradient {
        if let Some(factor) = sys.direct_factor(opts.method) {
            let factor = factor?;
            x = sys.direct_solve(factor, &b);
            // iterative refinement mops up rounding in the factorization
            for _ in 0..4 {
                if sys.nullspace == Nullspace::Constants {
                    remove_mean(&mut x);
                }
                let r = sys.residual(&x, &b);
                if max_abs(&r) <= abs_tol {
                    solved = true;
                    break;
                }
                let dx = sys.direct_solve(factor, &r);
                x.iter_mut().zip(&dx).for_each(|(xi, d)| *xi += d);
            }
        }
    }
    if !solved {
        let max_iter = opts.max_iterations.unwrap_or(20 * n + 1000);
        sys.conjugate_gradient(&mut x, &b, abs_tol, max_iter)?;
    }
    if sys.nullspace == Nullspace::Constants {
        remove_mean(&mut x);
    }
    Ok(sys.scatter(&x))
}

/// Solves `L S = -(rho - mean(rho))` on a grid without Dirichlet boundary,
/// returning the zero-mean solution. Subtracting the mean is what makes the
/// periodic problem solvable; `grad S` does not see the gauge.
pub fn solve_chemoattractant(g: &Grid, rho: &ScalarField, tol: f64) -> Result<ScalarField, PoissonError> {
    let bc = BcSpec::for_grid(g);
    let sys = assemble_laplacian(g, &bc)?;
    solve_chemoattractant_with(&sys, g, rho, &SolveOptions::with_tol(tol))
}

/// [`solve_chemoattractant`] against a prebuilt system, for time loops.
pub fn solve_chemoattractant_with(
    sys: &LinearSystem,
    g: &Grid,
    rho: &ScalarField,
    opts: &SolveOptions,
) -> Result<ScalarField, PoissonError> {
    let mean = rho.fluid_mean(g);
    let rhs = ScalarField::from_values(g, rho.values().iter().map(|r| mean - r).collect());
    // zero mean by construction; only rounding is left to project away
    solve_inner(sys, &rhs, &BcSpec::for_grid(g), opts, false)
}

fn remove_mean(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
