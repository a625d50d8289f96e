//! The correction velocity `w = -grad p` that keeps a saturated mixture
//! saturated.
//!
//! The pressure solves `L p = div_h A(U, rho)`, where the right side is the
//! divergence of the upwinded desired flux. Differencing `p` across each open
//! face then gives a face velocity whose plain divergence cancels the upwind
//! divergence cell by cell.

use crate::grid::{Axis, FaceField, Grid, ScalarField};
use crate::poisson::{assemble_laplacian, solve_pressure_with, BcSpec, LinearSystem, PoissonError, SolveOptions};
use crate::transport::upwind_flux;

/// Net upwind outflow of `rho * V` per unit volume, summed over axes.
pub fn divergence_upwind(rho: &ScalarField, v: &FaceField, g: &Grid) -> ScalarField {
    let mut out = ScalarField::zeros(g);
    for axis in [Axis::X, Axis::Y] {
        let h = g.spacing(axis);
        let va = v.axis(axis);
        for (f, m, p) in g.open_faces(axis) {
            let flux = upwind_flux(va[f], rho[m], rho[p]) / h;
            out[m] += flux;
            out[p] -= flux;
        }
    }
    out
}

/// Plain divergence of a face field.
pub fn divergence(v: &FaceField, g: &Grid) -> ScalarField {
    let mut out = ScalarField::zeros(g);
    for axis in [Axis::X, Axis::Y] {
        let h = g.spacing(axis);
        let va = v.axis(axis);
        for (f, m, p) in g.open_faces(axis) {
            out[m] += va[f] / h;
            out[p] -= va[f] / h;
        }
    }
    out
}

/// `w = -(p+ - p-) / h` on open faces, 0 elsewhere.
pub fn pressure_velocity(p: &ScalarField, g: &Grid) -> FaceField {
    FaceField::from_open_faces(g, |axis, m, pl| -(p[pl] - p[m]) / g.spacing(axis))
}

/// Computes `(w, p)` for a density and desired velocity. Assembles the
/// Laplacian on every call; use [`Projector`] in loops.
pub fn correction_velocity(
    rho: &ScalarField,
    u: &FaceField,
    g: &Grid,
    bc: &BcSpec,
    tol: f64,
) -> Result<(FaceField, ScalarField), PoissonError> {
    Projector::new(g, bc.clone())?.correct(rho, u, &SolveOptions::with_tol(tol))
}

/// Pressure projection with the Laplacian assembled (and factored) once.
#[derive(Debug, Clone)]
pub struct Projector {
    grid: Grid,
    bc: BcSpec,
    system: LinearSystem,
}

impl Projector {
    pub fn new(g: &Grid, bc: BcSpec) -> Result<Self, PoissonError> {
        let system = assemble_laplacian(g, &bc)?;
        Ok(Projector {
            grid: g.clone(),
            bc,
            system,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn bc(&self) -> &BcSpec {
        &self.bc
    }

    pub fn system(&self) -> &LinearSystem {
        &self.system
    }

    pub fn correct(
        &self,
        rho: &ScalarField,
        u: &FaceField,
        opts: &SolveOptions,
    ) -> Result<(FaceField, ScalarField), PoissonError> {
        self.correct_sum(&[(rho, u)], opts)
    }

    /// Shared correction for several species: the right side is the sum of
    /// the upwind divergences of every `rho_i * U_i`.
    pub fn correct_sum(
        &self,
        species: &[(&ScalarField, &FaceField)],
        opts: &SolveOptions,
    ) -> Result<(FaceField, ScalarField), PoissonError> {
        let g = &self.grid;
        let mut rhs = ScalarField::zeros(g);
        for (rho, u) in species {
            rhs = rhs.combine(1.0, &divergence_upwind(rho, u, g), 1.0);
        }
        let p = solve_pressure_with(&self.system, &rhs, &self.bc, opts)?;
        Ok((pressure_velocity(&p, g), p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::dense_poisson;
    use crate::grid::BoundaryTags;
    use crate::poisson::{BcKind, DEFAULT_TOL};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_velocity_has_zero_divergence() {
        let g = Grid::uniform(5, 4, BoundaryTags::WALLS).unwrap();
        let rho = ScalarField::constant(&g, 0.3);
        let d = divergence_upwind(&rho, &FaceField::zeros(&g), &g);
        assert!(d.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn four_cell_hand_evaluation() {
        let g = Grid::uniform(4, 1, BoundaryTags::PERIODIC).unwrap();
        let mut rho = ScalarField::zeros(&g);
        rho[0] = 1.0;
        let v = FaceField::from_open_faces(&g, |_, _, _| 1.0);
        let d = divergence_upwind(&rho, &v, &g);
        let expected = [1.0, -1.0, 0.0, 0.0].map(|e| e / g.dx());
        assert_eq!(d.values(), &expected);
    }

    #[test]
    fn periodic_divergence_telescopes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = Grid::uniform(37, 1, BoundaryTags::PERIODIC).unwrap();
        let rho = ScalarField::from_values(&g, (0..37).map(|_| rng.gen()).collect());
        let v = FaceField::from_open_faces(&g, |_, m, _| (m as f64 * 0.7).sin());
        let d = divergence_upwind(&rho, &v, &g);
        let sum: f64 = d.values().iter().sum::<f64>() * g.dx();
        assert!(sum.abs() < 1e-14);
    }

    #[test]
    fn saturated_periodic_translates_freely() {
        let g = Grid::uniform(16, 16, BoundaryTags::PERIODIC).unwrap();
        let rho = ScalarField::constant(&g, 1.0);
        let u = FaceField::from_open_faces(&g, |axis, _, _| if axis == Axis::X { 1.0 } else { 0.3 });
        let (w, p) = correction_velocity(&rho, &u, &g, &BcSpec::new(BcKind::Periodic), DEFAULT_TOL).unwrap();
        assert!(p.values().iter().all(|v| v.abs() < 1e-14));
        assert!(w.max_speed_sum() < 1e-12);
    }

    #[test]
    fn saturated_walls_match_dense_pressure() {
        let g = Grid::uniform(8, 8, BoundaryTags::WALLS).unwrap();
        let rho = ScalarField::constant(&g, 1.0);
        let u = FaceField::from_open_faces(&g, |axis, _, _| if axis == Axis::X { 1.0 } else { 0.0 });
        let (w, p) = correction_velocity(&rho, &u, &g, &BcSpec::new(BcKind::NeumannAllWalls), DEFAULT_TOL).unwrap();
        let rhs = divergence_upwind(&rho, &u, &g);
        let oracle = dense_poisson(&g, &rhs, false);
        assert!(p.max_abs_diff(&oracle) < 1e-10);
        // full saturation: the correction cancels U on every open face
        assert!(w.max_abs_diff(&u.scaled(-1.0)) < 1e-9);
        // p is affine in x and constant in y
        for j in 1..8 {
            for i in 0..8 {
                assert!((p[g.cell_index(i, j)] - p[g.cell_index(i, 0)]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn divergence_identity_and_gauge() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = Grid::uniform(12, 9, BoundaryTags::WALLS).unwrap();
        let rho = ScalarField::from_values(&g, (0..g.cell_count()).map(|_| rng.gen()).collect());
        let u = FaceField::from_open_faces(&g, |_, m, p| (m as f64).cos() - (p as f64).sin());
        let (w, p) = correction_velocity(&rho, &u, &g, &BcSpec::for_grid(&g), DEFAULT_TOL).unwrap();
        let total = divergence_upwind(&rho, &u, &g).combine(1.0, &divergence(&w, &g), 1.0);
        assert!(total.values().iter().all(|v| v.abs() < 1e-8));
        let shifted = ScalarField::from_values(&g, p.values().iter().map(|v| v + 3.25).collect());
        assert!(pressure_velocity(&shifted, &g).max_abs_diff(&w) < 1e-12);
    }
}
