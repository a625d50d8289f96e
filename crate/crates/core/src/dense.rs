//! Dense reference linear algebra used as an independent oracle by the unit
//! tests: explicit stencil assembly from cell neighbors and Gaussian
//! elimination with partial pivoting.

use crate::grid::{Grid, ScalarField};

/// Explicit discrete Laplacian over fluid cells, row `c` built from the
/// four-neighbor relation rather than from face tables. Returns the matrix
/// over fluid cells and the fluid cell list.
pub(crate) fn laplacian_matrix(g: &Grid, dirichlet_left: bool) -> (Vec<Vec<f64>>, Vec<usize>) {
    let cells: Vec<usize> = (0..g.cell_count()).filter(|&c| g.is_fluid(c)).collect();
    let mut pos = vec![usize::MAX; g.cell_count()];
    for (k, &c) in cells.iter().enumerate() {
        pos[c] = k;
    }
    let n = cells.len();
    let mut a = vec![vec![0.0; n]; n];
    for (k, &c) in cells.iter().enumerate() {
        let nb = g.neighbors(c);
        for (slot, n) in nb.iter().enumerate() {
            if let Some(n) = n {
                let h = if slot < 2 { g.dx() } else { g.dy() };
                a[k][pos[*n]] += 1.0 / (h * h);
                a[k][k] -= 1.0 / (h * h);
            }
        }
    }
    if dirichlet_left {
        a[0][0] -= 2.0 / (g.dx() * g.dx());
    }
    (a, cells)
}

/// Gaussian elimination with partial pivoting.
pub(crate) fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let piv = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
        a.swap(k, piv);
        b.swap(k, piv);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            if f != 0.0 {
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    x
}

/// Solves `L p = rhs` densely. Singular (Neumann/periodic) problems are
/// bordered with the zero-mean constraint.
pub(crate) fn dense_poisson(g: &Grid, rhs: &ScalarField, dirichlet_left: bool) -> ScalarField {
    let (mut a, cells) = laplacian_matrix(g, dirichlet_left);
    let mut b: Vec<f64> = cells.iter().map(|&c| rhs[c]).collect();
    let n = cells.len();
    if !dirichlet_left {
        for row in a.iter_mut() {
            row.push(1.0);
        }
        let mut last = vec![1.0; n];
        last.push(0.0);
        a.push(last);
        b.push(0.0);
    }
    let x = gauss_solve(a, b);
    let mut out = vec![0.0; g.cell_count()];
    for (k, &c) in cells.iter().enumerate() {
        out[c] = x[k];
    }
    ScalarField::from_values(g, out)
}
