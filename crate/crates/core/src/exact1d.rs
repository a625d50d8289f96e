//! Reference solutions of the one-dimensional reduction
//! `rho_t + (U rho (1 - rho))_x = 0` on `[0, 1]` with no-flux ends.
//!
//! The entropy solution is computed by a Godunov scheme on a grid sixteen
//! times finer than the requested sampling, which handles every wave
//! interaction without case analysis.

use thiserror::Error;

/// Refinement of the reference grid over the sampling grid.
pub const ORACLE_REFINEMENT: usize = 16;
/// Courant number of the reference scheme.
pub const ORACLE_CFL: f64 = 0.4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Exact1dError {
    #[error("breakpoints must increase strictly from 0 to 1")]
    BadBreakpoints,
    #[error("expected {expected} values for the intervals, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("value {0} outside [0, 1]")]
    OutOfRange(f64),
}

/// A piecewise constant density on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseConstant1D {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseConstant1D {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self, Exact1dError> {
        let ok_ends = breakpoints.first() == Some(&0.0) && breakpoints.last() == Some(&1.0);
        if !ok_ends || breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Exact1dError::BadBreakpoints);
        }
        if values.len() + 1 != breakpoints.len() {
            return Err(Exact1dError::LengthMismatch {
                expected: breakpoints.len() - 1,
                got: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Exact1dError::OutOfRange(*v));
        }
        Ok(PiecewiseConstant1D { breakpoints, values })
    }

    pub fn constant(value: f64) -> Result<Self, Exact1dError> {
        Self::new(vec![0.0, 1.0], vec![value])
    }

    /// `value` on `[a, b]`, 0 elsewhere.
    pub fn indicator(a: f64, b: f64, value: f64) -> Result<Self, Exact1dError> {
        let mut bp = vec![0.0];
        let mut vals = Vec::new();
        if a > 0.0 {
            bp.push(a);
            vals.push(0.0);
        }
        vals.push(value);
        if b < 1.0 {
            bp.push(b);
            vals.push(0.0);
        }
        bp.push(1.0);
        Self::new(bp, vals)
    }

    /// Uniform cells of width `1 / values.len()`.
    pub fn from_cells(values: Vec<f64>) -> Result<Self, Exact1dError> {
        let n = values.len();
        let bp = (0..=n).map(|k| k as f64 / n as f64).collect();
        Self::new(bp, values)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at `x`, right-continuous except at `x = 1`.
    pub fn value_at(&self, x: f64) -> f64 {
        let k = self.breakpoints[1..].partition_point(|&b| b <= x);
        self.values[k.min(self.values.len() - 1)]
    }

    pub fn mass(&self) -> f64 {
        self.breakpoints
            .windows(2)
            .zip(&self.values)
            .map(|(w, v)| (w[1] - w[0]) * v)
            .sum()
    }

    /// Integral over `[a, b]`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.breakpoints
            .windows(2)
            .zip(&self.values)
            .map(|(w, v)| (b.min(w[1]) - a.max(w[0])).max(0.0) * v)
            .sum()
    }

    /// Averages over `n` uniform cells.
    pub fn cell_averages(&self, n: usize) -> Vec<f64> {
        let h = 1.0 / n as f64;
        (0..n)
            .map(|k| {
                let (a, b) = (k as f64 * h, (k + 1) as f64 * h);
                let (first, last) = (self.value_at(a), self.value_at(b - 0.5 * h));
                let inside = self.breakpoints.iter().all(|&x| x <= a || x >= b);
                if inside && first == last {
                    first
                } else {
                    (self.integral(a, b) / h).clamp(0.0, 1.0)
                }
            })
            .collect()
    }

    /// Exact `L1` distance.
    pub fn l1_distance(&self, other: &PiecewiseConstant1D) -> f64 {
        let mut bp: Vec<f64> = self.breakpoints.iter().chain(&other.breakpoints).copied().collect();
        bp.sort_by(f64::total_cmp);
        bp.dedup();
        bp.windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                (w[1] - w[0]) * (self.value_at(mid) - other.value_at(mid)).abs()
            })
            .sum()
    }
}

fn flux(rho: f64, u: f64) -> f64 {
    u * rho * (1.0 - rho)
}

/// Godunov flux of `f(rho) = U rho (1 - rho)`: the minimum of `f` over
/// `[rho_l, rho_r]` when `rho_l <= rho_r`, else the maximum over
/// `[rho_r, rho_l]`.
///
/// ```
/// use satmix::exact1d::godunov_flux;
/// assert!((godunov_flux(0.3, 0.3, 1.0) - 0.21).abs() < 1e-15);
/// assert_eq!(godunov_flux(1.0, 0.0, 1.0), 0.25);
/// assert_eq!(godunov_flux(0.0, 1.0, 1.0), 0.0);
/// ```
pub fn godunov_flux(rho_l: f64, rho_r: f64, u: f64) -> f64 {
    let (lo, hi) = if rho_l <= rho_r { (rho_l, rho_r) } else { (rho_r, rho_l) };
    let mut candidates = vec![flux(lo, u), flux(hi, u)];
    if lo < 0.5 && 0.5 < hi {
        candidates.push(flux(0.5, u));
    }
    let pick = if rho_l <= rho_r { f64::min } else { f64::max };
    candidates.into_iter().reduce(pick).expect("two candidates")
}

/// Entropy solution at time `t` sampled as averages over `n_eval` uniform
/// cells, from a Godunov run on `16 * n_eval` cells with zero flux at both
/// ends.
pub fn exact_entropy_solution(rho0: &PiecewiseConstant1D, u: f64, t: f64, n_eval: usize) -> PiecewiseConstant1D {
    let n = ORACLE_REFINEMENT * n_eval;
    let rho = godunov_evolve(rho0.cell_averages(n), u, t);
    let coarse = rho
        .chunks(ORACLE_REFINEMENT)
        .map(|c| (c.iter().sum::<f64>() / ORACLE_REFINEMENT as f64).clamp(0.0, 1.0))
        .collect();
    PiecewiseConstant1D::from_cells(coarse).expect("averages of valid values")
}

/// Godunov scheme on uniform cells with walls at both ends.
pub fn godunov_evolve(mut rho: Vec<f64>, u: f64, t: f64) -> Vec<f64> {
    let n = rho.len();
    let h = 1.0 / n as f64;
    if u == 0.0 || t <= 0.0 {
        return rho;
    }
    let dt_max = ORACLE_CFL * h / u.abs();
    let mut fluxes = vec![0.0; n + 1];
    let mut time = 0.0;
    while time < t {
        let dt = dt_max.min(t - time);
        for f in 1..n {
            fluxes[f] = godunov_flux(rho[f - 1], rho[f], u);
        }
        for (i, r) in rho.iter_mut().enumerate() {
            *r -= dt / h * (fluxes[i + 1] - fluxes[i]);
        }
        time = if t - time <= dt_max { t } else { time + dt };
    }
    rho
}

/// Long-time limit for `U > 0`: a saturated block `1` on `[1 - M, 1]`.
pub fn steady_state_1d(rho0: &PiecewiseConstant1D) -> PiecewiseConstant1D {
    let m = rho0.mass().clamp(0.0, 1.0);
    if m <= 0.0 {
        PiecewiseConstant1D::constant(0.0).expect("valid")
    } else {
        PiecewiseConstant1D::indicator(1.0 - m, 1.0, 1.0).expect("valid")
    }
}
