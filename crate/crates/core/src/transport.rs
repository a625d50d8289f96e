//! First-order upwind transport of a density by two face velocity fields.
//!
//! The density update treats the desired velocity `U` and the correction
//! velocity `w` as two separate upwind fluxes through every open face:
//!
//! ```text
//! F = A(U, rho-, rho+) + A(w, rho-, rho+)
//! ```
//!
//! Upwinding `U + w` as one velocity gives a different scheme that does not
//! keep densities below 1.

use thiserror::Error;

use crate::grid::{Axis, FaceField, Grid, ScalarField};

/// Default fraction of the stability limit used by [`cfl_dt`].
pub const DEFAULT_CFL_SAFETY: f64 = 0.45;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("time step {dt:e} exceeds the stability limit {limit:e}")]
    CflViolation { dt: f64, limit: f64 },
    #[error("both velocity fields vanish and no time step cap was given")]
    ZeroVelocityNoCap,
    #[error("CFL safety factor must lie in (0, 0.5), got {0}")]
    InvalidSafety(f64),
}

/// Upwind numerical flux: `u` times the density on the donor side.
///
/// ```
/// use satmix::transport::upwind_flux;
/// assert_eq!(upwind_flux(2.0, 0.3, 0.9), 0.6);
/// assert_eq!(upwind_flux(-1.0, 0.3, 0.9), -0.9);
/// assert_eq!(upwind_flux(0.0, 0.3, 0.9), 0.0);
/// ```
#[inline]
pub fn upwind_flux(u: f64, rho_minus: f64, rho_plus: f64) -> f64 {
    if u > 0.0 {
        u * rho_minus
    } else if u < 0.0 {
        u * rho_plus
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepParams {
    cfl_safety: f64,
    dt_cap: Option<f64>,
}

impl Default for StepParams {
    fn default() -> Self {
        StepParams {
            cfl_safety: DEFAULT_CFL_SAFETY,
            dt_cap: None,
        }
    }
}

impl StepParams {
    pub fn new(cfl_safety: f64, dt_cap: Option<f64>) -> Result<Self, TransportError> {
        if !(cfl_safety > 0.0 && cfl_safety < 0.5) {
            return Err(TransportError::InvalidSafety(cfl_safety));
        }
        Ok(StepParams { cfl_safety, dt_cap })
    }

    pub fn cfl_safety(&self) -> f64 {
        self.cfl_safety
    }

    pub fn dt_cap(&self) -> Option<f64> {
        self.dt_cap
    }

    pub fn with_dt_cap(self, cap: f64) -> Self {
        StepParams {
            dt_cap: Some(cap),
            ..self
        }
    }
}

/// Sum of the per-axis maximum face speeds of both fields.
fn speed_bound(u: &FaceField, w: &FaceField) -> f64 {
    u.max_speed_sum() + w.max_speed_sum()
}

/// Largest stable step: `safety * min(dx, dy) / S`, where `S` sums the
/// per-axis maxima of `|U|` and `|w|`, clipped to the cap if any.
pub fn cfl_dt(u: &FaceField, w: &FaceField, g: &Grid, params: &StepParams) -> Result<f64, TransportError> {
    let s = speed_bound(u, w);
    let free = (s > 0.0).then(|| params.cfl_safety * g.min_spacing() / s);
    match (free, params.dt_cap) {
        (Some(dt), Some(cap)) => Ok(dt.min(cap)),
        (Some(dt), None) => Ok(dt),
        (None, Some(cap)) => Ok(cap),
        (None, None) => Err(TransportError::ZeroVelocityNoCap),
    }
}

/// Total split-upwind flux through every open face.
pub fn face_flux(rho: &ScalarField, u: &FaceField, w: &FaceField, g: &Grid) -> FaceField {
    let mut out = FaceField::zeros(g);
    for axis in [Axis::X, Axis::Y] {
        let (ua, wa) = (u.axis(axis), w.axis(axis));
        let target = out.axis_mut(axis);
        for (f, m, p) in g.open_faces(axis) {
            target[f] = upwind_flux(ua[f], rho[m], rho[p]) + upwind_flux(wa[f], rho[m], rho[p]);
        }
    }
    out
}

/// One forward Euler step of the split upwind scheme.
///
/// Fails when `dt` is above the stability limit `0.5 * min(dx, dy) / S`.
pub fn advect_step(
    rho: &ScalarField,
    u: &FaceField,
    w: &FaceField,
    dt: f64,
    g: &Grid,
) -> Result<ScalarField, TransportError> {
    let s = speed_bound(u, w);
    if s > 0.0 {
        let limit = 0.5 * g.min_spacing() / s;
        if dt > limit {
            return Err(TransportError::CflViolation { dt, limit });
        }
    }
    let flux = face_flux(rho, u, w, g);
    let mut out = rho.clone();
    for axis in [Axis::X, Axis::Y] {
        let ratio = dt / g.spacing(axis);
        let fa = flux.axis(axis);
        for (f, m, p) in g.open_faces(axis) {
            out[m] -= ratio * fa[f];
            out[p] += ratio * fa[f];
        }
    }
    Ok(out)
}
