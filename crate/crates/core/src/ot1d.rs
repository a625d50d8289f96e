//! Quadratic optimal transport between densities on `[0, 1]`, and the
//! minimizing-movement step of a saturated two-species mixture.
//!
//! Densities are piecewise constant on `n` uniform cells. Their cumulative
//! mass is piecewise linear, and so is its generalized inverse, the quantile
//! function. `W2^2` is the integral of the squared quantile difference over
//! mass levels, which is evaluated exactly segment by segment.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OtError {
    #[error("density has zero mass")]
    ZeroMass,
    #[error("masses differ: {0} vs {1}")]
    MassMismatch(f64, f64),
    #[error("densities live on different grids ({0} vs {1} cells)")]
    GridMismatch(usize, usize),
    #[error("density values must be finite and nonnegative")]
    Negative,
    #[error("minimizing movement needs values in [0, 1]")]
    NotSaturable,
    #[error("tau must be positive, got {0}")]
    BadTau(f64),
    #[error("descent stopped after {iterations} iterations: objective {objective:e}, stationarity {stationarity:e}")]
    NoConvergence {
        iterations: usize,
        objective: f64,
        stationarity: f64,
    },
}

/// Largest mass difference accepted as equal, relative to `max(1, M)`.
const MASS_TOL: f64 = 1e-12;

/// Piecewise constant nonnegative density on `n` uniform cells of `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Density1D {
    values: Vec<f64>,
    dx: f64,
}

impl Density1D {
    pub fn new(values: Vec<f64>) -> Result<Self, OtError> {
        if values.is_empty() || values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(OtError::Negative);
        }
        let dx = 1.0 / values.len() as f64;
        Ok(Density1D { values, dx })
    }

    /// Cell samples of `f` at the centers.
    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Result<Self, OtError> {
        Self::new((0..n).map(|k| f((k as f64 + 0.5) / n as f64)).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.dx
    }

    /// `1 - rho`, the density of the complementary species.
    pub fn complement(&self) -> Result<Self, OtError> {
        Density1D::new(self.values.iter().map(|v| 1.0 - v).collect()).map_err(|_| OtError::NotSaturable)
    }

    pub fn center_of_mass(&self) -> f64 {
        let m: f64 = self
            .values
            .iter()
            .enumerate()
            .map(|(k, v)| v * (k as f64 + 0.5) * self.dx)
            .sum::<f64>()
            * self.dx;
        m / self.mass()
    }

    pub fn l1_distance(&self, other: &Density1D) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).sum::<f64>() * self.dx
    }

    /// Cumulative masses at the cell edges, `n + 1` entries from 0.
    fn cumulative(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.values.len() + 1);
        let mut acc = 0.0;
        out.push(0.0);
        for v in &self.values {
            acc += v * self.dx;
            out.push(acc);
        }
        out
    }
}

/// Position below which the density holds mass `m`: the smallest `x` with
/// `F(x) >= m`. At `m = 0` this is the left end of the support.
///
/// ```
/// use satmix::ot1d::{quantile, Density1D};
/// let half = Density1D::from_fn(100, |x| if x > 0.5 { 1.0 } else { 0.0 }).unwrap();
/// assert!((quantile(&half, 0.25).unwrap() - 0.75).abs() < 1e-12);
/// ```
pub fn quantile(rho: &Density1D, m: f64) -> Result<f64, OtError> {
    let total = rho.mass();
    if total <= 0.0 {
        return Err(OtError::ZeroMass);
    }
    let m = m.clamp(0.0, total);
    let cum = rho.cumulative();
    Ok(cell_position(rho, &cum, cell_of_mass(rho, &cum, m), m))
}

/// Cell holding mass level `m`: the first cell of positive density whose
/// cumulative mass reaches `m`.
fn cell_of_mass(rho: &Density1D, cum: &[f64], m: f64) -> usize {
    let last = rho.values.iter().rposition(|v| *v > 0.0).unwrap_or(0);
    let mut k = cum[1..].partition_point(|&c| c < m).min(last);
    while k < last && rho.values[k] == 0.0 {
        k += 1;
    }
    k
}

fn cell_position(rho: &Density1D, cum: &[f64], k: usize, m: f64) -> f64 {
    let v = rho.values[k];
    let offset = if v > 0.0 { ((m - cum[k]) / v).clamp(0.0, rho.dx) } else { 0.0 };
    k as f64 * rho.dx + offset
}

fn check_pair(a: &Density1D, b: &Density1D) -> Result<f64, OtError> {
    let (ma, mb) = (a.mass(), b.mass());
    if ma <= 0.0 || mb <= 0.0 {
        return Err(OtError::ZeroMass);
    }
    if (ma - mb).abs() > MASS_TOL * ma.max(1.0) {
        return Err(OtError::MassMismatch(ma, mb));
    }
    Ok(ma.min(mb))
}

/// Exact `int_0^M |q_a(m) - q_b(m)|^2 dm`.
pub fn w2_squared(a: &Density1D, b: &Density1D) -> Result<f64, OtError> {
    let total = check_pair(a, b)?;
    let (ca, cb) = (a.cumulative(), b.cumulative());
    let (mut ia, mut ib) = (0, 0);
    let mut m0 = 0.0;
    let mut sum = 0.0;
    while m0 < total {
        while ia + 1 < a.len() && (a.values[ia] == 0.0 || ca[ia + 1] <= m0) {
            ia += 1;
        }
        while ib + 1 < b.len() && (b.values[ib] == 0.0 || cb[ib + 1] <= m0) {
            ib += 1;
        }
        let m1 = ca[ia + 1].min(cb[ib + 1]).min(total);
        if m1 <= m0 {
            break;
        }
        let d0 = cell_position(a, &ca, ia, m0) - cell_position(b, &cb, ib, m0);
        let d1 = cell_position(a, &ca, ia, m1) - cell_position(b, &cb, ib, m1);
        sum += (m1 - m0) * (d0 * d0 + d0 * d1 + d1 * d1) / 3.0;
        m0 = m1;
    }
    Ok(sum)
}

/// Quadratic Wasserstein distance between equal-mass densities.
///
/// ```
/// use satmix::ot1d::{w2, Density1D};
/// let left = Density1D::from_fn(64, |x| if x < 0.5 { 1.0 } else { 0.0 }).unwrap();
/// let right = Density1D::from_fn(64, |x| if x > 0.5 { 1.0 } else { 0.0 }).unwrap();
/// assert!((w2(&left, &right).unwrap() - 0.125f64.sqrt()).abs() < 1e-12);
/// ```
pub fn w2(a: &Density1D, b: &Density1D) -> Result<f64, OtError> {
    w2_squared(a, b).map(f64::sqrt)
}

/// `int |T(x) - x|^2 d mu` for the monotone map `T = q_nu o F_mu`, integrated
/// over space: each cell of `mu` is split where `T` changes slope and the
/// quadratic integrand is integrated by Simpson's rule, which is exact here.
fn transport_cost_in_space(mu: &Density1D, nu: &Density1D) -> Result<f64, OtError> {
    check_pair(mu, nu)?;
    let (cm, cn) = (mu.cumulative(), nu.cumulative());
    let mut total = 0.0;
    for (k, &v) in mu.values.iter().enumerate().filter(|(_, v)| **v > 0.0) {
        let (x0, x1) = (k as f64 * mu.dx, (k + 1) as f64 * mu.dx);
        let mut cuts = vec![x0, x1];
        for &c in &cn {
            if c > cm[k] && c < cm[k + 1] {
                cuts.push(x0 + (c - cm[k]) / v);
            }
        }
        cuts.sort_by(f64::total_cmp);
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b <= a {
                continue;
            }
            let mid = 0.5 * (a + b);
            let mass_at = |x: f64| cm[k] + v * (x - x0);
            // T is linear on the piece; its cell is the one at the midpoint
            let j = cell_of_mass(nu, &cn, mass_at(mid));
            let d = |x: f64| cell_position(nu, &cn, j, mass_at(x)) - x;
            let (da, dm, db) = (d(a), d(mid), d(b));
            total += v * (b - a) / 6.0 * (da * da + 4.0 * dm * dm + db * db);
        }
    }
    Ok(total)
}

/// Both sides of the product-measure identity
/// `W2^2(mu1 x mu2, nu1 x nu2) = M2 W2^2(mu1, nu1) + M1 W2^2(mu2, nu2)`.
///
/// The left side is the cost of the product of the two monotone maps,
/// computed in space; the right side uses the quantile formula.
pub fn product_w2_check(
    mu1: &Density1D,
    nu1: &Density1D,
    mu2: &Density1D,
    nu2: &Density1D,
) -> Result<(f64, f64), OtError> {
    check_pair(mu1, nu1)?;
    check_pair(mu2, nu2)?;
    let (m1, m2) = (mu1.mass(), mu2.mass());
    let lhs = m2 * transport_cost_in_space(mu1, nu1)? + m1 * transport_cost_in_space(mu2, nu2)?;
    let rhs = m2 * w2_squared(mu1, nu1)? + m1 * w2_squared(mu2, nu2)?;
    Ok((lhs, rhs))
}

/// Left and right limits of the quantile of `sigma` at level `m`. They
/// differ where `sigma` has an empty gap at that level.
fn quantile_limits(sigma: &Density1D, cum: &[f64], m: f64) -> (f64, f64) {
    let total = cum[sigma.len()];
    let right = || {
        let j = (0..sigma.len()).find(|&j| sigma.values[j] > 0.0 && cum[j + 1] > m);
        match j {
            Some(j) => cell_position(sigma, cum, j, m),
            None => cell_position(sigma, cum, cell_of_mass(sigma, cum, total), total),
        }
    };
    let left = || cell_position(sigma, cum, cell_of_mass(sigma, cum, m), m);
    if m <= 0.0 {
        let r = right();
        (r, r)
    } else if m >= total {
        let l = left();
        (l, l)
    } else {
        (left(), right())
    }
}

/// Per-cell derivative of `W2^2(rho, sigma)` in `rho`, up to an additive
/// constant (exact along mass-preserving directions): the cell integral of
/// the Kantorovich potential `phi(x) = int_0^x 2 (y - T(y)) dy`.
///
/// Where `rho` vanishes `T` is not determined by the mass levels. There it
/// is taken as the point of `[q(m-), q(m+)]` closest to `x`, which keeps
/// `phi` flat across gaps shared by both densities.
pub fn w2_squared_gradient(rho: &Density1D, sigma: &Density1D) -> Result<Vec<f64>, OtError> {
    gradient_with_rules(rho, sigma, &vec![GapRule::Closest; rho.len()])
}

/// Choice of `T` inside a gap `[q(m-), q(m+)]` of `sigma` over an empty
/// cell of `rho`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum GapRule {
    Closest,
    Lower,
    Upper,
}

fn gradient_with_rules(rho: &Density1D, sigma: &Density1D, rules: &[GapRule]) -> Result<Vec<f64>, OtError> {
    check_pair(rho, sigma)?;
    let (cr, cs) = (rho.cumulative(), sigma.cumulative());
    let h = rho.dx;
    let mut out = Vec::with_capacity(rho.len());
    let mut phi = 0.0;
    for (k, &v) in rho.values.iter().enumerate() {
        let x0 = k as f64 * h;
        // pieces of the cell on which 2 (x - T) is linear
        let mut cuts = vec![0.0, h];
        let limits = (v == 0.0).then(|| quantile_limits(sigma, &cs, cr[k]));
        match limits {
            Some((lo, hi)) => {
                for c in [lo - x0, hi - x0] {
                    if c > 0.0 && c < h {
                        cuts.push(c);
                    }
                }
            }
            None => {
                for &c in &cs {
                    if c > cr[k] && c < cr[k + 1] {
                        cuts.push((c - cr[k]) / v);
                    }
                }
            }
        }
        cuts.sort_by(f64::total_cmp);
        // phi(x0 + s) = phi0 + int_0^s 2 (x - T); cell integral of phi is
        // h phi0 + int_0^h (h - s) 2 (x0 + s - T) ds
        let mut integral = h * phi;
        let mut increment = 0.0;
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b <= a {
                continue;
            }
            let mid = 0.5 * (a + b);
            let slope = |s: f64| -> f64 {
                let x = x0 + s;
                let t = match limits {
                    Some((lo, hi)) => match rules[k] {
                        GapRule::Closest => x.clamp(lo, hi),
                        GapRule::Lower => lo,
                        GapRule::Upper => hi,
                    },
                    None => {
                        let j = cell_of_mass(sigma, &cs, cr[k] + v * mid);
                        cell_position(sigma, &cs, j, cr[k] + v * s)
                    }
                };
                2.0 * (x - t)
            };
            let (ga, gm, gb) = (slope(a), slope(mid), slope(b));
            increment += (b - a) / 6.0 * (ga + 4.0 * gm + gb);
            let wgt = |s: f64, g: f64| (h - s) * g;
            integral += (b - a) / 6.0 * (wgt(a, ga) + 4.0 * wgt(mid, gm) + wgt(b, gb));
        }
        out.push(integral);
        phi += increment;
    }
    Ok(out)
}

/// Parameters of the minimizing-movement step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JkoParams {
    pub tau: f64,
    /// First trial step of the projected descent.
    pub initial_step: f64,
    pub max_iterations: usize,
    /// Stop when `max |rho - P(rho - g / dx)|` falls below this.
    pub tolerance: f64,
    /// Stop when the objective improved by less than this (relative) over
    /// the last [`STALL_WINDOW`] iterations.
    pub stall_tolerance: f64,
}

/// Iterations over which objective progress is measured.
pub const STALL_WINDOW: usize = 10;

/// Why a minimizing-movement step stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JkoTermination {
    /// The projected gradient fell below the tolerance.
    Stationary,
    /// No further decrease was found: the line search failed or the
    /// objective stopped improving. Happens at kinks of the transport terms.
    Stalled,
}

impl JkoParams {
    pub fn new(tau: f64) -> Self {
        JkoParams {
            tau,
            initial_step: 1.0,
            max_iterations: 20_000,
            tolerance: 1e-8,
            stall_tolerance: 1e-13,
        }
    }
}

/// Result of a minimizing-movement step.
#[derive(Debug, Clone, PartialEq)]
pub struct JkoOutcome {
    pub rho: Density1D,
    pub objective: f64,
    pub initial_objective: f64,
    pub stationarity: f64,
    pub iterations: usize,
    pub termination: JkoTermination,
}

/// `int D1 rho + int D2 (1 - rho) + (W2^2(rho, prev) + W2^2(1 - rho, 1 - prev)) / (2 tau)`.
pub fn jko_objective(rho: &Density1D, prev: &Density1D, d1: &[f64], d2: &[f64], tau: f64) -> Result<f64, OtError> {
    let potential: f64 = rho
        .values
        .iter()
        .zip(d1.iter().zip(d2))
        .map(|(r, (a, b))| a * r + b * (1.0 - r))
        .sum::<f64>()
        * rho.dx;
    let w_active = w2_squared(rho, prev)?;
    let w_passive = if complement_mass(prev) > 0.0 {
        w2_squared(&rho.complement()?, &prev.complement()?)?
    } else {
        0.0
    };
    Ok(potential + (w_active + w_passive) / (2.0 * tau))
}

fn complement_mass(rho: &Density1D) -> f64 {
    rho.values.iter().map(|v| 1.0 - v).sum::<f64>() * rho.dx
}

/// Per-cell gradient of [`jko_objective`].
pub fn jko_gradient(rho: &Density1D, prev: &Density1D, d1: &[f64], d2: &[f64], tau: f64) -> Result<Vec<f64>, OtError> {
    let closest = vec![GapRule::Closest; rho.len()];
    gradient_variant(rho, prev, d1, d2, tau, &closest, &closest)
}

fn gradient_variant(
    rho: &Density1D,
    prev: &Density1D,
    d1: &[f64],
    d2: &[f64],
    tau: f64,
    active: &[GapRule],
    passive: &[GapRule],
) -> Result<Vec<f64>, OtError> {
    let ga = gradient_with_rules(rho, prev, active)?;
    let gp = if complement_mass(prev) > 0.0 {
        gradient_with_rules(&rho.complement()?, &prev.complement()?, passive)?
    } else {
        vec![0.0; rho.len()]
    };
    Ok((0..rho.len())
        .map(|k| (d1[k] - d2[k]) * rho.dx + (ga[k] - gp[k]) / (2.0 * tau))
        .collect())
}

/// Euclidean projection onto `{0 <= r <= 1, sum r dx = mass}`.
fn project_capped_simplex(y: &[f64], mass: f64, dx: f64) -> Vec<f64> {
    let target = mass / dx;
    let total = |lambda: f64| y.iter().map(|v| (v - lambda).clamp(0.0, 1.0)).sum::<f64>();
    let lo0 = y.iter().copied().fold(f64::INFINITY, f64::min) - 1.0;
    let hi0 = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut lo, mut hi) = (lo0, hi0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if total(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut out: Vec<f64> = y.iter().map(|v| (v - 0.5 * (lo + hi)).clamp(0.0, 1.0)).collect();
    // spread the last rounding residue over the free cells
    let free: Vec<usize> = (0..out.len()).filter(|&k| out[k] > 0.0 && out[k] < 1.0).collect();
    if !free.is_empty() {
        let residue = (target - out.iter().sum::<f64>()) / free.len() as f64;
        for k in free {
            out[k] = (out[k] + residue).clamp(0.0, 1.0);
        }
    }
    out
}

/// Gap rules matching a direction `d`: an empty cell whose mass level the
/// direction lowers pairs with the lower end of a gap, and vice versa.
fn rules_for_direction(d: &[f64], sign: f64) -> Vec<GapRule> {
    let mut before = 0.0;
    d.iter()
        .map(|v| {
            let level = before + 0.5 * sign * v;
            before += sign * v;
            if level < 0.0 {
                GapRule::Lower
            } else if level > 0.0 {
                GapRule::Upper
            } else {
                GapRule::Closest
            }
        })
        .collect()
}

const BUNDLE_ROUNDS: usize = 40;

struct JkoProblem<'a> {
    prev: &'a Density1D,
    d1: &'a [f64],
    d2: &'a [f64],
    tau: f64,
    mass: f64,
}

impl JkoProblem<'_> {
    fn objective(&self, rho: &Density1D) -> Result<f64, OtError> {
        jko_objective(rho, self.prev, self.d1, self.d2, self.tau)
    }

    fn gradient_along(&self, rho: &Density1D, d: &[f64]) -> Result<Vec<f64>, OtError> {
        let (ra, rp) = (rules_for_direction(d, 1.0), rules_for_direction(d, -1.0));
        gradient_variant(rho, self.prev, self.d1, self.d2, self.tau, &ra, &rp)
    }

    /// Approximates the minimal-norm subgradient by combining one-sided
    /// gradients until the cone direction is a descent direction of the
    /// one-sided derivative along it.
    fn direction(&self, rho: &Density1D, grad: &[f64]) -> Result<Vec<f64>, OtError> {
        let dx = rho.dx;
        let cone = |g: &[f64]| {
            let v: Vec<f64> = g.iter().map(|g| -g / dx).collect();
            project_tangent_cone(&v, &rho.values)
        };
        let norm = |g: &[f64]| cone(g).iter().map(|x| x * x).sum::<f64>();
        let mut g = grad.to_vec();
        let mut v = cone(&g);
        for _ in 0..BUNDLE_ROUNDS {
            let reference: f64 = g.iter().zip(&v).map(|(a, b)| a * b).sum();
            if !(reference < 0.0) {
                break;
            }
            let side = self.gradient_along(rho, &v)?;
            let slope: f64 = side.iter().zip(&v).map(|(a, b)| a * b).sum();
            if slope <= 0.5 * reference {
                break;
            }
            let mix = |t: f64| -> Vec<f64> { g.iter().zip(&side).map(|(a, b)| (1.0 - t) * a + t * b).collect() };
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..60 {
                let (t1, t2) = (lo + (hi - lo) / 3.0, hi - (hi - lo) / 3.0);
                if norm(&mix(t1)) <= norm(&mix(t2)) {
                    hi = t2;
                } else {
                    lo = t1;
                }
            }
            g = mix(0.5 * (lo + hi));
            v = cone(&g);
        }
        Ok(g)
    }
}

/// Projection onto the directions that keep `rho` in `[0, 1]` to first order
/// at fixed mass.
fn project_tangent_cone(v: &[f64], rho: &[f64]) -> Vec<f64> {
    let clip = |k: usize, x: f64| {
        if rho[k] <= 0.0 {
            x.max(0.0)
        } else if rho[k] >= 1.0 {
            x.min(0.0)
        } else {
            x
        }
    };
    let total = |lambda: f64| (0..v.len()).map(|k| clip(k, v[k] - lambda)).sum::<f64>();
    let mut lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if total(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda = 0.5 * (lo + hi);
    (0..v.len()).map(|k| clip(k, v[k] - lambda)).collect()
}

/// One minimizing-movement step for the active species: projected gradient
/// descent with Barzilai-Borwein steps and Armijo backtracking over
/// `0 <= rho <= 1` at fixed mass, starting from `prev`. The passive species
/// is `1 - rho` throughout.
///
/// Where a density and its previous state are both empty over the same
/// stretch the objective has a kink. There the descent direction comes from
/// a combination of one-sided gradients, and the stationarity measure is
/// the largest entry of that direction.
pub fn jko_step(prev: &Density1D, d1: &[f64], d2: &[f64], params: &JkoParams) -> Result<JkoOutcome, OtError> {
    if !(params.tau > 0.0) {
        return Err(OtError::BadTau(params.tau));
    }
    if prev.values.iter().any(|v| *v > 1.0) {
        return Err(OtError::NotSaturable);
    }
    let n = prev.len();
    if d1.len() != n || d2.len() != n {
        return Err(OtError::GridMismatch(n, d1.len().min(d2.len())));
    }
    let problem = JkoProblem {
        prev,
        d1,
        d2,
        tau: params.tau,
        mass: prev.mass(),
    };
    let dx = prev.dx;
    let mut rho = prev.clone();
    let mut f = problem.objective(&rho)?;
    let initial_objective = f;
    let mut grad = jko_gradient(&rho, prev, d1, d2, params.tau)?;
    let mut step = params.initial_step;
    let mut history = vec![f];
    let mut stat = f64::INFINITY;
    for iteration in 0..params.max_iterations {
        let dir = problem.direction(&rho, &grad)?;
        let unit: Vec<f64> = rho.values.iter().zip(&dir).map(|(r, g)| r - g / dx).collect();
        stat = project_capped_simplex(&unit, problem.mass, dx)
            .iter()
            .zip(&rho.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()));
        let stalled = history.len() > STALL_WINDOW
            && history[history.len() - 1 - STALL_WINDOW] - f <= params.stall_tolerance * (1.0 + f.abs());
        let finish = |rho: Density1D, termination| JkoOutcome {
            rho,
            objective: f,
            initial_objective,
            stationarity: stat,
            iterations: iteration,
            termination,
        };
        if stat <= params.tolerance {
            return Ok(finish(rho, JkoTermination::Stationary));
        }
        if stalled {
            return Ok(finish(rho, JkoTermination::Stalled));
        }
        let mut alpha = step;
        let accepted = loop {
            let trial: Vec<f64> = rho.values.iter().zip(&dir).map(|(r, g)| r - alpha * g / dx).collect();
            let cand = Density1D {
                values: project_capped_simplex(&trial, problem.mass, dx),
                dx,
            };
            let d: Vec<f64> = cand.values.iter().zip(&rho.values).map(|(a, b)| a - b).collect();
            let slope: f64 = problem.gradient_along(&rho, &d)?.iter().zip(&d).map(|(a, b)| a * b).sum();
            if slope < 0.0 {
                let fc = problem.objective(&cand)?;
                if fc <= f + 1e-4 * slope {
                    break Some((cand, fc));
                }
            }
            if alpha < 1e-14 {
                break None;
            }
            alpha *= 0.5;
        };
        let Some((next, f_next)) = accepted else {
            return Ok(finish(rho, JkoTermination::Stalled));
        };
        let next_grad = jko_gradient(&next, prev, d1, d2, params.tau)?;
        let s: Vec<f64> = next.values.iter().zip(&rho.values).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next_grad.iter().zip(&grad).map(|(a, b)| (a - b) / dx).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let ss: f64 = s.iter().map(|a| a * a).sum();
        step = if sy > 0.0 { (ss / sy).clamp(1e-10, 1e10) } else { params.initial_step };
        rho = next;
        f = f_next;
        grad = next_grad;
        history.push(f);
    }
    Err(OtError::NoConvergence {
        iterations: params.max_iterations,
        objective: f,
        stationarity: stat,
    })
}
