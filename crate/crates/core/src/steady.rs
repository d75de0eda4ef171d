//! Non-uniform equilibrium `f(H*,Q*)_x + g(H*,Q*) = 0`, `H*(L) = H*_L`.
//!
//! Written through the model partials as `H*_x = −g/a` with `a = ∂f/∂H`,
//! and integrated backward from the downstream anchor with classical RK4,
//! two substeps per cell. A substep whose step-doubling estimate disagrees
//! with the single step is subdivided; this only triggers near the
//! critical depth where the slope blows up.

use crate::error::{Error, Result};
use crate::model::{FieldState, Grid, PhysicalModel};

const SUBSTEPS_PER_CELL: usize = 2;
const MAX_REFINE_DEPTH: u32 = 40;
const REFINE_TOL: f64 = 1e-12;

/// Equilibrium profile sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyProfile {
    pub grid: Grid,
    pub q_star: f64,
    pub h_star: Vec<f64>,
    pub v_star: Vec<f64>,
    /// `a(H*, Q*) = ∂f/∂H`; equals `gH* − V*²` for Saint-Venant.
    pub margin: Vec<f64>,
}

impl SteadyProfile {
    /// Wraps externally computed depths (the margin is evaluated with `model`).
    pub fn from_depths(model: &dyn PhysicalModel, grid: Grid, q_star: f64, h_star: Vec<f64>) -> Result<Self> {
        if h_star.len() != grid.nodes() {
            return Err(Error::LengthMismatch { expected: grid.nodes(), got: h_star.len() });
        }
        for (k, &h) in h_star.iter().enumerate() {
            if !(h > 0.0) {
                return Err(Error::NonPositiveDepth { h, x: grid.x(k) });
            }
        }
        let v_star = h_star.iter().map(|h| q_star / h).collect();
        let margin = h_star.iter().map(|&h| model.partials(h, q_star).a).collect();
        Ok(SteadyProfile { grid, q_star, h_star, v_star, margin })
    }

    pub fn set_point(&self) -> f64 {
        *self.h_star.last().unwrap()
    }

    pub fn h0(&self) -> f64 {
        self.h_star[0]
    }

    pub fn to_state(&self) -> FieldState {
        FieldState { t: 0.0, h: self.h_star.clone(), q: vec![self.q_star; self.h_star.len()] }
    }
}

fn slope(model: &dyn PhysicalModel, q: f64, h: f64, x: f64, sign: f64) -> Result<f64> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::NonPositiveDepth { h, x });
    }
    let a = model.partials(h, q).a;
    if !(a * sign > 0.0) {
        return Err(Error::CriticalFlow { x, margin: a });
    }
    Ok(-model.source(h, q) / a)
}

fn rk4(model: &dyn PhysicalModel, q: f64, sign: f64, x: f64, h: f64, step: f64) -> Result<f64> {
    let k1 = slope(model, q, h, x, sign)?;
    let k2 = slope(model, q, h + 0.5 * step * k1, x + 0.5 * step, sign)?;
    let k3 = slope(model, q, h + 0.5 * step * k2, x + 0.5 * step, sign)?;
    let k4 = slope(model, q, h + step * k3, x + step, sign)?;
    let next = h + step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    // confirms the endpoint stays on the same branch
    slope(model, q, next, x + step, sign)?;
    Ok(next)
}

fn substep(model: &dyn PhysicalModel, q: f64, sign: f64, x: f64, h: f64, step: f64, depth: u32) -> Result<f64> {
    let full = rk4(model, q, sign, x, h, step);
    let halves =
        rk4(model, q, sign, x, h, 0.5 * step).and_then(|mid| rk4(model, q, sign, x + 0.5 * step, mid, 0.5 * step));
    match (full, halves) {
        (Ok(f), Ok(h2)) if (f - h2).abs() <= REFINE_TOL * (1.0 + f.abs()) => Ok(f),
        (full, halves) if depth >= MAX_REFINE_DEPTH => halves.and(full),
        _ => {
            let mid = substep(model, q, sign, x, h, 0.5 * step, depth + 1)?;
            substep(model, q, sign, x + 0.5 * step, mid, 0.5 * step, depth + 1)
        }
    }
}

/// Integrates the steady ODE from `(x_from, h_from)` to `x_to` with `steps`
/// RK4 substeps (refined where needed). Either direction is allowed.
pub fn integrate(
    model: &dyn PhysicalModel,
    q_star: f64,
    x_from: f64,
    h_from: f64,
    x_to: f64,
    steps: usize,
) -> Result<f64> {
    let sign = model.partials(h_from, q_star).a.signum();
    if sign == 0.0 {
        return Err(Error::CriticalFlow { x: x_from, margin: 0.0 });
    }
    let step = (x_to - x_from) / steps.max(1) as f64;
    let mut h = h_from;
    for i in 0..steps.max(1) {
        h = substep(model, q_star, sign, x_from + i as f64 * step, h, step, 0)?;
    }
    Ok(h)
}

/// Solves for `H*(x)` on `grid` given the uniform flux `q_star` and `H*(L) = set_point`.
pub fn solve_steady_profile(
    model: &dyn PhysicalModel,
    grid: &Grid,
    q_star: f64,
    set_point: f64,
) -> Result<SteadyProfile> {
    solve_with_substeps(model, grid, q_star, set_point, SUBSTEPS_PER_CELL)
}

pub(crate) fn solve_with_substeps(
    model: &dyn PhysicalModel,
    grid: &Grid,
    q_star: f64,
    set_point: f64,
    substeps: usize,
) -> Result<SteadyProfile> {
    if !(set_point > 0.0) {
        return Err(Error::NonPositiveDepth { h: set_point, x: grid.length() });
    }
    model.validate(set_point, q_star)?;
    let a_l = model.partials(set_point, q_star).a;
    if a_l == 0.0 || !a_l.is_finite() {
        return Err(Error::CriticalFlow { x: grid.length(), margin: a_l });
    }
    let n = grid.nodes();
    let mut h = vec![0.0; n];
    h[n - 1] = set_point;
    for k in (0..n - 1).rev() {
        h[k] = integrate(model, q_star, grid.x(k + 1), h[k + 1], grid.x(k), substeps)?;
    }
    SteadyProfile::from_depths(model, *grid, q_star, h)
}

/// Per-node margin `gH* − V*²` (generically `∂f/∂H`) and whether it is
/// strictly positive everywhere.
pub fn subcritical_check(profile: &SteadyProfile, model: &dyn PhysicalModel) -> (Vec<f64>, bool) {
    let margin: Vec<f64> = profile.h_star.iter().map(|&h| model.partials(h, profile.q_star).a).collect();
    let ok = margin.iter().all(|&m| m > 0.0);
    (margin, ok)
}
