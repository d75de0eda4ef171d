//! Explicit time integration of `H_t + Q_x = 0`, `Q_t + f_x + g = 0`.
//!
//! Interior nodes use the two-step (Richtmyer) Lax–Wendroff scheme on the
//! conservative pair `(H, Q)` with flux `(Q, f)`; the source is evaluated
//! pointwise at the half and full steps. Each boundary node pairs its
//! physical relation with the outgoing characteristic relation
//!
//! ```text
//!   x = 0:  (Q − λ1 H)^{n+1} = (Q − λ1 H)_foot − Δt g_foot
//!   x = L:  (Q + λ2 H)^{n+1} = (Q + λ2 H)_foot − Δt g_foot
//! ```
//!
//! where the foot of the characteristic is interpolated from the old state.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BoundaryMap, FieldState, Grid, Input, PhysicalModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// Courant number in `(0, 1]`.
    pub cfl: f64,
    #[serde(default = "default_newton_tol")]
    pub newton_tol: f64,
    #[serde(default = "default_newton_iter")]
    pub newton_max_iter: usize,
}

fn default_newton_tol() -> f64 {
    1e-10
}

fn default_newton_iter() -> usize {
    50
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { cfl: 0.9, newton_tol: default_newton_tol(), newton_max_iter: default_newton_iter() }
    }
}

impl SolverConfig {
    pub fn with_cfl(cfl: f64) -> Result<Self> {
        let c = SolverConfig { cfl, ..Default::default() };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::param("cfl", format!("must lie in (0, 1], got {}", self.cfl)));
        }
        if !(self.newton_tol > 0.0) || self.newton_max_iter == 0 {
            return Err(Error::param("newton", "tolerance and iteration cap must be positive"));
        }
        Ok(())
    }
}

/// Condition imposed at `x = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Upstream {
    /// `α(H, Q) = D`
    Relation(f64),
    /// `Q = value`, used for junctions between pools.
    Flux(f64),
}

/// Condition imposed at `x = L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Downstream {
    /// `β(H, Q) = U`
    Relation(f64),
    /// `H = value`
    Level(f64),
}

#[derive(Debug, Clone, Default)]
struct Scratch {
    f: Vec<f64>,
    g: Vec<f64>,
    hm: Vec<f64>,
    qm: Vec<f64>,
    fm: Vec<f64>,
    gm: Vec<f64>,
}

/// One discretized plant: model, boundary relations, grid and scheme settings.
#[derive(Debug, Clone)]
pub struct Solver {
    model: Arc<dyn PhysicalModel>,
    boundary: Arc<dyn BoundaryMap>,
    grid: Grid,
    config: SolverConfig,
    scratch: Scratch,
}

impl Solver {
    pub fn new(
        model: Arc<dyn PhysicalModel>,
        boundary: Arc<dyn BoundaryMap>,
        grid: Grid,
        config: SolverConfig,
    ) -> Result<Self> {
        config.validate()?;
        Ok(Solver { model, boundary, grid, config, scratch: Scratch::default() })
    }

    pub fn model(&self) -> &dyn PhysicalModel {
        self.model.as_ref()
    }

    pub fn boundary(&self) -> &dyn BoundaryMap {
        self.boundary.as_ref()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    /// `cfl · Δx / max_k max(λ1, λ2)`.
    pub fn max_stable_dt(&self, state: &FieldState) -> Result<f64> {
        state.check_grid(&self.grid)?;
        let mut fastest: f64 = 0.0;
        for (k, (&h, &q)) in state.h.iter().zip(&state.q).enumerate() {
            if !(h > 0.0) {
                return Err(Error::DepthUnderflow { h, node: k });
            }
            let (l1, l2) = self.model.speeds(h, q)?;
            fastest = fastest.max(l1).max(l2);
        }
        Ok(self.config.cfl * self.grid.dx() / fastest)
    }

    /// Advances `state` by `dt` in place.
    pub fn advance(
        &mut self,
        state: &mut FieldState,
        upstream: Upstream,
        downstream: Downstream,
        dt: f64,
    ) -> Result<()> {
        let limit = self.max_stable_dt(state)?;
        if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
            return Err(Error::CflViolation { dt, limit });
        }

        let left = self.close_upstream(state, upstream, dt)?;
        let right = self.close_downstream(state, downstream, dt)?;
        self.lax_wendroff_interior(state, dt);

        let n = self.grid.cells();
        (state.h[0], state.q[0]) = left;
        (state.h[n], state.q[n]) = right;
        if let Some((node, &h)) = state.h.iter().enumerate().find(|(_, h)| !(**h > 0.0)) {
            return Err(Error::DepthUnderflow { h, node });
        }
        state.t += dt;
        Ok(())
    }

    fn lax_wendroff_interior(&mut self, state: &mut FieldState, dt: f64) {
        let n = self.grid.cells();
        let r = dt / self.grid.dx();
        let model = self.model.as_ref();
        let s = &mut self.scratch;
        s.f.clear();
        s.g.clear();
        s.f.extend(state.h.iter().zip(&state.q).map(|(&h, &q)| model.flux(h, q)));
        s.g.extend(state.h.iter().zip(&state.q).map(|(&h, &q)| model.source(h, q)));
        s.hm.resize(n, 0.0);
        s.qm.resize(n, 0.0);
        s.fm.resize(n, 0.0);
        s.gm.resize(n, 0.0);
        for i in 0..n {
            let (h0, h1) = (state.h[i], state.h[i + 1]);
            let (q0, q1) = (state.q[i], state.q[i + 1]);
            let hm = 0.5 * (h0 + h1) - 0.5 * r * (q1 - q0);
            let qm = 0.5 * (q0 + q1) - 0.5 * r * (s.f[i + 1] - s.f[i]) - 0.25 * dt * (s.g[i] + s.g[i + 1]);
            s.hm[i] = hm;
            s.qm[i] = qm;
            s.fm[i] = model.flux(hm, qm);
            s.gm[i] = model.source(hm, qm);
        }
        for i in 1..n {
            state.h[i] -= r * (s.qm[i] - s.qm[i - 1]);
            state.q[i] -= r * (s.fm[i] - s.fm[i - 1]) + 0.5 * dt * (s.gm[i] + s.gm[i - 1]);
        }
    }

    /// Foot values `(H, Q, g)` at distance `reach` from boundary node `from`
    /// towards neighbour `towards`.
    fn foot(&self, state: &FieldState, from: usize, towards: usize, reach: f64) -> (f64, f64, f64) {
        let w = (reach / self.grid.dx()).clamp(0.0, 1.0);
        let h = state.h[from] + w * (state.h[towards] - state.h[from]);
        let q = state.q[from] + w * (state.q[towards] - state.q[from]);
        (h, q, self.model.source(h, q))
    }

    fn close_upstream(&self, state: &FieldState, cond: Upstream, dt: f64) -> Result<(f64, f64)> {
        let (l1, l2) = self.model.speeds(state.h[0], state.q[0])?;
        let (hf, qf, gf) = self.foot(state, 0, 1, l2 * dt);
        // Q = base + λ1 H along the incoming-from-interior characteristic
        let base = qf - dt * gf - l1 * hf;
        match cond {
            Upstream::Flux(q) => Ok(((q - base) / l1, q)),
            Upstream::Relation(d) => {
                let bc = self.boundary.as_ref();
                let h = self.newton("upstream", state.h[0], |h| {
                    let q = base + l1 * h;
                    bc.validate(h, q)?;
                    let (ah, aq) = bc.upstream_partials(h, q);
                    Ok((bc.upstream(h, q) - d, ah + aq * l1))
                })?;
                Ok((h, base + l1 * h))
            }
        }
    }

    fn close_downstream(&self, state: &FieldState, cond: Downstream, dt: f64) -> Result<(f64, f64)> {
        let n = self.grid.cells();
        let (l1, l2) = self.model.speeds(state.h[n], state.q[n])?;
        let (hf, qf, gf) = self.foot(state, n, n - 1, l1 * dt);
        // Q = base − λ2 H
        let base = qf - dt * gf + l2 * hf;
        match cond {
            Downstream::Level(h) => Ok((h, base - l2 * h)),
            Downstream::Relation(u) => {
                let bc = self.boundary.as_ref();
                let h = self.newton("downstream", state.h[n], |h| {
                    let q = base - l2 * h;
                    bc.validate(h, q)?;
                    let (bh, bq) = bc.downstream_partials(h, q);
                    Ok((bc.downstream(h, q) - u, bh - bq * l2))
                })?;
                Ok((h, base - l2 * h))
            }
        }
    }

    /// Damped scalar Newton iteration; after reaching the tolerance one
    /// extra step is taken if it further reduces the residual.
    fn newton(&self, side: &'static str, start: f64, eval: impl Fn(f64) -> Result<(f64, f64)>) -> Result<f64> {
        let tol = self.config.newton_tol;
        let mut h = start;
        let (mut res, mut slope) = eval(h)?;
        for _ in 0..self.config.newton_max_iter {
            if res == 0.0 {
                return Ok(h);
            }
            if !(slope.abs() > 0.0) {
                break;
            }
            let step = -res / slope;
            let mut lambda = 1.0;
            let mut accepted = None;
            for _ in 0..30 {
                let trial = h + lambda * step;
                if trial > 0.0 {
                    if let Ok((r, s)) = eval(trial) {
                        if r.abs() < res.abs() {
                            accepted = Some((trial, r, s));
                            break;
                        }
                    }
                }
                lambda *= 0.5;
            }
            match accepted {
                Some((trial, r, s)) => {
                    h = trial;
                    res = r;
                    slope = s;
                }
                None if res.abs() <= tol => return Ok(h),
                None => break,
            }
            if res.abs() <= tol {
                if let Ok((r, s)) = eval(h - res / slope) {
                    if r.abs() < res.abs() && s.abs() > 0.0 {
                        return Ok(h - res / slope);
                    }
                }
                return Ok(h);
            }
        }
        if res.abs() <= tol {
            return Ok(h);
        }
        Err(Error::NewtonDivergence { side, iterations: self.config.newton_max_iter, residual: res })
    }
}

/// Produces the downstream condition for each step.
pub trait Actuator {
    /// Largest step the actuator can take from its current state, if limited.
    fn max_dt(&self) -> Result<Option<f64>> {
        Ok(None)
    }

    /// Called once per step with the step end time `t`, the disturbance at
    /// `t`, and the step size.
    fn actuate(&mut self, t: f64, disturbance: f64, dt: f64) -> Result<Downstream>;
}

/// Open-loop gate setting `β(H,Q)(t,L) = U(t)`.
pub struct SignalActuator<'a>(pub &'a dyn Input);

impl Actuator for SignalActuator<'_> {
    fn actuate(&mut self, t: f64, _d: f64, _dt: f64) -> Result<Downstream> {
        Ok(Downstream::Relation(self.0.at(t)))
    }
}

/// Holds `H(t, L)` at a fixed level.
pub struct LevelActuator(pub f64);

impl Actuator for LevelActuator {
    fn actuate(&mut self, _t: f64, _d: f64, _dt: f64) -> Result<Downstream> {
        Ok(Downstream::Level(self.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Simulated horizon, s.
    pub duration: f64,
    /// Sampling period of the recorded series, s.
    pub cadence: f64,
    /// Keep full-field snapshots at each sample.
    #[serde(default)]
    pub snapshots: bool,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) {
            return Err(Error::param("duration", "must be > 0"));
        }
        if !(self.cadence > 0.0) {
            return Err(Error::param("cadence", "must be > 0"));
        }
        Ok(())
    }

    pub fn sample_count(&self) -> usize {
        (self.duration / self.cadence + 1e-9).floor() as usize + 1
    }

    pub fn sample_time(&self, k: usize) -> f64 {
        (k as f64 * self.cadence).min(self.duration)
    }
}

/// Boundary observables at one sample time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySample {
    pub t: f64,
    pub h_at_l: f64,
    pub q_at_0: f64,
    pub q_at_l: f64,
    pub u: f64,
    pub d: f64,
    /// `H(t, L) − H*_L`
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub set_point: f64,
    pub samples: Vec<BoundarySample>,
    pub snapshots: Vec<FieldState>,
    pub final_state: FieldState,
    pub steps: usize,
    /// Extremes of `Y` over every step, not only the samples.
    pub max_y: f64,
    pub min_y: f64,
}

impl Trajectory {
    pub fn max_abs_y(&self) -> f64 {
        self.max_y.abs().max(self.min_y.abs())
    }

    pub fn terminal_abs_y(&self) -> f64 {
        (self.final_state.h_last() - self.set_point).abs()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }
}

pub(crate) struct Recorder {
    run: RunConfig,
    set_point: f64,
    t0: f64,
    next: usize,
    pub samples: Vec<BoundarySample>,
    pub snapshots: Vec<FieldState>,
    pub max_y: f64,
    pub min_y: f64,
    pub steps: usize,
}

impl Recorder {
    pub fn new(run: RunConfig, set_point: f64, t0: f64) -> Self {
        Recorder {
            run,
            set_point,
            t0,
            next: 0,
            samples: Vec::with_capacity(run.sample_count()),
            snapshots: Vec::new(),
            max_y: f64::NEG_INFINITY,
            min_y: f64::INFINITY,
            steps: 0,
        }
    }

    pub fn observe(&mut self, state: &FieldState) {
        let y = state.h_last() - self.set_point;
        self.max_y = self.max_y.max(y);
        self.min_y = self.min_y.min(y);
    }

    /// Records every pending sample due before `horizon` (absolute time)
    /// from the current, last completed, state. Returns how many were recorded.
    pub fn record_until(&mut self, state: &FieldState, u: f64, d: f64, horizon: f64, inclusive: bool) -> usize {
        let mut recorded = 0;
        while self.next < self.run.sample_count() {
            let ts = self.t0 + self.run.sample_time(self.next);
            let due = if inclusive { ts <= horizon } else { ts < horizon };
            if !due {
                break;
            }
            self.samples.push(BoundarySample {
                t: ts,
                h_at_l: state.h_last(),
                q_at_0: state.q[0],
                q_at_l: state.q_last(),
                u,
                d,
                y: state.h_last() - self.set_point,
            });
            if self.run.snapshots {
                self.snapshots.push(state.clone());
            }
            self.next += 1;
            recorded += 1;
        }
        recorded
    }

    pub fn finish(self, final_state: FieldState) -> Trajectory {
        Trajectory {
            set_point: self.set_point,
            samples: self.samples,
            snapshots: self.snapshots,
            final_state,
            steps: self.steps,
            max_y: self.max_y,
            min_y: self.min_y,
        }
    }
}

/// Shared stepping loop. `hook` runs after each recorded sample batch with
/// the plant state and the actuator.
pub(crate) fn drive<A: Actuator + ?Sized>(
    solver: &mut Solver,
    mut state: FieldState,
    disturbance: &dyn Input,
    actuator: &mut A,
    set_point: f64,
    run: &RunConfig,
    mut hook: impl FnMut(&FieldState, &A),
) -> Result<Trajectory> {
    run.validate()?;
    state.check_grid(solver.grid())?;
    let n = solver.grid().cells();
    let mut u = solver.boundary().downstream(state.h[n], state.q[n]);
    let mut d = disturbance.at(state.t);
    let mut rec = Recorder::new(*run, set_point, state.t);
    rec.observe(&state);
    let end = state.t + run.duration;
    while state.t < end {
        let mut dt = solver.max_stable_dt(&state)?;
        if let Some(limit) = actuator.max_dt()? {
            dt = dt.min(limit);
        }
        let last = end - state.t <= dt * (1.0 + 1e-12);
        if last {
            dt = end - state.t;
        }
        if rec.record_until(&state, u, d, state.t + dt, false) > 0 {
            hook(&state, actuator);
        }
        let t_new = if last { end } else { state.t + dt };
        d = disturbance.at(t_new);
        let down = actuator.actuate(t_new, d, dt)?;
        solver.advance(&mut state, Upstream::Relation(d), down, dt)?;
        state.t = t_new;
        u = match down {
            Downstream::Relation(cmd) => cmd,
            Downstream::Level(_) => solver.boundary().downstream(state.h[n], state.q[n]),
        };
        rec.steps += 1;
        rec.observe(&state);
    }
    if rec.record_until(&state, u, d, f64::INFINITY, true) > 0 {
        hook(&state, actuator);
    }
    Ok(rec.finish(state))
}

/// Runs the plant from `initial` under disturbance `D(t)` with the given
/// actuator (a fixed gate signal or a controller).
pub fn simulate(
    solver: &mut Solver,
    initial: FieldState,
    disturbance: &dyn Input,
    actuator: &mut dyn Actuator,
    set_point: f64,
    run: &RunConfig,
) -> Result<Trajectory> {
    drive(solver, initial, disturbance, actuator, set_point, run, |_, _| {})
}
