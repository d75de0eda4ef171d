//! Nonlinear feedforward controller realized as a copy of the plant.
//!
//! The copy obeys the plant PDE with `α(Ĥ,Q̂)(t,0) = D(t)` upstream and the
//! Dirichlet condition `Ĥ(t,L) = H*_L` downstream; the actuation is
//! `U(t) = β(H*_L, Q̂(t,L))`. With identical initial states the plant then
//! reproduces the copy and `H(t,L)` stays at the set point.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    trapezoid, BoundaryMap, FieldState, GateBoundary, GateInflow, Grid, Input, SaintVenant, Signal, GRAVITY,
};
use crate::solver::{drive, Actuator, Downstream, RunConfig, Solver, SolverConfig, Trajectory, Upstream};
use crate::steady::{solve_steady_profile, SteadyProfile};

#[derive(Debug, Clone)]
pub struct FeedforwardController {
    solver: Solver,
    state: FieldState,
    set_point: f64,
    last_u: f64,
}

impl FeedforwardController {
    /// Builds a controller from an initial internal state; the downstream
    /// node is reset to the set point.
    pub fn new(solver: Solver, mut initial: FieldState, set_point: f64) -> Result<Self> {
        initial.check_grid(solver.grid())?;
        if !(set_point > 0.0) {
            return Err(Error::param("set_point", "must be > 0"));
        }
        *initial.h.last_mut().unwrap() = set_point;
        let q_l = initial.q_last();
        solver.boundary().validate(set_point, q_l)?;
        let last_u = solver.boundary().downstream(set_point, q_l);
        Ok(FeedforwardController { solver, state: initial, set_point, last_u })
    }

    /// Controller started at its own steady profile for inflow `q_star`.
    pub fn at_steady_state(solver: Solver, q_star: f64, set_point: f64) -> Result<Self> {
        let profile = solve_steady_profile(solver.model(), solver.grid(), q_star, set_point)?;
        Self::new(solver, profile.to_state(), set_point)
    }

    pub fn state(&self) -> &FieldState {
        &self.state
    }

    pub fn grid(&self) -> &Grid {
        self.solver.grid()
    }

    pub fn set_point(&self) -> f64 {
        self.set_point
    }

    pub fn last_u(&self) -> f64 {
        self.last_u
    }

    /// `Q̂(t, L)`
    pub fn q_hat_l(&self) -> f64 {
        self.state.q_last()
    }

    pub fn max_stable_dt(&self) -> Result<f64> {
        self.solver.max_stable_dt(&self.state)
    }

    /// Advances the copy by `dt` with disturbance `d` at the new time and
    /// returns `U = β(H*_L, Q̂(t, L))`.
    pub fn step(&mut self, d: f64, dt: f64) -> Result<f64> {
        self.solver.advance(&mut self.state, Upstream::Relation(d), Downstream::Level(self.set_point), dt)?;
        let q_l = self.state.q_last();
        self.solver.boundary().validate(self.set_point, q_l)?;
        self.last_u = self.solver.boundary().downstream(self.set_point, q_l);
        Ok(self.last_u)
    }
}

impl Actuator for FeedforwardController {
    fn max_dt(&self) -> Result<Option<f64>> {
        self.max_stable_dt().map(Some)
    }

    fn actuate(&mut self, _t: f64, d: f64, dt: f64) -> Result<Downstream> {
        self.step(d, dt).map(Downstream::Relation)
    }
}

/// Internal controller observables at one sample time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerSample {
    pub t: f64,
    pub h_hat_0: f64,
    pub q_hat_0: f64,
    pub q_hat_l: f64,
    pub u: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedRun {
    pub plant: Trajectory,
    pub controller: Vec<ControllerSample>,
    /// `(t, ‖(H − Ĥ, Q − Q̂)‖_{L²})` at the sample times, with the copy
    /// resampled onto the plant grid.
    pub distance: Vec<(f64, f64)>,
}

impl ClosedRun {
    pub fn max_abs_y(&self) -> f64 {
        self.plant.max_abs_y()
    }

    pub fn terminal_abs_y(&self) -> f64 {
        self.plant.terminal_abs_y()
    }
}

/// L² distance between plant and copy on the plant grid.
pub fn state_distance(plant: &FieldState, plant_grid: &Grid, copy: &FieldState, copy_grid: &Grid) -> f64 {
    let copy = if copy_grid == plant_grid { copy.clone() } else { copy.resample(copy_grid, plant_grid) };
    let sq: Vec<f64> = plant
        .h
        .iter()
        .zip(&plant.q)
        .zip(copy.h.iter().zip(&copy.q))
        .map(|((h, q), (hh, qh))| (h - hh).powi(2) + (q - qh).powi(2))
        .collect();
    trapezoid(&sq, plant_grid.dx()).sqrt()
}

/// Runs plant and controller in lockstep on a shared time step (the smaller
/// of the two CFL limits). The controller steps first; the plant then uses
/// its fresh `U` at the same time instant.
pub fn closed_run(
    plant: &mut Solver,
    initial: FieldState,
    controller: &mut FeedforwardController,
    disturbance: &dyn Input,
    run: &RunConfig,
) -> Result<ClosedRun> {
    let set_point = controller.set_point();
    let plant_grid = *plant.grid();
    let mut ctrl_samples = Vec::new();
    let mut distance = Vec::new();
    let trajectory = drive(plant, initial, disturbance, controller, set_point, run, |state, ctrl| {
        let c = ctrl.state();
        ctrl_samples.push(ControllerSample {
            t: state.t,
            h_hat_0: c.h[0],
            q_hat_0: c.q[0],
            q_hat_l: c.q_last(),
            u: ctrl.last_u(),
        });
        distance.push((state.t, state_distance(state, &plant_grid, c, ctrl.grid())));
    })?;
    // align sample times with the plant series
    for (s, (c, d)) in trajectory.samples.iter().zip(ctrl_samples.iter_mut().zip(distance.iter_mut())) {
        c.t = s.t;
        d.0 = s.t;
    }
    Ok(ClosedRun { plant: trajectory, controller: ctrl_samples, distance })
}

/// A single pool with overshot gates at both ends, initially at steady state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolScenario {
    /// Pool length, m.
    pub length: f64,
    /// Friction coefficient `c_f` (dimensionless).
    pub friction: f64,
    /// Gate discharge coefficient `c_g`, m^{1/2}/s.
    pub discharge: f64,
    /// m/s²
    #[serde(default = "default_gravity")]
    pub gravity: f64,
    /// Initial flow per unit width, m²/s.
    pub q_star: f64,
    /// Downstream level set point `H*_L`, m.
    pub set_point: f64,
    /// Inflow `Q(t, 0)` in m²/s; converted to the head over the inflow gate.
    pub inflow: Signal,
    pub plant_cells: usize,
    /// Defaults to `plant_cells`.
    #[serde(default)]
    pub controller_cells: Option<usize>,
    /// Friction used inside the controller copy; defaults to `friction`.
    #[serde(default)]
    pub controller_friction: Option<f64>,
    /// Uniform offset added to the copy's initial depth (m), except at `x = L`.
    #[serde(default)]
    pub controller_offset: f64,
    #[serde(default)]
    pub solver: SolverConfig,
    pub run: RunConfig,
}

pub(crate) fn default_gravity() -> f64 {
    GRAVITY
}

impl PoolScenario {
    pub fn validate(&self) -> Result<()> {
        Grid::new(self.length, self.plant_cells)?;
        if let Some(c) = self.controller_cells {
            Grid::new(self.length, c)?;
        }
        SaintVenant::new(self.friction, self.gravity)?;
        if let Some(cf) = self.controller_friction {
            SaintVenant::new(cf, self.gravity)?;
        }
        GateBoundary::new(self.discharge)?;
        if !(self.q_star > 0.0) {
            return Err(Error::param("q_star", "must be > 0"));
        }
        if !(self.set_point > 0.0) {
            return Err(Error::param("set_point", "must be > 0"));
        }
        self.inflow.validate().map_err(|r| Error::param("inflow", r))?;
        self.solver.validate()?;
        self.run.validate()
    }

    pub fn model(&self) -> Result<SaintVenant> {
        SaintVenant::new(self.friction, self.gravity)
    }

    pub fn gate(&self) -> Result<GateBoundary> {
        GateBoundary::new(self.discharge)
    }

    pub fn plant_grid(&self) -> Result<Grid> {
        Grid::new(self.length, self.plant_cells)
    }

    pub fn disturbance(&self) -> Result<GateInflow> {
        Ok(GateInflow { inflow: self.inflow.clone(), gate: self.gate()? })
    }

    pub fn steady_profile(&self) -> Result<SteadyProfile> {
        solve_steady_profile(&self.model()?, &self.plant_grid()?, self.q_star, self.set_point)
    }

    fn plant_solver(&self) -> Result<Solver> {
        Solver::new(Arc::new(self.model()?), Arc::new(self.gate()?), self.plant_grid()?, self.solver)
    }

    /// Gate position holding the initial steady state.
    pub fn steady_gate(&self) -> Result<f64> {
        Ok(self.gate()?.downstream(self.set_point, self.q_star))
    }

    pub fn controller(&self) -> Result<FeedforwardController> {
        let cf = self.controller_friction.unwrap_or(self.friction);
        let model = SaintVenant::new(cf, self.gravity)?;
        let grid = Grid::new(self.length, self.controller_cells.unwrap_or(self.plant_cells))?;
        let solver = Solver::new(Arc::new(model), Arc::new(self.gate()?), grid, self.solver)?;
        let profile = solve_steady_profile(&model, &grid, self.q_star, self.set_point)?;
        let mut init = profile.to_state();
        let n = init.h.len();
        for h in &mut init.h[..n - 1] {
            *h += self.controller_offset;
        }
        FeedforwardController::new(solver, init, self.set_point)
    }

    /// Gate held at its initial steady position.
    pub fn run_open_loop(&self) -> Result<Trajectory> {
        self.validate()?;
        let mut plant = self.plant_solver()?;
        let gate = Signal::constant(self.steady_gate()?);
        let mut act = crate::solver::SignalActuator(&gate);
        crate::solver::simulate(
            &mut plant,
            self.steady_profile()?.to_state(),
            &self.disturbance()?,
            &mut act,
            self.set_point,
            &self.run,
        )
    }

    pub fn run_closed_loop(&self) -> Result<ClosedRun> {
        self.validate()?;
        let mut plant = self.plant_solver()?;
        let mut ctrl = self.controller()?;
        closed_run(&mut plant, self.steady_profile()?.to_state(), &mut ctrl, &self.disturbance()?, &self.run)
    }
}
