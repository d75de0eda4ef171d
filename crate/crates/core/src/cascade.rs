//! A string of identical pools separated by overshot gates, each with its
//! own feedforward controller.
//!
//! Pool `i` receives the outflow of pool `i − 1` through the shared junction
//! flux. Controller `i` is driven by the measured head over the upstream gate,
//! `D_{i−1} = H_{i−1}(t, L) − U_{i−1}(t)` (the external head `D_o` for the
//! first pool), and may use an overestimated friction `ĉ_f` as a filter.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::controller::{default_gravity, ControllerSample, FeedforwardController};
use crate::error::{Error, Result};
use crate::model::{FieldState, GateBoundary, GateInflow, Grid, Input, SaintVenant, Signal};
use crate::par::{self, Exec};
use crate::solver::{Downstream, Recorder, RunConfig, Solver, SolverConfig, Trajectory, Upstream};
use crate::steady::solve_steady_profile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CascadeScenario {
    /// Length of every pool, m.
    pub length: f64,
    /// Friction coefficient `c_f` of the plant.
    pub friction: f64,
    /// Gate discharge coefficient `c_g`.
    pub discharge: f64,
    #[serde(default = "default_gravity")]
    pub gravity: f64,
    /// Initial flow per unit width, m²/s.
    pub q_star: f64,
    /// Downstream level set point of each pool, m; the pool count is its length.
    pub set_points: Vec<f64>,
    /// Friction inside the controllers; defaults to `friction`.
    #[serde(default)]
    pub controller_friction: Option<f64>,
    /// Inflow into the first pool, m²/s; converted to the head `D_o`.
    pub inflow: Signal,
    pub cells: usize,
    /// Defaults to `cells`.
    #[serde(default)]
    pub controller_cells: Option<usize>,
    #[serde(default)]
    pub solver: SolverConfig,
    pub run: RunConfig,
}

impl CascadeScenario {
    pub fn pools(&self) -> usize {
        self.set_points.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.set_points.is_empty() {
            return Err(Error::param("set_points", "at least one pool is required"));
        }
        if self.set_points.iter().any(|&h| !(h > 0.0)) {
            return Err(Error::param("set_points", "must be > 0"));
        }
        Grid::new(self.length, self.cells)?;
        if let Some(c) = self.controller_cells {
            Grid::new(self.length, c)?;
        }
        SaintVenant::new(self.friction, self.gravity)?;
        SaintVenant::new(self.controller_friction(), self.gravity)?;
        GateBoundary::new(self.discharge)?;
        if !(self.q_star > 0.0) {
            return Err(Error::param("q_star", "must be > 0"));
        }
        self.inflow.validate().map_err(|r| Error::param("inflow", r))?;
        self.solver.validate()?;
        self.run.validate()
    }

    /// `ĉ_f`
    pub fn controller_friction(&self) -> f64 {
        self.controller_friction.unwrap_or(self.friction)
    }

    pub fn gate(&self) -> Result<GateBoundary> {
        GateBoundary::new(self.discharge)
    }

    pub fn disturbance(&self) -> Result<GateInflow> {
        Ok(GateInflow { inflow: self.inflow.clone(), gate: self.gate()? })
    }

    pub fn with_controller_friction(&self, friction: f64) -> Self {
        CascadeScenario { controller_friction: Some(friction), ..self.clone() }
    }
}

/// Boundary values produced by one cascade step, per pool.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutputs {
    /// Gate positions `U_i`.
    pub u: Vec<f64>,
    /// Heads driving each controller: `D_o` then `D_1 … D_{n−1}`.
    pub d: Vec<f64>,
}

/// Plants and controllers advanced in lockstep.
#[derive(Debug, Clone)]
pub struct Cascade {
    plants: Vec<Solver>,
    states: Vec<FieldState>,
    controllers: Vec<FeedforwardController>,
}

impl Cascade {
    /// Every plant and controller starts at its own steady profile.
    pub fn new(s: &CascadeScenario) -> Result<Self> {
        s.validate()?;
        let gate = Arc::new(s.gate()?);
        let plant_model = SaintVenant::new(s.friction, s.gravity)?;
        let ctrl_model = SaintVenant::new(s.controller_friction(), s.gravity)?;
        let plant_grid = Grid::new(s.length, s.cells)?;
        let ctrl_grid = Grid::new(s.length, s.controller_cells.unwrap_or(s.cells))?;
        let mut cascade = Cascade { plants: Vec::new(), states: Vec::new(), controllers: Vec::new() };
        for (i, &h_l) in s.set_points.iter().enumerate() {
            let pool = i + 1;
            let plant = Solver::new(Arc::new(plant_model), gate.clone(), plant_grid, s.solver)?;
            let state =
                solve_steady_profile(&plant_model, &plant_grid, s.q_star, h_l).map_err(|e| e.in_pool(pool))?.to_state();
            let ctrl_solver = Solver::new(Arc::new(ctrl_model), gate.clone(), ctrl_grid, s.solver)?;
            let ctrl =
                FeedforwardController::at_steady_state(ctrl_solver, s.q_star, h_l).map_err(|e| e.in_pool(pool))?;
            cascade.plants.push(plant);
            cascade.states.push(state);
            cascade.controllers.push(ctrl);
        }
        Ok(cascade)
    }

    pub fn pools(&self) -> usize {
        self.plants.len()
    }

    pub fn states(&self) -> &[FieldState] {
        &self.states
    }

    pub fn controllers(&self) -> &[FeedforwardController] {
        &self.controllers
    }

    pub fn plant_grid(&self) -> &Grid {
        self.plants[0].grid()
    }

    pub fn time(&self) -> f64 {
        self.states[0].t
    }

    /// Smallest CFL step over every plant and controller.
    pub fn max_stable_dt(&self) -> Result<f64> {
        let mut dt = f64::INFINITY;
        for (i, (plant, state)) in self.plants.iter().zip(&self.states).enumerate() {
            dt = dt.min(plant.max_stable_dt(state).map_err(|e| e.in_pool(i + 1))?);
            dt = dt.min(self.controllers[i].max_stable_dt().map_err(|e| e.in_pool(i + 1))?);
        }
        Ok(dt)
    }

    /// Advances every pool by `dt` given the external head `D_o` at the new time.
    pub fn step(&mut self, d_o: f64, dt: f64) -> Result<StepOutputs> {
        let n = self.pools();
        let mut out = StepOutputs { u: Vec::with_capacity(n), d: Vec::with_capacity(n) };
        let mut d = d_o;
        let mut inflow = None;
        for i in 0..n {
            let pool = i + 1;
            let u = self.controllers[i].step(d, dt).map_err(|e| e.in_pool(pool))?;
            let up = match inflow {
                None => Upstream::Relation(d),
                Some(q) => Upstream::Flux(q),
            };
            let state = &mut self.states[i];
            self.plants[i].advance(state, up, Downstream::Relation(u), dt).map_err(|e| e.in_pool(pool))?;
            out.u.push(u);
            out.d.push(d);
            inflow = Some(state.q_last());
            d = state.h_last() - u;
        }
        Ok(out)
    }

    /// `Σ_i ∫ H_i dx`
    pub fn storage(&self) -> f64 {
        self.states.iter().zip(&self.plants).map(|(s, p)| s.storage(p.grid())).sum()
    }
}

/// Recorded series of one pool.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolRun {
    pub plant: Trajectory,
    pub controller: Vec<ControllerSample>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeRun {
    pub pools: Vec<PoolRun>,
    /// Largest `|Q_i(t, 0) − Q_{i−1}(t, L)|` over all steps and junctions.
    pub junction_mismatch: f64,
}

impl CascadeRun {
    pub fn max_abs_y(&self) -> Vec<f64> {
        self.pools.iter().map(|p| p.plant.max_abs_y()).collect()
    }

    pub fn trajectories(&self) -> Vec<&Trajectory> {
        self.pools.iter().map(|p| &p.plant).collect()
    }
}

pub fn simulate_cascade(scenario: &CascadeScenario) -> Result<CascadeRun> {
    let mut cascade = Cascade::new(scenario)?;
    let disturbance = scenario.disturbance()?;
    run_cascade(&mut cascade, &disturbance, &scenario.set_points, &scenario.run)
}

/// Drives an initialized cascade for `run.duration` from its current time.
pub fn run_cascade(
    cascade: &mut Cascade,
    disturbance: &dyn Input,
    set_points: &[f64],
    run: &RunConfig,
) -> Result<CascadeRun> {
    run.validate()?;
    let n = cascade.pools();
    if set_points.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: set_points.len() });
    }
    let t0 = cascade.time();
    let mut recorders: Vec<Recorder> = set_points.iter().map(|&h| Recorder::new(*run, h, t0)).collect();
    let mut ctrl_samples = vec![Vec::new(); n];
    let mut u: Vec<f64> = cascade.controllers.iter().map(|c| c.last_u()).collect();
    let mut d = vec![disturbance.at(t0)];
    for i in 1..n {
        d.push(cascade.states[i - 1].h_last() - u[i - 1]);
    }
    for (rec, s) in recorders.iter_mut().zip(&cascade.states) {
        rec.observe(s);
    }
    let mut mismatch: f64 = 0.0;
    let end = t0 + run.duration;
    loop {
        let t = cascade.time();
        let done = t >= end;
        let (horizon, inclusive, dt) = if done {
            (f64::INFINITY, true, 0.0)
        } else {
            let dt = cascade.max_stable_dt()?;
            let dt = if end - t <= dt * (1.0 + 1e-12) { end - t } else { dt };
            (t + dt, false, dt)
        };
        for i in 0..n {
            if recorders[i].record_until(&cascade.states[i], u[i], d[i], horizon, inclusive) > 0 {
                let c = &cascade.controllers[i];
                let cs = c.state();
                let first = ctrl_samples[i].len();
                for s in &recorders[i].samples[first..] {
                    ctrl_samples[i].push(ControllerSample {
                        t: s.t,
                        h_hat_0: cs.h[0],
                        q_hat_0: cs.q[0],
                        q_hat_l: cs.q_last(),
                        u: c.last_u(),
                    });
                }
            }
        }
        if done {
            break;
        }
        let t_new = if dt == end - t { end } else { t + dt };
        let out = cascade.step(disturbance.at(t_new), dt)?;
        for s in &mut cascade.states {
            s.t = t_new;
        }
        for i in 1..n {
            mismatch = mismatch.max((cascade.states[i].q[0] - cascade.states[i - 1].q_last()).abs());
        }
        u = out.u;
        d = out.d;
        for (rec, s) in recorders.iter_mut().zip(&cascade.states) {
            rec.steps += 1;
            rec.observe(s);
        }
    }
    let pools = recorders
        .into_iter()
        .zip(ctrl_samples)
        .zip(&cascade.states)
        .map(|((rec, controller), state)| PoolRun { plant: rec.finish(state.clone()), controller })
        .collect();
    Ok(CascadeRun { pools, junction_mismatch: mismatch })
}

/// Peak-to-peak of `Q_i(t, L)` per pool after the startup window and the
/// ratios `p2p_{i+1} / p2p_i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Amplification {
    pub peak_to_peak: Vec<f64>,
    pub ratios: Vec<f64>,
}

/// Fraction of the horizon excluded from the peak-to-peak window.
pub const STARTUP_FRACTION: f64 = 0.05;

pub fn amplification_metric(trajectories: &[&Trajectory]) -> Amplification {
    let peak_to_peak: Vec<f64> = trajectories
        .iter()
        .map(|tr| {
            let (Some(first), Some(last)) = (tr.samples.first(), tr.samples.last()) else {
                return 0.0;
            };
            let from = first.t + STARTUP_FRACTION * (last.t - first.t);
            let (lo, hi) = tr
                .samples
                .iter()
                .filter(|s| s.t >= from)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.q_at_l), hi.max(s.q_at_l)));
            if hi >= lo {
                hi - lo
            } else {
                0.0
            }
        })
        .collect();
    let ratios = peak_to_peak
        .windows(2)
        .map(|w| match (w[0] == 0.0, w[1] == 0.0) {
            (true, true) => 1.0,
            (true, false) => f64::INFINITY,
            _ => w[1] / w[0],
        })
        .collect();
    Amplification { peak_to_peak, ratios }
}

/// Headline numbers of a cascade run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CascadeSummary {
    pub controller_friction: f64,
    pub amplification: Amplification,
    pub max_abs_y: Vec<f64>,
    pub terminal_abs_y: Vec<f64>,
}

impl CascadeSummary {
    pub fn from_run(controller_friction: f64, run: &CascadeRun) -> Self {
        CascadeSummary {
            controller_friction,
            amplification: amplification_metric(&run.trajectories()),
            max_abs_y: run.max_abs_y(),
            terminal_abs_y: run.pools.iter().map(|p| p.plant.terminal_abs_y()).collect(),
        }
    }
}

/// Runs the scenario once per controller friction value.
pub fn friction_sweep(scenario: &CascadeScenario, frictions: &[f64], exec: Exec) -> Result<Vec<CascadeSummary>> {
    par::try_map(exec, frictions, |&cf| {
        let run = simulate_cascade(&scenario.with_controller_friction(cf))?;
        Ok(CascadeSummary::from_run(cf, &run))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::PoolScenario;
    use crate::model::GRAVITY;

    fn two_pools(cells: usize, duration: f64) -> CascadeScenario {
        CascadeScenario {
            length: 5000.0,
            friction: 0.008,
            discharge: 2.0,
            gravity: GRAVITY,
            q_star: 2.0,
            set_points: vec![5.0, 4.9],
            controller_friction: None,
            inflow: Signal::Pulse {
                base: 2.0,
                peak: 2.5,
                settle: 2.2,
                start: 900.0,
                ramp: 600.0,
                hold: 600.0,
                fall: Some(1200.0),
            },
            cells,
            controller_cells: None,
            solver: SolverConfig::default(),
            run: RunConfig { duration, cadence: 30.0, snapshots: false },
        }
    }

    #[test]
    fn single_pool_matches_closed_loop() {
        let mut c = two_pools(60, 3000.0);
        c.set_points = vec![5.0];
        c.friction = 0.01;
        let cas = simulate_cascade(&c).unwrap();
        let pool = PoolScenario {
            length: c.length,
            friction: c.friction,
            discharge: c.discharge,
            gravity: c.gravity,
            q_star: c.q_star,
            set_point: 5.0,
            inflow: c.inflow.clone(),
            plant_cells: c.cells,
            controller_cells: None,
            controller_friction: None,
            controller_offset: 0.0,
            solver: c.solver,
            run: c.run,
        };
        let single = pool.run_closed_loop().unwrap();
        assert_eq!(cas.pools[0].plant.samples, single.plant.samples);
        assert_eq!(cas.pools[0].plant.final_state, single.plant.final_state);
        assert_eq!(cas.pools[0].controller, single.controller);
    }

    #[test]
    fn matched_controllers_hold_every_level() {
        let run = simulate_cascade(&two_pools(80, 6000.0)).unwrap();
        assert_eq!(run.junction_mismatch, 0.0);
        for y in run.max_abs_y() {
            assert!(y < 1e-6, "{y}");
        }
    }

    /// Worst per-step residual of `d/dt Σ∫H dx = Q_1(t,0) − Q_n(t,L)` with
    /// trapezoidal storage and time-averaged boundary flows.
    fn worst_mass_residual(cells: usize, inflow: Signal, horizon: f64) -> f64 {
        let mut s = two_pools(cells, 1.0);
        s.inflow = inflow;
        let mut c = Cascade::new(&s).unwrap();
        let dist = s.disturbance().unwrap();
        let mut worst = 0.0f64;
        while c.time() < horizon {
            let dt = c.max_stable_dt().unwrap();
            let before = c.storage();
            let q_in_old = c.states()[0].q[0];
            let q_out_old = c.states()[1].q_last();
            let t_new = c.time() + dt;
            c.step(dist.at(t_new), dt).unwrap();
            assert_eq!(c.states()[1].q[0], c.states()[0].q_last());
            let q_in = 0.5 * (q_in_old + c.states()[0].q[0]);
            let q_out = 0.5 * (q_out_old + c.states()[1].q_last());
            worst = worst.max(((c.storage() - before) / dt - (q_in - q_out)).abs());
        }
        worst
    }

    #[test]
    fn junction_flux_and_mass_balance_per_step() {
        assert!(worst_mass_residual(200, Signal::constant(2.0), 1200.0) < 1e-6 * 2.0);
        let pulse = two_pools(1, 1.0).inflow;
        let coarse = worst_mass_residual(50, pulse.clone(), 3000.0);
        let fine = worst_mass_residual(100, pulse, 3000.0);
        // second order in Δx
        assert!(coarse / fine > 3.0, "{coarse} {fine}");
    }

    #[test]
    fn amplification_conventions() {
        let mut flat = two_pools(100, 600.0);
        flat.inflow = Signal::constant(2.0);
        let run = simulate_cascade(&flat).unwrap();
        let amp = amplification_metric(&run.trajectories());
        assert!(amp.peak_to_peak.iter().all(|&p| p < 1e-5), "{:?}", amp.peak_to_peak);
        let mut a = run.pools[0].plant.clone();
        for smp in &mut a.samples {
            smp.q_at_l = 2.0;
        }
        let mut b = a.clone();
        b.samples.last_mut().unwrap().q_at_l = 2.5;
        let m = amplification_metric(&[&a, &a]);
        assert_eq!(m.ratios, vec![1.0]);
        let m = amplification_metric(&[&a, &b]);
        assert_eq!(m.ratios, vec![f64::INFINITY]);
        let m = amplification_metric(&[&b, &b]);
        assert_eq!(m.ratios, vec![1.0]);
        assert!((m.peak_to_peak[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn critical_pool_reports_index() {
        let mut s = two_pools(20, 600.0);
        s.set_points = vec![5.0, 0.3];
        match Cascade::new(&s) {
            Err(Error::Pool { pool, .. }) => assert_eq!(pool, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sweep_modes_agree() {
        let s = two_pools(30, 2400.0);
        let seq = friction_sweep(&s, &[0.008, 0.016], Exec::Sequential).unwrap();
        let par = friction_sweep(&s, &[0.008, 0.016], Exec::Parallel).unwrap();
        assert_eq!(seq, par);
        assert_eq!(seq[1].controller_friction, 0.016);
    }
}
