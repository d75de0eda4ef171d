//! Runs one scenario into an in-memory set of outputs.

use anyhow::Error;
use hyperff::cascade::{simulate_cascade, CascadeSummary};
use hyperff::certificate::{
    cascade_epsilon_bound, omega_check, saint_venant_certificate_with, Certificate, LyapunovWeights,
};
use hyperff::io::{self, OutputSet};
use hyperff::linear::{linear_closed_loop, LinearPlant, TransferKind};
use hyperff::model::{GateBoundary, Grid, SaintVenant};
use hyperff::steady::{solve_steady_profile, SteadyProfile};
use hyperff::Exec;

use crate::config::{self, Scenario, Weights};
use crate::summary::Summary;

/// Why a scenario did not produce outputs.
#[derive(Debug)]
pub enum Failure {
    Config(Error),
    Simulation(Error),
    Certificate(String),
    Io(Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Config(_) => 2,
            Failure::Simulation(_) => 3,
            Failure::Certificate(_) => 4,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(e) => write!(f, "configuration error: {e:#}"),
            Failure::Simulation(e) => write!(f, "simulation error: {e:#}"),
            Failure::Certificate(msg) => write!(f, "certificate failed: {msg}"),
            Failure::Io(e) => write!(f, "output error: {e:#}"),
        }
    }
}

fn sim(e: impl Into<Error>) -> Failure {
    Failure::Simulation(e.into())
}

pub struct Outcome {
    pub outputs: OutputSet,
    pub summary: Summary,
    /// `None` when the experiment has no stability certificate.
    pub certified: Option<bool>,
    /// Names of the conditions that did not pass.
    pub failed_conditions: Vec<String>,
}

pub fn run(scenario: &Scenario, exec: Exec) -> Result<Outcome, Failure> {
    let mut summary = Summary::new();
    summary.text("kind", scenario.kind());
    let mut out = Outcome { outputs: OutputSet::new(), summary, certified: None, failed_conditions: Vec::new() };
    match scenario {
        Scenario::LinearAnalysis(c) => linear_analysis(c, exec, &mut out)?,
        Scenario::SinglePool(c) => single_pool(c, exec, &mut out)?,
        Scenario::Cascade(c) => cascade(c, exec, &mut out)?,
        Scenario::Certificate(c) => certificate(c, exec, &mut out)?,
    }
    out.outputs.add("summary.toml", out.summary.render());
    Ok(out)
}

fn linear_analysis(c: &config::LinearAnalysis, exec: Exec, out: &mut Outcome) -> Result<(), Failure> {
    let p = &c.plant;
    let plant =
        LinearPlant::new(p.a, p.b, p.gamma, p.length, p.set_point, p.d0).map_err(|e| Failure::Config(e.into()))?;
    let (l1, l2) = plant.speeds();
    let plant_stable = plant.plant_poles_stable().map_err(sim)?;
    let ctrl_stable = plant.controller_poles_stable();
    let s = &mut out.summary;
    s.number("lambda1", l1).number("lambda2", l2).number("tau1", plant.tau1()).number("tau2", plant.tau2());
    s.number("ratio", plant.ratio()).number("steady_control", plant.steady_control());
    s.flag("plant_poles_stable", plant_stable).flag("controller_poles_stable", ctrl_stable);

    let omegas = c.frequency.omegas();
    for kind in TransferKind::ALL {
        let resp = plant.frequency_response(kind, &omegas, exec).map_err(sim)?;
        out.outputs.add(format!("frequency_{}.csv", kind.to_string().to_lowercase()), io::frequency_csv(&resp));
    }

    if let Some(cl) = &c.closed_loop {
        let traj = linear_closed_loop(&plant, cl.cells, cl.solver, &cl.disturbance, &cl.run).map_err(sim)?;
        let startup = plant.tau();
        let after = traj.samples.iter().filter(|s| s.t > startup).map(|s| s.y.abs()).fold(0.0, f64::max);
        out.summary.number("closed_loop_max_abs_y", traj.max_abs_y());
        out.summary.number("closed_loop_max_abs_y_after_startup", after);
        out.summary.number("closed_loop_terminal_abs_y", traj.terminal_abs_y());
        out.outputs.add("closed_loop.csv", io::trajectory_csv(&traj));
    }

    out.certified = Some(plant_stable && ctrl_stable);
    if !plant_stable {
        out.failed_conditions.push("plant poles".into());
    }
    if !ctrl_stable {
        out.failed_conditions.push("controller poles".into());
    }
    Ok(())
}

fn weights_for(w: Option<&Weights>, nodes: usize) -> Result<LyapunovWeights, Failure> {
    let w = match w {
        None => return Ok(LyapunovWeights::saint_venant(nodes)),
        Some(Weights::Uniform { p1, p2 }) => LyapunovWeights::uniform(nodes, *p1, *p2),
        Some(Weights::Table { p1, p2 }) => LyapunovWeights::new(p1.clone(), p2.clone()),
    };
    w.map_err(|e| Failure::Config(e.into()))
}

fn record_certificate(prefix: &str, cert: &Certificate, out: &mut Outcome) {
    let s = &mut out.summary;
    for (name, c) in cert.conditions() {
        s.text(&format!("{prefix}{name}"), &c.verdict.to_string());
        s.number(&format!("{prefix}{name}_margin"), c.margin);
        if !c.verdict.passed() {
            out.failed_conditions.push(format!("{prefix}{name}"));
        }
    }
    s.number(&format!("{prefix}mu0"), cert.mu0);
    s.flag(&format!("{prefix}certificate_passed"), cert.passed());
    out.certified = Some(out.certified.unwrap_or(true) && cert.passed());
    out.outputs.add(format!("{prefix}certificate.txt"), io::certificate_report(cert));
    out.outputs.add(format!("{prefix}eigenvalues.csv"), io::eigenvalue_csv(cert));
}

fn pool_certificate(
    model: &SaintVenant,
    gate: &GateBoundary,
    profile: &SteadyProfile,
    gravity: f64,
    weights: Option<&Weights>,
    exec: Exec,
) -> Result<Certificate, Failure> {
    let w = weights_for(weights, profile.grid.nodes())?;
    saint_venant_certificate_with(model, gate, profile, gravity, &w, exec).map_err(sim)
}

fn single_pool(c: &config::SinglePool, exec: Exec, out: &mut Outcome) -> Result<(), Failure> {
    let pool = &c.pool;
    let profile = pool.steady_profile().map_err(sim)?;
    let model = pool.model().map_err(sim)?;
    let gate = pool.gate().map_err(sim)?;
    let open = pool.run_open_loop().map_err(sim)?;
    let closed = pool.run_closed_loop().map_err(sim)?;
    let grid = profile.grid;

    let s = &mut out.summary;
    s.number("h0", profile.h0()).number("steady_gate", pool.steady_gate().map_err(sim)?);
    s.number("open_loop_max_rise", open.max_y).number("open_loop_terminal_y", open.samples.last().map_or(0.0, |x| x.y));
    s.number("closed_loop_max_abs_y", closed.max_abs_y()).number("closed_loop_terminal_abs_y", closed.terminal_abs_y());
    s.count("closed_loop_steps", closed.plant.steps);
    if let (Some(first), Some(last)) = (closed.distance.first(), closed.distance.last()) {
        s.number("distance_initial", first.1).number("distance_final", last.1);
    }

    out.outputs.add("profile.csv", io::profile_csv(&profile));
    out.outputs.add("open_loop.csv", io::trajectory_csv(&open));
    out.outputs.add("closed_loop.csv", io::trajectory_csv(&closed.plant));
    out.outputs.add("controller.csv", io::controller_csv(&closed.controller));
    out.outputs.add("distance.csv", io::distance_csv(&closed.distance));
    for (label, tr) in [("open_loop", &open), ("closed_loop", &closed.plant)] {
        for (k, snap) in tr.snapshots.iter().enumerate() {
            out.outputs.add(format!("snapshots/{label}_{k:05}.csv"), io::snapshot_csv(&grid, snap));
        }
    }

    let cert = pool_certificate(&model, &gate, &profile, pool.gravity, c.weights.as_ref(), exec)?;
    record_certificate("", &cert, out);
    Ok(())
}

fn cascade(c: &config::Cascade, exec: Exec, out: &mut Outcome) -> Result<(), Failure> {
    let sc = &c.cascade;
    let run = simulate_cascade(sc).map_err(sim)?;
    let summary = CascadeSummary::from_run(sc.controller_friction(), &run);

    let s = &mut out.summary;
    s.count("pools", sc.pools()).number("controller_friction", sc.controller_friction());
    s.numbers("peak_to_peak", &summary.amplification.peak_to_peak);
    s.numbers("ratios", &summary.amplification.ratios);
    s.numbers("max_abs_y", &summary.max_abs_y).numbers("terminal_abs_y", &summary.terminal_abs_y);
    s.number("junction_mismatch", run.junction_mismatch);

    out.outputs.add("cascade_summary.csv", io::cascade_summary_csv(&summary));
    let grid = Grid::new(sc.length, sc.cells).map_err(|e| Failure::Config(e.into()))?;
    for (i, pool) in run.pools.iter().enumerate() {
        let n = i + 1;
        out.outputs.add(format!("pool{n}.csv"), io::trajectory_csv(&pool.plant));
        out.outputs.add(format!("pool{n}_controller.csv"), io::controller_csv(&pool.controller));
        for (k, snap) in pool.plant.snapshots.iter().enumerate() {
            out.outputs.add(format!("snapshots/pool{n}_{k:05}.csv"), io::snapshot_csv(&grid, snap));
        }
    }

    // the Lyapunov analysis covers the unfiltered controller, so it certifies the plant profiles
    let model = SaintVenant::new(sc.friction, sc.gravity).map_err(sim)?;
    let gate = sc.gate().map_err(sim)?;
    let mut eps = f64::INFINITY;
    for (i, &h_l) in sc.set_points.iter().enumerate() {
        let profile = solve_steady_profile(&model, &grid, sc.q_star, h_l).map_err(|e| sim(e.in_pool(i + 1)))?;
        eps = eps.min(cascade_epsilon_bound(&profile, sc.gravity));
        let cert = pool_certificate(&model, &gate, &profile, sc.gravity, None, exec)?;
        record_certificate(&format!("pool{}_", i + 1), &cert, out);
    }
    out.summary.number("epsilon_max", eps);
    Ok(())
}

fn certificate(c: &config::CertificateRun, exec: Exec, out: &mut Outcome) -> Result<(), Failure> {
    let model = SaintVenant::new(c.friction, c.gravity).map_err(|e| Failure::Config(e.into()))?;
    let gate = GateBoundary::new(c.discharge).map_err(|e| Failure::Config(e.into()))?;
    let grid = Grid::new(c.length, c.cells).map_err(|e| Failure::Config(e.into()))?;
    let profile = solve_steady_profile(&model, &grid, c.q_star, c.set_point).map_err(sim)?;
    let cert = pool_certificate(&model, &gate, &profile, c.gravity, c.weights.as_ref(), exec)?;

    out.summary.number("h0", profile.h0());
    if let (Some(b), Some(m)) = (cert.beta_l, cert.beta_margin) {
        out.summary.number("beta_l", b).number("beta_margin", m);
    }
    if let Some(e) = cert.epsilon_max {
        out.summary.number("epsilon_max", e);
    }
    out.outputs.add("profile.csv", io::profile_csv(&profile));
    record_certificate("", &cert, out);

    if let Some(omegas) = &c.omegas {
        let pd = omega_check(&profile, c.gravity, omegas);
        let all = pd.iter().all(|&x| x);
        out.summary.flag("omega_positive_definite", all);
        if !all {
            out.failed_conditions.push("omega".into());
            out.certified = Some(false);
        }
    }
    Ok(())
}

pub fn describe(failed: &[String]) -> String {
    if failed.is_empty() {
        return "conditions not met".into();
    }
    format!("conditions not met: {}", failed.join(", "))
}

pub fn config_error(e: Error) -> Failure {
    Failure::Config(e)
}

pub fn io_error(e: impl Into<Error>) -> Failure {
    Failure::Io(e.into())
}
