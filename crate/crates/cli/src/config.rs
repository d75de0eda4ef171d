//! Scenario files: one TOML document per experiment, selected by `kind`.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use hyperff::cascade::CascadeScenario;
use hyperff::controller::PoolScenario;
use hyperff::model::{Grid, Signal, GRAVITY};
use hyperff::solver::{RunConfig, SolverConfig};
use serde::Deserialize;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Scenario {
    LinearAnalysis(LinearAnalysis),
    SinglePool(SinglePool),
    Cascade(Cascade),
    Certificate(CertificateRun),
}

/// Constant-coefficient plant `H_t + Q_x = 0`, `Q_t + (aH + bQ)_x = 0`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearAnalysis {
    pub plant: LinearPlantConfig,
    pub frequency: FrequencyGrid,
    /// Optional time-domain run of the delay recursion on the simulated plant.
    #[serde(default)]
    pub closed_loop: Option<LinearClosedLoop>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearPlantConfig {
    /// `∂f/∂H`, m²/s²
    pub a: f64,
    /// `∂f/∂Q`, m/s
    pub b: f64,
    /// Output coefficient in `Q(t,L) − γH(t,L) = U(t)`, m/s.
    pub gamma: f64,
    /// m
    pub length: f64,
    /// `H*_L`, m
    pub set_point: f64,
    /// `D(0)`, m²/s
    pub d0: f64,
}

/// Log-spaced angular frequencies, rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyGrid {
    pub omega_min: f64,
    pub omega_max: f64,
    pub points: usize,
}

impl FrequencyGrid {
    pub fn omegas(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.omega_min];
        }
        let (lo, hi) = (self.omega_min.ln(), self.omega_max.ln());
        (0..self.points).map(|k| (lo + (hi - lo) * k as f64 / (self.points - 1) as f64).exp()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearClosedLoop {
    pub cells: usize,
    /// `D(t) = Q(t, 0)`, m²/s
    pub disturbance: Signal,
    #[serde(default)]
    pub solver: SolverConfig,
    pub run: RunConfig,
}

/// One pool: open-loop and feedforward runs plus the certificate of its profile.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SinglePool {
    pub pool: PoolScenario,
    #[serde(default)]
    pub weights: Option<Weights>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cascade {
    pub cascade: CascadeScenario,
}

/// Lyapunov certificate of a Saint-Venant pool between two gates.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateRun {
    /// m
    pub length: f64,
    pub friction: f64,
    /// Gate discharge coefficient, m^{1/2}/s.
    pub discharge: f64,
    #[serde(default = "default_gravity")]
    pub gravity: f64,
    /// m²/s
    pub q_star: f64,
    /// m
    pub set_point: f64,
    pub cells: usize,
    #[serde(default)]
    pub weights: Option<Weights>,
    /// Cascade weights `ω_i` checked against the junction matrices.
    #[serde(default)]
    pub omegas: Option<Vec<f64>>,
}

/// `p1, p2`: constants or one value per node.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Weights {
    Uniform { p1: f64, p2: f64 },
    Table { p1: Vec<f64>, p2: Vec<f64> },
}

fn default_gravity() -> f64 {
    GRAVITY
}

/// Command-line overrides applied after parsing.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub cells: Option<usize>,
    pub cfl: Option<f64>,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("invalid scenario {}", path.display()))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Scenario::LinearAnalysis(_) => "linear-analysis",
            Scenario::SinglePool(_) => "single-pool",
            Scenario::Cascade(_) => "cascade",
            Scenario::Certificate(_) => "certificate",
        }
    }

    pub fn apply(&mut self, o: Overrides) {
        match self {
            Scenario::LinearAnalysis(c) => {
                if let Some(cl) = &mut c.closed_loop {
                    if let Some(n) = o.cells {
                        cl.cells = n;
                    }
                    if let Some(cfl) = o.cfl {
                        cl.solver.cfl = cfl;
                    }
                }
            }
            Scenario::SinglePool(c) => {
                if let Some(n) = o.cells {
                    c.pool.plant_cells = n;
                }
                if let Some(cfl) = o.cfl {
                    c.pool.solver.cfl = cfl;
                }
            }
            Scenario::Cascade(c) => {
                if let Some(n) = o.cells {
                    c.cascade.cells = n;
                }
                if let Some(cfl) = o.cfl {
                    c.cascade.solver.cfl = cfl;
                }
            }
            Scenario::Certificate(c) => {
                if let Some(n) = o.cells {
                    c.cells = n;
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Scenario::LinearAnalysis(c) => {
                let f = &c.frequency;
                if !(f.omega_min > 0.0 && f.omega_max >= f.omega_min) || f.points == 0 {
                    bail!("frequency grid needs 0 < omega_min <= omega_max and points > 0");
                }
                if let Some(cl) = &c.closed_loop {
                    Grid::new(c.plant.length, cl.cells)?;
                    cl.solver.validate()?;
                    cl.run.validate()?;
                    cl.disturbance.validate().map_err(anyhow::Error::msg)?;
                }
            }
            Scenario::SinglePool(c) => {
                c.pool.validate()?;
                check_weights(c.weights.as_ref(), c.pool.plant_cells)?;
            }
            Scenario::Cascade(c) => c.cascade.validate()?,
            Scenario::Certificate(c) => {
                Grid::new(c.length, c.cells)?;
                for (name, v) in [
                    ("friction", c.friction),
                    ("discharge", c.discharge),
                    ("gravity", c.gravity),
                    ("q_star", c.q_star),
                    ("set_point", c.set_point),
                ] {
                    if !(v > 0.0 && v.is_finite()) {
                        bail!("`{name}` must be positive, got {v}");
                    }
                }
                check_weights(c.weights.as_ref(), c.cells)?;
                if let Some(w) = &c.omegas {
                    if w.is_empty() || w.iter().any(|&x| !(x > 0.0)) {
                        bail!("`omegas` must be a non-empty list of positive weights");
                    }
                }
            }
        }
        Ok(())
    }
}

fn check_weights(w: Option<&Weights>, cells: usize) -> Result<()> {
    match w {
        None => Ok(()),
        Some(Weights::Uniform { p1, p2 }) if *p1 > 0.0 && *p2 > 0.0 => Ok(()),
        Some(Weights::Uniform { .. }) => bail!("weights must be positive"),
        Some(Weights::Table { p1, p2 }) => {
            if p1.len() != cells + 1 || p2.len() != cells + 1 {
                bail!("weight tables need one value per node ({}), got {} and {}", cells + 1, p1.len(), p2.len());
            }
            Ok(())
        }
    }
}
