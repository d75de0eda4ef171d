//! Constant-coefficient plant `H_t + Q_x = 0`, `Q_t + (aH + bQ)_x = 0` with
//! `Q(t,0) = D(t)` and `Q(t,L) − γH(t,L) = U(t)`.
//!
//! In Riemann coordinates the plant is two pure transports with delays
//! `τ1 = L/λ1` and `τ2 = L/λ2`, which gives closed-form transfer functions
//! and the delay recursion
//!
//! ```text
//! U(t) = −(λ2/λ1) U(t − τ) + (1 + λ2/λ1) D(t − τ1) − γ (1 + λ2/λ1) H*_L
//! ```

mod delay;

pub use delay::DelayLine;

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FieldState, Grid, Input, LinearBoundary, LinearFlux};
use crate::par::{self, Exec};
use crate::solver::{simulate, Actuator, Downstream, RunConfig, Solver, SolverConfig, Trajectory};

pub use crate::model::characteristic_speeds;

const POLE_GUARD: f64 = 1e-12;

/// Which transfer function to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TransferKind {
    /// Control to output, `P_o`.
    Po,
    /// Disturbance to output, `P_d`.
    Pd,
    /// Feedforward controller, `P_c = −P_d / P_o`.
    Pc,
}

impl TransferKind {
    pub const ALL: [TransferKind; 3] = [TransferKind::Po, TransferKind::Pd, TransferKind::Pc];
}

impl fmt::Display for TransferKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TransferKind::Po => "Po",
            TransferKind::Pd => "Pd",
            TransferKind::Pc => "Pc",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearPlant {
    pub a: f64,
    pub b: f64,
    pub gamma: f64,
    pub length: f64,
    pub set_point: f64,
    /// `D(0)`
    pub d0: f64,
    l1: f64,
    l2: f64,
}

impl LinearPlant {
    pub fn new(a: f64, b: f64, gamma: f64, length: f64, set_point: f64, d0: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(Error::param("a", format!("must be > 0, got {a}")));
        }
        if !(length > 0.0) {
            return Err(Error::param("length", "must be > 0"));
        }
        if !gamma.is_finite() || !b.is_finite() {
            return Err(Error::param("gamma", "coefficients must be finite"));
        }
        let (l1, l2) = characteristic_speeds(a, b)?;
        Ok(LinearPlant { a, b, gamma, length, set_point, d0, l1, l2 })
    }

    /// Plant with prescribed speeds: `a = λ1λ2`, `b = λ1 − λ2`.
    pub fn from_speeds(l1: f64, l2: f64, gamma: f64, length: f64, set_point: f64, d0: f64) -> Result<Self> {
        if !(l1 > 0.0 && l2 > 0.0) {
            return Err(Error::param("speeds", "must be positive"));
        }
        let mut p = Self::new(l1 * l2, l1 - l2, gamma, length, set_point, d0)?;
        // keep the requested speeds exactly
        p.l1 = l1;
        p.l2 = l2;
        Ok(p)
    }

    pub fn speeds(&self) -> (f64, f64) {
        (self.l1, self.l2)
    }

    pub fn tau1(&self) -> f64 {
        self.length / self.l1
    }

    pub fn tau2(&self) -> f64 {
        self.length / self.l2
    }

    pub fn tau(&self) -> f64 {
        self.tau1() + self.tau2()
    }

    /// `λ2 / λ1`
    pub fn ratio(&self) -> f64 {
        self.l2 / self.l1
    }

    pub fn riemann_forward(&self, h: f64, q: f64) -> (f64, f64) {
        let dh = h - self.set_point;
        let dq = q - self.d0;
        (dq + self.l2 * dh, dq - self.l1 * dh)
    }

    pub fn riemann_inverse(&self, r1: f64, r2: f64) -> (f64, f64) {
        let sum = self.l1 + self.l2;
        (self.set_point + (r1 - r2) / sum, self.d0 + (self.l1 * r1 + self.l2 * r2) / sum)
    }

    pub fn transfer(&self, kind: TransferKind, s: Complex64) -> Result<Complex64> {
        let (l1, l2, g) = (self.l1, self.l2, self.gamma);
        let e_tau = (-s * self.tau()).exp();
        let e_tau1 = (-s * self.tau1()).exp();
        let den = match kind {
            TransferKind::Po | TransferKind::Pd => l1 * (g + l2) + l2 * (g - l1) * e_tau,
            TransferKind::Pc => l1 + l2 * e_tau,
        };
        if den.norm() < POLE_GUARD {
            return Err(Error::PoleProximity { re: s.re, im: s.im, magnitude: den.norm() });
        }
        Ok(match kind {
            TransferKind::Po => -(l1 + l2 * e_tau) / den,
            TransferKind::Pd | TransferKind::Pc => (l1 + l2) * e_tau1 / den,
        })
    }

    /// Samples `P(iω)` at each `ω`.
    pub fn frequency_response(&self, kind: TransferKind, omegas: &[f64], exec: Exec) -> Result<Vec<(f64, Complex64)>> {
        par::try_map(exec, omegas, |&w| self.transfer(kind, Complex64::new(0.0, w)).map(|p| (w, p)))
    }

    /// `|(γ − λ1)/(γ + λ2)| < λ1/λ2`
    pub fn plant_poles_stable(&self) -> Result<bool> {
        let den = self.gamma + self.l2;
        if den == 0.0 {
            return Err(Error::param("gamma", "γ = −λ2 makes the pole condition undefined"));
        }
        Ok(((self.gamma - self.l1) / den).abs() < self.l1 / self.l2)
    }

    /// `λ2/λ1 < 1`
    pub fn controller_poles_stable(&self) -> bool {
        self.ratio() < 1.0
    }

    /// Gate value holding the uniform state `(H*_L, D(0))`.
    pub fn steady_control(&self) -> f64 {
        self.d0 - self.gamma * self.set_point
    }

    pub fn model(&self) -> LinearFlux {
        LinearFlux { a: self.a, b: self.b }
    }

    pub fn boundary(&self) -> LinearBoundary {
        LinearBoundary { gamma: self.gamma }
    }

    pub fn solver(&self, cells: usize, config: SolverConfig) -> Result<Solver> {
        Solver::new(Arc::new(self.model()), Arc::new(self.boundary()), Grid::new(self.length, cells)?, config)
    }

    /// `H ≡ H*_L`, `Q ≡ D(0)`.
    pub fn uniform_state(&self, grid: &Grid) -> Result<FieldState> {
        if !(self.set_point > 0.0) {
            return Err(Error::param("set_point", "must be > 0 for the simulated state"));
        }
        FieldState::uniform(grid, self.set_point, self.d0)
    }
}

/// Time-domain realization of `P_c` as a delay recursion.
#[derive(Debug, Clone)]
pub struct LinearFeedforward {
    plant: LinearPlant,
    u_line: DelayLine,
    d_line: DelayLine,
}

impl LinearFeedforward {
    /// History before `t0` holds the steady values `U*` and `D(0)`.
    pub fn new(plant: LinearPlant, t0: f64) -> Self {
        let keep = plant.tau() * 1.05;
        LinearFeedforward {
            plant,
            u_line: DelayLine::new(plant.steady_control(), t0, keep),
            d_line: DelayLine::new(plant.d0, t0, keep),
        }
    }

    pub fn plant(&self) -> &LinearPlant {
        &self.plant
    }

    /// Feeds `D(t)` and returns `U(t)`. Times must increase strictly.
    pub fn step(&mut self, t: f64, d: f64) -> Result<f64> {
        self.d_line.push(t, d)?;
        let r = self.plant.ratio();
        let u = -r * self.u_line.at(t - self.plant.tau()) + (1.0 + r) * self.d_line.at(t - self.plant.tau1())
            - self.plant.gamma * (1.0 + r) * self.plant.set_point;
        self.u_line.push(t, u)?;
        Ok(u)
    }
}

impl Actuator for LinearFeedforward {
    fn actuate(&mut self, t: f64, d: f64, _dt: f64) -> Result<Downstream> {
        self.step(t, d).map(Downstream::Relation)
    }
}

/// Simulates the linear plant from the uniform state with the delay-recursion
/// controller closing the downstream boundary.
pub fn linear_closed_loop(
    plant: &LinearPlant,
    cells: usize,
    config: SolverConfig,
    disturbance: &dyn Input,
    run: &RunConfig,
) -> Result<Trajectory> {
    let mut solver = plant.solver(cells, config)?;
    let init = plant.uniform_state(solver.grid())?;
    let mut ctrl = LinearFeedforward::new(*plant, 0.0);
    simulate(&mut solver, init, disturbance, &mut ctrl, plant.set_point, run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Signal;
    use proptest::prelude::*;

    fn plant21() -> LinearPlant {
        LinearPlant::new(2.0, 1.0, 1.0, 4.0, 0.0, 0.0).unwrap()
    }

    #[test]
    fn speeds_and_delays() {
        let p = plant21();
        assert_eq!(p.speeds(), (2.0, 1.0));
        assert_eq!(p.tau1(), 2.0);
        assert_eq!(p.tau2(), 4.0);
        assert_eq!(p.tau(), 6.0);
        assert!(p.tau1() < p.tau2());
    }

    #[test]
    fn riemann_examples() {
        let p = plant21();
        assert_eq!(p.riemann_forward(1.0, 3.0), (4.0, 1.0));
        let q = LinearPlant::new(2.0, 1.0, 1.0, 4.0, 5.0, 2.0).unwrap();
        assert_eq!(q.riemann_forward(5.0, 2.0), (0.0, 0.0));
    }

    #[test]
    fn transfer_at_zero_and_identity() {
        let p = LinearPlant::new(3.0, 0.7, 1.3, 10.0, 5.0, 2.0).unwrap();
        let zero = Complex64::new(0.0, 0.0);
        assert!((p.transfer(TransferKind::Pc, zero).unwrap() - 1.0).norm() < 1e-15);
        assert!((p.transfer(TransferKind::Po, zero).unwrap() + 1.0 / 1.3).norm() < 1e-14);
        assert!((p.transfer(TransferKind::Pd, zero).unwrap() - 1.0 / 1.3).norm() < 1e-14);

        let s = Complex64::new(0.0, 0.1);
        let p = plant21();
        let res = p.transfer(TransferKind::Pc, s).unwrap() * p.transfer(TransferKind::Po, s).unwrap()
            + p.transfer(TransferKind::Pd, s).unwrap();
        assert!(res.norm() < 1e-12);
    }

    #[test]
    fn pole_proximity_is_reported() {
        // λ1 = λ2 = 1, γ = 0: denominator 1 − e^{−sτ} vanishes at s = 0
        let p = LinearPlant::from_speeds(1.0, 1.0, 0.0, 1.0, 0.0, 0.0).unwrap();
        let err = p.transfer(TransferKind::Po, Complex64::new(0.0, 0.0)).unwrap_err();
        assert!(matches!(err, Error::PoleProximity { .. }));
    }

    #[test]
    fn pole_conditions() {
        let p = LinearPlant::from_speeds(2.0, 1.0, 2.0, 1.0, 0.0, 0.0).unwrap();
        assert!(p.plant_poles_stable().unwrap());
        assert!(p.controller_poles_stable());
        let q = LinearPlant::from_speeds(1.0, 2.0, 0.1, 1.0, 0.0, 0.0).unwrap();
        assert!(!q.controller_poles_stable());
        let bad = LinearPlant::from_speeds(2.0, 1.0, -1.0, 1.0, 0.0, 0.0).unwrap();
        assert!(bad.plant_poles_stable().is_err());
    }

    /// `U(t) = U* + (1+r) Σ_k (−r)^k (D(t − τ1 − kτ) − D0)`: the impulse
    /// response of `P_c` expanded as a geometric series.
    fn series_oracle(p: &LinearPlant, d: &dyn Fn(f64) -> f64, t: f64) -> f64 {
        let r = p.ratio();
        let mut u = p.steady_control();
        let mut k = 0;
        loop {
            let lag = p.tau1() + k as f64 * p.tau();
            if t - lag < 0.0 {
                break;
            }
            u += (1.0 + r) * (-r).powi(k) * (d(t - lag) - p.d0);
            k += 1;
        }
        u
    }

    #[test]
    fn recursion_matches_series_expansion() {
        for (l1, l2) in [(2.0, 1.0), (1.0, 1.0)] {
            let p = LinearPlant::from_speeds(l1, l2, 0.5, 4.0, 1.0, 2.0).unwrap();
            let d = |t: f64| if t >= 0.0 { 3.0 } else { 2.0 };
            let mut ctrl = LinearFeedforward::new(p, -1e-9);
            let dt = 0.25;
            for k in 0..200 {
                let t = k as f64 * dt;
                let u = ctrl.step(t, d(t)).unwrap();
                let expect = series_oracle(&p, &d, t);
                assert!((u - expect).abs() < 1e-12, "t={t}: {u} vs {expect}");
            }
        }
    }

    #[test]
    fn steady_input_is_a_fixed_point() {
        let p = LinearPlant::new(2.0, 1.0, 1.5, 100.0, 5.0, 2.0).unwrap();
        let mut ctrl = LinearFeedforward::new(p, 0.0);
        for k in 1..1000 {
            let u = ctrl.step(k as f64 * 0.7, p.d0).unwrap();
            assert!((u - p.steady_control()).abs() < 1e-12);
        }
        assert!(ctrl.step(1.0, 2.0).is_err());
    }

    #[test]
    fn frequency_response_sweep() {
        let p = plant21();
        let omegas: Vec<f64> = (0..50).map(|k| 0.01 * k as f64).collect();
        let seq = p.frequency_response(TransferKind::Pc, &omegas, Exec::Sequential).unwrap();
        let par = p.frequency_response(TransferKind::Pc, &omegas, Exec::Parallel).unwrap();
        assert_eq!(seq, par);
        assert!((seq[0].1 - 1.0).norm() < 1e-15);
    }

    #[test]
    fn closed_loop_rejects_disturbance() {
        let p = LinearPlant::new(2.0, 1.0, 1.0, 200.0, 5.0, 2.0).unwrap();
        let d = Signal::SmoothStep { base: 2.0, target: 3.0, start: 50.0, duration: 100.0 };
        let run = RunConfig { duration: 1500.0, cadence: 5.0, snapshots: false };
        let traj = linear_closed_loop(&p, 200, SolverConfig::default(), &d, &run).unwrap();
        let worst = traj.samples.iter().map(|s| s.y.abs()).fold(0.0, f64::max);
        assert!(worst < 0.02, "{worst}");
    }

    proptest! {
        #[test]
        fn riemann_round_trip(h in -50.0f64..50.0, q in -50.0f64..50.0, a in 0.1f64..20.0, b in 0.01f64..5.0) {
            let p = LinearPlant::new(a, b, 1.0, 10.0, 3.0, 1.5).unwrap();
            let (r1, r2) = p.riemann_forward(h, q);
            let (h2, q2) = p.riemann_inverse(r1, r2);
            prop_assert!((h - h2).abs() <= 1e-12 * (1.0 + h.abs()));
            prop_assert!((q - q2).abs() <= 1e-12 * (1.0 + q.abs()));
        }

        #[test]
        fn controller_identity_on_imaginary_axis(w in -50.0f64..50.0, a in 0.1f64..20.0, b in 0.01f64..5.0, g in 0.1f64..5.0) {
            let p = LinearPlant::new(a, b, g, 10.0, 3.0, 1.5).unwrap();
            let s = Complex64::new(0.0, w);
            if let (Ok(po), Ok(pd), Ok(pc)) = (
                p.transfer(TransferKind::Po, s),
                p.transfer(TransferKind::Pd, s),
                p.transfer(TransferKind::Pc, s),
            ) {
                prop_assert!((pc * po + pd).norm() < 1e-10);
            }
        }

        #[test]
        fn recursion_is_bounded(
            a in 0.5f64..10.0, b in 0.05f64..3.0, g in 0.1f64..3.0,
            amp in 0.0f64..5.0, period in 1.0f64..50.0
        ) {
            let p = LinearPlant::new(a, b, g, 10.0, 2.0, 1.0).unwrap();
            let r = p.ratio();
            prop_assume!(r < 1.0);
            let d = |t: f64| 1.0 + amp * (t / period).sin();
            let sup_in = (0..=4000)
                .map(|k| (d(k as f64 * p.tau() * 10.0 / 4000.0) - g * p.set_point).abs())
                .fold((p.d0 - g * p.set_point).abs(), f64::max);
            let bound = (1.0 + r) / (1.0 - r) * sup_in;
            let mut ctrl = LinearFeedforward::new(p, 0.0);
            let dt = p.tau() / 400.0;
            for k in 1..=4000 {
                let t = k as f64 * dt;
                let u = ctrl.step(t, d(t)).unwrap();
                prop_assert!(u.abs() <= bound * (1.0 + 1e-9) + 1e-9, "t={} u={} bound={}", t, u, bound);
            }
        }
    }

    #[test]
    fn tau1_shorter_when_b_positive() {
        for b in [0.01, 0.5, 3.0] {
            let p = LinearPlant::new(2.0, b, 1.0, 10.0, 0.0, 0.0).unwrap();
            assert!(p.tau1() < p.tau2());
        }
    }
}
