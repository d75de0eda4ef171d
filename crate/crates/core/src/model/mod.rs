//! The abstract 2x2 plant `H_t + Q_x = 0`, `Q_t + f(H,Q)_x + g(H,Q) = 0`
//! with boundary relations `α(H,Q)(t,0) = D(t)` and `β(H,Q)(t,L) = U(t)`,
//! plus its concrete instantiations.

mod grid;
mod signal;

pub(crate) use grid::trapezoid;
pub use grid::{FieldState, Grid};
pub use signal::{GateInflow, Input, Signal};

use std::fmt::Debug;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default gravitational acceleration, m/s².
pub const GRAVITY: f64 = 9.81;

/// Pointwise partial derivatives of the flux `f` and source `g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxPartials {
    /// ∂f/∂H
    pub a: f64,
    /// ∂f/∂Q
    pub b: f64,
    /// ∂g/∂H
    pub a_src: f64,
    /// ∂g/∂Q
    pub b_src: f64,
}

impl FluxPartials {
    pub fn discriminant(&self) -> f64 {
        self.b * self.b + 4.0 * self.a
    }
}

/// Flux/source pair defining the momentum balance.
pub trait PhysicalModel: Debug + Send + Sync {
    /// Flux density `f(H,Q)`.
    fn flux(&self, h: f64, q: f64) -> f64;
    /// Source term `g(H,Q)`.
    fn source(&self, h: f64, q: f64) -> f64;
    fn partials(&self, h: f64, q: f64) -> FluxPartials;

    /// Rejects states outside the model's domain.
    fn validate(&self, _h: f64, _q: f64) -> Result<()> {
        Ok(())
    }

    /// Characteristic speeds `(λ1, λ2)` at a state; the system's velocities are `λ1` and `-λ2`.
    fn speeds(&self, h: f64, q: f64) -> Result<(f64, f64)> {
        let p = self.partials(h, q);
        characteristic_speeds(p.a, p.b).map_err(|_| Error::NotHyperbolic { h, q, discriminant: p.discriminant() })
    }
}

/// Boundary relations `α` (upstream, disturbance) and `β` (downstream, control).
pub trait BoundaryMap: Debug + Send + Sync {
    fn upstream(&self, h: f64, q: f64) -> f64;
    fn downstream(&self, h: f64, q: f64) -> f64;
    /// `(α_h, α_q)`
    fn upstream_partials(&self, h: f64, q: f64) -> (f64, f64);
    /// `(β_h, β_q)`
    fn downstream_partials(&self, h: f64, q: f64) -> (f64, f64);

    fn validate(&self, _h: f64, _q: f64) -> Result<()> {
        Ok(())
    }
}

/// `λ1 = (b + √(b²+4a))/2`, `λ2 = (√(b²+4a) − b)/2`.
pub fn characteristic_speeds(a: f64, b: f64) -> Result<(f64, f64)> {
    let disc = b * b + 4.0 * a;
    if !(disc > 0.0) || !disc.is_finite() {
        return Err(Error::NotHyperbolic { h: f64::NAN, q: f64::NAN, discriminant: disc });
    }
    let root = disc.sqrt();
    Ok(((b + root) / 2.0, (root - b) / 2.0))
}

/// Saint-Venant flux `f = Q²/H + gH²/2` and friction source `g = c_f Q²/H²`
/// for a horizontal rectangular channel of unit width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaintVenant {
    pub friction: f64,
    pub gravity: f64,
}

impl SaintVenant {
    pub fn new(friction: f64, gravity: f64) -> Result<Self> {
        if !(friction >= 0.0) || !friction.is_finite() {
            return Err(Error::param("friction", format!("must be >= 0, got {friction}")));
        }
        if !(gravity > 0.0) || !gravity.is_finite() {
            return Err(Error::param("gravity", format!("must be > 0, got {gravity}")));
        }
        Ok(SaintVenant { friction, gravity })
    }

    pub fn with_friction(&self, friction: f64) -> Result<Self> {
        Self::new(friction, self.gravity)
    }

    /// `gH − V²`, positive in the subcritical regime.
    pub fn subcritical_margin(&self, h: f64, q: f64) -> f64 {
        let v = q / h;
        self.gravity * h - v * v
    }
}

impl PhysicalModel for SaintVenant {
    fn flux(&self, h: f64, q: f64) -> f64 {
        q * q / h + 0.5 * self.gravity * h * h
    }

    fn source(&self, h: f64, q: f64) -> f64 {
        self.friction * q * q / (h * h)
    }

    fn partials(&self, h: f64, q: f64) -> FluxPartials {
        let h2 = h * h;
        FluxPartials {
            a: self.gravity * h - q * q / h2,
            b: 2.0 * q / h,
            a_src: -2.0 * self.friction * q * q / (h2 * h),
            b_src: 2.0 * self.friction * q / h2,
        }
    }

    fn validate(&self, h: f64, _q: f64) -> Result<()> {
        if h > 0.0 && h.is_finite() {
            Ok(())
        } else {
            Err(Error::NonPositiveDepth { h, x: f64::NAN })
        }
    }
}

/// Constant-coefficient flux `f = aH + bQ` without source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFlux {
    pub a: f64,
    pub b: f64,
}

impl LinearFlux {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        characteristic_speeds(a, b)?;
        Ok(LinearFlux { a, b })
    }
}

impl PhysicalModel for LinearFlux {
    fn flux(&self, h: f64, q: f64) -> f64 {
        self.a * h + self.b * q
    }

    fn source(&self, _h: f64, _q: f64) -> f64 {
        0.0
    }

    fn partials(&self, _h: f64, _q: f64) -> FluxPartials {
        FluxPartials { a: self.a, b: self.b, a_src: 0.0, b_src: 0.0 }
    }
}

/// Overshot gates at both ends: `α = (Q/c_g)^{2/3}` is the head above the
/// inflow gate and `β = H − (Q/c_g)^{2/3}` the elevation of the outflow gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateBoundary {
    pub discharge: f64,
}

impl GateBoundary {
    pub fn new(discharge: f64) -> Result<Self> {
        if !(discharge > 0.0) || !discharge.is_finite() {
            return Err(Error::param("discharge", format!("must be > 0, got {discharge}")));
        }
        Ok(GateBoundary { discharge })
    }

    /// Head over the gate that passes flow `q`.
    pub fn head_for_flow(&self, q: f64) -> f64 {
        (q / self.discharge).powf(2.0 / 3.0)
    }

    /// `Q = c_g · D^{3/2}`.
    pub fn flow_for_head(&self, head: f64) -> f64 {
        self.discharge * head.max(0.0).powf(1.5)
    }

    fn head_slope(&self, q: f64) -> f64 {
        (2.0 / 3.0) * self.discharge.powf(-2.0 / 3.0) * q.powf(-1.0 / 3.0)
    }

    /// Linearized outflow gain `β_L = (3/2)(c_g² Q)^{1/3}`, i.e. `q̃(L) = β_L h̃(L)`.
    pub fn beta_l(&self, q: f64) -> f64 {
        1.5 * (self.discharge * self.discharge * q).cbrt()
    }
}

impl BoundaryMap for GateBoundary {
    fn upstream(&self, _h: f64, q: f64) -> f64 {
        self.head_for_flow(q)
    }

    fn downstream(&self, h: f64, q: f64) -> f64 {
        h - self.head_for_flow(q)
    }

    fn upstream_partials(&self, _h: f64, q: f64) -> (f64, f64) {
        (0.0, self.head_slope(q))
    }

    fn downstream_partials(&self, _h: f64, q: f64) -> (f64, f64) {
        (1.0, -self.head_slope(q))
    }

    fn validate(&self, _h: f64, q: f64) -> Result<()> {
        if q > 0.0 && q.is_finite() {
            Ok(())
        } else {
            Err(Error::NonPositiveFlow { q })
        }
    }
}

/// `α = Q`, `β = Q − γH`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearBoundary {
    pub gamma: f64,
}

impl BoundaryMap for LinearBoundary {
    fn upstream(&self, _h: f64, q: f64) -> f64 {
        q
    }

    fn downstream(&self, h: f64, q: f64) -> f64 {
        q - self.gamma * h
    }

    fn upstream_partials(&self, _h: f64, _q: f64) -> (f64, f64) {
        (0.0, 1.0)
    }

    fn downstream_partials(&self, _h: f64, _q: f64) -> (f64, f64) {
        (-self.gamma, 1.0)
    }
}
