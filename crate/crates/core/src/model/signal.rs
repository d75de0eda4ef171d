use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::GateBoundary;

/// A scalar time signal used for disturbances and open-loop gate settings.
///
/// Ramps use the cosine profile `½ − ½cos(π·progress)`. Outside the
/// defined range every kind holds its nearest endpoint value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Signal {
    Constant {
        value: f64,
    },
    SmoothStep {
        base: f64,
        target: f64,
        start: f64,
        duration: f64,
    },
    /// Ramp from `base` to `peak`, hold, then ramp to `settle`.
    Pulse {
        base: f64,
        peak: f64,
        settle: f64,
        start: f64,
        ramp: f64,
        hold: f64,
        /// Duration of the second ramp; defaults to `ramp`.
        #[serde(default)]
        fall: Option<f64>,
    },
    /// Piecewise-linear through `(t, value)` points sorted by time.
    Samples {
        points: Vec<(f64, f64)>,
    },
}

fn cosine_ramp(from: f64, to: f64, start: f64, duration: f64, t: f64) -> f64 {
    if t <= start {
        return from;
    }
    if duration <= 0.0 || t >= start + duration {
        return to;
    }
    let progress = (t - start) / duration;
    from + (to - from) * (0.5 - 0.5 * (PI * progress).cos())
}

impl Signal {
    pub fn constant(value: f64) -> Self {
        Signal::Constant { value }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Signal::Constant { value } => value,
            Signal::SmoothStep { base, target, start, duration } => cosine_ramp(base, target, start, duration, t),
            Signal::Pulse { base, peak, settle, start, ramp, hold, fall } => {
                let down_start = start + ramp + hold;
                if t < down_start {
                    cosine_ramp(base, peak, start, ramp, t)
                } else {
                    cosine_ramp(peak, settle, down_start, fall.unwrap_or(ramp), t)
                }
            }
            Signal::Samples { ref points } => interpolate_samples(points, t),
        }
    }

    /// Value at `t = 0`.
    pub fn initial(&self) -> f64 {
        self.eval(0.0)
    }

    pub fn validate(&self) -> Result<(), String> {
        match self {
            Signal::Samples { points } => {
                if points.is_empty() {
                    return Err("samples signal needs at least one point".into());
                }
                if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                    return Err("sample times must be strictly increasing".into());
                }
                Ok(())
            }
            Signal::SmoothStep { duration, .. } if *duration < 0.0 => Err("ramp duration must be non-negative".into()),
            Signal::Pulse { ramp, hold, fall, .. } if *ramp < 0.0 || *hold < 0.0 || fall.is_some_and(|f| f < 0.0) => {
                Err("pulse durations must be non-negative".into())
            }
            _ => Ok(()),
        }
    }
}

fn interpolate_samples(points: &[(f64, f64)], t: f64) -> f64 {
    let Some(&(t0, v0)) = points.first() else {
        return 0.0;
    };
    if t <= t0 {
        return v0;
    }
    let &(tn, vn) = points.last().unwrap();
    if t >= tn {
        return vn;
    }
    let i = points.partition_point(|p| p.0 <= t);
    let (ta, va) = points[i - 1];
    let (tb, vb) = points[i];
    va + (vb - va) * (t - ta) / (tb - ta)
}

/// Time-dependent scalar input.
pub trait Input: Send + Sync {
    fn at(&self, t: f64) -> f64;
}

impl Input for Signal {
    fn at(&self, t: f64) -> f64 {
        self.eval(t)
    }
}

impl<F: Fn(f64) -> f64 + Send + Sync> Input for F {
    fn at(&self, t: f64) -> f64 {
        self(t)
    }
}

/// An inflow signal (m³/s per metre) converted to the head over the inflow gate.
#[derive(Debug, Clone, PartialEq)]
pub struct GateInflow {
    pub inflow: Signal,
    pub gate: GateBoundary,
}

impl Input for GateInflow {
    fn at(&self, t: f64) -> f64 {
        self.gate.head_for_flow(self.inflow.eval(t))
    }
}
