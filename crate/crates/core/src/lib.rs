//! Feedforward boundary control of 2x2 quasi-linear hyperbolic systems.
//!
//! The plant is `H_t + Q_x = 0`, `Q_t + f(H,Q)_x + g(H,Q) = 0` on `[0, L]`
//! with a measured disturbance `α(H,Q)(t,0) = D(t)` and an actuator
//! `β(H,Q)(t,L) = U(t)`. The controller is a simulated copy of the plant
//! driven by `D` with the set point imposed at `x = L`; its downstream flux
//! gives `U`. Modules:
//!
//! - [`model`]: flux/source and boundary maps, Saint-Venant and gate instances, grids, signals
//! - [`linear`]: constant-coefficient analysis, transfer functions, delay-recursion controller
//! - [`steady`]: equilibrium profiles
//! - [`solver`]: Lax–Wendroff integration with characteristic boundary closure
//! - [`controller`]: the copy-system feedforward controller and closed-loop runs
//! - [`certificate`]: Lyapunov stability conditions about a steady profile
//! - [`cascade`]: serially connected pools
//! - [`io`]: CSV and report writers

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cascade;
pub mod certificate;
pub mod controller;
pub mod error;
pub mod io;
pub mod linear;
pub mod model;
pub mod par;
pub mod solver;
pub mod steady;

pub use error::{Error, Result};
pub use par::Exec;
