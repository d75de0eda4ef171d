//! Lyapunov stability certificate about a steady profile.
//!
//! Deviations `(h, q)` from the profile obey
//!
//! ```text
//! z_t + A(x) z_x + B(x) z = 0,   A = [[0, 1], [a, b]],
//! B = [[0, 0], [a_x + ã, b_x + b̃]]
//! ```
//!
//! with `α_h h + α_q q = d` at `x = 0` and `β_h h + β_q q = u` at `x = L`.
//! The candidate `∫ zᵀ P z dx` uses `P = Nᵀ diag(p1, p2) N` with
//! `N = [[λ2, 1], [−λ1, 1]]`. The checks are:
//!
//! - (a1) `((α_h − α_q λ2)/(α_h + α_q λ1))² < (p2/p1)(λ2/λ1)` at `x = 0`
//! - (a2) `((β_h + β_q λ1)/(β_h − β_q λ2))² < (p1/p2)(λ1/λ2)` at `x = L`
//! - (a3) `p2 λ2 / (p1 λ1) < 1` at `x = L`
//! - (b) `−M_x + BᵀP + PB` positive definite on `[0, L]`, `M = PA`

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{BoundaryMap, GateBoundary, Grid, PhysicalModel};
use crate::par::{self, Exec};
use crate::steady::SteadyProfile;

/// Row-major 2×2 matrix.
pub type Mat2 = [[f64; 2]; 2];

fn mul(x: &Mat2, y: &Mat2) -> Mat2 {
    let mut r = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            r[i][j] = x[i][0] * y[0][j] + x[i][1] * y[1][j];
        }
    }
    r
}

fn transpose(m: &Mat2) -> Mat2 {
    [[m[0][0], m[1][0]], [m[0][1], m[1][1]]]
}

fn add(x: &Mat2, y: &Mat2) -> Mat2 {
    [[x[0][0] + y[0][0], x[0][1] + y[0][1]], [x[1][0] + y[1][0], x[1][1] + y[1][1]]]
}

fn sub(x: &Mat2, y: &Mat2) -> Mat2 {
    [[x[0][0] - y[0][0], x[0][1] - y[0][1]], [x[1][0] - y[1][0], x[1][1] - y[1][1]]]
}

fn scale(m: &Mat2, c: f64) -> Mat2 {
    [[m[0][0] * c, m[0][1] * c], [m[1][0] * c, m[1][1] * c]]
}

/// Largest absolute entry.
pub fn max_norm(m: &Mat2) -> f64 {
    m.iter().flatten().fold(0.0, |acc, v| acc.max(v.abs()))
}

pub fn det(m: &Mat2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

/// Smaller eigenvalue of the symmetric part of `m`.
pub fn min_eigenvalue(m: &Mat2) -> f64 {
    let off = 0.5 * (m[0][1] + m[1][0]);
    let mean = 0.5 * (m[0][0] + m[1][1]);
    let half_gap = (0.5 * (m[0][0] - m[1][1])).hypot(off);
    mean - half_gap
}

/// Leading principal minors test for a symmetric 2×2 matrix.
pub fn is_positive_definite(m: &Mat2) -> bool {
    m[0][0] > 0.0 && det(m) > 0.0
}

/// Linearized boundary coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryCoefficients {
    pub alpha_h: f64,
    pub alpha_q: f64,
    pub beta_h: f64,
    pub beta_q: f64,
}

impl BoundaryCoefficients {
    /// Gate pair `q(0) = 0`, `q(L) = β_L h(L)` written as `β_h = 1`,
    /// `β_q = −1/β_L` (same ratio as the true gate map).
    pub fn gate_with_beta_l(alpha_q: f64, beta_l: f64) -> Self {
        BoundaryCoefficients { alpha_h: 0.0, alpha_q, beta_h: 1.0, beta_q: -1.0 / beta_l }
    }
}

/// Linearization of the plant about a steady profile.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedSystem {
    pub grid: Grid,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// `∂g/∂H`
    pub a_src: Vec<f64>,
    /// `∂g/∂Q`
    pub b_src: Vec<f64>,
    pub a_x: Vec<f64>,
    pub b_x: Vec<f64>,
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
    pub boundary: BoundaryCoefficients,
}

/// Second-order derivative on a uniform grid: centred inside, one-sided at
/// the ends. Written on differences so constant data gives exact zeros.
fn derivative<T: Copy>(values: &[T], dx: f64, diff: impl Fn(T, T) -> T, lin: impl Fn(&[(f64, T)]) -> T) -> Vec<T> {
    let n = values.len();
    let c = 1.0 / dx;
    (0..n)
        .map(|k| {
            if k == 0 {
                let v = values[0];
                lin(&[(2.0 * c, diff(values[1], v)), (-0.5 * c, diff(values[2], v))])
            } else if k == n - 1 {
                let v = values[n - 1];
                lin(&[(-2.0 * c, diff(values[n - 2], v)), (0.5 * c, diff(values[n - 3], v))])
            } else {
                lin(&[(0.5 * c, diff(values[k + 1], values[k - 1]))])
            }
        })
        .collect()
}

fn scalar_lin(terms: &[(f64, f64)]) -> f64 {
    terms.iter().map(|(c, v)| c * v).sum()
}

fn matrix_lin(terms: &[(f64, Mat2)]) -> Mat2 {
    terms.iter().fold([[0.0; 2]; 2], |acc, (c, m)| add(&acc, &scale(m, *c)))
}

/// Evaluates the partials along the profile and the boundary maps at its ends.
pub fn linearize(
    model: &dyn PhysicalModel,
    boundary: &dyn BoundaryMap,
    profile: &SteadyProfile,
) -> Result<LinearizedSystem> {
    let grid = profile.grid;
    if grid.cells() < 2 {
        return Err(Error::param("cells", "linearization needs at least 2 cells"));
    }
    let q = profile.q_star;
    let n = grid.nodes();
    let mut sys = LinearizedSystem {
        grid,
        a: Vec::with_capacity(n),
        b: Vec::with_capacity(n),
        a_src: Vec::with_capacity(n),
        b_src: Vec::with_capacity(n),
        a_x: Vec::new(),
        b_x: Vec::new(),
        lambda1: Vec::with_capacity(n),
        lambda2: Vec::with_capacity(n),
        boundary: BoundaryCoefficients { alpha_h: 0.0, alpha_q: 0.0, beta_h: 0.0, beta_q: 0.0 },
    };
    for &h in &profile.h_star {
        let p = model.partials(h, q);
        let (l1, l2) = model.speeds(h, q)?;
        sys.a.push(p.a);
        sys.b.push(p.b);
        sys.a_src.push(p.a_src);
        sys.b_src.push(p.b_src);
        sys.lambda1.push(l1);
        sys.lambda2.push(l2);
    }
    sys.a_x = derivative(&sys.a, grid.dx(), |x, y| x - y, scalar_lin);
    sys.b_x = derivative(&sys.b, grid.dx(), |x, y| x - y, scalar_lin);
    let (alpha_h, alpha_q) = boundary.upstream_partials(profile.h0(), q);
    let (beta_h, beta_q) = boundary.downstream_partials(profile.set_point(), q);
    sys.boundary = BoundaryCoefficients { alpha_h, alpha_q, beta_h, beta_q };
    Ok(sys)
}

impl LinearizedSystem {
    pub fn nodes(&self) -> usize {
        self.a.len()
    }

    pub fn a_matrix(&self, k: usize) -> Mat2 {
        [[0.0, 1.0], [self.a[k], self.b[k]]]
    }

    pub fn b_matrix(&self, k: usize) -> Mat2 {
        [[0.0, 0.0], [self.a_x[k] + self.a_src[k], self.b_x[k] + self.b_src[k]]]
    }

    pub fn n_matrix(&self, k: usize) -> Mat2 {
        [[self.lambda2[k], 1.0], [-self.lambda1[k], 1.0]]
    }

    /// `max_k ‖N A − Λ N‖`
    pub fn diagonalization_residual(&self) -> f64 {
        (0..self.nodes())
            .map(|k| {
                let n = self.n_matrix(k);
                let lam = [[self.lambda1[k], 0.0], [0.0, -self.lambda2[k]]];
                max_norm(&sub(&mul(&n, &self.a_matrix(k)), &mul(&lam, &n)))
            })
            .fold(0.0, f64::max)
    }

    /// `P = Nᵀ diag(p1, p2) N` at node `k`.
    pub fn p_matrix(&self, weights: &LyapunovWeights, k: usize) -> Mat2 {
        let n = self.n_matrix(k);
        let d = [[weights.p1[k], 0.0], [0.0, weights.p2[k]]];
        mul(&transpose(&n), &mul(&d, &n))
    }
}

/// Per-node diagonal weights `p1(x)`, `p2(x)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovWeights {
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
}

impl LyapunovWeights {
    pub fn new(p1: Vec<f64>, p2: Vec<f64>) -> Result<Self> {
        if p1.len() != p2.len() {
            return Err(Error::LengthMismatch { expected: p1.len(), got: p2.len() });
        }
        if p1.iter().chain(&p2).any(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(Error::param("weights", "must be positive and finite"));
        }
        Ok(LyapunovWeights { p1, p2 })
    }

    pub fn uniform(nodes: usize, p1: f64, p2: f64) -> Result<Self> {
        Self::new(vec![p1; nodes], vec![p2; nodes])
    }

    /// `p1 = p2 = 1/2`, which gives `P = [[gH + V², −V], [−V, 1]]` for Saint-Venant.
    pub fn saint_venant(nodes: usize) -> Self {
        LyapunovWeights { p1: vec![0.5; nodes], p2: vec![0.5; nodes] }
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.p1.iter().map(|p| p * c).collect(), self.p2.iter().map(|p| p * c).collect())
    }

    fn check_len(&self, nodes: usize) -> Result<()> {
        if self.p1.len() != nodes {
            return Err(Error::LengthMismatch { expected: nodes, got: self.p1.len() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Pass,
    Fail,
    /// A denominator in the condition vanishes.
    Indeterminate,
}

impl Verdict {
    fn from_margin(margin: f64) -> Self {
        if margin.is_nan() {
            Verdict::Indeterminate
        } else if margin > 0.0 {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Indeterminate => "indeterminate",
        })
    }
}

/// Verdict with its margin (right side minus left side; positive passes).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Condition {
    pub verdict: Verdict,
    pub margin: f64,
}

impl Condition {
    fn from_margin(margin: f64) -> Self {
        Condition { verdict: Verdict::from_margin(margin), margin }
    }
}

/// Condition (b) diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InteriorReport {
    /// Smallest eigenvalue of `−M_x + BᵀP + PB` per node.
    pub min_eigenvalues: Vec<f64>,
    pub positive_definite: Vec<bool>,
    /// Infimum of `min_eigenvalues`.
    pub mu0: f64,
    /// Infimum of the eigenvalues of `P`.
    pub mu1: f64,
    /// `max_k ‖PA − AᵀP‖ / ‖PA‖`
    pub symmetry_residual: f64,
    pub condition: Condition,
}

/// `−M_x + BᵀP + PB` at every node.
pub fn interior_matrices(sys: &LinearizedSystem, weights: &LyapunovWeights, exec: Exec) -> Result<Vec<Mat2>> {
    weights.check_len(sys.nodes())?;
    let m: Vec<Mat2> = par::map_range(exec, sys.nodes(), |k| mul(&sys.p_matrix(weights, k), &sys.a_matrix(k)));
    let m_x = derivative(&m, sys.grid.dx(), |x, y| sub(&x, &y), matrix_lin);
    Ok(par::map_range(exec, sys.nodes(), |k| {
        let p = sys.p_matrix(weights, k);
        let b = sys.b_matrix(k);
        add(&sub(&mul(&transpose(&b), &p), &m_x[k]), &mul(&p, &b))
    }))
}

pub fn check_interior_condition_b(
    sys: &LinearizedSystem,
    weights: &LyapunovWeights,
    exec: Exec,
) -> Result<InteriorReport> {
    let mats = interior_matrices(sys, weights, exec)?;
    let per_node = par::map_range(exec, sys.nodes(), |k| {
        let p = sys.p_matrix(weights, k);
        let m = mul(&p, &sys.a_matrix(k));
        let asym = max_norm(&sub(&m, &transpose(&m))) / max_norm(&m).max(f64::MIN_POSITIVE);
        (min_eigenvalue(&mats[k]), is_positive_definite(&mats[k]), min_eigenvalue(&p), asym)
    });
    let min_eigenvalues: Vec<f64> = per_node.iter().map(|r| r.0).collect();
    let positive_definite: Vec<bool> = per_node.iter().map(|r| r.1).collect();
    let mu0 = min_eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let mu1 = per_node.iter().map(|r| r.2).fold(f64::INFINITY, f64::min);
    let symmetry_residual = per_node.iter().map(|r| r.3).fold(0.0, f64::max);
    let all_pd = positive_definite.iter().all(|&p| p);
    let condition = Condition { verdict: if all_pd && mu0 > 0.0 { Verdict::Pass } else { Verdict::Fail }, margin: mu0 };
    Ok(InteriorReport { min_eigenvalues, positive_definite, mu0, mu1, symmetry_residual, condition })
}

/// Boundary checks and the quadratic form
/// `ẑᵀ(0) M(0) ẑ(0) = −γ0 s² + γ1 s d + γ2 d²`, where `s = ĥ(0)` if
/// `α_q ≠ 0` and `s = q̂(0)` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryReport {
    pub a1: Condition,
    pub a2: Condition,
    pub a3: Condition,
    pub gamma0: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

fn ratio_condition(num: f64, den: f64, rhs: f64) -> Condition {
    if den == 0.0 {
        return Condition { verdict: Verdict::Indeterminate, margin: f64::NAN };
    }
    Condition::from_margin(rhs - (num / den).powi(2))
}

pub fn check_boundary_conditions(sys: &LinearizedSystem, weights: &LyapunovWeights) -> Result<BoundaryReport> {
    weights.check_len(sys.nodes())?;
    let c = sys.boundary;
    if c.alpha_h == 0.0 && c.alpha_q == 0.0 {
        return Err(Error::param("alpha", "(α_h, α_q) must not both vanish"));
    }
    let last = sys.nodes() - 1;
    let (l1_0, l2_0) = (sys.lambda1[0], sys.lambda2[0]);
    let (l1_l, l2_l) = (sys.lambda1[last], sys.lambda2[last]);
    let (p1_0, p2_0) = (weights.p1[0], weights.p2[0]);
    let (p1_l, p2_l) = (weights.p1[last], weights.p2[last]);

    let a1 = ratio_condition(c.alpha_h - c.alpha_q * l2_0, c.alpha_h + c.alpha_q * l1_0, p2_0 * l2_0 / (p1_0 * l1_0));
    let a2 = ratio_condition(c.beta_h + c.beta_q * l1_l, c.beta_h - c.beta_q * l2_l, p1_l * l1_l / (p2_l * l2_l));
    let a3 = Condition::from_margin(1.0 - p2_l * l2_l / (p1_l * l1_l));

    let (gamma0, gamma1, gamma2) = if c.alpha_q != 0.0 {
        let r = c.alpha_h / c.alpha_q;
        (
            -p1_0 * l1_0 * (l2_0 - r).powi(2) + p2_0 * l2_0 * (l1_0 + r).powi(2),
            2.0 / c.alpha_q * (p1_0 * l1_0 * (l2_0 - r) + p2_0 * l2_0 * (l1_0 + r)),
            (p1_0 * l1_0 - p2_0 * l2_0) / c.alpha_q.powi(2),
        )
    } else {
        (
            -p1_0 * l1_0 + p2_0 * l2_0,
            2.0 * l1_0 * l2_0 / c.alpha_h * (p1_0 + p2_0),
            l1_0 * l2_0 / c.alpha_h.powi(2) * (p1_0 * l2_0 - p2_0 * l1_0),
        )
    };
    Ok(BoundaryReport { a1, a2, a3, gamma0, gamma1, gamma2 })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub a1: Condition,
    pub a2: Condition,
    pub a3: Condition,
    pub b: Condition,
    pub mu0: f64,
    pub mu1: f64,
    pub gamma0: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    /// Node positions and the per-node minimum eigenvalue of the interior matrix.
    pub positions: Vec<f64>,
    pub min_eigenvalues: Vec<f64>,
    /// Gate linearization `q(L) = β_L h(L)`, when applicable.
    pub beta_l: Option<f64>,
    /// `2β_L − V*(L)`
    pub beta_margin: Option<f64>,
    /// Cascade weight-ratio bound `V*(0)V*(L)/(gH*(0))`.
    pub epsilon_max: Option<f64>,
}

impl Certificate {
    /// All four conditions hold and `μ0 > 0`.
    pub fn passed(&self) -> bool {
        [self.a1, self.a2, self.a3, self.b].iter().all(|c| c.verdict.passed()) && self.mu0 > 0.0
    }

    pub fn conditions(&self) -> [(&'static str, Condition); 4] {
        [("a1", self.a1), ("a2", self.a2), ("a3", self.a3), ("b", self.b)]
    }
}

/// Runs every check with the given weights.
pub fn certify(sys: &LinearizedSystem, weights: &LyapunovWeights, exec: Exec) -> Result<Certificate> {
    let interior = check_interior_condition_b(sys, weights, exec)?;
    let bnd = check_boundary_conditions(sys, weights)?;
    Ok(Certificate {
        a1: bnd.a1,
        a2: bnd.a2,
        a3: bnd.a3,
        b: interior.condition,
        mu0: interior.mu0,
        mu1: interior.mu1,
        gamma0: bnd.gamma0,
        gamma1: bnd.gamma1,
        gamma2: bnd.gamma2,
        positions: sys.grid.positions(),
        min_eigenvalues: interior.min_eigenvalues,
        beta_l: None,
        beta_margin: None,
        epsilon_max: None,
    })
}

/// Saint-Venant pool between two overshot gates, with `p1 = p2 = 1/2`.
pub fn saint_venant_certificate(
    model: &dyn PhysicalModel,
    gate: &GateBoundary,
    profile: &SteadyProfile,
    gravity: f64,
    exec: Exec,
) -> Result<Certificate> {
    let weights = LyapunovWeights::saint_venant(profile.grid.nodes());
    saint_venant_certificate_with(model, gate, profile, gravity, &weights, exec)
}

/// [`saint_venant_certificate`] with caller-supplied weights.
pub fn saint_venant_certificate_with(
    model: &dyn PhysicalModel,
    gate: &GateBoundary,
    profile: &SteadyProfile,
    gravity: f64,
    weights: &LyapunovWeights,
    exec: Exec,
) -> Result<Certificate> {
    gate.validate(profile.set_point(), profile.q_star)?;
    let sys = linearize(model, gate, profile)?;
    let mut cert = certify(&sys, weights, exec)?;
    let beta_l = gate.beta_l(profile.q_star);
    cert.beta_l = Some(beta_l);
    cert.beta_margin = Some(2.0 * beta_l - profile.v_star.last().unwrap());
    cert.epsilon_max = Some(cascade_epsilon_bound(profile, gravity));
    Ok(cert)
}

/// `V*(0) V*(L) / (g H*(0))`; the junction matrices `Ω_i` are positive
/// definite exactly when the weight ratio `ω_{i+1}/ω_i` is below it.
pub fn cascade_epsilon_bound(profile: &SteadyProfile, gravity: f64) -> f64 {
    profile.v_star[0] * profile.v_star.last().unwrap() / (gravity * profile.h0())
}

/// Junction matrices `Ω_i`, `i = 1..n−1`, for pool weights `ω_1..ω_n`.
pub fn omega_matrices(profile: &SteadyProfile, gravity: f64, omegas: &[f64]) -> Vec<Mat2> {
    let v0 = profile.v_star[0];
    let vl = *profile.v_star.last().unwrap();
    let c = gravity * profile.h0() - v0 * v0;
    omegas
        .windows(2)
        .map(|w| {
            let (wi, wn) = (w[0], w[1]);
            [[wi * vl - wn * v0, -wn * c], [-wn * c, wn * c * v0]]
        })
        .collect()
}

/// `ω_i = ε^{i−1}`
pub fn geometric_weights(pools: usize, epsilon: f64) -> Vec<f64> {
    (0..pools).map(|i| epsilon.powi(i as i32)).collect()
}

/// Positive-definiteness of each `Ω_i`.
pub fn omega_check(profile: &SteadyProfile, gravity: f64, omegas: &[f64]) -> Vec<bool> {
    omega_matrices(profile, gravity, omegas).iter().map(is_positive_definite).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{SaintVenant, GRAVITY};
    use crate::steady::solve_steady_profile;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn profile(cf: f64, q: f64, cells: usize) -> (SaintVenant, SteadyProfile) {
        let sv = SaintVenant::new(cf, GRAVITY).unwrap();
        let grid = Grid::new(5000.0, cells).unwrap();
        let p = solve_steady_profile(&sv, &grid, q, 5.0).unwrap();
        (sv, p)
    }

    /// `V*_x` from the steady equation: `H_x = −c_f V²/(gH − V²)`, `V_x = −V H_x / H`.
    fn v_x(cf: f64, h: f64, v: f64) -> f64 {
        let h_x = -cf * v * v / (GRAVITY * h - v * v);
        -v * h_x / h
    }

    #[test]
    fn b_matrix_matches_closed_form() {
        let (sv, p) = profile(0.01, 2.0, 200);
        let gate = GateBoundary::new(2.0).unwrap();
        let sys = linearize(&sv, &gate, &p).unwrap();
        for k in 0..sys.nodes() {
            let (h, v) = (p.h_star[k], p.v_star[k]);
            let vx = v_x(0.01, h, v);
            let b = sys.b_matrix(k);
            assert_relative_eq!(b[1][0], -3.0 * GRAVITY * h / v * vx, max_relative = 1e-4);
            assert_relative_eq!(b[1][1], 2.0 * GRAVITY * h / (v * v) * vx, max_relative = 1e-4);
        }
        assert!(sys.diagonalization_residual() < 1e-10);
    }

    #[test]
    fn uniform_profile_has_zero_b() {
        let (sv, p) = profile(0.0, 2.0, 50);
        let gate = GateBoundary::new(2.0).unwrap();
        let sys = linearize(&sv, &gate, &p).unwrap();
        for k in 0..sys.nodes() {
            assert!(max_norm(&sys.b_matrix(k)) < 1e-15);
        }
        let rep =
            check_interior_condition_b(&sys, &LyapunovWeights::saint_venant(sys.nodes()), Exec::Sequential).unwrap();
        assert_eq!(rep.condition.verdict, Verdict::Fail);
        assert!(rep.min_eigenvalues.iter().all(|&e| e.abs() < 1e-12));
    }

    #[test]
    fn speeds_at_reference_node() {
        let sv = SaintVenant::new(0.01, GRAVITY).unwrap();
        let (l1, l2) = sv.speeds(5.0, 2.0).unwrap();
        assert!((l1 - 7.404).abs() < 1e-3 && (l2 - 6.604).abs() < 1e-3);
    }

    #[test]
    fn saint_venant_p_and_interior_matrix() {
        let (sv, p) = profile(0.01, 2.0, 400);
        let gate = GateBoundary::new(2.0).unwrap();
        let sys = linearize(&sv, &gate, &p).unwrap();
        let w = LyapunovWeights::saint_venant(sys.nodes());
        let mats = interior_matrices(&sys, &w, Exec::Sequential).unwrap();
        for (k, m) in mats.iter().enumerate() {
            let (h, v) = (p.h_star[k], p.v_star[k]);
            let gh = GRAVITY * h;
            let pm = sys.p_matrix(&w, k);
            assert_relative_eq!(det(&pm), gh, max_relative = 1e-10);
            assert_relative_eq!(pm[0][0], gh + v * v, max_relative = 1e-12);
            assert_relative_eq!(pm[0][1], -v, max_relative = 1e-12);
            // determinant of the closed-form matrix
            let vx = v_x(0.01, h, v);
            let expect = vx * vx / (v * v) * (8.0 * gh * gh - 2.0 * gh * v * v - v.powi(4));
            assert_relative_eq!(det(m), expect, max_relative = 1e-3);
        }
        let rep = check_interior_condition_b(&sys, &w, Exec::Parallel).unwrap();
        assert!(rep.condition.verdict.passed());
        assert!(rep.symmetry_residual < 1e-10);
        assert!(rep.mu0 > 0.0 && rep.mu1 > 0.0);
    }

    #[test]
    fn beta_l_and_certificate() {
        let gate = GateBoundary::new(2.0).unwrap();
        for (q, beta) in [(2.0, 3.0), (2.5, 3.2317)] {
            let (sv, p) = profile(0.01, q, 200);
            let cert = saint_venant_certificate(&sv, &gate, &p, GRAVITY, Exec::Sequential).unwrap();
            assert!((cert.beta_l.unwrap() - beta).abs() < 1e-3);
            assert!(cert.beta_margin.unwrap() > 0.0);
            assert!(cert.passed(), "{cert:?}");
            assert_eq!(cert.min_eigenvalues.len(), 201);
        }
    }

    /// Reduced Saint-Venant form of (a2): expanding
    /// `(λ1 − β)² λ2 < λ1 (λ2 + β)²` with `λ1 = V + c`, `λ2 = c − V` gives
    /// `V β² + (gH − V²)(2β − V) > 0`, which holds whenever `2β > V`.
    fn reduced_a2(gh: f64, v: f64, beta: f64) -> bool {
        v * beta * beta + (gh - v * v) * (2.0 * beta - v) > 0.0
    }

    #[test]
    fn a2_reduction_for_small_beta() {
        let (sv, p) = profile(0.01, 2.0, 100);
        let gate = GateBoundary::new(2.0).unwrap();
        let mut sys = linearize(&sv, &gate, &p).unwrap();
        let (h, v) = (p.set_point(), *p.v_star.last().unwrap());
        for beta in [v / 4.0, v / 2.0 - 1e-3, v / 2.0 + 1e-3, 1.0, 3.0, -0.1] {
            sys.boundary = BoundaryCoefficients::gate_with_beta_l(sys.boundary.alpha_q, beta);
            let rep = check_boundary_conditions(&sys, &LyapunovWeights::saint_venant(sys.nodes())).unwrap();
            assert_eq!(rep.a2.verdict.passed(), reduced_a2(GRAVITY * h, v, beta), "β_L = {beta}");
        }
    }

    #[test]
    fn a2_indeterminate_denominator() {
        let (sv, p) = profile(0.01, 2.0, 100);
        let gate = GateBoundary::new(2.0).unwrap();
        let mut sys = linearize(&sv, &gate, &p).unwrap();
        let l2 = *sys.lambda2.last().unwrap();
        sys.boundary.beta_q = 1.0;
        sys.boundary.beta_h = l2;
        let rep = check_boundary_conditions(&sys, &LyapunovWeights::saint_venant(sys.nodes())).unwrap();
        assert_eq!(rep.a2.verdict, Verdict::Indeterminate);
        sys.boundary.alpha_h = 0.0;
        sys.boundary.alpha_q = 0.0;
        assert!(check_boundary_conditions(&sys, &LyapunovWeights::saint_venant(sys.nodes())).is_err());
    }

    #[test]
    fn epsilon_bound_is_sharp() {
        let (_, p) = profile(0.008, 2.0, 200);
        let eps = cascade_epsilon_bound(&p, GRAVITY);
        assert!(eps > 2.5e-3 && eps < 3.5e-3, "{eps}");
        assert!(omega_check(&p, GRAVITY, &geometric_weights(4, eps / 2.0)).iter().all(|&b| b));
        assert!(omega_check(&p, GRAVITY, &geometric_weights(4, eps * 10.0)).iter().all(|&b| !b));
        assert!(omega_check(&p, GRAVITY, &geometric_weights(2, eps * 0.999))[0]);
        assert!(!omega_check(&p, GRAVITY, &geometric_weights(2, eps * 1.001))[0]);
    }

    #[test]
    fn exec_modes_agree() {
        let (sv, p) = profile(0.01, 2.0, 300);
        let gate = GateBoundary::new(2.0).unwrap();
        let a = saint_venant_certificate(&sv, &gate, &p, GRAVITY, Exec::Sequential).unwrap();
        let b = saint_venant_certificate(&sv, &gate, &p, GRAVITY, Exec::Parallel).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn gamma0_sign_matches_a1(
            cf in 0.001f64..0.03, q in 0.5f64..3.0,
            p1 in 0.01f64..10.0, p2 in 0.01f64..10.0,
            ah in -2.0f64..2.0, aq in prop_oneof![Just(0.0), -2.0f64..2.0],
        ) {
            prop_assume!(ah != 0.0 || aq != 0.0);
            let (sv, p) = profile(cf, q, 20);
            let gate = GateBoundary::new(2.0).unwrap();
            let mut sys = linearize(&sv, &gate, &p).unwrap();
            sys.boundary.alpha_h = ah;
            sys.boundary.alpha_q = aq;
            let w = LyapunovWeights::uniform(sys.nodes(), p1, p2).unwrap();
            let rep = check_boundary_conditions(&sys, &w).unwrap();
            prop_assume!(rep.a1.verdict != Verdict::Indeterminate);
            prop_assume!(rep.gamma0.abs() > 1e-9 && rep.a1.margin.abs() > 1e-9);
            prop_assert_eq!(rep.gamma0 > 0.0, rep.a1.verdict.passed());
        }

        #[test]
        fn verdicts_are_scale_invariant(cf in 0.001f64..0.03, q in 0.5f64..3.0, c in 1e-3f64..1e3, p2 in 0.1f64..10.0) {
            let (sv, p) = profile(cf, q, 40);
            let gate = GateBoundary::new(2.0).unwrap();
            let sys = linearize(&sv, &gate, &p).unwrap();
            let w = LyapunovWeights::uniform(sys.nodes(), 0.5, p2).unwrap();
            let a = certify(&sys, &w, Exec::Sequential).unwrap();
            let b = certify(&sys, &w.scaled(c).unwrap(), Exec::Sequential).unwrap();
            for ((_, x), (_, y)) in a.conditions().iter().zip(b.conditions().iter()) {
                prop_assert_eq!(x.verdict, y.verdict);
            }
        }

        #[test]
        fn m_is_symmetric(cf in 0.0f64..0.03, q in 0.5f64..3.0, p1 in 0.01f64..10.0, p2 in 0.01f64..10.0) {
            let (sv, p) = profile(cf, q, 20);
            let gate = GateBoundary::new(2.0).unwrap();
            let sys = linearize(&sv, &gate, &p).unwrap();
            let w = LyapunovWeights::uniform(sys.nodes(), p1, p2).unwrap();
            let rep = check_interior_condition_b(&sys, &w, Exec::Sequential).unwrap();
            prop_assert!(rep.symmetry_residual < 1e-10);
        }
    }
}
