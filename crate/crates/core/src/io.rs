//! CSV and plain-text report writers.
//!
//! Every writer renders into a `String` first so callers can assemble all
//! outputs of a run before touching the filesystem. Floats are written with
//! 12 significant digits in scientific notation.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::cascade::CascadeSummary;
use crate::certificate::Certificate;
use crate::controller::ControllerSample;
use crate::error::{Error, Result};
use crate::model::{FieldState, Grid};
use crate::solver::Trajectory;
use crate::steady::SteadyProfile;

/// Formats `v` with 12 significant digits.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_finite() {
        format!("{v:.11e}")
    } else {
        format!("{v}")
    }
}

fn row(out: &mut String, values: &[f64]) {
    let cells: Vec<String> = values.iter().map(|&v| num(v)).collect();
    out.push_str(&cells.join(","));
    out.push('\n');
}

fn table<'a, I>(header: &str, rows: I) -> String
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut out = String::new();
    out.push_str(header);
    out.push('\n');
    for r in rows {
        row(&mut out, r);
    }
    out
}

/// `t,H_at_L,Q_at_0,Q_at_L,U,D,Y`
pub fn trajectory_csv(tr: &Trajectory) -> String {
    let rows: Vec<[f64; 7]> = tr.samples.iter().map(|s| [s.t, s.h_at_l, s.q_at_0, s.q_at_l, s.u, s.d, s.y]).collect();
    table("t,H_at_L,Q_at_0,Q_at_L,U,D,Y", rows.iter().map(|r| &r[..]))
}

/// `x,H,Q` for one field snapshot.
pub fn snapshot_csv(grid: &Grid, state: &FieldState) -> String {
    let rows: Vec<[f64; 3]> = (0..grid.nodes()).map(|k| [grid.x(k), state.h[k], state.q[k]]).collect();
    table("x,H,Q", rows.iter().map(|r| &r[..]))
}

/// `x,H_star,V_star,margin`
pub fn profile_csv(profile: &SteadyProfile) -> String {
    let g = &profile.grid;
    let rows: Vec<[f64; 4]> =
        (0..g.nodes()).map(|k| [g.x(k), profile.h_star[k], profile.v_star[k], profile.margin[k]]).collect();
    table("x,H_star,V_star,margin", rows.iter().map(|r| &r[..]))
}

/// `omega,re,im`
pub fn frequency_csv(response: &[(f64, Complex64)]) -> String {
    let rows: Vec<[f64; 3]> = response.iter().map(|(w, p)| [*w, p.re, p.im]).collect();
    table("omega,re,im", rows.iter().map(|r| &r[..]))
}

/// `t,Hhat_0,Qhat_0,Qhat_L,U`
pub fn controller_csv(samples: &[ControllerSample]) -> String {
    let rows: Vec<[f64; 5]> = samples.iter().map(|s| [s.t, s.h_hat_0, s.q_hat_0, s.q_hat_l, s.u]).collect();
    table("t,Hhat_0,Qhat_0,Qhat_L,U", rows.iter().map(|r| &r[..]))
}

/// `t,distance`
pub fn distance_csv(distance: &[(f64, f64)]) -> String {
    let rows: Vec<[f64; 2]> = distance.iter().map(|&(t, d)| [t, d]).collect();
    table("t,distance", rows.iter().map(|r| &r[..]))
}

/// `x,min_eigenvalue`
pub fn eigenvalue_csv(cert: &Certificate) -> String {
    let rows: Vec<[f64; 2]> = cert.positions.iter().zip(&cert.min_eigenvalues).map(|(&x, &e)| [x, e]).collect();
    table("x,min_eigenvalue", rows.iter().map(|r| &r[..]))
}

/// One `name verdict margin` line per condition followed by `key value` lines.
pub fn certificate_report(cert: &Certificate) -> String {
    let mut out = String::new();
    for (name, c) in cert.conditions() {
        let _ = writeln!(out, "{name} {} {}", c.verdict, num(c.margin));
    }
    let mut kv = |k: &str, v: f64| {
        let _ = writeln!(out, "{k} {}", num(v));
    };
    kv("mu0", cert.mu0);
    kv("mu1", cert.mu1);
    kv("gamma0", cert.gamma0);
    kv("gamma1", cert.gamma1);
    kv("gamma2", cert.gamma2);
    if let Some(b) = cert.beta_l {
        kv("beta_l", b);
    }
    if let Some(m) = cert.beta_margin {
        kv("beta_margin", m);
    }
    if let Some(e) = cert.epsilon_max {
        kv("epsilon_max", e);
    }
    let _ = writeln!(out, "passed {}", cert.passed());
    out
}

/// `pool,peak_to_peak,ratio,max_abs_Y,terminal_abs_Y`; the ratio of pool `i`
/// is `p2p_i / p2p_{i−1}` and is empty for the first pool.
pub fn cascade_summary_csv(summary: &CascadeSummary) -> String {
    let mut out = String::from("pool,peak_to_peak,ratio,max_abs_Y,terminal_abs_Y\n");
    let amp = &summary.amplification;
    for (i, p2p) in amp.peak_to_peak.iter().enumerate() {
        let ratio = if i == 0 { String::new() } else { num(amp.ratios[i - 1]) };
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            i + 1,
            num(*p2p),
            ratio,
            num(summary.max_abs_y[i]),
            num(summary.terminal_abs_y[i])
        );
    }
    out
}

/// A set of named text outputs written together under one directory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OutputSet {
    files: Vec<(PathBuf, String)>,
}

impl OutputSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<PathBuf>, contents: String) {
        self.files.push((name.into(), contents));
    }

    pub fn extend(&mut self, other: OutputSet) {
        self.files.extend(other.files);
    }

    pub fn files(&self) -> &[(PathBuf, String)] {
        &self.files
    }

    pub fn get(&self, name: impl AsRef<Path>) -> Option<&str> {
        self.files.iter().find(|(p, _)| p == name.as_ref()).map(|(_, c)| c.as_str())
    }

    /// Writes every file below `dir`, creating directories as needed.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut written = Vec::with_capacity(self.files.len());
        for (name, contents) in &self.files {
            let path = dir.join(name);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
            }
            fs::write(&path, contents).map_err(|e| io_error(&path, e))?;
            written.push(path);
        }
        Ok(written)
    }
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), reason: e.to_string() }
}
