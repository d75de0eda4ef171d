use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid on `[0, L]` with `cells + 1` nodes including both boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    length: f64,
    cells: usize,
}

impl Grid {
    pub fn new(length: f64, cells: usize) -> Result<Self> {
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::param("length", format!("must be > 0, got {length}")));
        }
        if cells == 0 {
            return Err(Error::param("cells", "must be positive"));
        }
        Ok(Grid { length, cells })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn nodes(&self) -> usize {
        self.cells + 1
    }

    pub fn dx(&self) -> f64 {
        self.length / self.cells as f64
    }

    pub fn x(&self, k: usize) -> f64 {
        if k == self.cells {
            self.length
        } else {
            k as f64 * self.dx()
        }
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.nodes()).map(|k| self.x(k)).collect()
    }

    /// Linear interpolation of nodal `values` at position `x` (clamped to the domain).
    pub fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        let s = (x / self.dx()).clamp(0.0, self.cells as f64);
        let k = (s.floor() as usize).min(self.cells - 1);
        let w = s - k as f64;
        values[k] * (1.0 - w) + values[k + 1] * w
    }
}

/// `(H, Q)` sampled on the nodes of a grid at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub t: f64,
    pub h: Vec<f64>,
    pub q: Vec<f64>,
}

impl FieldState {
    pub fn new(t: f64, h: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        if h.len() != q.len() {
            return Err(Error::LengthMismatch { expected: h.len(), got: q.len() });
        }
        if let Some((node, &bad)) = h.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(Error::DepthUnderflow { h: bad, node });
        }
        Ok(FieldState { t, h, q })
    }

    pub fn uniform(grid: &Grid, h: f64, q: f64) -> Result<Self> {
        Self::new(0.0, vec![h; grid.nodes()], vec![q; grid.nodes()])
    }

    pub fn check_grid(&self, grid: &Grid) -> Result<()> {
        if self.h.len() != grid.nodes() {
            return Err(Error::LengthMismatch { expected: grid.nodes(), got: self.h.len() });
        }
        Ok(())
    }

    pub fn h_last(&self) -> f64 {
        *self.h.last().expect("non-empty state")
    }

    pub fn q_last(&self) -> f64 {
        *self.q.last().expect("non-empty state")
    }

    /// Resamples onto another grid by linear interpolation.
    pub fn resample(&self, from: &Grid, to: &Grid) -> FieldState {
        let xs = to.positions();
        FieldState {
            t: self.t,
            h: xs.iter().map(|&x| from.interpolate(&self.h, x)).collect(),
            q: xs.iter().map(|&x| from.interpolate(&self.q, x)).collect(),
        }
    }

    /// Trapezoidal `∫ H dx`.
    pub fn storage(&self, grid: &Grid) -> f64 {
        trapezoid(&self.h, grid.dx())
    }
}

pub(crate) fn trapezoid(values: &[f64], dx: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let inner: f64 = values[1..n - 1].iter().sum();
    dx * (inner + 0.5 * (values[0] + values[n - 1]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_and_spacing() {
        let g = Grid::new(5000.0, 200).unwrap();
        assert_eq!(g.nodes(), 201);
        assert_eq!(g.dx(), 25.0);
        assert_eq!(g.x(200), 5000.0);
        let xs = g.positions();
        assert!(xs.windows(2).all(|w| w[1] > w[0]));
        assert!(Grid::new(0.0, 10).is_err());
        assert!(Grid::new(10.0, 0).is_err());
    }

    #[test]
    fn state_invariants() {
        assert!(FieldState::new(0.0, vec![1.0, 0.0], vec![0.0, 0.0]).is_err());
        assert!(FieldState::new(0.0, vec![1.0], vec![0.0, 0.0]).is_err());
        let g = Grid::new(1.0, 4).unwrap();
        let s = FieldState::uniform(&g, 2.0, 1.0).unwrap();
        assert!((s.storage(&g) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn interpolation_and_resampling() {
        let g = Grid::new(4.0, 4).unwrap();
        let v = [0.0, 1.0, 4.0, 9.0, 16.0];
        assert_eq!(g.interpolate(&v, 1.5), 2.5);
        assert_eq!(g.interpolate(&v, 4.0), 16.0);
        assert_eq!(g.interpolate(&v, -1.0), 0.0);
        let fine = Grid::new(4.0, 8).unwrap();
        let s = FieldState { t: 0.0, h: v.to_vec(), q: v.to_vec() };
        let r = s.resample(&g, &fine);
        assert_eq!(r.h.len(), 9);
        assert_eq!(r.h[3], 2.5);
    }
}
