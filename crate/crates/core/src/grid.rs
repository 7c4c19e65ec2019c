//! Uniform grid on Ω = (-1, 1) and piecewise-linear functions vanishing outside Ω.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quadrature::pow_mean;

/// Uniform grid with `n_interior` interior nodes `x_i = -1 + i h`, `i = 1..=N`.
///
/// Cells are indexed `0..=N`; cell `c` spans `[-1 + c h, -1 + (c + 1) h]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    n_interior: usize,
    h: f64,
    nodes: Vec<f64>,
}

impl Grid {
    pub fn new(n_interior: usize) -> Result<Arc<Grid>> {
        if n_interior < 2 {
            return Err(Error::InvalidParameter(format!("grid needs at least 2 interior nodes, got {n_interior}")));
        }
        let h = 2.0 / (n_interior as f64 + 1.0);
        let nodes = (1..=n_interior).map(|i| -1.0 + i as f64 * h).collect();
        Ok(Arc::new(Grid { n_interior, h, nodes }))
    }

    pub fn n_interior(&self) -> usize {
        self.n_interior
    }

    pub fn n_cells(&self) -> usize {
        self.n_interior + 1
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Interior node coordinates.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Left endpoint of cell `c`.
    pub fn cell_left(&self, c: usize) -> f64 {
        -1.0 + c as f64 * self.h
    }

    pub fn cell_midpoint(&self, c: usize) -> f64 {
        -1.0 + (c as f64 + 0.5) * self.h
    }

    /// Nodal values padded with the zero boundary values at `x = ±1`.
    pub fn padded(&self, values: &[f64]) -> Vec<f64> {
        let mut full = Vec::with_capacity(values.len() + 2);
        full.push(0.0);
        full.extend_from_slice(values);
        full.push(0.0);
        full
    }
}

/// A continuous piecewise-linear function on the grid, zero at `±1` and outside Ω.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_interior() {
            return Err(Error::GridMismatch { expected: grid.n_interior(), found: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { x: grid.nodes()[i] });
        }
        Ok(GridFunction { grid, values })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let values = vec![0.0; grid.n_interior()];
        GridFunction { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn padded(&self) -> Vec<f64> {
        self.grid.padded(&self.values)
    }

    pub fn scaled(&self, c: f64) -> GridFunction {
        GridFunction { grid: self.grid.clone(), values: self.values.iter().map(|v| c * v).collect() }
    }

    /// Same grid, new values. Panics on a length mismatch.
    pub fn with_values(&self, values: Vec<f64>) -> GridFunction {
        assert_eq!(values.len(), self.values.len());
        GridFunction { grid: self.grid.clone(), values }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Value of the interpolant at `x` (zero outside Ω).
    pub fn eval(&self, x: f64) -> f64 {
        if x <= -1.0 || x >= 1.0 {
            return 0.0;
        }
        let h = self.grid.h();
        let pos = (x + 1.0) / h;
        let c = (pos.floor() as usize).min(self.grid.n_cells() - 1);
        let s = pos - c as f64;
        let full = |i: usize| if i == 0 || i > self.grid.n_interior() { 0.0 } else { self.values[i - 1] };
        full(c) * (1.0 - s) + full(c + 1) * s
    }

    pub(crate) fn check_grid(&self, grid: &Grid) -> Result<()> {
        if self.grid.as_ref() != grid {
            return Err(Error::GridMismatch { expected: grid.n_interior(), found: self.grid.n_interior() });
        }
        Ok(())
    }
}

/// Samples `f` at the interior nodes.
pub fn interpolate(grid: &Arc<Grid>, f: impl Fn(f64) -> f64) -> Result<GridFunction> {
    let mut values = Vec::with_capacity(grid.n_interior());
    for &x in grid.nodes() {
        let v = f(x);
        if !v.is_finite() {
            return Err(Error::NonFinite { x });
        }
        values.push(v);
    }
    Ok(GridFunction { grid: grid.clone(), values })
}

/// `∫_Ω |u|^q dx` for the piecewise-linear interpolant, exact per cell.
pub fn lp_norm_p(u: &GridFunction, q: f64) -> Result<f64> {
    if !(q >= 1.0) || !q.is_finite() {
        return Err(Error::InvalidParameter(format!("exponent q must be >= 1, got {q}")));
    }
    Ok(lp_values(&u.grid, &u.values, q))
}

/// `∫_Ω |u|^q dx` and its gradient with respect to the interior nodal values.
pub fn lp_grad_values(grid: &Grid, values: &[f64], q: f64) -> (f64, Vec<f64>) {
    let full = grid.padded(values);
    let h = grid.h();
    let mut total = 0.0;
    let mut grad = vec![0.0; full.len()];
    for c in 0..grid.n_cells() {
        let r = pow_mean(full[c], full[c + 1], q);
        total += h * r.value;
        grad[c] += h * r.d_left;
        grad[c + 1] += h * r.d_right;
    }
    grad.pop();
    grad.remove(0);
    (total, grad)
}

/// `∫_Ω |u|^q dx` from interior nodal values.
pub fn lp_values(grid: &Grid, values: &[f64], q: f64) -> f64 {
    let full = grid.padded(values);
    let h = grid.h();
    full.windows(2).map(|w| h * pow_mean(w[0], w[1], q).value).sum()
}
