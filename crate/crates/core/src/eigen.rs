//! Principal eigenpair by projected descent on the Rayleigh quotient
//! `R(u) = ‖u‖^p / ∫|u|^p`, and the eigenvalue of the problem posed on `{b > 0}`.

use crate::energy::BWeight;
use crate::error::{Error, Result};
use crate::grid::{interpolate, lp_grad_values, lp_values, GridFunction};
use crate::kernel::WeightTable;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenOptions {
    /// Relative decrease of `R` below which the descent may stop.
    pub tol: f64,
    /// Scaled gradient residual `‖∇R‖∞ / (h R)` required together with `tol`.
    pub residual_tol: f64,
    pub max_iter: usize,
    /// Clamp negative nodal values after each step.
    pub clamp: bool,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions { tol: 1e-10, residual_tol: 1e-7, max_iter: 50_000, clamp: true }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EigenResult {
    pub lambda1: f64,
    /// Nonnegative, normalized to `∫|φ₁|^p = 1`.
    pub phi1: GridFunction,
    pub iterations: usize,
    /// Relative decrease of `R` at the last accepted step.
    pub residual: f64,
    /// `‖∇R‖∞ / (h R)` at the returned iterate.
    pub grad_residual: f64,
}

/// `R(u)`; zero for the zero function.
pub fn rayleigh_quotient(table: &WeightTable, u: &GridFunction) -> Result<f64> {
    let s = table.seminorm_p(u)?;
    let l = lp_values(table.grid(), u.values(), table.kernel().p);
    if l == 0.0 {
        return Err(Error::ZeroFunction);
    }
    Ok(s / l)
}

pub fn principal_eigenpair(table: &WeightTable, opts: &EigenOptions) -> Result<EigenResult> {
    let n = table.grid().n_interior();
    descend(table, &vec![true; n], opts)
}

/// Principal eigenvalue on `Ω⁺ = {b > 0}`: functions vanish at every node
/// not interior to a run of cells with `b > 0`. The zero extension carries the
/// exterior interaction with `Ω ∖ Ω⁺` automatically.
pub fn subdomain_eigen(table: &WeightTable, b: &BWeight, opts: &EigenOptions) -> Result<EigenResult> {
    let cells = b.cell_values(table.grid());
    let mask: Vec<bool> = (1..=table.grid().n_interior()).map(|i| cells[i - 1] > 0.0 && cells[i] > 0.0).collect();
    let active = mask.iter().filter(|&&m| m).count();
    if active < 2 {
        return Err(Error::Precondition(format!(
            "the set {{b > 0}} holds {active} grid node(s), at least 2 are needed"
        )));
    }
    descend(table, &mask, opts)
}

struct State {
    u: Vec<f64>,
    r: f64,
    grad: Vec<f64>,
}

fn evaluate(table: &WeightTable, u: Vec<f64>, mask: &[bool]) -> State {
    let p = table.kernel().p;
    let (s, gs) = table.seminorm_grad_values(&u);
    let (l, gl) = lp_grad_values(table.grid(), &u, p);
    let r = s / l;
    let grad = (0..u.len()).map(|i| if mask[i] { (gs[i] - r * gl[i]) / l } else { 0.0 }).collect();
    State { u, r, grad }
}

fn normalize(table: &WeightTable, u: &mut [f64]) -> bool {
    let l = lp_values(table.grid(), u, table.kernel().p);
    if !(l > 0.0) || !l.is_finite() {
        return false;
    }
    let c = l.powf(-1.0 / table.kernel().p);
    u.iter_mut().for_each(|v| *v *= c);
    true
}

fn scaled_residual(table: &WeightTable, st: &State) -> f64 {
    let h = table.grid().h();
    st.grad.iter().fold(0.0f64, |m, g| m.max(g.abs())) / (h * st.r)
}

fn descend(table: &WeightTable, mask: &[bool], opts: &EigenOptions) -> Result<EigenResult> {
    let grid = table.grid();
    let p = table.kernel().p;
    let h = grid.h();
    let start = interpolate(grid, |x| 1.0 - x * x)?;
    let mut u: Vec<f64> = start.values().iter().zip(mask).map(|(&v, &m)| if m { v } else { 0.0 }).collect();
    normalize(table, &mut u);
    let mut st = evaluate(table, u, mask);
    let mut last_decrease = f64::INFINITY;

    let finish = |st: State, iterations: usize, residual: f64| -> Result<EigenResult> {
        let grad_residual = scaled_residual(table, &st);
        Ok(EigenResult {
            lambda1: st.r,
            phi1: GridFunction::new(grid.clone(), st.u)?,
            iterations,
            residual,
            grad_residual,
        })
    };

    for it in 0..opts.max_iter {
        let res = scaled_residual(table, &st);
        if last_decrease < opts.tol && res <= opts.residual_tol {
            return finish(st, it, last_decrease);
        }
        let dir: Vec<f64> = st.grad.iter().map(|g| -g / (p * h * st.r)).collect();
        let mut step = 1.0;
        let mut accepted = None;
        while step > 1e-30 {
            let mut trial: Vec<f64> = st.u.iter().zip(&dir).map(|(u, d)| u + step * d).collect();
            if opts.clamp {
                trial.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            let moved: f64 = trial.iter().zip(&st.u).zip(&st.grad).map(|((t, u), g)| g * (t - u)).sum();
            let mut normed = trial;
            if normalize(table, &mut normed) {
                let next = evaluate(table, normed, mask);
                if next.r <= st.r + 1e-4 * moved.min(0.0) && next.r <= st.r {
                    accepted = Some(next);
                    break;
                }
            }
            step *= 0.5;
        }
        match accepted {
            Some(next) => {
                last_decrease = (st.r - next.r) / st.r;
                st = next;
            }
            None => {
                // No descent left at working precision.
                if res <= opts.residual_tol {
                    return finish(st, it, 0.0);
                }
                let best = finish(st, it, last_decrease)?;
                return Err(Error::EigenNotConverged { iterations: it, best: Box::new(best) });
            }
        }
    }
    let best = finish(st, opts.max_iter, last_decrease)?;
    if best.residual < opts.tol && best.grad_residual <= opts.residual_tol {
        return Ok(best);
    }
    Err(Error::EigenNotConverged { iterations: opts.max_iter, best: Box::new(best) })
}
