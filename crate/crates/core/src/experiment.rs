//! Branch minimization over a list of `λ` values.

use crate::energy::Problem;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fiber::{nehari_value, Branch};
use crate::grid::{lp_values, GridFunction};
use crate::nehari::{check_proximity, minimize_branch, BranchSolution, NehariOptions};

/// Outcome of one `(λ, branch)` solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    NotConverged,
    BranchEmpty,
    Unbounded,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::NotConverged => "not-converged",
            SolveStatus::BranchEmpty => "branch-empty",
            SolveStatus::Unbounded => "unbounded",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub lambda: f64,
    pub branch: Branch,
    pub status: SolveStatus,
    /// NaN when no iterate exists.
    pub j_inf: f64,
    /// `‖u‖` (the `p`-th root of the seminorm).
    pub u_norm: f64,
    /// `(∫|u|^p)^{1/p}`
    pub lp_norm: f64,
    pub b_integral: f64,
    /// `1 - ∫ û φ₁^{p-1}` with `û = u / ‖u‖_{L^p}`.
    pub angle_to_phi1: f64,
    pub iterations: usize,
    pub nehari_residual: f64,
    pub grad_residual: f64,
    /// `J` at the Nehari point of `φ₁`, where one exists.
    pub closed_form: Option<f64>,
    pub solution: Option<BranchSolution>,
}

/// Fixed data of a sweep.
#[derive(Clone, Debug)]
pub struct SweepContext {
    /// Any `λ`; each row replaces it.
    pub problem: Problem,
    pub phi1: GridFunction,
    pub lambda1: f64,
    pub opts: NehariOptions,
    pub allow_near_lambda1: bool,
}

/// `1 - ∫ û φ₁^{p-1}`; zero when `u` is a positive multiple of `φ₁`.
pub fn angle_to_phi1(u: &GridFunction, phi1: &GridFunction, p: f64) -> Result<f64> {
    u.check_grid(phi1.grid())?;
    let grid = u.grid();
    let l = lp_values(grid, u.values(), p);
    if l == 0.0 {
        return Err(Error::ZeroFunction);
    }
    let scale = l.powf(-1.0 / p);
    // Two-point Gauss per cell, exact for p = 2.
    let full_u = grid.padded(u.values());
    let full_phi = grid.padded(phi1.values());
    let mut pairing = 0.0;
    for c in 0..grid.n_cells() {
        for (s, w) in [(0.2113248654051871, 0.5), (0.7886751345948129, 0.5)] {
            let uu = full_u[c] + s * (full_u[c + 1] - full_u[c]);
            let pp = full_phi[c] + s * (full_phi[c + 1] - full_phi[c]);
            pairing += w * grid.h() * uu * pp.abs().powf(p - 1.0) * pp.signum();
        }
    }
    Ok(1.0 - scale * pairing)
}

/// `J` at `t* φ₁` from `E = (λ₁ - λ) ∫φ₁^p` and `B = ∫ b φ₁^β`, when the signs agree.
pub fn closed_form_reference(problem: &Problem, phi1: &GridFunction, lambda1: f64) -> Result<Option<f64>> {
    let params = problem.params();
    let l = lp_values(problem.grid(), phi1.values(), params.p());
    let e = (lambda1 - params.lambda) * l;
    let b = problem.calibrate(phi1)?.integral;
    if e == 0.0 || b == 0.0 || e.signum() != b.signum() {
        return Ok(None);
    }
    Ok(Some(nehari_value(e, b, params.p(), params.beta)))
}

/// `λ₁ (1 + sign 10^{-k})` for each `k`.
pub fn lambda_ladder(lambda1: f64, above: bool, ks: &[i32]) -> Vec<f64> {
    let s = if above { 1.0 } else { -1.0 };
    ks.iter().map(|&k| lambda1 * (1.0 + s * 10f64.powi(-k))).collect()
}

fn row(ctx: &SweepContext, lambda: f64, branch: Branch) -> Result<SweepRow> {
    check_proximity(lambda, ctx.lambda1, ctx.allow_near_lambda1)?;
    let problem = ctx.problem.with_lambda(lambda)?;
    let p = problem.params().p();
    let closed_form = closed_form_reference(&problem, &ctx.phi1, ctx.lambda1)?;
    let opts = NehariOptions { phi1: Some(ctx.phi1.clone()), ..ctx.opts.clone() };
    let empty = |status| SweepRow {
        lambda,
        branch,
        status,
        j_inf: f64::NAN,
        u_norm: f64::NAN,
        lp_norm: f64::NAN,
        b_integral: f64::NAN,
        angle_to_phi1: f64::NAN,
        iterations: 0,
        nehari_residual: f64::NAN,
        grad_residual: f64::NAN,
        closed_form,
        solution: None,
    };
    let (sol, status) = match minimize_branch(&problem, branch, &ctx.phi1, &opts) {
        Ok(s) => (s, SolveStatus::Converged),
        Err(Error::BranchNotConverged { best, .. }) => (*best, SolveStatus::NotConverged),
        Err(Error::BranchEmpty(_)) => return Ok(empty(SolveStatus::BranchEmpty)),
        Err(Error::Unbounded(_)) => return Ok(empty(SolveStatus::Unbounded)),
        Err(e) => return Err(e),
    };
    Ok(SweepRow {
        lambda,
        branch,
        status,
        j_inf: sol.j_value,
        u_norm: sol.seminorm_p.powf(1.0 / p),
        lp_norm: sol.lp_p.powf(1.0 / p),
        b_integral: sol.b_term,
        angle_to_phi1: angle_to_phi1(&sol.u, &ctx.phi1, p)?,
        iterations: sol.iterations,
        nehari_residual: sol.nehari_residual,
        grad_residual: sol.grad_residual,
        closed_form,
        solution: Some(sol),
    })
}

/// Solves every `(λ, branch)` pair; rows come back in input order whatever the
/// execution mode.
pub fn run_sweep(ctx: &SweepContext, lambdas: &[f64], branches: &[Branch], exec: Execution) -> Result<Vec<SweepRow>> {
    let jobs: Vec<(f64, Branch)> = lambdas.iter().flat_map(|&l| branches.iter().map(move |&b| (l, b))).collect();
    exec.map(jobs.len(), |i| row(ctx, jobs[i].0, jobs[i].1)).into_iter().collect()
}
