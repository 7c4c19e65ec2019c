//! Minimization of `J_λ` on the branches `N⁺` and `N⁻` of the Nehari set, and
//! the constructions behind the nonexistence results.
//!
//! Every direction `v` with a critical scaling determines the Nehari point
//! `t*(v) v` and the value
//!
//! ```text
//! F(v) = J_λ(t* v) = (1/p - 1/β) sgn(B) |B|^{p/(p-β)} |E|^{-β/(p-β)}.
//! ```
//!
//! `F` has a fixed sign on each branch, so the descent works on the
//! 0-homogeneous objective `G = sgn(F) ln|F|`. Its gradient is `∇F / |F|`,
//! which points along `∇J_λ` at the projected point; a step on `v` followed by
//! the closed-form projection is the scale-projected descent on the branch.

use crate::energy::{Pieces, Problem, Regime, Sign};
use crate::error::{Error, Result};
use crate::fiber::{nehari_value, Branch, FiberMap};
use crate::grid::{lp_values, GridFunction};

#[derive(Clone, Debug, PartialEq)]
pub struct NehariOptions {
    pub max_iter: usize,
    /// Bound on `‖∇J(u)‖∞ / ‖∇‖u‖^p / p‖∞` at acceptance.
    pub tol: f64,
    /// Minimize `J⁺` and keep iterates nonnegative.
    pub nonnegative: bool,
    /// Abort sublinear `N⁺` runs whose seminorm exceeds this multiple of the
    /// initial one.
    pub growth_cap: Option<f64>,
    /// Principal eigenfunction, used to build initial directions.
    pub phi1: Option<GridFunction>,
}

impl Default for NehariOptions {
    fn default() -> Self {
        NehariOptions { max_iter: 20_000, tol: 1e-9, nonnegative: true, growth_cap: Some(10.0), phi1: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BranchSolution {
    pub u: GridFunction,
    pub branch: Branch,
    pub j_value: f64,
    /// `|‖u‖^p - λ∫|u|^p - ∫b|u|^β|`
    pub nehari_residual: f64,
    /// `‖∇J(u)‖∞ / ‖∇‖u‖^p / p‖∞`
    pub grad_residual: f64,
    /// `max_i |⟨J'(u), e_i⟩|`
    pub weak_residual: f64,
    pub iterations: usize,
    pub min_node_value: f64,
    pub seminorm_p: f64,
    pub lp_p: f64,
    pub b_term: f64,
    pub converged: bool,
    /// `J` at the projected iterate, one entry per accepted step.
    pub trace: Vec<f64>,
}

/// Absolute weak-equation tolerance relative to `max(1, ‖u‖^{p-1})`.
pub const WEAK_TOL: f64 = 1e-7;

/// Relative residual below which the descent hands over to Newton polishing.
const NEWTON_SWITCH: f64 = 1e-3;
const NEWTON_MAX_ITER: usize = 40;

/// Gaussian elimination with partial pivoting; `None` for a singular matrix.
fn solve_dense(mut a: Vec<f64>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))?;
        if a[piv * n + col] == 0.0 || !a[piv * n + col].is_finite() {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(piv * n + k, col * n + k);
            }
            b.swap(piv, col);
        }
        for r in (col + 1)..n {
            let f = a[r * n + col] / a[col * n + col];
            if f != 0.0 {
                for k in col..n {
                    a[r * n + k] -= f * a[col * n + k];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut v = b[r];
        for k in (r + 1)..n {
            v -= a[r * n + k] * x[k];
        }
        x[r] = v / a[r * n + r];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

struct Point {
    v: Vec<f64>,
    pieces: Pieces,
    t: f64,
    g: f64,
    grad_g: Vec<f64>,
    grad_j: Vec<f64>,
    grad_s_scaled: Vec<f64>,
}

impl Point {
    fn seminorm_at_u(&self, p: f64) -> f64 {
        self.t.powf(p) * self.pieces.s
    }

    fn rel_residual(&self) -> f64 {
        let num = self.grad_j.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        let den = self.grad_s_scaled.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        num / den
    }

    fn weak_residual(&self) -> f64 {
        self.grad_j.iter().fold(0.0f64, |m, g| m.max(g.abs()))
    }
}

struct Solver<'a> {
    problem: &'a Problem,
    branch: Branch,
    nonnegative: bool,
}

impl Solver<'_> {
    fn evaluate(&self, v: Vec<f64>) -> Option<Point> {
        let pr = self.problem;
        let params = pr.params();
        let (p, beta, lambda) = (params.p(), params.beta, params.lambda);
        let (pieces, grads) = pr.pieces_grad(&v, self.nonnegative);
        let map = FiberMap::from_pieces(pieces, params);
        let diag = map.diagnose();
        if diag.target_branch != Some(self.branch) {
            return None;
        }
        let t = diag.t_star?;
        let e = map.e();
        let b = pieces.b;
        let q = p - beta;
        let sign_f = (params.nehari_factor() * b).signum();
        let g = sign_f * ((p / q) * b.abs().ln() - (beta / q) * e.abs().ln());
        let n = v.len();
        let mut grad_g = Vec::with_capacity(n);
        let mut grad_j = Vec::with_capacity(n);
        let mut grad_s_scaled = Vec::with_capacity(n);
        let (tp, tb) = (t.powf(p - 1.0), t.powf(beta - 1.0));
        for i in 0..n {
            let ge = grads.s[i] - lambda * grads.l[i];
            grad_g.push(sign_f * ((p / q) * grads.b[i] / b - (beta / q) * ge / e));
            grad_j.push(tp * ge / p - tb * grads.b[i] / beta);
            grad_s_scaled.push(tp * grads.s[i] / p);
        }
        if !g.is_finite() || grad_g.iter().any(|x| !x.is_finite()) {
            return None;
        }
        Some(Point { v, pieces, t, g, grad_g, grad_j, grad_s_scaled })
    }

    fn value_at_u(&self, pt: &Point) -> f64 {
        let params = self.problem.params();
        nehari_value(pt.pieces.e(params.lambda), pt.pieces.b, params.p(), params.beta)
    }

    fn prepare(&self, mut v: Vec<f64>) -> Option<Vec<f64>> {
        if self.nonnegative {
            v.iter_mut().for_each(|x| *x = x.max(0.0));
        }
        let p = self.problem.params().p();
        let l = lp_values(self.problem.grid(), &v, p);
        if !(l > 0.0) || !l.is_finite() {
            return None;
        }
        let c = l.powf(-1.0 / p);
        Some(v.into_iter().map(|x| x * c).collect())
    }

    fn start(&self, v: &GridFunction) -> Option<Point> {
        self.evaluate(self.prepare(v.values().to_vec())?)
    }

    fn grad_at(&self, u: &[f64]) -> Vec<f64> {
        let params = self.problem.params();
        self.problem.pieces_grad(u, self.nonnegative).1.j(params)
    }

    /// Newton iteration on `∇J(u) = 0` from the Nehari point of `pt`, with a
    /// finite-difference Hessian of the exact gradient and backtracking on
    /// `‖∇J‖`. The result must stay on the branch and not raise `J`.
    fn newton_polish(&self, pt: &Point, tol: f64) -> (Option<Point>, usize) {
        let p = self.problem.params().p();
        let j_ref = self.value_at_u(pt);
        let mut u: Vec<f64> = pt.v.iter().map(|v| pt.t * v).collect();
        let mut g = self.grad_at(&u);
        let norm = |g: &[f64]| g.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut used = 0;
        for _ in 0..NEWTON_MAX_ITER {
            let current = self.prepare(u.clone()).and_then(|v| self.evaluate(v));
            if let Some(c) = &current {
                if converged(c, p, tol) {
                    let j = self.value_at_u(c);
                    let ok = j <= j_ref + 1e-9 * j_ref.abs();
                    return (ok.then(|| current.unwrap()), used);
                }
            }
            used += 1;
            let hess = self.hessian(&u);
            let Some(d) = solve_dense(hess, g.iter().map(|x| -x).collect()) else { break };
            let g0 = norm(&g);
            let mut alpha = 1.0;
            let mut next = None;
            for _ in 0..30 {
                let trial: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
                let gt = self.grad_at(&trial);
                if norm(&gt) <= (1.0 - 1e-4 * alpha) * g0 {
                    next = Some((trial, gt));
                    break;
                }
                alpha *= 0.5;
            }
            match next {
                Some((nu, ng)) => {
                    u = nu;
                    g = ng;
                }
                None => break,
            }
        }
        (None, used)
    }

    fn hessian(&self, u: &[f64]) -> Vec<f64> {
        let n = u.len();
        let scale = u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let mut hess = vec![0.0; n * n];
        let mut work = u.to_vec();
        for i in 0..n {
            let d = 1e-6 * u[i].abs().max(1e-4 * scale).max(f64::MIN_POSITIVE);
            work[i] = u[i] + d;
            let gp = self.grad_at(&work);
            work[i] = u[i] - d;
            let gm = self.grad_at(&work);
            work[i] = u[i];
            for k in 0..n {
                hess[k * n + i] = (gp[k] - gm[k]) / (2.0 * d);
            }
        }
        for i in 0..n {
            for k in 0..i {
                let m = 0.5 * (hess[i * n + k] + hess[k * n + i]);
                hess[i * n + k] = m;
                hess[k * n + i] = m;
            }
        }
        hess
    }
}

/// Direction over a sign set of `b`: a sine arch on every maximal run of
/// nodes whose two adjacent cells carry the requested sign.
pub fn sign_bump(problem: &Problem, positive: bool) -> Option<GridFunction> {
    let cells = problem.b_cells();
    let n = problem.grid().n_interior();
    let inside: Vec<bool> = (1..=n)
        .map(|i| if positive { cells[i - 1] > 0.0 && cells[i] > 0.0 } else { cells[i - 1] < 0.0 && cells[i] < 0.0 })
        .collect();
    let mut values = vec![0.0; n];
    let mut i = 0;
    while i < n {
        if !inside[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && inside[i] {
            i += 1;
        }
        let len = i - start;
        for k in 0..len {
            values[start + k] = (std::f64::consts::PI * (k + 1) as f64 / (len + 1) as f64).sin();
        }
    }
    let u = GridFunction::new(problem.grid().clone(), values).ok()?;
    (!u.is_zero()).then_some(u)
}

fn normalized(u: &GridFunction, p: f64) -> GridFunction {
    let l = lp_values(u.grid(), u.values(), p);
    u.scaled(l.powf(-1.0 / p))
}

/// Initial directions: the supplied one and its sign variants, `φ₁`, bumps over
/// `{b > 0}` and `{b < 0}`, and mixtures of `φ₁` with the bumps.
fn candidates(problem: &Problem, init: &GridFunction, opts: &NehariOptions) -> Vec<GridFunction> {
    let p = problem.params().p();
    let mut out = vec![init.clone(), init.scaled(-1.0)];
    let bumps: Vec<GridFunction> =
        [true, false].iter().filter_map(|&s| sign_bump(problem, s)).map(|b| normalized(&b, p)).collect();
    out.extend(bumps.iter().cloned());
    if let Some(phi) = &opts.phi1 {
        let phi = normalized(phi, p);
        out.push(phi.clone());
        for b in &bumps {
            for c in [0.25, 1.0, 4.0] {
                let mix: Vec<f64> = phi.values().iter().zip(b.values()).map(|(x, y)| x + c * y).collect();
                out.push(phi.with_values(mix));
            }
        }
    }
    out.retain(|u| !u.is_zero());
    out
}

/// Minimizes `J_λ` (or `J⁺_λ`) on `branch`, starting from `init` when it maps
/// to that branch and otherwise from the best admissible candidate direction.
pub fn minimize_branch(
    problem: &Problem,
    branch: Branch,
    init: &GridFunction,
    opts: &NehariOptions,
) -> Result<BranchSolution> {
    init.check_grid(problem.grid())?;
    let solver = Solver { problem, branch, nonnegative: opts.nonnegative };
    let mut start = solver.start(init);
    if start.is_none() {
        start =
            candidates(problem, init, opts).iter().filter_map(|c| solver.start(c)).min_by(|a, b| a.g.total_cmp(&b.g));
    }
    let Some(mut pt) = start else {
        return Err(Error::BranchEmpty(format!("no direction maps to {branch} at lambda = {}", problem.lambda())));
    };

    let p = problem.params().p();
    let cap = match (problem.params().regime(), branch, opts.growth_cap) {
        (Regime::Sublinear, Branch::NPlus, Some(c)) => Some(c * pt.seminorm_at_u(p)),
        _ => None,
    };
    let mut trace = vec![solver.value_at_u(&pt)];
    let mut step = 1.0;
    let h = problem.grid().h();
    let mut polish_at = NEWTON_SWITCH;
    let mut newton_iters = 0;

    for it in 0..opts.max_iter {
        if converged(&pt, p, opts.tol) {
            return finish(problem, &solver, pt, it + newton_iters, true, trace);
        }
        if pt.rel_residual() <= polish_at {
            polish_at = pt.rel_residual() * 1e-2;
            let (polished, used) = solver.newton_polish(&pt, opts.tol);
            newton_iters += used;
            if let Some(done) = polished {
                trace.push(solver.value_at_u(&done));
                return finish(problem, &solver, done, it + newton_iters, true, trace);
            }
        }
        if let Some(limit) = cap {
            let s = pt.seminorm_at_u(p);
            if s > limit {
                return Err(Error::Unbounded(format!(
                    "seminorm {s:.6e} exceeded {limit:.6e} on {branch} at iteration {it}"
                )));
            }
        }
        let dir: Vec<f64> = pt.grad_g.iter().map(|g| -g / h).collect();
        let mut trial_step = step * 4.0;
        let mut accepted = None;
        while trial_step > 1e-40 {
            let raw: Vec<f64> = pt.v.iter().zip(&dir).map(|(v, d)| v + trial_step * d).collect();
            let mut moved_v = raw.clone();
            if opts.nonnegative {
                moved_v.iter_mut().for_each(|x| *x = x.max(0.0));
            }
            let moved: f64 = moved_v.iter().zip(&pt.v).zip(&pt.grad_g).map(|((a, b), g)| g * (a - b)).sum();
            if let Some(next) = solver.prepare(raw).and_then(|v| solver.evaluate(v)) {
                if next.g <= pt.g + 1e-4 * moved.min(0.0) && next.g <= pt.g {
                    accepted = Some(next);
                    break;
                }
            }
            trial_step *= 0.5;
        }
        match accepted {
            Some(next) => {
                step = trial_step;
                pt = next;
                trace.push(solver.value_at_u(&pt));
            }
            None => break,
        }
    }
    let iterations = trace.len() - 1 + newton_iters;
    if !converged(&pt, p, opts.tol) {
        let (polished, used) = solver.newton_polish(&pt, opts.tol);
        if let Some(done) = polished {
            trace.push(solver.value_at_u(&done));
            return finish(problem, &solver, done, iterations + used, true, trace);
        }
    }
    let ok = converged(&pt, p, opts.tol);
    finish(problem, &solver, pt, iterations, ok, trace)
}

fn converged(pt: &Point, p: f64, tol: f64) -> bool {
    let scale = pt.seminorm_at_u(p).powf((p - 1.0) / p).max(1.0);
    pt.rel_residual() <= tol && pt.weak_residual() <= WEAK_TOL * scale
}

fn finish(
    problem: &Problem,
    solver: &Solver<'_>,
    pt: Point,
    iterations: usize,
    converged: bool,
    trace: Vec<f64>,
) -> Result<BranchSolution> {
    let u = GridFunction::new(problem.grid().clone(), pt.v.iter().map(|v| pt.t * v).collect())?;
    let r = problem.report(&u)?;
    let sol = BranchSolution {
        branch: solver.branch,
        j_value: if solver.nonnegative { problem.j_plus(&u)? } else { r.j_lambda },
        nehari_residual: (r.e_lambda - r.b_term).abs(),
        grad_residual: pt.rel_residual(),
        weak_residual: pt.weak_residual(),
        iterations,
        min_node_value: u.min_value(),
        seminorm_p: r.seminorm_p,
        lp_p: r.lp_p,
        b_term: r.b_term,
        converged,
        trace,
        u,
    };
    if converged {
        Ok(sol)
    } else {
        Err(Error::BranchNotConverged { iterations, best: Box::new(sol) })
    }
}

/// Largest `λ - λ₁` below which two-branch solves and sweeps are refused by default.
pub const PROXIMITY_CAP: f64 = 1e-4;

/// Checks the `λ`-proximity cap: `|λ - λ₁| ≥ 1e-4 λ₁` unless overridden.
pub fn check_proximity(lambda: f64, lambda1: f64, allow_near: bool) -> Result<()> {
    if !allow_near && (lambda - lambda1).abs() < PROXIMITY_CAP * lambda1 {
        return Err(Error::Precondition(format!(
            "lambda = {lambda} lies within {PROXIMITY_CAP} * lambda1 of lambda1 = {lambda1}"
        )));
    }
    Ok(())
}

/// Minimizers on `N⁺` and `N⁻` for `λ > λ₁` with `∫ b φ₁^β < 0`.
pub fn solve_two_branches(
    problem: &Problem,
    phi1: &GridFunction,
    lambda1: f64,
    opts: &NehariOptions,
    allow_near: bool,
) -> Result<(BranchSolution, BranchSolution)> {
    if !(problem.lambda() > lambda1) {
        return Err(Error::Precondition(format!(
            "two-branch mode needs lambda > lambda1 = {lambda1}, got {}",
            problem.lambda()
        )));
    }
    check_proximity(problem.lambda(), lambda1, allow_near)?;
    let cal = problem.calibrate(phi1)?;
    if cal.sign != Sign::Minus {
        return Err(Error::Precondition(format!("two-branch mode needs ∫ b φ₁^β < 0, got {:.6e}", cal.integral)));
    }
    let opts = NehariOptions { phi1: Some(phi1.clone()), ..opts.clone() };
    let plus = minimize_branch(problem, Branch::NPlus, phi1, &opts)?;
    let minus = minimize_branch(problem, Branch::NMinus, phi1, &opts)?;
    Ok((plus, minus))
}

/// One constructed point of a witness sequence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WitnessPoint {
    /// Path parameter of the direction.
    pub epsilon: f64,
    pub t: f64,
    pub e: f64,
    pub b: f64,
    pub j: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    pub branch: Branch,
    pub points: Vec<WitnessPoint>,
}

impl Witness {
    pub fn j_values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.j).collect()
    }

    pub fn strictly_decreasing(&self) -> bool {
        self.points.windows(2).all(|w| w[1].j < w[0].j)
    }
}

/// Alternating `±1` on the nodes inside `{b > 0}`, zero elsewhere.
fn zigzag(problem: &Problem) -> Option<Vec<f64>> {
    let cells = problem.b_cells();
    let n = problem.grid().n_interior();
    let v: Vec<f64> = (1..=n)
        .map(|i| {
            if cells[i - 1] > 0.0 && cells[i] > 0.0 {
                if i % 2 == 0 {
                    1.0
                } else {
                    -1.0
                }
            } else {
                0.0
            }
        })
        .collect();
    (v.iter().filter(|x| **x != 0.0).count() >= 2).then_some(v)
}

fn first_seed<'a>(problem: &Problem, seeds: &'a [GridFunction]) -> Result<&'a GridFunction> {
    for s in seeds {
        if s.is_zero() {
            continue;
        }
        let m = FiberMap::new(problem, s)?;
        if m.e_sign() == Sign::Minus && m.b_sign() == Sign::Plus {
            return Ok(s);
        }
    }
    Err(Error::NoWitness(format!("no supplied direction lies in E⁻ ∩ B⁺ at lambda = {}", problem.lambda())))
}

/// Path `s + ε A z` from a seed in `E⁻ ∩ B⁺` along the zigzag `z`, with the
/// amplitude `A` doubled until `E > 0` at `ε = 1`. Returns the path and the
/// smallest `ε` found with `E > 0`.
fn zigzag_path<'a>(problem: &'a Problem, seed: &GridFunction) -> Result<(impl Fn(f64) -> Pieces + 'a, f64)> {
    let z = zigzag(problem).ok_or_else(|| Error::NoWitness("{b > 0} holds fewer than 2 grid nodes".into()))?;
    let lambda = problem.lambda();
    let base = seed.values().to_vec();
    let mut amp = 1e-3 * seed.max_abs();
    let at = move |amp: f64, eps: f64| -> Vec<f64> { base.iter().zip(&z).map(|(s, z)| s + eps * amp * z).collect() };
    let mut found = false;
    for _ in 0..80 {
        if problem.pieces(&at(amp, 1.0), false).e(lambda) > 0.0 {
            found = true;
            break;
        }
        amp *= 2.0;
    }
    if !found {
        return Err(Error::NoWitness("zigzag perturbation never reached E > 0".into()));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if problem.pieces(&at(amp, mid), false).e(lambda) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let path = move |eps: f64| problem.pieces(&at(amp, eps), false);
    Ok((path, hi))
}

fn witness_point(problem: &Problem, pieces: Pieces, epsilon: f64, branch: Branch) -> Option<WitnessPoint> {
    let params = problem.params();
    let map = FiberMap::from_pieces(pieces, params);
    let d = map.diagnose();
    if d.target_branch != Some(branch) {
        return None;
    }
    Some(WitnessPoint { epsilon, t: d.t_star?, e: map.e(), b: map.b(), j: map.critical_value().ok()? })
}

/// Nehari points along which `J_λ` decreases without bound.
///
/// Sublinear: directions `s + ε A z` approach `E = 0` from `E > 0` with `B > 0`,
/// so their `N⁺` values behave like `-B^{p/(p-β)} E^{-β/(p-β)}`.
/// Superlinear: a bump over `{b < 0}` is added to the seed until `B` crosses
/// zero with `E < 0`; the `N⁺` values behave like `-|E|^{β/(β-p)} |B|^{-p/(β-p)}`.
pub fn unbounded_witness(problem: &Problem, seeds: &[GridFunction], count: usize) -> Result<Witness> {
    let seed = first_seed(problem, seeds)?;
    let mut points = Vec::with_capacity(count);
    match problem.params().regime() {
        Regime::Sublinear => {
            let (path, eps0) = zigzag_path(problem, seed)?;
            for k in 1..=(count + 40) {
                let eps = eps0 + (1.0 - eps0) * 0.25f64.powi(k as i32);
                if eps <= eps0 {
                    break;
                }
                if let Some(pt) = witness_point(problem, path(eps), eps, Branch::NPlus) {
                    points.push(pt);
                }
                if points.len() == count {
                    break;
                }
            }
        }
        Regime::Superlinear => {
            let bump =
                sign_bump(problem, false).ok_or_else(|| Error::NoWitness("{b < 0} holds no grid node".into()))?;
            let lambda = problem.lambda();
            let at = |s: f64| -> Vec<f64> { seed.values().iter().zip(bump.values()).map(|(a, b)| a + s * b).collect() };
            let mut hi = seed.max_abs();
            let mut found = false;
            for _ in 0..60 {
                if problem.pieces(&at(hi), false).b < 0.0 {
                    found = true;
                    break;
                }
                hi *= 2.0;
            }
            if !found {
                return Err(Error::NoWitness("bump over {b < 0} never made B negative".into()));
            }
            let mut lo = 0.0;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if problem.pieces(&at(mid), false).b < 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            if problem.pieces(&at(hi), false).e(lambda) >= 0.0 {
                return Err(Error::NoWitness("E is not negative where B changes sign".into()));
            }
            let span = 0.1 * hi;
            for k in 1..=(count + 40) {
                let s = hi + span * 0.25f64.powi(k as i32);
                if s <= hi {
                    break;
                }
                if let Some(pt) = witness_point(problem, problem.pieces(&at(s), false), s, Branch::NPlus) {
                    points.push(pt);
                }
                if points.len() == count {
                    break;
                }
            }
        }
    }
    if points.len() < count {
        return Err(Error::NoWitness(format!("constructed {} of {count} points", points.len())));
    }
    Ok(Witness { branch: Branch::NPlus, points })
}

/// Superlinear `N⁻` points with `J_λ → 0⁺`, built on the zigzag path where
/// `E → 0⁺` with `B > 0`. Stops once a value falls below `target`, after at
/// least `min_points` points.
pub fn vanishing_infimum_witness(
    problem: &Problem,
    seeds: &[GridFunction],
    target: f64,
    min_points: usize,
) -> Result<Witness> {
    if problem.params().regime() != Regime::Superlinear {
        return Err(Error::Precondition("the vanishing infimum is a superlinear phenomenon".into()));
    }
    let seed = first_seed(problem, seeds)?;
    let (path, eps0) = zigzag_path(problem, seed)?;
    let mut points = Vec::new();
    for k in 1..=80 {
        let eps = eps0 + (1.0 - eps0) * 0.25f64.powi(k);
        if eps <= eps0 {
            break;
        }
        if let Some(pt) = witness_point(problem, path(eps), eps, Branch::NMinus) {
            points.push(pt);
        }
        if points.len() >= min_points && points.last().is_some_and(|p| p.j < target) {
            return Ok(Witness { branch: Branch::NMinus, points });
        }
    }
    Err(Error::NoWitness(format!("no N- value below {target} along the path")))
}

/// Lower envelope of sampled superlinear `N⁻` values against the branch minimum.
#[derive(Clone, Debug, PartialEq)]
pub struct ContrastReport {
    /// `J` at the computed `N⁻` minimizer.
    pub floor: f64,
    /// Smallest sampled `N⁻` value.
    pub min_sampled: f64,
    pub samples: usize,
}

/// Samples `N⁻` values from random directions and zigzag perturbations of
/// `φ₁`, for comparison with the `N⁻` minimum when `λ < λ₁`.
pub fn contrast_floor(
    problem: &Problem,
    phi1: &GridFunction,
    samples: usize,
    seed: u64,
    opts: &NehariOptions,
) -> Result<ContrastReport> {
    use rand::SeedableRng;
    let opts = NehariOptions { phi1: Some(phi1.clone()), ..opts.clone() };
    let sol = minimize_branch(problem, Branch::NMinus, phi1, &opts)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut dirs: Vec<GridFunction> =
        (0..samples).map(|_| crate::fiber::random_direction(problem, &mut rng, 12)).collect();
    if let Some(z) = zigzag(problem) {
        for k in 0..20 {
            let a = 1e-3 * 2f64.powi(k) * phi1.max_abs();
            dirs.push(phi1.with_values(phi1.values().iter().zip(&z).map(|(s, z)| s + a * z).collect()));
        }
    }
    let mut min_sampled = f64::INFINITY;
    let mut count = 0;
    for d in dirs.iter().filter(|d| !d.is_zero()) {
        let pieces = problem.pieces(d.values(), false);
        if let Some(pt) = witness_point(problem, pieces, 0.0, Branch::NMinus) {
            min_sampled = min_sampled.min(pt.j);
            count += 1;
        }
    }
    Ok(ContrastReport { floor: sol.j_value, min_sampled, samples: count })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::{principal_eigenpair, EigenOptions, EigenResult};
    use crate::energy::{BWeight, ProblemParams};
    use crate::grid::Grid;
    use crate::kernel::{KernelSpec, WeightTable};
    use std::sync::Arc;

    fn setup(beta: f64, b: BWeight, n: usize) -> (Problem, EigenResult) {
        let kernel = KernelSpec::model(2.0, 0.25).unwrap();
        let table = Arc::new(WeightTable::assemble(Grid::new(n).unwrap(), kernel));
        let eig = principal_eigenpair(&table, &EigenOptions::default()).unwrap();
        let pr = Problem::new(ProblemParams::new(kernel, beta, eig.lambda1).unwrap(), b, table).unwrap();
        (pr, eig)
    }

    fn opts(eig: &EigenResult) -> NehariOptions {
        NehariOptions { phi1: Some(eig.phi1.clone()), ..NehariOptions::default() }
    }

    fn check_solution(pr: &Problem, sol: &BranchSolution) {
        let params = pr.params();
        assert!(sol.converged);
        assert!(sol.nehari_residual <= 1e-8 * sol.seminorm_p);
        let expect = params.nehari_factor() * sol.b_term;
        assert!((sol.j_value - expect).abs() <= 1e-8 * expect.abs());
        assert!(sol.min_node_value >= -1e-10);
        let g = pr.grad_j(&sol.u).unwrap();
        let scale = sol.seminorm_p.powf((params.p() - 1.0) / params.p()).max(1.0);
        assert!(g.max_abs() <= 1e-6 * scale, "{}", g.max_abs());
        let dot: f64 = g.values().iter().zip(sol.u.values()).map(|(a, b)| a * b).sum();
        assert!(dot.abs() <= 1e-8 * sol.seminorm_p);
    }

    #[test]
    fn sublinear_below_lambda1() {
        let (pr, eig) = setup(1.5, BWeight::PosCore { c: 0.2 }, 24);
        let pr = pr.with_lambda(0.7 * eig.lambda1).unwrap();
        let sol = minimize_branch(&pr, Branch::NPlus, &eig.phi1, &opts(&eig)).unwrap();
        check_solution(&pr, &sol);
        assert!(sol.j_value < 0.0);
        assert!(sol.trace.windows(2).all(|w| w[1] <= w[0] + 1e-12 * w[0].abs()));
        match minimize_branch(&pr, Branch::NMinus, &eig.phi1, &opts(&eig)) {
            Err(Error::BranchEmpty(_)) => {}
            other => panic!("expected an empty branch, got {other:?}"),
        }
    }

    #[test]
    fn superlinear_below_lambda1() {
        let (pr, eig) = setup(3.0, BWeight::PosCore { c: 0.2 }, 24);
        let pr = pr.with_lambda(0.7 * eig.lambda1).unwrap();
        let sol = minimize_branch(&pr, Branch::NMinus, &eig.phi1, &opts(&eig)).unwrap();
        check_solution(&pr, &sol);
        assert!(sol.j_value > 0.0);
    }

    #[test]
    fn two_branches_above_lambda1() {
        for beta in [1.5, 3.0] {
            let (pr, eig) = setup(beta, BWeight::NegCore { c: 0.3 }, 24);
            let pr = pr.with_lambda(1.01 * eig.lambda1).unwrap();
            let (plus, minus) = solve_two_branches(&pr, &eig.phi1, eig.lambda1, &opts(&eig), false).unwrap();
            check_solution(&pr, &plus);
            check_solution(&pr, &minus);
            assert!(plus.j_value < 0.0 && minus.j_value > 0.0, "beta={beta}");
            let below = pr.with_lambda(0.9 * eig.lambda1).unwrap();
            assert!(matches!(
                solve_two_branches(&below, &eig.phi1, eig.lambda1, &opts(&eig), false),
                Err(Error::Precondition(_))
            ));
        }
    }

    #[test]
    fn witnesses() {
        let (pr, eig) = setup(1.5, BWeight::PosCore { c: 0.2 }, 32);
        let above = pr.with_lambda(1.1 * eig.lambda1).unwrap();
        let w = unbounded_witness(&above, std::slice::from_ref(&eig.phi1), 5).unwrap();
        assert!(w.strictly_decreasing(), "{:?}", w.j_values());
        let below = pr.with_lambda(0.9 * eig.lambda1).unwrap();
        assert!(matches!(unbounded_witness(&below, std::slice::from_ref(&eig.phi1), 5), Err(Error::NoWitness(_))));

        let (pr, eig) = setup(3.0, BWeight::PosCore { c: 0.2 }, 32);
        let above = pr.with_lambda(1.05 * eig.lambda1).unwrap();
        let w = vanishing_infimum_witness(&above, std::slice::from_ref(&eig.phi1), 1e-2, 5).unwrap();
        assert!(w.points.last().unwrap().j < 1e-2);
        assert!(w.points.iter().all(|p| p.j > 0.0));
    }
}
