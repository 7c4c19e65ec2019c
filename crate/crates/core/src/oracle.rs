//! Brute-force validators that share no numerical code path with the solvers:
//! adaptive Gauss-Kronrod integration of the energy, dense eigenvalues for
//! `p = 2` by inertia bisection, finite-difference gradients and scans of
//! fibering maps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::eigen::{principal_eigenpair, EigenOptions};
use crate::energy::{BWeight, Problem, ProblemParams};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fiber::{random_direction, Branch, FiberMap};
use crate::grid::{interpolate, Grid, GridFunction};
use crate::kernel::{assemble_weights, KernelSpec, WeightTable};

/// Outcome of one check.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleReport {
    pub name: String,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub samples: usize,
    pub passed: bool,
}

impl OracleReport {
    pub fn new(name: impl Into<String>, max_rel_error: f64, tolerance: f64, samples: usize) -> Self {
        OracleReport { name: name.into(), max_rel_error, tolerance, samples, passed: max_rel_error <= tolerance }
    }

    fn failed(name: impl Into<String>, tolerance: f64) -> Self {
        OracleReport { name: name.into(), max_rel_error: f64::INFINITY, tolerance, samples: 0, passed: false }
    }
}

// Gauss-Kronrod 7-15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let x = r * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * r, g * r)
}

/// Maximum bisection depth of [`adaptive_integrate`].
pub const MAX_DEPTH: usize = 30;

/// Cap on the number of subintervals of [`adaptive_integrate`].
const MAX_INTERVALS: usize = 20_000;

struct Piece {
    lo: f64,
    hi: f64,
    depth: usize,
    value: f64,
    abs_value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Piece {}

impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Piece {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss-Kronrod integration: the subinterval with the largest
/// Kronrod-Gauss difference is bisected until the summed difference falls below
/// `rel_tol` times the integral, or below the rounding floor of the sum.
pub fn adaptive_integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let piece = |lo: f64, hi: f64, depth: usize| {
        let (k, g) = gk15(f, lo, hi);
        let k_abs = gk15(&|x| f(x).abs(), lo, hi).0;
        Piece { lo, hi, depth, value: k, abs_value: k_abs, error: (k - g).abs() }
    };
    let first = piece(a, b, 0);
    let (mut total, mut abs_total, mut error) = (first.value, first.abs_value, first.error);
    let mut heap = std::collections::BinaryHeap::from(vec![first]);
    loop {
        if !total.is_finite() || !error.is_finite() {
            return Err(Error::Oracle("non-finite integrand value".into()));
        }
        if error <= rel_tol * total.abs() || error <= 50.0 * f64::EPSILON * abs_total || error == 0.0 {
            // Re-sum to shed the drift of the running totals.
            return Ok(heap.iter().map(|p| p.value).sum());
        }
        if heap.len() >= MAX_INTERVALS {
            return Err(Error::Oracle(format!("adaptive quadrature exceeded {MAX_INTERVALS} subintervals")));
        }
        let p = heap.pop().expect("nonempty");
        if p.depth >= MAX_DEPTH {
            return Err(Error::Oracle(format!("adaptive quadrature exceeded depth {MAX_DEPTH} near {}", p.lo)));
        }
        let mid = 0.5 * (p.lo + p.hi);
        let (l, r) = (piece(p.lo, mid, p.depth + 1), piece(mid, p.hi, p.depth + 1));
        total += l.value + r.value - p.value;
        abs_total += l.abs_value + r.abs_value - p.abs_value;
        error += l.error + r.error - p.error;
        heap.push(l);
        heap.push(r);
    }
}

/// `∫_0^len f(d) dd` (oriented to be positive for positive `f`) with
/// `d = len w^m`, which clusters nodes at `d = 0` and smooths algebraic
/// singularities there. `f` receives the signed offset from the anchor, so
/// singular factors can use it without cancellation.
pub fn integrate_anchored(f: &dyn Fn(f64) -> f64, len: f64, m: f64, rel_tol: f64) -> Result<f64> {
    let g = |w: f64| {
        if w <= 0.0 {
            return 0.0;
        }
        f(len * w.powf(m)) * len.abs() * m * w.powf(m - 1.0)
    };
    adaptive_integrate(&g, 0.0, 1.0, rel_tol)
}

/// `∫_lo^hi f` with nodes clustered at both endpoints.
pub fn integrate_graded(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, m: f64, rel_tol: f64) -> Result<f64> {
    let half = 0.5 * (hi - lo);
    Ok(integrate_anchored(&|d| f(lo + d), half, m, rel_tol)? + integrate_anchored(&|d| f(hi + d), -half, m, rel_tol)?)
}

/// Grading exponent of the substitutions.
const GRADING: f64 = 4.0;

fn kernel_value(kernel: &KernelSpec, z: f64) -> f64 {
    kernel.theta * z.abs().powf(-1.0 - kernel.p * kernel.alpha)
}

/// `∬_{cell_a × cell_b} |u(x) - u(y)|^p K(x - y) dx dy` by iterated adaptive
/// quadrature, the inner integral split at `y = x`.
pub fn adaptive_pair_quadrature(u: &GridFunction, kernel: &KernelSpec, a: usize, b: usize) -> Result<f64> {
    let grid = u.grid();
    let h = grid.h();
    let (xa, xb) = (grid.cell_left(a), grid.cell_left(b));
    let p = kernel.p;
    let full = u.padded();
    // Within one cell the difference is the slope times the offset, which
    // avoids cancellation as y approaches x.
    let slope = (full[a + 1] - full[a]) / h;
    let err = std::cell::Cell::new(None);
    let outer = |x: f64| -> f64 {
        let ux = u.eval(x);
        // Offsets d from an anchor point y0, so x - y = x - y0 - d.
        let inner_at = |y0: f64| {
            move |d: f64| {
                let z = (x - y0) - d;
                if z == 0.0 {
                    return 0.0;
                }
                let diff = if a == b { slope * z } else { ux - u.eval(y0 + d) };
                diff.abs().powf(p) * kernel_value(kernel, z)
            }
        };
        let r = if x > xb && x < xb + h {
            integrate_anchored(&inner_at(x), xb - x, GRADING, 1e-12)
                .and_then(|l| Ok(l + integrate_anchored(&inner_at(x), xb + h - x, GRADING, 1e-12)?))
        } else if x <= xb {
            integrate_anchored(&inner_at(xb), h, GRADING, 1e-12)
        } else {
            integrate_anchored(&inner_at(xb + h), -h, GRADING, 1e-12)
        };
        r.unwrap_or_else(|e| {
            err.set(Some(e.to_string()));
            0.0
        })
    };
    let v = integrate_graded(&outer, xa, xa + h, 2.0, 1e-11)?;
    if let Some(e) = err.take() {
        return Err(Error::Oracle(e));
    }
    Ok(v)
}

/// `2 ∫_Ω |u|^p w dx` with `w` from its closed form, cell by cell.
pub fn adaptive_exterior(u: &GridFunction, kernel: &KernelSpec) -> Result<f64> {
    let grid = u.grid();
    let pa = kernel.p * kernel.alpha;
    let f = |x: f64| {
        let w = kernel.theta * ((1.0 + x).powf(-pa) + (1.0 - x).powf(-pa)) / pa;
        2.0 * u.eval(x).abs().powf(kernel.p) * w
    };
    let mut total = 0.0;
    for c in 0..grid.n_cells() {
        let l = grid.cell_left(c);
        total += integrate_graded(&f, l, l + grid.h(), GRADING, 1e-12)?;
    }
    Ok(total)
}

/// `‖u‖^p` from the adaptive pair integrals and the exterior term.
pub fn adaptive_seminorm(u: &GridFunction, kernel: &KernelSpec) -> Result<f64> {
    let cells = u.grid().n_cells();
    let mut total = adaptive_exterior(u, kernel)?;
    for a in 0..cells {
        total += adaptive_pair_quadrature(u, kernel, a, a)?;
        for b in (a + 1)..cells {
            total += 2.0 * adaptive_pair_quadrature(u, kernel, a, b)?;
        }
    }
    Ok(total)
}

/// `∬_{[0,1]²} |s - t|^{p-1-pα} ds dt` by adaptive quadrature.
pub fn adaptive_same_cell_constant(kernel: &KernelSpec) -> Result<f64> {
    let g = kernel.p - 1.0 - kernel.p * kernel.alpha;
    let failed = std::cell::Cell::new(false);
    let outer = |s: f64| {
        let inner = |d: f64| d.abs().powf(g);
        let r = integrate_anchored(&inner, -s, GRADING, 1e-13)
            .and_then(|l| Ok(l + integrate_anchored(&inner, 1.0 - s, GRADING, 1e-13)?));
        r.unwrap_or_else(|_| {
            failed.set(true);
            0.0
        })
    };
    let v = integrate_graded(&outer, 0.0, 1.0, 2.0, 1e-12)?;
    if failed.get() {
        return Err(Error::Oracle("inner quadrature failed".into()));
    }
    Ok(v)
}

/// Dense stiffness and mass matrices (row-major) for `p = 2` on at most 6 nodes.
///
/// The stiffness comes from polarization of the pairwise energy, the mass is
/// the exact `P1` mass `h/6 · tridiag(1, 4, 1)`.
pub fn dense_forms_p2(table: &WeightTable) -> Result<(Vec<f64>, Vec<f64>)> {
    if table.kernel().p != 2.0 {
        return Err(Error::Oracle("dense eigen oracle needs p = 2".into()));
    }
    let grid = table.grid();
    let n = grid.n_interior();
    if n > 6 {
        return Err(Error::Oracle(format!("dense eigen oracle takes at most 6 nodes, got {n}")));
    }
    let q = |v: &[f64]| -> f64 {
        let mut e = table.exterior_energy(v);
        for a in 0..grid.n_cells() {
            for b in 0..grid.n_cells() {
                e += table.pair_energy(v, a, b);
            }
        }
        e
    };
    let unit = |i: usize, j: usize, sign: f64| -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[i] += 1.0;
        v[j] += sign;
        v
    };
    let mut s = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            s[i * n + j] =
                if i == j { q(&unit(i, i, 0.0)) } else { 0.25 * (q(&unit(i, j, 1.0)) - q(&unit(i, j, -1.0))) };
        }
    }
    let h = grid.h();
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 4.0 * h / 6.0;
        if i + 1 < n {
            m[i * n + i + 1] = h / 6.0;
            m[(i + 1) * n + i] = h / 6.0;
        }
    }
    Ok((s, m))
}

/// Number of negative pivots of `A` in an `LDLᵀ` factorization, which equals the
/// number of negative eigenvalues for symmetric `A`.
pub fn negative_inertia(a: &[f64], n: usize) -> usize {
    let mut l = vec![0.0; n * n];
    let mut d = vec![0.0; n];
    let mut count = 0;
    for j in 0..n {
        let mut dj = a[j * n + j];
        for k in 0..j {
            dj -= l[j * n + k] * l[j * n + k] * d[k];
        }
        if dj == 0.0 {
            dj = -f64::EPSILON * a[j * n + j].abs().max(f64::MIN_POSITIVE);
        }
        d[j] = dj;
        if dj < 0.0 {
            count += 1;
        }
        for i in (j + 1)..n {
            let mut v = a[i * n + j];
            for k in 0..j {
                v -= l[i * n + k] * l[j * n + k] * d[k];
            }
            l[i * n + j] = v / dj;
        }
    }
    count
}

/// Smallest generalized eigenvalue of `(S, M)` for `p = 2`, by bisection on the
/// inertia of `S - μ M` (the sign pattern of the characteristic polynomial's
/// leading minors).
pub fn dense_eigen_p2(table: &WeightTable) -> Result<f64> {
    let (s, m) = dense_forms_p2(table)?;
    let n = table.grid().n_interior();
    let shifted = |mu: f64| -> Vec<f64> { s.iter().zip(&m).map(|(a, b)| a - mu * b).collect() };
    let mut hi = 1.0;
    while negative_inertia(&shifted(hi), n) == 0 {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::Oracle("no eigenvalue bracket".into()));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if negative_inertia(&shifted(mid), n) == 0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Which functional a finite-difference check exercises.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Functional {
    J,
    JPlus,
    Seminorm,
}

impl Functional {
    pub fn name(&self) -> &'static str {
        match self {
            Functional::J => "J",
            Functional::JPlus => "J+",
            Functional::Seminorm => "seminorm",
        }
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if (1e-8..=1e-4).contains(&eps) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("finite-difference step must lie in [1e-8, 1e-4], got {eps}")))
    }
}

/// Compares `⟨grad, v⟩` against `(f(u + εv) - f(u - εv)) / 2ε` for each `v`.
///
/// The error of one direction is relative to `max(|⟨grad, v⟩|, 1e-8 ‖grad‖ ‖v‖)`.
pub fn fd_check_with(
    name: &str,
    f: &dyn Fn(&[f64]) -> f64,
    grad: &[f64],
    u: &[f64],
    directions: &[Vec<f64>],
    eps: f64,
    tolerance: f64,
) -> Result<OracleReport> {
    check_eps(eps)?;
    let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    let mut worst = 0.0f64;
    for v in directions {
        let plus: Vec<f64> = u.iter().zip(v).map(|(a, b)| a + eps * b).collect();
        let minus: Vec<f64> = u.iter().zip(v).map(|(a, b)| a - eps * b).collect();
        let fd = (f(&plus) - f(&minus)) / (2.0 * eps);
        let an: f64 = grad.iter().zip(v).map(|(a, b)| a * b).sum();
        let vnorm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let scale = an.abs().max(1e-8 * gnorm * vnorm).max(f64::MIN_POSITIVE);
        worst = worst.max((fd - an).abs() / scale);
    }
    Ok(OracleReport::new(name, worst, tolerance, directions.len()))
}

/// Finite-difference check of the analytic gradient of `functional` at `u`.
pub fn fd_gradient_check(
    problem: &Problem,
    functional: Functional,
    u: &GridFunction,
    directions: &[GridFunction],
    eps: f64,
    tolerance: f64,
) -> Result<OracleReport> {
    u.check_grid(problem.grid())?;
    let params = *problem.params();
    let positive = functional == Functional::JPlus;
    let f = |v: &[f64]| match functional {
        Functional::Seminorm => problem.table().seminorm_values(v),
        _ => problem.pieces(v, positive).j(&params),
    };
    let (_, grads) = problem.pieces_grad(u.values(), positive);
    let grad = match functional {
        Functional::Seminorm => grads.s.clone(),
        _ => grads.j(&params),
    };
    let dirs: Vec<Vec<f64>> = directions.iter().map(|d| d.values().to_vec()).collect();
    fd_check_with(functional.name(), &f, &grad, u.values(), &dirs, eps, tolerance)
}

/// Result of a geometric scan of a fibering map.
#[derive(Clone, Debug, PartialEq)]
pub struct TScan {
    /// Minimizer on `N⁺`, maximizer on `N⁻`, refined by golden-section search.
    pub t_opt: f64,
    pub value_opt: f64,
    pub ts: Vec<f64>,
    pub values: Vec<f64>,
}

/// Scans `φ(t)` on `points` geometric nodes of `[1e-3, 1e3] · center` and
/// refines the extremum selected by `branch`.
pub fn t_scan(map: &FiberMap, branch: Branch, center: f64, points: usize) -> TScan {
    let sign = match branch {
        Branch::NPlus => 1.0,
        Branch::NMinus => -1.0,
    };
    let (lo, hi) = ((1e-3 * center).ln(), (1e3 * center).ln());
    let ts: Vec<f64> = (0..points).map(|i| (lo + (hi - lo) * i as f64 / (points - 1) as f64).exp()).collect();
    let values: Vec<f64> = ts.iter().map(|&t| map.value(t)).collect();
    let best = (0..points).min_by(|&a, &b| (sign * values[a]).total_cmp(&(sign * values[b]))).unwrap_or(0);
    let (mut a, mut b) = (ts[best.saturating_sub(1)].ln(), ts[(best + 1).min(points - 1)].ln());
    let f = |s: f64| sign * map.value(s.exp());
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut c, mut d) = (b - r * (b - a), a + r * (b - a));
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-15 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let t_opt = (0.5 * (a + b)).exp();
    TScan { t_opt, value_opt: map.value(t_opt), ts, values }
}

/// Settings of the full suite.
#[derive(Clone, Copy, Debug)]
pub struct SuiteOptions {
    pub seed: u64,
    pub execution: Execution,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions { seed: 20240611, execution: Execution::Parallel }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn guard(name: &str, tol: f64, r: Result<OracleReport>) -> OracleReport {
    r.unwrap_or_else(|_| OracleReport::failed(name, tol))
}

/// Same-cell constant against adaptive quadrature, relative tolerance `1e-8`.
pub fn check_same_cell() -> Result<OracleReport> {
    let mut worst = 0.0f64;
    let kernels = [(2.0, 0.25), (3.0, 0.2), (2.0, 0.45)];
    for (p, alpha) in kernels {
        let k = KernelSpec::model(p, alpha)?;
        worst = worst.max(rel(k.same_cell_constant(), adaptive_same_cell_constant(&k)?));
    }
    Ok(OracleReport::new("same_cell_constant", worst, 1e-8, kernels.len()))
}

/// Table seminorm against the adaptive seminorm on 7 nodes, tolerance `1e-6`.
pub fn check_seminorm() -> Result<OracleReport> {
    let grid = Grid::new(7)?;
    let mut hat = vec![0.0; 7];
    hat[3] = 1.0;
    let hat = GridFunction::new(grid.clone(), hat)?;
    let wavy = interpolate(&grid, |x| (1.0 - x * x) * (1.0 + 0.8 * x) + 0.3 * (5.0 * x).sin())?;
    let mut worst = 0.0f64;
    let mut samples = 0;
    for (p, alpha) in [(2.0, 0.25), (3.0, 0.2)] {
        let k = KernelSpec::model(p, alpha)?;
        let table = assemble_weights(&grid, k);
        for u in [&hat, &wavy] {
            worst = worst.max(rel(table.seminorm_p(u)?, adaptive_seminorm(u, &k)?));
            samples += 1;
        }
    }
    Ok(OracleReport::new("seminorm_vs_adaptive", worst, 1e-6, samples))
}

/// Distant pairs against the midpoint estimate, tolerance `1e-2`.
pub fn check_distant_pair() -> Result<OracleReport> {
    let grid = Grid::new(63)?;
    let k = KernelSpec::model(2.0, 0.25)?;
    let table = assemble_weights(&grid, k);
    let u = interpolate(&grid, |x| (1.0 - x * x) * (0.5 + x))?;
    let full = grid.padded(u.values());
    let h = grid.h();
    let mut worst = 0.0f64;
    let pairs = [(2, 40), (5, 55), (10, 60)];
    for (a, b) in pairs {
        let mid = |c: usize| 0.5 * (full[c] + full[c + 1]);
        let dz = grid.cell_midpoint(a) - grid.cell_midpoint(b);
        let estimate = h * h * kernel_value(&k, dz) * (mid(a) - mid(b)).powi(2);
        worst = worst.max(rel(estimate, table.pair_energy(u.values(), a, b)));
    }
    Ok(OracleReport::new("distant_pair_midpoint", worst, 1e-2, pairs.len()))
}

/// Descent `λ₁` against [`dense_eigen_p2`] for `N = 3..6`, tolerance `1e-8`.
pub fn check_dense_eigen() -> Result<OracleReport> {
    let mut worst = 0.0f64;
    let mut samples = 0;
    for alpha in [0.2, 0.25, 0.4] {
        for n in 3..=6 {
            let table = assemble_weights(&Grid::new(n)?, KernelSpec::model(2.0, alpha)?);
            let dense = dense_eigen_p2(&table)?;
            let descent = principal_eigenpair(&table, &EigenOptions::default())?;
            worst = worst.max(rel(descent.lambda1, dense));
            samples += 1;
        }
    }
    Ok(OracleReport::new("dense_eigen_p2", worst, 1e-8, samples))
}

fn random_function(grid: &std::sync::Arc<Grid>, rng: &mut ChaCha8Rng) -> GridFunction {
    let v = (0..grid.n_interior()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    GridFunction::new(grid.clone(), v).expect("finite values")
}

/// Finite-difference checks of `J` and `J⁺` at 20 random functions on 16 nodes.
pub fn check_gradients(seed: u64, params: &[(f64, f64, f64)]) -> Result<Vec<OracleReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = Grid::new(16)?;
    let mut out = Vec::new();
    for &(p, alpha, beta) in params {
        let k = KernelSpec::model(p, alpha)?;
        let table = std::sync::Arc::new(assemble_weights(&grid, k));
        let pr = Problem::new(ProblemParams::new(k, beta, 2.0)?, BWeight::Cosine { c0: 0.2, c1: 1.0 }, table)?;
        for f in [Functional::J, Functional::JPlus] {
            let mut worst = 0.0f64;
            let mut samples = 0;
            for _ in 0..20 {
                let u = random_function(&grid, &mut rng);
                let dirs: Vec<GridFunction> = (0..3).map(|_| random_function(&grid, &mut rng)).collect();
                let r = fd_gradient_check(&pr, f, &u, &dirs, 1e-6, 1e-5)?;
                worst = worst.max(r.max_rel_error);
                samples += r.samples;
            }
            out.push(OracleReport::new(format!("fd_{}_p{p}_a{alpha}_b{beta}", f.name()), worst, 1e-5, samples));
        }
    }
    Ok(out)
}

/// For `p = 2` and `b ≡ 0`, `J` is quadratic and central differences are exact
/// up to rounding.
pub fn check_quadratic(seed: u64) -> Result<OracleReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = Grid::new(16)?;
    let k = KernelSpec::model(2.0, 0.25)?;
    let table = std::sync::Arc::new(assemble_weights(&grid, k));
    let pr = Problem::new(ProblemParams::new(k, 1.5, 3.0)?, BWeight::Constant { c: 0.0 }, table)?;
    let u = random_function(&grid, &mut rng);
    let dirs: Vec<GridFunction> = (0..20).map(|_| random_function(&grid, &mut rng)).collect();
    let mut r = fd_gradient_check(&pr, Functional::J, &u, &dirs, 1e-4, 1e-9)?;
    r.name = "fd_quadratic".into();
    Ok(r)
}

/// `t*` against the scan optimum on `count` random admissible directions, and
/// `φ'(t*) = 0`.
pub fn check_t_star(seed: u64, beta: f64, count: usize) -> Result<Vec<OracleReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = Grid::new(24)?;
    let k = KernelSpec::model(2.0, 0.25)?;
    let table = std::sync::Arc::new(assemble_weights(&grid, k));
    let base = Problem::new(ProblemParams::new(k, beta, 1.0)?, BWeight::Cosine { c0: 0.1, c1: 1.0 }, table)?;
    let mut worst_t = 0.0f64;
    let mut worst_d1 = 0.0f64;
    let mut found = 0;
    let mut tries = 0;
    while found < count && tries < 100 * count {
        tries += 1;
        let u = random_direction(&base, &mut rng, 10);
        if u.is_zero() {
            continue;
        }
        let pc = base.pieces(u.values(), false);
        let r = pc.s / pc.l;
        // Case 3 when B > 0 (λ below the quotient), case 4 when B < 0 (above it).
        let lambda = if pc.b > 0.0 { r * rng.gen_range(0.2..0.9) } else { r * rng.gen_range(1.1..3.0) };
        let pr = base.with_lambda(lambda)?;
        let map = FiberMap::from_pieces(pc, pr.params());
        let d = map.diagnose();
        let (Some(t), Some(branch)) = (d.t_star, d.target_branch) else { continue };
        let scan = t_scan(&map, branch, t, 4001);
        worst_t = worst_t.max(rel(scan.t_opt, t));
        let scale = (t.powf(map.p - 1.0) * map.e()).abs();
        worst_d1 = worst_d1.max(map.d1(t).abs() / scale);
        found += 1;
    }
    let tag = if beta < 2.0 { "sublinear" } else { "superlinear" };
    Ok(vec![
        OracleReport::new(format!("t_scan_{tag}"), worst_t, 1e-3, found),
        OracleReport::new(format!("fiber_d1_at_t_star_{tag}"), worst_d1, 1e-10, found),
    ])
}

/// Runs every check. Checks are independent and run concurrently.
pub fn run_suite(opts: &SuiteOptions) -> Vec<OracleReport> {
    let seed = opts.seed;
    let jobs: Vec<Box<dyn Fn() -> Vec<OracleReport> + Send + Sync>> = vec![
        Box::new(|| vec![guard("same_cell_constant", 1e-8, check_same_cell())]),
        Box::new(|| vec![guard("seminorm_vs_adaptive", 1e-6, check_seminorm())]),
        Box::new(|| vec![guard("distant_pair_midpoint", 1e-2, check_distant_pair())]),
        Box::new(|| vec![guard("dense_eigen_p2", 1e-8, check_dense_eigen())]),
        Box::new(move || {
            check_gradients(seed, &[(2.0, 0.25, 1.5), (2.0, 0.25, 3.0), (3.0, 0.2, 2.0)])
                .unwrap_or_else(|_| vec![OracleReport::failed("fd_gradients", 1e-5)])
        }),
        Box::new(move || vec![guard("fd_quadratic", 1e-9, check_quadratic(seed))]),
        Box::new(move || {
            check_t_star(seed, 1.5, 50).unwrap_or_else(|_| vec![OracleReport::failed("t_scan_sublinear", 1e-3)])
        }),
        Box::new(move || {
            check_t_star(seed + 1, 3.0, 50).unwrap_or_else(|_| vec![OracleReport::failed("t_scan_superlinear", 1e-3)])
        }),
    ];
    opts.execution.map(jobs.len(), |i| jobs[i]()).into_iter().flatten().collect()
}
