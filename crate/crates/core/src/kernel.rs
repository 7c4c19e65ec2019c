//! The model kernel `K(z) = θ |z|^{-(1+pα)}`, interaction rules for the
//! Gagliardo energy of piecewise-linear functions, and the exterior weight.
//!
//! For `u` vanishing outside Ω the energy over `Q = ℝ² ∖ (CΩ × CΩ)` splits as
//!
//! ```text
//! ‖u‖^p = ∬_{Ω×Ω} |u(x) - u(y)|^p K(x - y) dx dy + 2 ∫_Ω |u(x)|^p w(x) dx,
//! w(x)  = ∫_{ℝ∖Ω} K(x - y) dy = θ [(1 + x)^{-pα} + (1 - x)^{-pα}] / (pα).
//! ```
//!
//! The Ω×Ω part is a sum over ordered cell pairs. With local coordinates
//! `x = x_a + h s`, `y = x_b + h t` a pair integral depends on the cells only
//! through the offset `d = b - a`, so one rule per offset is stored:
//!
//! * `d = 0`: closed form, the integrand is `|Δu/h|^p |x - y|^{p-1-pα}`;
//! * `d = 1`: tensor Gauss on dyadic squares graded toward the shared node;
//! * `d ≥ 2`: tensor Gauss of order 6.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::grid::{Grid, GridFunction};
use crate::quadrature::{abs_pow, abs_pow_deriv, cached_rule};

/// Model kernel parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelSpec {
    pub p: f64,
    pub alpha: f64,
    pub theta: f64,
}

impl KernelSpec {
    pub fn new(p: f64, alpha: f64, theta: f64) -> Result<Self> {
        if !(p >= 2.0) || !p.is_finite() {
            return Err(Error::InvalidParameter(format!("p must satisfy p >= 2, got {p}")));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        if !(p * alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("p * alpha must be < 1 on an interval, got {}", p * alpha)));
        }
        if !(theta > 0.0) || !theta.is_finite() {
            return Err(Error::InvalidParameter(format!("theta must be positive, got {theta}")));
        }
        Ok(KernelSpec { p, alpha, theta })
    }

    /// Kernel with `θ = 1`.
    pub fn model(p: f64, alpha: f64) -> Result<Self> {
        Self::new(p, alpha, 1.0)
    }

    pub fn p_alpha(&self) -> f64 {
        self.p * self.alpha
    }

    /// `K(z)` for `z ≠ 0`.
    pub fn eval(&self, z: f64) -> f64 {
        self.theta * z.abs().powf(-1.0 - self.p_alpha())
    }

    /// Exponent of `|x - y|` in the same-cell integrand, `p - 1 - pα > -1`.
    pub fn same_cell_exponent(&self) -> f64 {
        self.p - 1.0 - self.p_alpha()
    }

    /// `C(p, α) = ∬_{[0,1]²} |s - t|^{p-1-pα} ds dt = 2 / ((γ + 1)(γ + 2))`.
    pub fn same_cell_constant(&self) -> f64 {
        let g = self.same_cell_exponent();
        2.0 / ((g + 1.0) * (g + 2.0))
    }
}

/// `w(x) = θ [(1 + x)^{-pα} + (1 - x)^{-pα}] / (pα)` for `|x| < 1`.
pub fn exterior_weight(x: f64, kernel: &KernelSpec) -> Result<f64> {
    if !(x.abs() < 1.0) {
        return Err(Error::OutsideDomain(x));
    }
    Ok(exterior_weight_unchecked(x, kernel))
}

fn exterior_weight_unchecked(x: f64, kernel: &KernelSpec) -> f64 {
    let pa = kernel.p_alpha();
    kernel.theta * ((1.0 + x).powf(-pa) + (1.0 - x).powf(-pa)) / pa
}

/// One node of a cell-pair rule: local coordinates in the two cells and the
/// weight, kernel and Jacobian included.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairPoint {
    pub s: f64,
    pub t: f64,
    pub w: f64,
}

const SEPARATED_ORDER: usize = 6;
const TOUCHING_ORDER: usize = 6;
/// Dyadic levels toward the shared node of touching cells.
pub const TOUCHING_LEVELS: usize = 12;
const EXTERIOR_ORDER: usize = 8;
const BOUNDARY_ORDER: usize = 16;

/// Precomputed rules for the discrete energy on one grid.
#[derive(Clone, Debug)]
pub struct WeightTable {
    grid: Arc<Grid>,
    kernel: KernelSpec,
    execution: Execution,
    /// `θ h^{1-pα} C(p, α)`: same-cell energy per unit `|Δu|^p`.
    same_cell: f64,
    /// Rules for offsets `d = 1..=N`, stored at `d - 1`.
    pair_rules: Vec<Vec<PairPoint>>,
    /// Gauss nodes on `[0, 1]` used for the exterior term on interior cells.
    exterior_s: Vec<f64>,
    /// `w(x)` at every exterior node of cells `1..N`, row-major by cell.
    exterior_w: Vec<f64>,
    /// `2 h ω_k w(x)` matching `exterior_w`.
    exterior_factor: Vec<f64>,
    /// Exterior energy of a boundary cell per unit `|u|^p` at its inner node.
    boundary_coeff: f64,
    /// Dense `N × N` matrix with `‖u‖² = uᵀ S u`, present when `p = 2`.
    stiffness: Option<Vec<f64>>,
}

/// Assembles the interaction rules for `kernel` on `grid`.
pub fn assemble_weights(grid: &Arc<Grid>, kernel: KernelSpec) -> WeightTable {
    WeightTable::assemble(grid.clone(), kernel)
}

impl WeightTable {
    pub fn assemble(grid: Arc<Grid>, kernel: KernelSpec) -> Self {
        let h = grid.h();
        let pa = kernel.p_alpha();
        let scale = kernel.theta * h.powf(1.0 - pa);
        let same_cell = scale * kernel.same_cell_constant();

        let n = grid.n_interior();
        let mut pair_rules = Vec::with_capacity(n);
        pair_rules.push(touching_rule(scale, pa));
        for d in 2..=n {
            pair_rules.push(separated_rule(scale, pa, d as f64));
        }

        let rule = cached_rule(EXTERIOR_ORDER);
        let exterior_s = rule.nodes.clone();
        let mut exterior_w = Vec::with_capacity((n - 1) * EXTERIOR_ORDER);
        let mut exterior_factor = Vec::with_capacity((n - 1) * EXTERIOR_ORDER);
        for c in 1..n {
            let left = grid.cell_left(c);
            for (&s, &w) in rule.nodes.iter().zip(&rule.weights) {
                let wx = exterior_weight_unchecked(left + h * s, &kernel);
                exterior_w.push(wx);
                exterior_factor.push(2.0 * h * w * wx);
            }
        }

        let boundary_coeff = boundary_coefficient(&kernel, h);

        let mut table = WeightTable {
            grid,
            kernel,
            execution: Execution::default().available(),
            same_cell,
            pair_rules,
            exterior_s,
            exterior_w,
            exterior_factor,
            boundary_coeff,
            stiffness: None,
        };
        if kernel.p == 2.0 {
            table.stiffness = Some(table.assemble_stiffness());
        }
        table
    }

    /// Selects parallel or sequential evaluation. Results are identical.
    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution.available();
        self
    }

    pub fn execution(&self) -> Execution {
        self.execution
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    /// Rule for cell offset `d ≥ 1`. Negative offsets use the same rule with
    /// `s` and `t` exchanged.
    pub fn pair_rule(&self, d: usize) -> &[PairPoint] {
        &self.pair_rules[d - 1]
    }

    /// Same-cell energy per unit `|Δu|^p`.
    pub fn same_cell_weight(&self) -> f64 {
        self.same_cell
    }

    /// Absolute coordinates of the exterior quadrature nodes (cells `1..N`).
    pub fn exterior_nodes(&self) -> Vec<f64> {
        let h = self.grid.h();
        (1..self.grid.n_interior())
            .flat_map(|c| {
                let left = self.grid.cell_left(c);
                self.exterior_s.iter().map(move |&s| left + h * s)
            })
            .collect()
    }

    /// `w(x)` at [`Self::exterior_nodes`].
    pub fn exterior_w(&self) -> &[f64] {
        &self.exterior_w
    }

    pub fn boundary_coeff(&self) -> f64 {
        self.boundary_coeff
    }

    /// Dense stiffness matrix (row-major, `N × N`) when `p = 2`.
    pub fn stiffness(&self) -> Option<&[f64]> {
        self.stiffness.as_deref()
    }

    fn check_len(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.grid.n_interior() {
            return Err(Error::GridMismatch { expected: self.grid.n_interior(), found: values.len() });
        }
        Ok(())
    }

    /// `‖u‖^p` for a grid function on this table's grid.
    pub fn seminorm_p(&self, u: &GridFunction) -> Result<f64> {
        u.check_grid(&self.grid)?;
        Ok(self.seminorm_values(u.values()))
    }

    /// `‖u‖^p` from interior nodal values.
    pub fn seminorm_values(&self, values: &[f64]) -> f64 {
        self.check_len(values).expect("nodal vector length");
        if let Some(s) = &self.stiffness {
            let rows = self.execution.map(values.len(), |i| {
                let row = &s[i * values.len()..(i + 1) * values.len()];
                values[i] * dot(row, values)
            });
            return rows.iter().sum();
        }
        let full = self.grid.padded(values);
        let rows = self.execution.map(self.grid.n_cells(), |a| self.row_energy(&full, a));
        rows.iter().sum::<f64>() + self.exterior(&full, None)
    }

    /// `‖u‖^p` and its gradient with respect to the interior nodal values.
    pub fn seminorm_grad_values(&self, values: &[f64]) -> (f64, Vec<f64>) {
        self.check_len(values).expect("nodal vector length");
        let n = values.len();
        if let Some(s) = &self.stiffness {
            let su = self.execution.map(n, |i| dot(&s[i * n..(i + 1) * n], values));
            let energy = values.iter().zip(&su).map(|(u, v)| u * v).sum();
            return (energy, su.into_iter().map(|v| 2.0 * v).collect());
        }
        let full = self.grid.padded(values);
        let rows = self.execution.map(self.grid.n_cells(), |a| self.row_gradient(&full, a));
        let mut grad = vec![0.0; n + 2];
        let mut energy = 0.0;
        for (a, (e, gl, gr)) in rows.into_iter().enumerate() {
            energy += e;
            grad[a] += gl;
            grad[a + 1] += gr;
        }
        energy += self.exterior(&full, Some(&mut grad));
        grad.pop();
        grad.remove(0);
        (energy, grad)
    }

    /// The Ω×Ω part of `‖u‖^p`, without the exterior term.
    pub fn omega_part(&self, values: &[f64]) -> f64 {
        self.check_len(values).expect("nodal vector length");
        let full = self.grid.padded(values);
        let rows = self.execution.map(self.grid.n_cells(), |a| self.row_energy(&full, a));
        rows.iter().sum()
    }

    /// `∬_{cell_a × cell_b} |u(x) - u(y)|^p K(x - y) dx dy` (cells `0..=N`).
    pub fn pair_energy(&self, values: &[f64], a: usize, b: usize) -> f64 {
        let full = self.grid.padded(values);
        if a == b {
            return self.same_cell * abs_pow(full[a + 1] - full[a], self.kernel.p);
        }
        self.pair(&full, a, b, None)
    }

    /// `2 ∫_Ω |u|^p w dx`.
    pub fn exterior_energy(&self, values: &[f64]) -> f64 {
        self.exterior(&self.grid.padded(values), None)
    }

    /// `I_aa + 2 Σ_{b>a} I_ab`.
    fn row_energy(&self, full: &[f64], a: usize) -> f64 {
        let mut e = self.same_cell * abs_pow(full[a + 1] - full[a], self.kernel.p);
        let mut off = 0.0;
        for b in (a + 1)..self.grid.n_cells() {
            off += self.pair(full, a, b, None);
        }
        e += 2.0 * off;
        e
    }

    /// Row energy and the derivative of the full Ω×Ω energy with respect to
    /// the two nodes of cell `a`.
    fn row_gradient(&self, full: &[f64], a: usize) -> (f64, f64, f64) {
        let p = self.kernel.p;
        let diff = full[a + 1] - full[a];
        let mut e = self.same_cell * abs_pow(diff, p);
        let ds = self.same_cell * abs_pow_deriv(diff, p);
        let mut g = [0.0, 0.0];
        let mut off = 0.0;
        for b in 0..self.grid.n_cells() {
            if b == a {
                continue;
            }
            let v = self.pair(full, a, b, Some(&mut g));
            if b > a {
                off += v;
            }
        }
        e += 2.0 * off;
        (e, -ds + 2.0 * g[0], ds + 2.0 * g[1])
    }

    /// `I_ab` for `a ≠ b`; accumulates the derivative with respect to the
    /// nodes of cell `a` into `grad` when requested.
    fn pair(&self, full: &[f64], a: usize, b: usize, grad: Option<&mut [f64; 2]>) -> f64 {
        let p = self.kernel.p;
        let (xa0, xa1, yb0, yb1) = (full[a], full[a + 1], full[b], full[b + 1]);
        let swap = b < a;
        let rule = self.pair_rule(a.abs_diff(b));
        let mut e = 0.0;
        match grad {
            None => {
                for pt in rule {
                    let (s, t) = if swap { (pt.t, pt.s) } else { (pt.s, pt.t) };
                    let diff = xa0 + (xa1 - xa0) * s - yb0 - (yb1 - yb0) * t;
                    e += pt.w * abs_pow(diff, p);
                }
            }
            Some(g) => {
                let (mut gl, mut gr) = (0.0, 0.0);
                for pt in rule {
                    let (s, t) = if swap { (pt.t, pt.s) } else { (pt.s, pt.t) };
                    let diff = xa0 + (xa1 - xa0) * s - yb0 - (yb1 - yb0) * t;
                    e += pt.w * abs_pow(diff, p);
                    let d = pt.w * abs_pow_deriv(diff, p);
                    gl += d * (1.0 - s);
                    gr += d * s;
                }
                g[0] += gl;
                g[1] += gr;
            }
        }
        e
    }

    /// Exterior term over all cells, with optional gradient accumulation into
    /// a padded gradient vector.
    fn exterior(&self, full: &[f64], mut grad: Option<&mut Vec<f64>>) -> f64 {
        let p = self.kernel.p;
        let n = self.grid.n_interior();
        let k = self.exterior_s.len();
        let mut e = 0.0;
        for c in 1..n {
            let (u0, u1) = (full[c], full[c + 1]);
            let factors = &self.exterior_factor[(c - 1) * k..c * k];
            let (mut gl, mut gr) = (0.0, 0.0);
            for (&s, &f) in self.exterior_s.iter().zip(factors) {
                let u = u0 + (u1 - u0) * s;
                e += f * abs_pow(u, p);
                if grad.is_some() {
                    let d = f * abs_pow_deriv(u, p);
                    gl += d * (1.0 - s);
                    gr += d * s;
                }
            }
            if let Some(g) = grad.as_deref_mut() {
                g[c] += gl;
                g[c + 1] += gr;
            }
        }
        for node in [1, n] {
            e += self.boundary_coeff * abs_pow(full[node], p);
            if let Some(g) = grad.as_deref_mut() {
                g[node] += self.boundary_coeff * abs_pow_deriv(full[node], p);
            }
        }
        e
    }

    fn assemble_stiffness(&self) -> Vec<f64> {
        let n = self.grid.n_interior();
        let m = n + 2;
        let mut full = vec![0.0; m * m];
        let add = |full: &mut Vec<f64>, i: usize, j: usize, v: f64| full[i * m + j] += v;

        for a in 0..self.grid.n_cells() {
            let c = self.same_cell;
            add(&mut full, a, a, c);
            add(&mut full, a + 1, a + 1, c);
            add(&mut full, a, a + 1, -c);
            add(&mut full, a + 1, a, -c);
        }
        for d in 1..self.grid.n_cells() {
            let local = local_matrix(self.pair_rule(d));
            for a in 0..(self.grid.n_cells() - d) {
                let idx = [a, a + 1, a + d, a + d + 1];
                for (r, &i) in idx.iter().enumerate() {
                    for (s, &j) in idx.iter().enumerate() {
                        add(&mut full, i, j, 2.0 * local[r][s]);
                    }
                }
            }
        }
        let k = self.exterior_s.len();
        for c in 1..n {
            let factors = &self.exterior_factor[(c - 1) * k..c * k];
            for (&s, &f) in self.exterior_s.iter().zip(factors) {
                let phi = [1.0 - s, s];
                let idx = [c, c + 1];
                for r in 0..2 {
                    for q in 0..2 {
                        add(&mut full, idx[r], idx[q], f * phi[r] * phi[q]);
                    }
                }
            }
        }
        add(&mut full, 1, 1, self.boundary_coeff);
        add(&mut full, n, n, self.boundary_coeff);

        let mut s = Vec::with_capacity(n * n);
        for i in 1..=n {
            s.extend_from_slice(&full[i * m + 1..i * m + 1 + n]);
        }
        // Symmetrize against rounding in the accumulation order.
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (s[i * n + j] + s[j * n + i]);
                s[i * n + j] = v;
                s[j * n + i] = v;
            }
        }
        s
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `Σ W c cᵀ` with `c = (1 - s, s, -(1 - t), -t)`: the quadratic form of one
/// off-diagonal pair in the nodes `(a, a + 1, b, b + 1)`.
fn local_matrix(rule: &[PairPoint]) -> [[f64; 4]; 4] {
    let mut m = [[0.0; 4]; 4];
    for pt in rule {
        let c = [1.0 - pt.s, pt.s, -(1.0 - pt.t), -pt.t];
        for r in 0..4 {
            for q in 0..4 {
                m[r][q] += pt.w * c[r] * c[q];
            }
        }
    }
    m
}

fn separated_rule(scale: f64, pa: f64, d: f64) -> Vec<PairPoint> {
    let g = cached_rule(SEPARATED_ORDER);
    let mut pts = Vec::with_capacity(SEPARATED_ORDER * SEPARATED_ORDER);
    for (&s, &ws) in g.nodes.iter().zip(&g.weights) {
        for (&t, &wt) in g.nodes.iter().zip(&g.weights) {
            let w = scale * ws * wt * (d + t - s).powf(-1.0 - pa);
            pts.push(PairPoint { s, t, w });
        }
    }
    pts
}

/// Adjacent cells meet where `s = 1`, `t = 0`. In `σ = 1 - s` the distance is
/// `h (σ + t)`, and the unit square is covered by three squares per dyadic
/// level plus the innermost corner square.
fn touching_rule(scale: f64, pa: f64) -> Vec<PairPoint> {
    let g = cached_rule(TOUCHING_ORDER);
    let mut squares = Vec::with_capacity(3 * TOUCHING_LEVELS + 1);
    let mut side = 0.5;
    for _ in 0..TOUCHING_LEVELS {
        squares.push((side, 0.0, side));
        squares.push((0.0, side, side));
        squares.push((side, side, side));
        side *= 0.5;
    }
    squares.push((0.0, 0.0, 2.0 * side));

    let mut pts = Vec::with_capacity(squares.len() * TOUCHING_ORDER * TOUCHING_ORDER);
    for (s0, t0, len) in squares {
        for (&a, &wa) in g.nodes.iter().zip(&g.weights) {
            let sigma = s0 + len * a;
            for (&b, &wb) in g.nodes.iter().zip(&g.weights) {
                let t = t0 + len * b;
                let w = scale * len * len * wa * wb * (sigma + t).powf(-1.0 - pa);
                pts.push(PairPoint { s: 1.0 - sigma, t, w });
            }
        }
    }
    pts
}

/// `2 ∫_0^h (d/h)^p w(-1 + d) dd`: the exterior energy of the cell next to an
/// endpoint per unit `|u|^p` at its inner node. The `d^{-pα}` part is exact.
fn boundary_coefficient(kernel: &KernelSpec, h: f64) -> f64 {
    let p = kernel.p;
    let pa = kernel.p_alpha();
    let near = h.powf(p + 1.0 - pa) / (p + 1.0 - pa);
    let g = cached_rule(BOUNDARY_ORDER);
    let far: f64 = g
        .nodes
        .iter()
        .zip(&g.weights)
        .map(|(&s, &w)| {
            let d = h * s;
            h * w * d.powf(p) * (2.0 - d).powf(-pa)
        })
        .sum();
    2.0 * kernel.theta / pa * h.powf(-p) * (near + far)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::interpolate;

    fn k(p: f64, alpha: f64) -> KernelSpec {
        KernelSpec::model(p, alpha).unwrap()
    }

    #[test]
    fn kernel_validation() {
        assert!(KernelSpec::new(2.0, 0.25, 1.0).is_ok());
        assert!(KernelSpec::new(1.5, 0.25, 1.0).is_err());
        assert!(KernelSpec::new(2.0, 0.6, 1.0).is_err());
        assert!(KernelSpec::new(2.0, 0.0, 1.0).is_err());
        assert!(KernelSpec::new(2.0, 0.25, 0.0).is_err());
        assert!(KernelSpec::new(3.0, 0.4, 1.0).is_err());
    }

    #[test]
    fn exterior_weight_examples() {
        let kern = k(2.0, 0.25);
        assert!((exterior_weight(0.0, &kern).unwrap() - 4.0).abs() < 1e-15);
        let two = KernelSpec::new(2.0, 0.25, 2.0).unwrap();
        for x in [-0.9, -0.3, 0.0, 0.5, 0.99] {
            let a = exterior_weight(x, &kern).unwrap();
            assert!((exterior_weight(x, &two).unwrap() - 2.0 * a).abs() < 1e-14 * a);
        }
        let near = exterior_weight(1.0 - 1e-8, &kern).unwrap();
        assert!(near > 1e3);
        assert!(exterior_weight(1.0, &kern).is_err());
        assert!(exterior_weight(-1.2, &kern).is_err());
    }

    #[test]
    fn same_cell_constant_p2() {
        assert!((k(2.0, 0.25).same_cell_constant() - 8.0 / 15.0).abs() < 1e-15);
    }

    #[test]
    fn touching_rule_reproduces_a_known_integral() {
        // For u(x) - u(y) = x - y the touching pair integral is
        // h^{1-pα+p} ∬ (σ + t)^{p-1-pα} dσ dt, known in closed form.
        let p = 2.0;
        let pa = 0.5;
        let rule = touching_rule(1.0, pa);
        let got: f64 = rule.iter().map(|pt| pt.w * (pt.s - pt.t - 1.0).abs().powf(p)).sum();
        let g = p - 1.0 - pa;
        let exact = (2f64.powf(g + 2.0) - 2.0) / ((g + 1.0) * (g + 2.0));
        assert!(((got - exact) / exact).abs() < 1e-10, "{got} vs {exact}");
    }

    #[test]
    fn theta_scales_energy() {
        let g = Grid::new(9).unwrap();
        let u = interpolate(&g, |x| (1.0 - x * x) * (1.0 + 0.3 * x)).unwrap();
        for p in [2.0, 3.0] {
            let one = WeightTable::assemble(g.clone(), KernelSpec::new(p, 0.2, 1.0).unwrap());
            let two = WeightTable::assemble(g.clone(), KernelSpec::new(p, 0.2, 2.0).unwrap());
            let a = one.seminorm_p(&u).unwrap();
            let b = two.seminorm_p(&u).unwrap();
            assert!((b - 2.0 * a).abs() < 1e-13 * a);
            for (x, y) in one.exterior_w().iter().zip(two.exterior_w()) {
                assert!((y - 2.0 * x).abs() <= 1e-14 * x);
            }
        }
    }

    #[test]
    fn pair_energy_is_symmetric() {
        let g = Grid::new(8).unwrap();
        let u = interpolate(&g, |x| (3.0 * x).sin() + 0.2).unwrap();
        for p in [2.0, 2.5] {
            let w = WeightTable::assemble(g.clone(), k(p, 0.3));
            for a in 0..g.n_cells() {
                for b in 0..g.n_cells() {
                    let (x, y) = (w.pair_energy(u.values(), a, b), w.pair_energy(u.values(), b, a));
                    assert!((x - y).abs() <= 1e-14 * x.abs().max(1e-300), "{x} {y}");
                }
            }
        }
    }

    #[test]
    fn distant_pair_matches_midpoint_estimate() {
        let g = Grid::new(63).unwrap();
        let kern = k(2.0, 0.25);
        let w = WeightTable::assemble(g.clone(), kern);
        let u = interpolate(&g, |x| (1.0 - x * x) * (0.5 + x)).unwrap();
        let (a, b) = (5, 55);
        let full = g.padded(u.values());
        let h = g.h();
        let mid = |c: usize| 0.5 * (full[c] + full[c + 1]);
        let estimate = h * h * kern.eval(g.cell_midpoint(a) - g.cell_midpoint(b)) * (mid(a) - mid(b)).powi(2);
        let got = w.pair_energy(u.values(), a, b);
        assert!(((got - estimate) / got).abs() < 0.01, "{got} vs {estimate}");
    }

    #[test]
    fn generic_path_matches_stiffness_path() {
        let g = Grid::new(12).unwrap();
        let u = interpolate(&g, |x| (2.0 * x).cos() + 0.4 * x).unwrap();
        let w = WeightTable::assemble(g.clone(), k(2.0, 0.25));
        let fast = w.seminorm_values(u.values());
        let full = g.padded(u.values());
        let rows: f64 = (0..g.n_cells()).map(|a| w.row_energy(&full, a)).sum();
        let slow = rows + w.exterior(&full, None);
        assert!(((fast - slow) / slow).abs() < 1e-13);
        let s = w.stiffness().unwrap();
        let n = g.n_interior();
        for i in 0..n {
            for j in 0..n {
                assert_eq!(s[i * n + j], s[j * n + i]);
            }
        }
    }

    #[test]
    fn parallel_and_sequential_agree_bitwise() {
        let g = Grid::new(20).unwrap();
        let u = interpolate(&g, |x| (1.0 - x * x) * (x + 0.3)).unwrap();
        for p in [2.0, 3.0] {
            let par = WeightTable::assemble(g.clone(), k(p, 0.2)).with_execution(Execution::Parallel);
            let seq = par.clone().with_execution(Execution::Sequential);
            assert_eq!(par.seminorm_values(u.values()), seq.seminorm_values(u.values()));
            assert_eq!(par.seminorm_grad_values(u.values()), seq.seminorm_grad_values(u.values()));
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let g = Grid::new(10).unwrap();
        let u = interpolate(&g, |x| (1.0 - x * x) * (1.0 + x) - 0.3).unwrap();
        for p in [2.0, 3.0, 2.5] {
            let w = WeightTable::assemble(g.clone(), k(p, 0.2));
            let (_, grad) = w.seminorm_grad_values(u.values());
            let eps = 1e-6;
            for i in 0..g.n_interior() {
                let mut plus = u.values().to_vec();
                let mut minus = u.values().to_vec();
                plus[i] += eps;
                minus[i] -= eps;
                let fd = (w.seminorm_values(&plus) - w.seminorm_values(&minus)) / (2.0 * eps);
                assert!((fd - grad[i]).abs() < 1e-6 * grad[i].abs().max(1.0), "p={p} i={i}");
            }
        }
    }

    #[test]
    fn refinement_is_consistent() {
        let kern = k(2.0, 0.25);
        let energy = |n: usize| {
            let g = Grid::new(n).unwrap();
            let u = interpolate(&g, |x| (std::f64::consts::FRAC_PI_2 * x).cos()).unwrap();
            WeightTable::assemble(g, kern).seminorm_p(&u).unwrap()
        };
        let (a, b) = (energy(128), energy(256));
        assert!(((a - b) / b).abs() < 0.02, "{a} vs {b}");
    }

    #[test]
    fn omega_part_is_below_full_energy() {
        let g = Grid::new(16).unwrap();
        let u = interpolate(&g, |x| x.sin() + 0.5).unwrap();
        let w = WeightTable::assemble(g, k(3.0, 0.2));
        assert!(w.omega_part(u.values()) <= w.seminorm_values(u.values()));
    }
}
