//! The functionals of the problem on the discrete space:
//!
//! ```text
//! S(u) = ‖u‖^p,  L(u) = ∫|u|^p,  B(u) = ∫ b |u|^β,
//! E_λ(u) = S - λ L,  J_λ(u) = S/p - λ L/p - B/β.
//! ```
//!
//! `J⁺_λ` replaces `u` by `u⁺ = max(u, 0)` in `L` and `B` and keeps `S`.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::kernel::{KernelSpec, WeightTable};
use crate::quadrature::{pos_pow_mean, pow_mean, LinearIntegral};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Regime {
    /// `1 < β < p`
    Sublinear,
    /// `p < β < p*`
    Superlinear,
}

/// Exponents, spectral parameter and the derived regime.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProblemParams {
    pub kernel: KernelSpec,
    pub beta: f64,
    pub lambda: f64,
    regime: Regime,
}

impl ProblemParams {
    pub fn new(kernel: KernelSpec, beta: f64, lambda: f64) -> Result<Self> {
        let p = kernel.p;
        let p_star = critical_exponent(&kernel);
        if !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("lambda must be finite, got {lambda}")));
        }
        let regime = if beta > 1.0 && beta < p {
            Regime::Sublinear
        } else if beta > p && beta < p_star {
            Regime::Superlinear
        } else {
            return Err(Error::InvalidParameter(format!(
                "beta = {beta} must satisfy 1 < beta < p = {p} or p < beta < p* = {p_star}"
            )));
        };
        Ok(ProblemParams { kernel, beta, lambda, regime })
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn p(&self) -> f64 {
        self.kernel.p
    }

    pub fn p_star(&self) -> f64 {
        critical_exponent(&self.kernel)
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        ProblemParams::new(self.kernel, self.beta, lambda)
    }

    /// `1/p - 1/β`: negative in the sublinear regime, positive otherwise.
    pub fn nehari_factor(&self) -> f64 {
        1.0 / self.p() - 1.0 / self.beta
    }
}

/// `p* = p / (1 - pα)`.
pub fn critical_exponent(kernel: &KernelSpec) -> f64 {
    kernel.p / (1.0 - kernel.p_alpha())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
    Zero,
}

impl Sign {
    /// Sign of `value` with everything in `[-band, band]` counted as zero.
    pub fn with_band(value: f64, band: f64) -> Sign {
        if value > band {
            Sign::Plus
        } else if value < -band {
            Sign::Minus
        } else {
            Sign::Zero
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
            Sign::Zero => "0",
        }
    }
}

/// A constant piece of a weight given by segments.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub from: f64,
    pub to: f64,
    pub value: f64,
}

/// The weight `b`. It enters only through integrals and is used as a
/// constant per cell.
#[derive(Clone, Debug, PartialEq)]
pub enum BWeight {
    /// `1` on `|x| ≤ 1/2`, `-c` elsewhere.
    PosCore {
        c: f64,
    },
    /// `-1` on `|x| ≤ 1/2`, `c` elsewhere.
    NegCore {
        c: f64,
    },
    /// `c0 + c1 cos(πx)`.
    Cosine {
        c0: f64,
        c1: f64,
    },
    Constant {
        c: f64,
    },
    /// Piecewise-constant, covering `[-1, 1]` left to right.
    Segments(Vec<Segment>),
}

impl BWeight {
    /// Builds a preset from its name and parameter list.
    pub fn preset(name: &str, params: &[f64]) -> Result<BWeight> {
        let want = |n: usize| {
            if params.len() == n && params.iter().all(|v| v.is_finite()) {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("preset {name} takes {n} finite parameter(s), got {params:?}")))
            }
        };
        match name {
            "pos-core" => want(1).map(|_| BWeight::PosCore { c: params[0] }),
            "neg-core" => want(1).map(|_| BWeight::NegCore { c: params[0] }),
            "cosine" => want(2).map(|_| BWeight::Cosine { c0: params[0], c1: params[1] }),
            "constant" => want(1).map(|_| BWeight::Constant { c: params[0] }),
            _ => Err(Error::InvalidParameter(format!("unknown weight preset {name:?}"))),
        }
    }

    pub fn segments(segments: Vec<Segment>) -> Result<BWeight> {
        let bad = |msg: &str| Err(Error::InvalidParameter(format!("weight segments {msg}")));
        if segments.is_empty() {
            return bad("are empty");
        }
        if segments[0].from != -1.0 || segments[segments.len() - 1].to != 1.0 {
            return bad("must start at -1 and end at 1");
        }
        for w in segments.windows(2) {
            if w[0].to != w[1].from {
                return bad("must be contiguous");
            }
        }
        if segments.iter().any(|s| !(s.to > s.from) || !s.value.is_finite()) {
            return bad("need increasing endpoints and finite values");
        }
        Ok(BWeight::Segments(segments))
    }

    /// Pointwise value.
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            BWeight::PosCore { c } => {
                if x.abs() <= 0.5 {
                    1.0
                } else {
                    -c
                }
            }
            BWeight::NegCore { c } => {
                if x.abs() <= 0.5 {
                    -1.0
                } else {
                    *c
                }
            }
            BWeight::Cosine { c0, c1 } => c0 + c1 * (PI * x).cos(),
            BWeight::Constant { c } => *c,
            BWeight::Segments(segs) => segs.iter().find(|s| x < s.to).unwrap_or(&segs[segs.len() - 1]).value,
        }
    }

    /// Value used on each of the `N + 1` cells: the exact cell average for
    /// the cosine preset and the value at the midpoint otherwise.
    pub fn cell_values(&self, grid: &Grid) -> Vec<f64> {
        let h = grid.h();
        (0..grid.n_cells())
            .map(|c| match self {
                BWeight::Cosine { c0, c1 } => {
                    let (l, r) = (grid.cell_left(c), grid.cell_left(c) + h);
                    c0 + c1 * ((PI * r).sin() - (PI * l).sin()) / (PI * h)
                }
                _ => self.eval(grid.cell_midpoint(c)),
            })
            .collect()
    }

    /// Whether `b` takes both signs on a uniform sample of 2001 points.
    pub fn is_sign_changing(&self) -> bool {
        let xs = (0..2001).map(|i| -1.0 + 2.0 * i as f64 / 2000.0);
        let vals: Vec<f64> = xs.map(|x| self.eval(x)).collect();
        vals.iter().any(|&v| v > 0.0) && vals.iter().any(|&v| v < 0.0)
    }

    /// `(inf b, sup b)` over the cell values of `grid`.
    pub fn bounds(&self, grid: &Grid) -> (f64, f64) {
        self.cell_values(grid)
            .into_iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    }

    pub fn describe(&self) -> String {
        match self {
            BWeight::PosCore { c } => format!("pos-core({c})"),
            BWeight::NegCore { c } => format!("neg-core({c})"),
            BWeight::Cosine { c0, c1 } => format!("cosine({c0},{c1})"),
            BWeight::Constant { c } => format!("constant({c})"),
            BWeight::Segments(s) => format!("segments({})", s.len()),
        }
    }
}

/// `∫ b φ₁^β` and its sign.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Calibration {
    pub integral: f64,
    pub sign: Sign,
}

/// The scalar pieces of the functional at one point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Pieces {
    /// `‖u‖^p`
    pub s: f64,
    /// `∫ |u|^p`, or `∫ (u⁺)^p`
    pub l: f64,
    /// `∫ b |u|^β`, or `∫ b (u⁺)^β`
    pub b: f64,
    /// `∫ |b| |u|^β`, the scale for the sign of `b`
    pub b_abs: f64,
}

impl Pieces {
    pub fn e(&self, lambda: f64) -> f64 {
        self.s - lambda * self.l
    }

    pub fn j(&self, params: &ProblemParams) -> f64 {
        let p = params.p();
        self.s / p - params.lambda * self.l / p - self.b / params.beta
    }
}

/// Gradients of the pieces with respect to the interior nodal values.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecesGrad {
    pub s: Vec<f64>,
    pub l: Vec<f64>,
    pub b: Vec<f64>,
}

impl PiecesGrad {
    /// `∇J = ∇S/p - λ∇L/p - ∇B/β`.
    pub fn j(&self, params: &ProblemParams) -> Vec<f64> {
        let p = params.p();
        let (lam, beta) = (params.lambda, params.beta);
        (0..self.s.len()).map(|i| self.s[i] / p - lam * self.l[i] / p - self.b[i] / beta).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyReport {
    pub seminorm_p: f64,
    pub lp_p: f64,
    pub b_term: f64,
    pub e_lambda: f64,
    pub j_lambda: f64,
}

/// A fully specified discrete problem: parameters, weight and interaction table.
#[derive(Clone, Debug)]
pub struct Problem {
    params: ProblemParams,
    b: BWeight,
    b_cells: Vec<f64>,
    table: Arc<WeightTable>,
}

impl Problem {
    pub fn new(params: ProblemParams, b: BWeight, table: Arc<WeightTable>) -> Result<Problem> {
        if *table.kernel() != params.kernel {
            return Err(Error::InvalidParameter("weight table was assembled for a different kernel".into()));
        }
        let b_cells = b.cell_values(table.grid());
        Ok(Problem { params, b, b_cells, table })
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Problem> {
        Ok(Problem { params: self.params.with_lambda(lambda)?, ..self.clone() })
    }

    pub fn params(&self) -> &ProblemParams {
        &self.params
    }

    pub fn b(&self) -> &BWeight {
        &self.b
    }

    /// Constant value of `b` on each cell.
    pub fn b_cells(&self) -> &[f64] {
        &self.b_cells
    }

    pub fn table(&self) -> &Arc<WeightTable> {
        &self.table
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.table.grid()
    }

    pub fn lambda(&self) -> f64 {
        self.params.lambda
    }

    fn check(&self, u: &GridFunction) -> Result<()> {
        u.check_grid(self.grid())
    }

    /// Per-cell integrals `h ∫_0^1 g(ℓ)` of the `L` and `B` integrands.
    fn cell_terms(&self, full: &[f64], c: usize, positive: bool) -> (LinearIntegral, LinearIntegral) {
        let f = if positive { pos_pow_mean } else { pow_mean };
        let h = self.grid().h();
        let (a, b) = (full[c], full[c + 1]);
        (f(a, b, self.params.p()).scaled(h), f(a, b, self.params.beta).scaled(h))
    }

    /// `S`, `L`, `B` from nodal values; `positive` selects the truncated terms.
    pub fn pieces(&self, values: &[f64], positive: bool) -> Pieces {
        let full = self.grid().padded(values);
        let mut out = Pieces { s: self.table.seminorm_values(values), ..Pieces::default() };
        for (c, &bc) in self.b_cells.iter().enumerate() {
            let (l, bt) = self.cell_terms(&full, c, positive);
            out.l += l.value;
            out.b += bc * bt.value;
            out.b_abs += bc.abs() * bt.value;
        }
        out
    }

    /// Pieces and their gradients.
    pub fn pieces_grad(&self, values: &[f64], positive: bool) -> (Pieces, PiecesGrad) {
        let full = self.grid().padded(values);
        let (s, gs) = self.table.seminorm_grad_values(values);
        let n = values.len();
        let mut gl = vec![0.0; n + 2];
        let mut gb = vec![0.0; n + 2];
        let mut out = Pieces { s, ..Pieces::default() };
        for (c, &bc) in self.b_cells.iter().enumerate() {
            let (l, bt) = self.cell_terms(&full, c, positive);
            out.l += l.value;
            out.b += bc * bt.value;
            out.b_abs += bc.abs() * bt.value;
            gl[c] += l.d_left;
            gl[c + 1] += l.d_right;
            gb[c] += bc * bt.d_left;
            gb[c + 1] += bc * bt.d_right;
        }
        let trim = |v: Vec<f64>| v[1..=n].to_vec();
        (out, PiecesGrad { s: gs, l: trim(gl), b: trim(gb) })
    }

    pub fn seminorm_p(&self, u: &GridFunction) -> Result<f64> {
        self.table.seminorm_p(u)
    }

    pub fn report(&self, u: &GridFunction) -> Result<EnergyReport> {
        self.check(u)?;
        Ok(self.report_pieces(&self.pieces(u.values(), false)))
    }

    pub fn report_pieces(&self, pc: &Pieces) -> EnergyReport {
        EnergyReport {
            seminorm_p: pc.s,
            lp_p: pc.l,
            b_term: pc.b,
            e_lambda: pc.e(self.params.lambda),
            j_lambda: pc.j(&self.params),
        }
    }

    pub fn j(&self, u: &GridFunction) -> Result<f64> {
        self.check(u)?;
        Ok(self.pieces(u.values(), false).j(&self.params))
    }

    /// Nodal gradient `g_i = ⟨J_λ'(u), e_i⟩`.
    pub fn grad_j(&self, u: &GridFunction) -> Result<GridFunction> {
        self.check(u)?;
        let (_, g) = self.pieces_grad(u.values(), false);
        Ok(u.with_values(g.j(&self.params)))
    }

    pub fn j_plus(&self, u: &GridFunction) -> Result<f64> {
        self.check(u)?;
        Ok(self.pieces(u.values(), true).j(&self.params))
    }

    pub fn grad_j_plus(&self, u: &GridFunction) -> Result<GridFunction> {
        self.check(u)?;
        let (_, g) = self.pieces_grad(u.values(), true);
        Ok(u.with_values(g.j(&self.params)))
    }

    /// `∫ b |u|^β` for an arbitrary exponent `q` in place of `β`.
    pub fn b_integral(&self, u: &GridFunction, q: f64) -> Result<(f64, f64)> {
        self.check(u)?;
        let full = u.padded();
        let h = self.grid().h();
        let mut signed = 0.0;
        let mut abs = 0.0;
        for (c, &bc) in self.b_cells.iter().enumerate() {
            let v = h * pow_mean(full[c], full[c + 1], q).value;
            signed += bc * v;
            abs += bc.abs() * v;
        }
        Ok((signed, abs))
    }

    /// `∫ b φ₁^β` with its sign, dead-band `1e-12 ∫|b| φ₁^β`.
    pub fn calibrate(&self, phi1: &GridFunction) -> Result<Calibration> {
        let (integral, abs) = self.b_integral(phi1, self.params.beta)?;
        Ok(Calibration { integral, sign: Sign::with_band(integral, 1e-12 * abs) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::interpolate;
    use proptest::prelude::*;

    fn problem(p: f64, alpha: f64, beta: f64, lambda: f64, b: BWeight, n: usize) -> Problem {
        let kernel = KernelSpec::model(p, alpha).unwrap();
        let grid = Grid::new(n).unwrap();
        let table = Arc::new(WeightTable::assemble(grid, kernel));
        Problem::new(ProblemParams::new(kernel, beta, lambda).unwrap(), b, table).unwrap()
    }

    #[test]
    fn regimes() {
        let k = KernelSpec::model(2.0, 0.25).unwrap();
        assert_eq!(ProblemParams::new(k, 1.5, 1.0).unwrap().regime(), Regime::Sublinear);
        assert_eq!(ProblemParams::new(k, 3.0, 1.0).unwrap().regime(), Regime::Superlinear);
        assert!(ProblemParams::new(k, 2.0, 1.0).is_err());
        assert!(ProblemParams::new(k, 4.0, 1.0).is_err());
        assert!(ProblemParams::new(k, 1.0, 1.0).is_err());
        assert!((ProblemParams::new(k, 3.0, 1.0).unwrap().p_star() - 4.0).abs() < 1e-15);
    }

    #[test]
    fn presets() {
        assert_eq!(BWeight::preset("pos-core", &[0.5]).unwrap(), BWeight::PosCore { c: 0.5 });
        assert!(BWeight::preset("pos-core", &[]).is_err());
        assert!(BWeight::preset("spiral", &[1.0]).is_err());
        assert!(BWeight::PosCore { c: 0.5 }.is_sign_changing());
        assert!(!BWeight::PosCore { c: 0.0 }.is_sign_changing());
        assert!(BWeight::Cosine { c0: 0.0, c1: 1.0 }.is_sign_changing());
        let g = Grid::new(64).unwrap();
        let (lo, hi) = BWeight::PosCore { c: 0.3 }.bounds(&g);
        assert_eq!((lo, hi), (-0.3, 1.0));
        let avg = BWeight::Cosine { c0: 0.2, c1: 1.0 }.cell_values(&g);
        let total: f64 = avg.iter().map(|v| v * g.h()).sum();
        assert!((total - 0.4).abs() < 1e-13);
    }

    #[test]
    fn segments_validate() {
        let s = |from, to, value| Segment { from, to, value };
        assert!(BWeight::segments(vec![s(-1.0, 0.0, 1.0), s(0.0, 1.0, -1.0)]).is_ok());
        assert!(BWeight::segments(vec![s(-1.0, 0.0, 1.0), s(0.1, 1.0, -1.0)]).is_err());
        assert!(BWeight::segments(vec![s(-0.9, 1.0, 1.0)]).is_err());
        let b = BWeight::segments(vec![s(-1.0, 0.0, 1.0), s(0.0, 1.0, -1.0)]).unwrap();
        assert_eq!(b.eval(-0.5), 1.0);
        assert_eq!(b.eval(0.5), -1.0);
    }

    #[test]
    fn zero_function_reports_zero() {
        let pr = problem(2.0, 0.25, 1.5, 3.0, BWeight::PosCore { c: 0.5 }, 9);
        let z = GridFunction::zeros(pr.grid().clone());
        let r = pr.report(&z).unwrap();
        assert_eq!((r.seminorm_p, r.lp_p, r.b_term, r.e_lambda, r.j_lambda), (0.0, 0.0, 0.0, 0.0, 0.0));
        assert!(pr.grad_j(&z).unwrap().is_zero());
    }

    #[test]
    fn report_identity() {
        let pr = problem(3.0, 0.2, 2.0, 1.7, BWeight::Cosine { c0: 0.1, c1: 1.0 }, 12);
        let u = interpolate(pr.grid(), |x| (1.0 - x * x) * (1.0 + 0.5 * x)).unwrap();
        let r = pr.report(&u).unwrap();
        let j = r.seminorm_p / 3.0 - 1.7 * r.lp_p / 3.0 - r.b_term / 2.0;
        assert!((r.j_lambda - j).abs() <= 1e-12 * r.j_lambda.abs());
        assert_eq!(r.e_lambda, r.seminorm_p - 1.7 * r.lp_p);
    }

    #[test]
    fn j_plus_examples() {
        let pr = problem(2.0, 0.25, 1.5, 2.0, BWeight::PosCore { c: 0.5 }, 10);
        let neg = interpolate(pr.grid(), |x| -(1.0 - x * x)).unwrap();
        let s = pr.seminorm_p(&neg).unwrap();
        assert_eq!(pr.j_plus(&neg).unwrap(), s / 2.0);
        let pos = neg.scaled(-1.0);
        assert_eq!(pr.j_plus(&pos).unwrap(), pr.j(&pos).unwrap());
    }

    #[test]
    fn gradients_match_finite_differences() {
        for (p, alpha, beta) in [(2.0, 0.25, 1.5), (2.0, 0.25, 3.0), (3.0, 0.2, 2.0)] {
            let pr = problem(p, alpha, beta, 2.5, BWeight::Cosine { c0: 0.2, c1: 1.0 }, 16);
            let u = interpolate(pr.grid(), |x| (3.0 * x).sin() + 0.3 * x + 0.1).unwrap();
            for positive in [false, true] {
                let (_, g) = pr.pieces_grad(u.values(), positive);
                let g = g.j(pr.params());
                let eps = 1e-6;
                for i in 0..u.values().len() {
                    let mut a = u.values().to_vec();
                    let mut b = u.values().to_vec();
                    a[i] += eps;
                    b[i] -= eps;
                    let fd =
                        (pr.pieces(&a, positive).j(pr.params()) - pr.pieces(&b, positive).j(pr.params())) / (2.0 * eps);
                    assert!((fd - g[i]).abs() <= 1e-5 * g[i].abs().max(1e-3), "p={p} beta={beta} i={i}");
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn homogeneity(vals in prop::collection::vec(-2.0f64..2.0, 8), c in 0.1f64..5.0, neg in any::<bool>()) {
            let pr = problem(3.0, 0.2, 2.0, 1.0, BWeight::PosCore { c: 0.7 }, 8);
            let u = GridFunction::new(pr.grid().clone(), vals).unwrap();
            prop_assume!(!u.is_zero());
            let c = if neg { -c } else { c };
            let a = pr.pieces(u.values(), false);
            let b = pr.pieces(u.scaled(c).values(), false);
            let rel = |x: f64, y: f64| (x - y).abs() / y.abs().max(1e-300);
            prop_assert!(rel(b.s, c.abs().powf(3.0) * a.s) < 1e-12);
            prop_assert!(rel(b.l, c.abs().powf(3.0) * a.l) < 1e-12);
            prop_assert!((b.b - c.abs().powf(2.0) * a.b).abs() <= 1e-12 * c.abs().powf(2.0) * a.b_abs);
        }

        #[test]
        fn seminorm_definite(vals in prop::collection::vec(-1.0f64..1.0, 6)) {
            let pr = problem(2.0, 0.25, 1.5, 1.0, BWeight::Constant { c: 1.0 }, 6);
            let s = pr.table().seminorm_values(&vals);
            if vals.iter().any(|&v| v != 0.0) { prop_assert!(s > 0.0); } else { prop_assert_eq!(s, 0.0); }
        }
    }
}
