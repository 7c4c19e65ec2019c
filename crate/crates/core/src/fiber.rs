//! Fibering maps `φ_u(t) = J_λ(t u)` and the Nehari projection.
//!
//! With `E = E_λ(u)` and `B = B(u)`:
//!
//! ```text
//! φ_u(t)   = t^p E / p - t^β B / β
//! φ_u'(t)  = t^{p-1} E - t^{β-1} B
//! φ_u''(t) = (p-1) t^{p-2} E - (β-1) t^{β-2} B
//! ```
//!
//! A critical point exists iff `E` and `B` share a sign, at `t* = (B/E)^{1/(p-β)}`.
//!
//! | case | E | B | sublinear | superlinear |
//! |------|---|---|-----------|-------------|
//! | 1    | - | + | none      | none        |
//! | 2    | + | - | none      | none        |
//! | 3    | + | + | `N⁺`      | `N⁻`        |
//! | 4    | - | - | `N⁻`      | `N⁺`        |

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::energy::{Pieces, Problem, ProblemParams, Regime, Sign};
use crate::error::{Error, Result};
use crate::grid::GridFunction;

/// Relative width of the zero band for the signs of `E` and `B`.
pub const SIGN_BAND: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Branch {
    NPlus,
    NMinus,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::NPlus => "N+",
            Branch::NMinus => "N-",
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FiberDiagnosis {
    pub e_sign: Sign,
    pub b_sign: Sign,
    /// 1: (E⁻, B⁺), 2: (E⁺, B⁻), 3: (E⁺, B⁺), 4: (E⁻, B⁻); `None` if a sign is zero.
    pub case_id: Option<u8>,
    pub t_star: Option<f64>,
    pub target_branch: Option<Branch>,
}

/// The fibering map of one direction, reduced to its scalar coefficients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FiberMap {
    pub pieces: Pieces,
    pub p: f64,
    pub beta: f64,
    pub lambda: f64,
    pub regime: Regime,
}

impl FiberMap {
    pub fn from_pieces(pieces: Pieces, params: &ProblemParams) -> FiberMap {
        FiberMap { pieces, p: params.p(), beta: params.beta, lambda: params.lambda, regime: params.regime() }
    }

    pub fn new(problem: &Problem, u: &GridFunction) -> Result<FiberMap> {
        problem.report(u)?;
        if u.is_zero() {
            return Err(Error::ZeroFunction);
        }
        Ok(Self::from_pieces(problem.pieces(u.values(), false), problem.params()))
    }

    pub fn e(&self) -> f64 {
        self.pieces.e(self.lambda)
    }

    pub fn b(&self) -> f64 {
        self.pieces.b
    }

    pub fn value(&self, t: f64) -> f64 {
        t.powf(self.p) * self.e() / self.p - t.powf(self.beta) * self.b() / self.beta
    }

    pub fn d1(&self, t: f64) -> f64 {
        t.powf(self.p - 1.0) * self.e() - t.powf(self.beta - 1.0) * self.b()
    }

    pub fn d2(&self, t: f64) -> f64 {
        (self.p - 1.0) * t.powf(self.p - 2.0) * self.e() - (self.beta - 1.0) * t.powf(self.beta - 2.0) * self.b()
    }

    pub fn e_sign(&self) -> Sign {
        let band = SIGN_BAND * self.pieces.s.max((self.lambda * self.pieces.l).abs());
        Sign::with_band(self.e(), band)
    }

    pub fn b_sign(&self) -> Sign {
        Sign::with_band(self.b(), SIGN_BAND * self.pieces.b_abs)
    }

    pub fn diagnose(&self) -> FiberDiagnosis {
        let (e_sign, b_sign) = (self.e_sign(), self.b_sign());
        let case_id = match (e_sign, b_sign) {
            (Sign::Minus, Sign::Plus) => Some(1),
            (Sign::Plus, Sign::Minus) => Some(2),
            (Sign::Plus, Sign::Plus) => Some(3),
            (Sign::Minus, Sign::Minus) => Some(4),
            _ => None,
        };
        let target_branch = match (case_id, self.regime) {
            (Some(3), Regime::Sublinear) | (Some(4), Regime::Superlinear) => Some(Branch::NPlus),
            (Some(4), Regime::Sublinear) | (Some(3), Regime::Superlinear) => Some(Branch::NMinus),
            _ => None,
        };
        let t_star = target_branch.map(|_| (self.b() / self.e()).powf(1.0 / (self.p - self.beta)));
        FiberDiagnosis { e_sign, b_sign, case_id, t_star, target_branch }
    }

    pub fn t_star(&self) -> Result<f64> {
        let d = self.diagnose();
        d.t_star.ok_or_else(|| {
            Error::NoCriticalScaling(format!("E has sign {} and B has sign {}", d.e_sign.as_str(), d.b_sign.as_str()))
        })
    }

    /// `J_λ(t* u)` without forming `t* u`:
    /// `(1/p - 1/β) sgn(B) |B|^{p/(p-β)} |E|^{-β/(p-β)}`.
    pub fn critical_value(&self) -> Result<f64> {
        self.t_star()?;
        Ok(nehari_value(self.e(), self.b(), self.p, self.beta))
    }
}

/// `J` at the Nehari point of a direction with `E_λ = e` and `B = b` of equal sign.
pub fn nehari_value(e: f64, b: f64, p: f64, beta: f64) -> f64 {
    let q = p - beta;
    (1.0 / p - 1.0 / beta) * b.signum() * b.abs().powf(p / q) * e.abs().powf(-beta / q)
}

fn check_t(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("fiber parameter t must be positive, got {t}")))
    }
}

pub fn fiber_value(problem: &Problem, u: &GridFunction, t: f64) -> Result<f64> {
    check_t(t)?;
    Ok(FiberMap::new(problem, u)?.value(t))
}

pub fn fiber_d1(problem: &Problem, u: &GridFunction, t: f64) -> Result<f64> {
    check_t(t)?;
    Ok(FiberMap::new(problem, u)?.d1(t))
}

pub fn fiber_d2(problem: &Problem, u: &GridFunction, t: f64) -> Result<f64> {
    check_t(t)?;
    Ok(FiberMap::new(problem, u)?.d2(t))
}

pub fn classify(problem: &Problem, u: &GridFunction) -> Result<FiberDiagnosis> {
    Ok(FiberMap::new(problem, u)?.diagnose())
}

pub fn t_star(problem: &Problem, u: &GridFunction) -> Result<f64> {
    FiberMap::new(problem, u)?.t_star()
}

/// `t*(u) u` and its branch.
pub fn project_to_nehari(problem: &Problem, u: &GridFunction) -> Result<(GridFunction, Branch)> {
    let d = classify(problem, u)?;
    match (d.t_star, d.target_branch) {
        (Some(t), Some(branch)) => Ok((u.scaled(t), branch)),
        _ => Err(Error::NoCriticalScaling(format!(
            "E has sign {} and B has sign {}",
            d.e_sign.as_str(),
            d.b_sign.as_str()
        ))),
    }
}

/// `|⟨J'(u), u⟩| = |‖u‖^p - λ∫|u|^p - ∫b|u|^β|`.
pub fn nehari_residual(problem: &Problem, u: &GridFunction) -> Result<f64> {
    let r = problem.report(u)?;
    Ok((r.e_lambda - r.b_term).abs())
}

/// Smooth random direction `Σ_k c_k sin(kπ(x+1)/2)`, `|c_k| ≤ 1/k`.
pub fn random_direction(problem: &Problem, rng: &mut ChaCha8Rng, modes: usize) -> GridFunction {
    let coeffs: Vec<f64> = (1..=modes).map(|k| rng.gen_range(-1.0..1.0) / k as f64).collect();
    let values = problem
        .grid()
        .nodes()
        .iter()
        .map(|&x| {
            coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| c * ((k + 1) as f64 * std::f64::consts::FRAC_PI_2 * (x + 1.0)).sin())
                .sum()
        })
        .collect();
    GridFunction::new(problem.grid().clone(), values).expect("finite direction")
}

/// Empirical picture of the sign sets from random directions.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplerReport {
    pub samples: usize,
    /// Directions with `E < 0`.
    pub e_minus: usize,
    /// Directions with `E < 0` and `B ≥ 0`: witnesses against `E⁻ ⊂ B⁻`.
    pub e_minus_b_nonneg: usize,
    /// Smallest Rayleigh quotient among directions with `B ≥ 0`; below it `E⁻ ⊂ B⁻`
    /// holds on the sample.
    pub lambda0_estimate: Option<f64>,
    /// `min(-B(u/‖u‖))` over sampled `E⁻` directions.
    pub delta2_estimate: Option<f64>,
}

/// Draws `count` random directions plus `extra` (typically `φ₁`).
pub fn sample_sign_sets(problem: &Problem, extra: &[GridFunction], count: usize, seed: u64) -> SamplerReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dirs: Vec<GridFunction> = (0..count).map(|_| random_direction(problem, &mut rng, 12)).collect();
    dirs.extend(extra.iter().cloned());
    let params = problem.params();
    let mut report =
        SamplerReport { samples: 0, e_minus: 0, e_minus_b_nonneg: 0, lambda0_estimate: None, delta2_estimate: None };
    for u in dirs.iter().filter(|u| !u.is_zero()) {
        report.samples += 1;
        let pc = problem.pieces(u.values(), false);
        let map = FiberMap::from_pieces(pc, params);
        let b_nonneg = map.b_sign() != Sign::Minus;
        if b_nonneg {
            let r = pc.s / pc.l;
            report.lambda0_estimate = Some(report.lambda0_estimate.map_or(r, |m: f64| m.min(r)));
        }
        if map.e_sign() == Sign::Minus {
            report.e_minus += 1;
            if b_nonneg {
                report.e_minus_b_nonneg += 1;
            }
            let d = -pc.b / pc.s.powf(params.beta / params.p());
            report.delta2_estimate = Some(report.delta2_estimate.map_or(d, |m: f64| m.min(d)));
        }
    }
    report
}
