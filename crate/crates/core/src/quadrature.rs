//! Gauss-Legendre rules and exact integrals of powers of linear functions.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// A quadrature rule on `[0, 1]`.
#[derive(Clone, Debug)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

const MAX_CACHED_ORDER: usize = 32;

/// Gauss-Legendre rule of order `n` mapped to `[0, 1]`.
///
/// Nodes are found by Newton iteration on the three-term recurrence.
pub fn gauss_legendre(n: usize) -> Rule {
    assert!(n >= 1, "quadrature order must be positive");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // Symmetric pair on [-1, 1] mapped to [0, 1].
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    Rule { nodes, weights }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Cached Gauss-Legendre rule for orders up to 32.
pub fn cached_rule(n: usize) -> &'static Rule {
    static CACHE: OnceLock<Vec<Rule>> = OnceLock::new();
    assert!((1..=MAX_CACHED_ORDER).contains(&n), "order {n} not cached");
    &CACHE.get_or_init(|| (1..=MAX_CACHED_ORDER).map(gauss_legendre).collect())[n - 1]
}

/// `∫_0^1 g(ℓ(s)) ds` for `ℓ(s) = a + (b - a) s` together with the partial
/// derivatives with respect to the endpoint values `a` and `b`.
///
/// The partials are the pairings of `g'(ℓ)` with the two linear hat pieces
/// `1 - s` and `s`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LinearIntegral {
    pub value: f64,
    pub d_left: f64,
    pub d_right: f64,
}

impl LinearIntegral {
    pub fn scaled(self, c: f64) -> Self {
        LinearIntegral { value: c * self.value, d_left: c * self.d_left, d_right: c * self.d_right }
    }
}

const NEAR_CONSTANT_RATIO: f64 = 0.5;
const NEAR_CONSTANT_ORDER: usize = 16;

/// `∫_0^1 |a + (b - a) s|^q ds` for `q > 1`, exact.
///
/// Closed form `(P(b) - P(a)) / (b - a)` with `P(z) = |z|^q z / (q + 1)` unless
/// the endpoints share a sign and are within a factor of two, where the
/// integrand is analytic on a neighbourhood of `[0, 1]` and a 16-point
/// Gauss-Legendre rule reaches rounding level without the cancellation.
pub fn pow_mean(a: f64, b: f64, q: f64) -> LinearIntegral {
    if a == 0.0 && b == 0.0 {
        return LinearIntegral::default();
    }
    let (lo, hi) = if a.abs() < b.abs() { (a.abs(), b.abs()) } else { (b.abs(), a.abs()) };
    if a * b > 0.0 && lo >= NEAR_CONSTANT_RATIO * hi {
        let rule = cached_rule(NEAR_CONSTANT_ORDER);
        let mut out = LinearIntegral::default();
        for (&s, &w) in rule.nodes.iter().zip(&rule.weights) {
            let l = a + (b - a) * s;
            let al = l.abs();
            let g = al.powf(q);
            let dg = q * al.powf(q - 1.0) * l.signum();
            out.value += w * g;
            out.d_left += w * dg * (1.0 - s);
            out.d_right += w * dg * s;
        }
        return out;
    }
    let d = b - a;
    let pa = a.abs().powf(q);
    let pb = b.abs().powf(q);
    let value = (pb * b - pa * a) / ((q + 1.0) * d);
    LinearIntegral { value, d_left: (value - pa) / d, d_right: (pb - value) / d }
}

/// `∫_0^1 max(a + (b - a) s, 0)^q ds` for `q > 1`, exact.
pub fn pos_pow_mean(a: f64, b: f64, q: f64) -> LinearIntegral {
    if a >= 0.0 && b >= 0.0 {
        return pow_mean(a, b, q);
    }
    if a <= 0.0 && b <= 0.0 {
        return LinearIntegral::default();
    }
    if b > 0.0 {
        let d = b - a;
        let value = b.powf(q + 1.0) / ((q + 1.0) * d);
        LinearIntegral { value, d_left: value / d, d_right: b.powf(q) / d - value / d }
    } else {
        let d = a - b;
        let value = a.powf(q + 1.0) / ((q + 1.0) * d);
        LinearIntegral { value, d_left: a.powf(q) / d - value / d, d_right: value / d }
    }
}

/// `|x|^p`, with the square special-cased.
#[inline]
pub fn abs_pow(x: f64, p: f64) -> f64 {
    if p == 2.0 {
        x * x
    } else {
        x.abs().powf(p)
    }
}

/// Derivative of [`abs_pow`]: `p |x|^{p-2} x`.
#[inline]
pub fn abs_pow_deriv(x: f64, p: f64) -> f64 {
    if p == 2.0 {
        2.0 * x
    } else {
        p * x.abs().powf(p - 1.0) * x.signum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn integrate(rule: &Rule, f: impl Fn(f64) -> f64) -> f64 {
        rule.nodes.iter().zip(&rule.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in [1, 2, 5, 6, 8, 16] {
            let rule = gauss_legendre(n);
            assert!((rule.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            for k in 0..(2 * n) {
                let exact = 1.0 / (k as f64 + 1.0);
                let approx = integrate(&rule, |x| x.powi(k as i32));
                assert!((approx - exact).abs() < 1e-13, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn nodes_are_sorted_and_interior() {
        let rule = gauss_legendre(9);
        assert!(rule.nodes.windows(2).all(|w| w[0] < w[1]));
        assert!(rule.nodes[0] > 0.0 && rule.nodes[8] < 1.0);
        assert!((rule.nodes[4] - 0.5).abs() < 1e-15);
    }

    fn reference(a: f64, b: f64, q: f64, pos: bool) -> f64 {
        // Split at the zero and use a high-order rule on each smooth piece,
        // substituting s = r^2 toward the zero to absorb the endpoint power.
        let rule = gauss_legendre(30);
        let f = |s: f64| {
            let l = a + (b - a) * s;
            if pos {
                l.max(0.0).powf(q)
            } else {
                l.abs().powf(q)
            }
        };
        let piece = |lo: f64, hi: f64, zero_at_lo: bool| {
            integrate(&rule, |r| {
                let (s, jac) = if zero_at_lo {
                    (lo + (hi - lo) * r * r, 2.0 * r * (hi - lo))
                } else {
                    (hi - (hi - lo) * r * r, 2.0 * r * (hi - lo))
                };
                f(s) * jac
            })
        };
        if a * b < 0.0 {
            let z = a / (a - b);
            piece(0.0, z, false) + piece(z, 1.0, true)
        } else {
            piece(0.0, 1.0, a == 0.0)
        }
    }

    #[test]
    fn pow_mean_matches_reference() {
        for &(a, b) in &[(0.3, 0.9), (1.0, 0.98), (-0.4, 1.2), (0.0, 2.0), (-1.5, -0.2), (0.7, -0.7)] {
            for &q in &[1.5, 2.0, 3.0, 2.7] {
                let exact = reference(a, b, q, false);
                let got = pow_mean(a, b, q).value;
                assert!(((got - exact) / exact).abs() < 1e-12, "a={a} b={b} q={q}");
                let exact = reference(a, b, q, true);
                let got = pos_pow_mean(a, b, q).value;
                assert!((got - exact).abs() <= 1e-12 * exact.max(1e-300), "pos a={a} b={b} q={q}");
            }
        }
    }

    #[test]
    fn partials_match_finite_differences() {
        let eps = 1e-6;
        for &(a, b) in &[(0.3, 0.9), (1.0, 0.98), (-0.4, 1.2), (0.2, 2.0), (-1.5, -0.2), (0.7, -0.5)] {
            for &q in &[1.5, 2.0, 3.0] {
                for f in [pow_mean as fn(f64, f64, f64) -> LinearIntegral, pos_pow_mean] {
                    let r = f(a, b, q);
                    let fd_a = (f(a + eps, b, q).value - f(a - eps, b, q).value) / (2.0 * eps);
                    let fd_b = (f(a, b + eps, q).value - f(a, b - eps, q).value) / (2.0 * eps);
                    let scale = r.d_left.abs().max(r.d_right.abs()).max(1e-8);
                    assert!((r.d_left - fd_a).abs() < 1e-7 * scale, "a={a} b={b} q={q}");
                    assert!((r.d_right - fd_b).abs() < 1e-7 * scale, "a={a} b={b} q={q}");
                }
            }
        }
    }

    #[test]
    fn regimes_join_continuously() {
        // Crossing the near-constant switch changes the value by rounding only.
        let q = 1.5;
        let below = pow_mean(0.5 * (1.0 - 1e-12), 1.0, q).value;
        let above = pow_mean(0.5 * (1.0 + 1e-12), 1.0, q).value;
        assert!((below - above).abs() < 1e-12);
    }
}
