//! Quadrature rules: Gauss-Legendre (Newton on Legendre polynomials) and
//! tanh-sinh, plus adaptive and fixed-panel drivers.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleKind {
    GaussLegendre,
    TanhSinh,
}

/// Nodes and weights on the reference interval [-1, 1].
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub kind: RuleKind,
}

impl QuadratureRule {
    pub fn gauss_legendre(n: usize) -> Self {
        assert!(n >= 8, "rule needs at least 8 nodes");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_and_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            weights[i] = w;
            nodes[n - 1 - i] = x;
            weights[n - 1 - i] = w;
        }
        QuadratureRule {
            nodes,
            weights,
            kind: RuleKind::GaussLegendre,
        }
    }

    /// Tanh-sinh rule with step h = 2^-levels, truncated where weights underflow.
    pub fn tanh_sinh(levels: u32) -> Self {
        let h = 0.5f64.powi(levels as i32);
        let half_pi = std::f64::consts::FRAC_PI_2;
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let mut k = 0i64;
        loop {
            let t = k as f64 * h;
            let s = half_pi * t.sinh();
            let x = s.tanh();
            let w = h * half_pi * t.cosh() / s.cosh().powi(2);
            if 1.0 - x.abs() < 1e-17 || w < 1e-17 {
                break;
            }
            if k == 0 {
                nodes.push(x);
                weights.push(w);
            } else {
                nodes.push(x);
                weights.push(w);
                nodes.push(-x);
                weights.push(w);
            }
            k += 1;
        }
        QuadratureRule {
            nodes,
            weights,
            kind: RuleKind::TanhSinh,
        }
    }

    /// Apply the rule to f on [a, b].
    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let mut terms: Vec<f64> = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .collect();
        half * pairwise_sum(&mut terms)
    }
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Order-independent pairwise summation.
pub fn pairwise_sum(values: &mut [f64]) -> f64 {
    let mut n = values.len();
    if n == 0 {
        return 0.0;
    }
    while n > 1 {
        let half = n / 2;
        for i in 0..half {
            values[i] = values[2 * i] + values[2 * i + 1];
        }
        if n % 2 == 1 {
            values[half] = values[n - 1];
            n = half + 1;
        } else {
            n = half;
        }
    }
    values[0]
}

/// Adaptive bisection built on a 16-node Gauss-Legendre panel rule.
/// Returns (value, error estimate).
pub fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    max_depth: u32,
) -> Result<(f64, f64)> {
    thread_local! {
        static RULE: QuadratureRule = QuadratureRule::gauss_legendre(16);
    }
    RULE.with(|rule| {
        let whole = rule.integrate(a, b, f);
        let mut value = 0.0;
        let mut err = 0.0;
        let mut failed = false;
        recurse(rule, f, a, b, whole, tol, max_depth, &mut value, &mut err, &mut failed);
        if failed {
            Err(Error::Quadrature {
                achieved: err,
                requested: tol,
            })
        } else {
            Ok((value, err))
        }
    })
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
    rule: &QuadratureRule,
    f: &F,
    a: f64,
    b: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    value: &mut f64,
    err: &mut f64,
    failed: &mut bool,
) {
    let mid = 0.5 * (a + b);
    let left = rule.integrate(a, mid, f);
    let right = rule.integrate(mid, b, f);
    let diff = (left + right - whole).abs();
    if diff <= tol.max(4e-16 * whole.abs()) || depth == 0 {
        if depth == 0 && diff > tol {
            *failed = true;
        }
        *value += left + right;
        *err += diff;
    } else {
        recurse(rule, f, a, mid, left, tol / 2.0, depth - 1, value, err, failed);
        recurse(rule, f, mid, b, right, tol / 2.0, depth - 1, value, err, failed);
    }
}

/// Fixed-panel integration: apply `rule` on each consecutive pair of breakpoints.
pub fn panels<F: Fn(f64) -> f64>(rule: &QuadratureRule, breakpoints: &[f64], f: F) -> f64 {
    let mut parts: Vec<f64> = breakpoints
        .windows(2)
        .map(|w| rule.integrate(w[0], w[1], &f))
        .collect();
    pairwise_sum(&mut parts)
}

/// Breakpoints for [0, r]: geometric refinement toward 0 below min(1, r),
/// then geometric growth (ratio 1.4) up to r.
pub fn radial_breakpoints(r: f64) -> Vec<f64> {
    let mut bp = vec![0.0];
    let m = r.min(1.0);
    for k in (0..=6).rev() {
        let x = m / (1u32 << k) as f64;
        if x < r {
            bp.push(x);
        }
    }
    let mut x = m;
    while x < r {
        x *= 1.4;
        if x < r {
            bp.push(x);
        }
    }
    bp.push(r);
    bp
}
