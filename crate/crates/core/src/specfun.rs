//! Self-contained special functions: log-gamma, the sphere constant gamma_d,
//! the Gauss hypergeometric function on the negative real axis, and Gegenbauer
//! polynomials for zonal harmonics.

use crate::error::{Error, Result};
use crate::quad;

pub const SQRT_PI: f64 = 1.772_453_850_905_516;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Stirling series coefficients B_{2k} / (2k (2k-1)).
const STIRLING: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
];

/// ln Gamma(x) for x > 0 via the Stirling asymptotic series with upward
/// recurrence for small arguments. Relative error below 1e-13 on [1e-3, 1e6].
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("log_gamma requires x > 0, got {x}")));
    }
    // Shift into the asymptotic regime: lnG(x) = lnG(x+k) - sum ln(x+i).
    let mut shift = 0.0f64;
    let mut z = x;
    while z < 12.0 {
        shift += z.ln();
        z += 1.0;
    }
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    let mut series = 0.0;
    let mut p = inv;
    for c in STIRLING {
        series += c * p;
        p *= inv2;
    }
    Ok((z - 0.5) * z.ln() - z + LN_SQRT_2PI + series - shift)
}

/// The sphere constant gamma_d = Gamma((d+1)/2) / (sqrt(pi) Gamma(d/2)).
pub fn gamma_d(d: u32) -> Result<f64> {
    if d < 2 {
        return Err(Error::Domain(format!("gamma_d requires d >= 2, got {d}")));
    }
    let num = log_gamma((d as f64 + 1.0) / 2.0)?;
    let den = log_gamma(d as f64 / 2.0)?;
    Ok((num - den).exp() / SQRT_PI)
}

/// Parameters of the Gauss hypergeometric function 2F1(a, b; c; x).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl HypParams {
    /// The radial-mode family a = l/2, b = (l-1)/2, c = l + d/2.
    pub fn radial(l: u32, d: u32) -> Self {
        HypParams {
            a: l as f64 / 2.0,
            b: (l as f64 - 1.0) / 2.0,
            c: l as f64 + d as f64 / 2.0,
        }
    }
}

const SERIES_CAP: usize = 50_000;
const SERIES_REL_TOL: f64 = 1e-16;

/// ln 2F1(a, b; c; x) for x <= 0, via the Pfaff transformation
/// 2F1(a,b;c;x) = (1-x)^{-b} 2F1(b, c-a; c; x/(x-1)).
///
/// The transformed argument lies in [0, 1) and, for the radial-mode parameter
/// family, every series term is nonnegative, so the sum is evaluated in linear
/// space without cancellation and only the final combination is logarithmic.
/// Falls back to the Euler-integral route when the series hits its term cap.
pub fn ln_hyp2f1_negaxis(p: HypParams, x: f64) -> Result<f64> {
    if x > 0.0 {
        return Err(Error::Domain(format!(
            "hyp2f1_negaxis requires x <= 0, got {x}"
        )));
    }
    if p.c <= 0.0 && p.c == p.c.floor() {
        return Err(Error::Domain("c must not be a nonpositive integer".into()));
    }
    if p.a == 0.0 || p.b == 0.0 || x == 0.0 {
        return Ok(0.0);
    }
    let z = x / (x - 1.0);
    let (alpha, beta) = (p.b, p.c - p.a);
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    for n in 0..SERIES_CAP {
        let nf = n as f64;
        term *= (alpha + nf) * (beta + nf) / ((p.c + nf) * (nf + 1.0)) * z;
        sum += term;
        if term.abs() < SERIES_REL_TOL * sum.abs() {
            // ln(1-x) is exact for x <= 0 via ln_1p.
            return Ok(sum.ln() - p.b * (-x).ln_1p());
        }
    }
    hyp2f1_euler_negaxis(p, x).map(|v| v.ln())
}

/// 2F1(a, b; c; x) on the negative real axis (Pfaff-transformed Gauss series).
pub fn hyp2f1_negaxis(p: HypParams, x: f64) -> Result<f64> {
    ln_hyp2f1_negaxis(p, x).map(f64::exp)
}

/// Independent evaluation route: Euler's integral representation
/// 2F1(a,b;c;x) = Gamma(c)/(Gamma(b)Gamma(c-b)) int_0^1 t^{b-1}(1-t)^{c-b-1}(1-xt)^{-a} dt,
/// valid for c > b > 0. The substitution t = s^2 regularizes the t -> 0
/// endpoint for b < 1 (the l = 2 radial mode has b = 1/2).
pub fn hyp2f1_euler_negaxis(p: HypParams, x: f64) -> Result<f64> {
    if x > 0.0 {
        return Err(Error::Domain(format!(
            "hyp2f1_euler_negaxis requires x <= 0, got {x}"
        )));
    }
    if p.a == 0.0 || p.b == 0.0 {
        return Ok(1.0);
    }
    if !(p.c > p.b && p.b > 0.0) {
        return Err(Error::Domain(format!(
            "Euler integral requires c > b > 0, got b = {}, c = {}",
            p.b, p.c
        )));
    }
    let ln_pref = log_gamma(p.c)? - log_gamma(p.b)? - log_gamma(p.c - p.b)?;
    let integrand = |s: f64| {
        let t = s * s;
        2.0 * s.powf(2.0 * p.b - 1.0) * (1.0 - t).powf(p.c - p.b - 1.0) * (1.0 - x * t).powf(-p.a)
    };
    // The factor (1 - x t)^{-a} varies on the scale s ~ 1/sqrt(1+|x|); seed the
    // adaptive pass with a geometric ladder at that scale so the first error
    // estimate already sees the peak, then tighten to a relative tolerance.
    let mut ladder = vec![0.0];
    let mut s = (1.0 / (1.0 + x.abs()).sqrt()).min(0.25);
    while s < 1.0 {
        ladder.push(s);
        s *= 2.0;
    }
    ladder.push(1.0);
    let mut coarse = 0.0;
    for w in ladder.windows(2) {
        coarse += quad::adaptive(&integrand, w[0], w[1], f64::MAX, 0)?.0;
    }
    let tol = (1e-14 * coarse.abs()).max(1e-300);
    let mut val = 0.0;
    for w in ladder.windows(2) {
        val += quad::adaptive(&integrand, w[0], w[1], tol, 48)?.0;
    }
    Ok(ln_pref.exp() * val)
}

/// Limit of (1-x)^b 2F1(a,b;c;x) as x -> -infinity (Pfaff plus Gauss's formula):
/// Gamma(c) Gamma(a-b) / (Gamma(c-b) Gamma(a)).
pub fn hyp2f1_tail_limit(p: HypParams) -> Result<f64> {
    if p.b == 0.0 {
        return Ok(1.0);
    }
    let ln = log_gamma(p.c)? + log_gamma(p.a - p.b)? - log_gamma(p.c - p.b)? - log_gamma(p.a)?;
    Ok(ln.exp())
}

/// Gegenbauer polynomial C_l^alpha(t) by the three-term recurrence.
///
/// alpha = 0 is the d = 2 degeneration: the zonal basis there is the Chebyshev
/// limit cos(l arccos t), which is what this returns.
pub fn gegenbauer(l: u32, alpha: f64, t: f64) -> Result<f64> {
    if !(alpha > -0.5) {
        return Err(Error::Domain(format!(
            "gegenbauer requires alpha > -1/2, got {alpha}"
        )));
    }
    if t.abs() > 1.0 + 1e-12 {
        return Err(Error::Domain(format!("gegenbauer requires |t| <= 1, got {t}")));
    }
    let t = t.clamp(-1.0, 1.0);
    if alpha == 0.0 {
        return Ok((l as f64 * t.acos()).cos());
    }
    match l {
        0 => Ok(1.0),
        1 => Ok(2.0 * alpha * t),
        _ => {
            let mut c_prev = 1.0;
            let mut c = 2.0 * alpha * t;
            for k in 2..=l {
                let kf = k as f64;
                let next = (2.0 * (kf + alpha - 1.0) * t * c - (kf + 2.0 * alpha - 2.0) * c_prev) / kf;
                c_prev = c;
                c = next;
            }
            Ok(c)
        }
    }
}
