//! Radial building blocks: the modes f_l (l >= 1), the inhomogeneous mode f_0,
//! the deviation f0_hat = r - f_0, the scale function h, and the geometric
//! decay envelope used for series truncation.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::quad::{self, QuadratureRule};
use crate::specfun::{self, HypParams};

/// A radial mode (d, l) with the log of the Lemma-1 gamma-ratio prefactor
/// ln[Gamma((l+d+1)/2) Gamma(l/2)] - ln[Gamma(l+d/2) Gamma(1/2)].
#[derive(Debug, Clone, Copy)]
pub struct RadialMode {
    pub d: u32,
    pub l: u32,
    pub log_prefactor: f64,
}

impl RadialMode {
    pub fn new(d: u32, l: u32) -> Result<Self> {
        if d < 2 {
            return Err(Error::Domain(format!("RadialMode requires d >= 2, got {d}")));
        }
        let log_prefactor = if l == 0 {
            0.0
        } else {
            let (df, lf) = (d as f64, l as f64);
            specfun::log_gamma((lf + df + 1.0) / 2.0)? + specfun::log_gamma(lf / 2.0)?
                - specfun::log_gamma(lf + df / 2.0)?
                - specfun::log_gamma(0.5)?
        };
        Ok(RadialMode { d, l, log_prefactor })
    }
}

/// The mode f_l(r) = r^l * prefactor * 2F1(l/2, (l-1)/2; l+d/2; -r^2), l >= 1.
/// Assembled in log space so large l at small r neither under- nor overflows.
pub fn f_l(mode: &RadialMode, r: f64) -> Result<f64> {
    if mode.l < 1 {
        return Err(Error::Precondition("f_l requires l >= 1; use f_0 for l = 0".into()));
    }
    if r < 0.0 {
        return Err(Error::Domain(format!("f_l requires r >= 0, got {r}")));
    }
    if r == 0.0 {
        return Ok(0.0);
    }
    let p = HypParams::radial(mode.l, mode.d);
    let ln_hyp = specfun::ln_hyp2f1_negaxis(p, -r * r)?;
    let ln_val = mode.l as f64 * r.ln() + mode.log_prefactor + ln_hyp;
    if ln_val > 709.0 {
        return Err(Error::Overflow(format!(
            "f_l out of range at l = {}, r = {r}",
            mode.l
        )));
    }
    Ok(ln_val.exp())
}

static DEFAULT_RULE: OnceLock<QuadratureRule> = OnceLock::new();

/// 24-node Gauss-Legendre panel rule used by default for the radial integrals.
pub fn default_rule() -> &'static QuadratureRule {
    DEFAULT_RULE.get_or_init(|| QuadratureRule::gauss_legendre(24))
}

/// int_0^u v^{d-1} / (1+v^2)^{(d+1)/2} dv, evaluated in the substituted form
/// int_0^{arctan u} sin^{d-1} phi dphi (regular everywhere). Accepts
/// u = infinity, where the value is 1/(2 gamma_d).
pub fn f0_inner_integral(d: u32, u: f64, rule: &QuadratureRule) -> f64 {
    let upper = u.atan();
    let p = d as i32 - 1;
    rule.integrate(0.0, upper, |phi| phi.sin().powi(p))
}

/// The l = 0 mode: f_0(r) = 2 gamma_d int_0^r ((1+u^2)/u^2)^{(d-1)/2} I(u) du
/// with I the inner integral above. Fixed geometric panels keep the quadrature
/// error a smooth function of r, which the finite-difference residual checks
/// rely on. The value is refined once; the refinement difference is the error
/// estimate.
pub fn f_0(d: u32, r: f64, rule: &QuadratureRule) -> Result<f64> {
    if d < 2 {
        return Err(Error::Domain(format!("f_0 requires d >= 2, got {d}")));
    }
    if r < 0.0 {
        return Err(Error::Domain(format!("f_0 requires r >= 0, got {r}")));
    }
    if r == 0.0 {
        return Ok(0.0);
    }
    let gd = specfun::gamma_d(d)?;
    let integrand = |u: f64| {
        if u == 0.0 {
            return 0.0;
        }
        let ratio = (1.0 + u * u).sqrt() / u;
        f0_inner_integral(d, u, rule) * ratio.powi(d as i32 - 1)
    };
    let bp = quad::radial_breakpoints(r);
    let coarse = quad::panels(rule, &bp, integrand);
    let fine_bp = split_breakpoints(&bp);
    let fine = quad::panels(rule, &fine_bp, integrand);
    let err = 2.0 * gd * (fine - coarse).abs();
    let tol = 1e-9;
    if err > tol {
        return Err(Error::Quadrature {
            achieved: err,
            requested: tol,
        });
    }
    Ok(2.0 * gd * fine)
}

fn split_breakpoints(bp: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(bp.len() * 2);
    for w in bp.windows(2) {
        out.push(w[0]);
        out.push(0.5 * (w[0] + w[1]));
    }
    out.push(*bp.last().unwrap());
    out
}

/// f0_hat(r) = r - f_0(r); grows only logarithmically in r.
pub fn f0_hat(d: u32, r: f64) -> Result<f64> {
    Ok(r - f_0(d, r, default_rule())?)
}

/// Radius below which scale_h reports divergence instead of a value.
pub const SCALE_H_FLOOR: f64 = 1e-8;

/// The scale function h(r) = int_1^r ((1+u^2)/u^2)^{(d-1)/2} du; negative for
/// r < 1, h(1) = 0. Below the floor the divergence indicator -infinity is
/// returned (the integral blows up as r -> 0).
pub fn scale_h(d: u32, r: f64) -> Result<f64> {
    if d < 2 {
        return Err(Error::Domain(format!("scale_h requires d >= 2, got {d}")));
    }
    if !(r > 0.0) {
        return Err(Error::Domain(format!("scale_h requires r > 0, got {r}")));
    }
    if r < SCALE_H_FLOOR {
        return Ok(f64::NEG_INFINITY);
    }
    let rule = default_rule();
    let p = d as i32 - 1;
    let integrand = |u: f64| ((1.0 + u * u).sqrt() / u).powi(p);
    let (lo, hi, sign) = if r >= 1.0 { (1.0, r, 1.0) } else { (r, 1.0, -1.0) };
    let mut bp = vec![lo];
    let mut x = lo;
    while x * 1.4 < hi {
        x *= 1.4;
        bp.push(x);
    }
    bp.push(hi);
    Ok(sign * quad::panels(rule, &bp, integrand))
}

/// Series-tail majorant delta^l with delta the midpoint between the lower
/// bound R/sqrt(1+R^2) and 1.
pub fn decay_envelope(_d: u32, radius: f64, l: u32) -> f64 {
    decay_delta(radius).powi(l as i32)
}

/// The base delta of the decay envelope at radius R.
pub fn decay_delta(radius: f64) -> f64 {
    (radius / (1.0 + radius * radius).sqrt() + 1.0) / 2.0
}

/// Central-difference residual of the homogeneous radial ODE
/// A_R f - l(l+d-2)/(2 r^2) f = 0 applied to f_l.
pub fn ode_residual_fl(mode: &RadialMode, r: f64, h: f64) -> Result<f64> {
    let (d, l) = (mode.d as f64, mode.l as f64);
    let fm = f_l(mode, r - h)?;
    let f = f_l(mode, r)?;
    let fp = f_l(mode, r + h)?;
    let d2 = (fp - 2.0 * f + fm) / (h * h);
    let d1 = (fp - fm) / (2.0 * h);
    let a_r = 0.5 * (1.0 + r * r) * d2 + 0.5 * (d - 1.0) / r * d1;
    Ok((a_r - l * (l + d - 2.0) / (2.0 * r * r) * f).abs())
}

/// Central-difference residual of A_R f_0 = gamma_d.
pub fn ode_residual_f0(d: u32, r: f64, h: f64, rule: &QuadratureRule) -> Result<f64> {
    let df = d as f64;
    let fm = f_0(d, r - h, rule)?;
    let f = f_0(d, r, rule)?;
    let fp = f_0(d, r + h, rule)?;
    let d2 = (fp - 2.0 * f + fm) / (h * h);
    let d1 = (fp - fm) / (2.0 * h);
    let a_r = 0.5 * (1.0 + r * r) * d2 + 0.5 * (df - 1.0) / r * d1;
    Ok((a_r - specfun::gamma_d(d)?).abs())
}
