//! Monte Carlo engine for the affine stochastic flow X^x(t) = M(t) x + N(t)
//! and the probabilistic validations built on it: moment identities, exit
//! probabilities against the scale function, the invariant law, Feynman-Kac
//! radial modes, the constant lambda_d, semigroup convergence, and the exact
//! pathwise convexity coupling.
//!
//! Determinism contract: every path index maps to its own counter-based RNG
//! stream derived from (seed, path index), so results are a pure function of
//! the configuration and are bit-identical regardless of worker count.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::harmonics::{self, BoundarySpec};
use crate::quad;
use crate::radial;
use crate::solver::{self, EllipticSolution};
use crate::specfun;

/// Monte Carlo run parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    pub n_paths: usize,
    pub dt: f64,
    pub t_max: f64,
    pub seed: u64,
    /// Worker hint for schedulers; never affects results.
    pub worker_streams: usize,
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 1 {
            return Err(Error::Precondition("n_paths must be at least 1".into()));
        }
        if !(self.dt > 0.0 && self.dt <= self.t_max.max(self.dt)) {
            return Err(Error::Precondition(format!("invalid dt = {}", self.dt)));
        }
        if self.t_max < 0.0 {
            return Err(Error::Precondition(format!("invalid t_max = {}", self.t_max)));
        }
        Ok(())
    }

    /// The RNG for a given path index: one ChaCha stream per path.
    fn rng(&self, path: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(path);
        rng
    }
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    /// Number of paths entering the estimate (config count minus rejected).
    pub n: usize,
    /// Paths dropped (e.g. no exit before the path-length cap).
    pub rejected: usize,
    /// Non-fatal resolution warnings (e.g. under-resolved discount integrand).
    pub warnings: usize,
}

impl McEstimate {
    /// Builds the estimate from per-path values with pairwise (order-stable)
    /// summation.
    pub fn from_values(values: &[f64], rejected: usize, warnings: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Precondition("no surviving paths to estimate from".into()));
        }
        let n = values.len();
        let mut buf = values.to_vec();
        let mean = quad::pairwise_sum(&mut buf) / n as f64;
        let mut sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
        let var = if n > 1 {
            quad::pairwise_sum(&mut sq) / (n as f64 - 1.0)
        } else {
            0.0
        };
        Ok(McEstimate {
            mean,
            std_error: (var / n as f64).sqrt(),
            n,
            rejected,
            warnings,
        })
    }
}

/// One realization of the affine flow on a uniform time grid: X^x(t_k) =
/// m[k] * x + n[k] simultaneously for every starting point x.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSample {
    pub t_grid: Vec<f64>,
    pub m: Vec<f64>,
    pub n: Vec<Vec<f64>>,
}

/// Number of uniform steps used to cover horizon t at nominal step dt.
fn step_count(t: f64, dt: f64) -> usize {
    if t <= 0.0 {
        0
    } else {
        (t / dt).round().max(1.0) as usize
    }
}

/// Advances (m, n) by one step of size dt: m *= exp(dB - dt/2),
/// n = exp(dB - dt/2) * n + dW, with dB scalar and dW in R^d independent.
/// The multiplier update is exact in law; the dW placement is the Euler
/// (weak order 1) increment.
fn flow_step(rng: &mut ChaCha8Rng, dt: f64, m: &mut f64, n: &mut [f64]) {
    let sqrt_dt = dt.sqrt();
    let db: f64 = sqrt_dt * rng.sample::<f64, _>(StandardNormal);
    let factor = (db - dt / 2.0).exp();
    *m *= factor;
    for ni in n.iter_mut() {
        let dw: f64 = sqrt_dt * rng.sample::<f64, _>(StandardNormal);
        *ni = factor * *ni + dw;
    }
}

/// Simulates one flow realization on the grid of cfg for the given stream.
pub fn sample_flow(d: u32, cfg: &McConfig, rng_stream: u64) -> Result<FlowSample> {
    cfg.validate()?;
    let steps = step_count(cfg.t_max, cfg.dt);
    let dt = if steps == 0 { 0.0 } else { cfg.t_max / steps as f64 };
    let mut rng = cfg.rng(rng_stream);
    let mut m = 1.0;
    let mut n = vec![0.0; d as usize];
    let mut t_grid = Vec::with_capacity(steps + 1);
    let mut m_series = Vec::with_capacity(steps + 1);
    let mut n_series = Vec::with_capacity(steps + 1);
    t_grid.push(0.0);
    m_series.push(m);
    n_series.push(n.clone());
    for k in 1..=steps {
        flow_step(&mut rng, dt, &mut m, &mut n);
        t_grid.push(k as f64 * dt);
        m_series.push(m);
        n_series.push(n.clone());
    }
    Ok(FlowSample {
        t_grid,
        m: m_series,
        n: n_series,
    })
}

/// Maps every path index through f, in path order. With the `parallel`
/// feature the map runs on the rayon pool; the ordered collect keeps results
/// identical to the sequential fallback.
fn map_paths<T, F>(cfg: &McConfig, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..cfg.n_paths as u64).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..cfg.n_paths as u64).map(f).collect()
    }
}

/// Terminal (M(t), N(t)) for every path, without storing whole trajectories.
pub fn flow_endpoints(d: u32, cfg: &McConfig, t: f64) -> Result<Vec<(f64, Vec<f64>)>> {
    cfg.validate()?;
    let steps = step_count(t, cfg.dt);
    let dt = if steps == 0 { 0.0 } else { t / steps as f64 };
    Ok(map_paths(cfg, |path| {
        let mut rng = cfg.rng(path);
        let mut m = 1.0;
        let mut n = vec![0.0; d as usize];
        for _ in 0..steps {
            flow_step(&mut rng, dt, &mut m, &mut n);
        }
        (m, n)
    }))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// Closed-form second moment E|X^x(t)|^2 = (|x|^2 + d) e^t - d.
pub fn second_moment_reference(d: u32, x: &[f64], t: f64) -> f64 {
    let r2 = x.iter().map(|c| c * c).sum::<f64>();
    (r2 + d as f64) * t.exp() - d as f64
}

/// MC estimate of E|X^x(t)|^2.
pub fn second_moment(d: u32, x: &[f64], t: f64, cfg: &McConfig) -> Result<McEstimate> {
    if x.len() != d as usize {
        return Err(Error::DimensionMismatch { expected: d as usize, got: x.len() });
    }
    let values: Vec<f64> = flow_endpoints(d, cfg, t)?
        .into_iter()
        .map(|(m, n)| {
            x.iter()
                .zip(&n)
                .map(|(xi, ni)| {
                    let c = m * xi + ni;
                    c * c
                })
                .sum()
        })
        .collect();
    McEstimate::from_values(&values, 0, 0)
}

/// Fraction of paths whose radius exits (r, R) at the outer boundary; the
/// reference is the scale-function formula (h(|x|) - h(r)) / (h(R) - h(r)).
/// The horizon extends adaptively until exit, up to a hard path-length cap of
/// 64 * t_max; capped paths are rejected and counted.
pub fn exit_probability(d: u32, x: &[f64], r: f64, big_r: f64, cfg: &McConfig) -> Result<McEstimate> {
    cfg.validate()?;
    if x.len() != d as usize {
        return Err(Error::DimensionMismatch { expected: d as usize, got: x.len() });
    }
    let start = norm(x);
    if !(0.0 < r && r < start && start < big_r) {
        return Err(Error::Precondition(format!(
            "exit_probability needs 0 < r < |x| < R, got r = {r}, |x| = {start}, R = {big_r}"
        )));
    }
    let cap_steps = ((64.0 * cfg.t_max / cfg.dt).ceil() as usize).max(1);
    let outcomes = map_paths(cfg, |path| {
        let mut rng = cfg.rng(path);
        let dt = cfg.dt;
        let mut m = 1.0;
        let mut xv = x.to_vec();
        for _ in 0..cap_steps {
            flow_step(&mut rng, dt, &mut m, &mut xv);
            let radius = norm(&xv);
            if radius >= big_r {
                return Some(1.0);
            }
            if radius <= r {
                return Some(0.0);
            }
        }
        None
    });
    let rejected = outcomes.iter().filter(|o| o.is_none()).count();
    let values: Vec<f64> = outcomes.into_iter().flatten().collect();
    McEstimate::from_values(&values, rejected, 0)
}

/// How the invariant law is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InvariantMethod {
    /// Truncated stochastic integral: X^0(t_max), with a tail warning when
    /// the multiplier has not decayed below 1e-4.
    PathIntegral,
    /// X(infinity) = sqrt(A_inf) Z with A_inf = 1/zeta^2 (inverse-square
    /// Gaussian form of the stable-1/2 exponential functional) and Z a
    /// standard d-dimensional Gaussian.
    ClosedForm,
}

/// Samples from the invariant law of the flow.
#[derive(Debug, Clone)]
pub struct InvariantSample {
    pub points: Vec<Vec<f64>>,
    /// Paths whose truncation tail was not negligible (path_integral only).
    pub tail_warnings: usize,
}

pub fn sample_invariant(d: u32, cfg: &McConfig, method: InvariantMethod) -> Result<InvariantSample> {
    cfg.validate()?;
    match method {
        InvariantMethod::PathIntegral => {
            let finals = flow_endpoints(d, cfg, cfg.t_max)?;
            let tail_warnings = finals.iter().filter(|(m, _)| *m > 1e-4).count();
            Ok(InvariantSample {
                points: finals.into_iter().map(|(_, n)| n).collect(),
                tail_warnings,
            })
        }
        InvariantMethod::ClosedForm => {
            let points = map_paths(cfg, |path| {
                let mut rng = cfg.rng(path);
                let mut zeta: f64 = rng.sample(StandardNormal);
                while zeta == 0.0 {
                    zeta = rng.sample(StandardNormal);
                }
                let scale = 1.0 / zeta.abs(); // sqrt(A_inf) = 1/|zeta|
                (0..d)
                    .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            });
            Ok(InvariantSample {
                points,
                tail_warnings: 0,
            })
        }
    }
}

/// MC estimate of the Feynman-Kac radial mode
/// f_l(t, r) = E[ R(t) exp( -l(l+d-2)/2 * int_0^t ds / R(s)^2 ) ]
/// with R(s) = |X^x(s)|, |x| = r, and the trapezoid rule for the integral.
pub fn feynman_kac_mode(d: u32, l: u32, r: f64, t: f64, cfg: &McConfig) -> Result<McEstimate> {
    cfg.validate()?;
    if !(r > 0.0) {
        return Err(Error::Precondition(format!("feynman_kac_mode needs r > 0, got {r}")));
    }
    if l < 1 {
        return Err(Error::Precondition("feynman_kac_mode needs l >= 1".into()));
    }
    let steps = step_count(t, cfg.dt);
    let dt = if steps == 0 { 0.0 } else { t / steps as f64 };
    let resolution_floor = 10.0 * cfg.dt.sqrt();
    let rate = l as f64 * (l as f64 + d as f64 - 2.0) / 2.0;
    let per_path = map_paths(cfg, |path| {
        let mut rng = cfg.rng(path);
        let mut m = 1.0;
        let mut xv = vec![0.0; d as usize];
        xv[0] = r;
        let mut radius = r;
        let mut integral = 0.0;
        let mut under_resolved = false;
        for _ in 0..steps {
            let prev_inv = 1.0 / (radius * radius);
            flow_step(&mut rng, dt, &mut m, &mut xv);
            radius = norm(&xv);
            if radius < resolution_floor {
                under_resolved = true;
            }
            integral += 0.5 * dt * (prev_inv + 1.0 / (radius * radius));
        }
        (radius * (-rate * integral).exp(), under_resolved)
    });
    let warnings = per_path.iter().filter(|(_, w)| *w).count();
    let values: Vec<f64> = per_path.into_iter().map(|(v, _)| v).collect();
    McEstimate::from_values(&values, 0, warnings)
}

/// Piecewise-linear table of f0_hat(r) = r - f_0(r) on a log-radius grid,
/// built by one cumulative integration pass and cached per dimension.
struct F0HatTable {
    log_r: Vec<f64>,
    values: Vec<f64>,
    gamma_d: f64,
}

impl F0HatTable {
    const R_MIN: f64 = 1e-4;
    const R_MAX: f64 = 1e5;
    const POINTS: usize = 4096;

    fn build(d: u32) -> Result<Self> {
        let rule = radial::default_rule();
        let gd = specfun::gamma_d(d)?;
        let integrand = |u: f64| {
            if u == 0.0 {
                return 0.0;
            }
            let ratio = (1.0 + u * u).sqrt() / u;
            radial::f0_inner_integral(d, u, rule) * ratio.powi(d as i32 - 1)
        };
        let log_min = Self::R_MIN.ln();
        let log_max = Self::R_MAX.ln();
        let mut log_r = Vec::with_capacity(Self::POINTS);
        let mut values = Vec::with_capacity(Self::POINTS);
        // Cumulative integral of the f_0 integrand along the log-spaced grid.
        let mut acc = 0.0;
        let mut prev = 0.0;
        for k in 0..Self::POINTS {
            let lr = log_min + (log_max - log_min) * k as f64 / (Self::POINTS - 1) as f64;
            let rk = lr.exp();
            acc += rule.integrate(prev, rk, integrand);
            prev = rk;
            log_r.push(lr);
            values.push(rk - 2.0 * gd * acc);
        }
        Ok(F0HatTable {
            log_r,
            values,
            gamma_d: gd,
        })
    }

    fn eval(&self, d: u32, r: f64) -> Result<f64> {
        if r <= 0.0 {
            return Ok(0.0);
        }
        if r < Self::R_MIN {
            // Small-radius expansion: f_0(r) = gamma_d r^2 / d + O(r^4).
            return Ok(r - self.gamma_d * r * r / d as f64);
        }
        if r > Self::R_MAX {
            // Rare far-tail sample: integrate directly.
            return radial::f0_hat(d, r);
        }
        let lr = r.ln();
        let lo = self.log_r[0];
        let step = self.log_r[1] - self.log_r[0];
        let idx = (((lr - lo) / step) as usize).min(self.values.len() - 2);
        let w = (lr - self.log_r[idx]) / step;
        Ok(self.values[idx] * (1.0 - w) + self.values[idx + 1] * w)
    }
}

fn f0_hat_cached(d: u32, r: f64) -> Result<f64> {
    static CACHE: OnceLock<Mutex<HashMap<u32, &'static F0HatTable>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let table = {
        let mut guard = cache.lock().expect("f0_hat cache poisoned");
        match guard.get(&d) {
            Some(t) => *t,
            None => {
                let built: &'static F0HatTable = Box::leak(Box::new(F0HatTable::build(d)?));
                guard.insert(d, built);
                built
            }
        }
    };
    table.eval(d, r)
}

/// MC estimate of lambda_d = E[ f0_hat(|X(infinity)|) ] over closed-form
/// invariant samples.
pub fn estimate_lambda(d: u32, cfg: &McConfig) -> Result<McEstimate> {
    let sample = sample_invariant(d, cfg, InvariantMethod::ClosedForm)?;
    let values = sample
        .points
        .iter()
        .map(|p| f0_hat_cached(d, norm(p)))
        .collect::<Result<Vec<_>>>()?;
    McEstimate::from_values(&values, 0, sample.tail_warnings)
}

/// Finite-horizon route to the same constant: per-path
/// |X^x(t)| - gamma_d t - f_0(|x|), whose mean converges to lambda_d for
/// every starting point.
pub fn estimate_lambda_from_moment(d: u32, x: &[f64], t: f64, cfg: &McConfig) -> Result<McEstimate> {
    if x.len() != d as usize {
        return Err(Error::DimensionMismatch { expected: d as usize, got: x.len() });
    }
    let gd = specfun::gamma_d(d)?;
    let f0_x = radial::f_0(d, norm(x), radial::default_rule())?;
    let values: Vec<f64> = flow_endpoints(d, cfg, t)?
        .into_iter()
        .map(|(m, n)| {
            let radius = x
                .iter()
                .zip(&n)
                .map(|(xi, ni)| {
                    let c = m * xi + ni;
                    c * c
                })
                .sum::<f64>()
                .sqrt();
            radius - gd * t - f0_x
        })
        .collect();
    McEstimate::from_values(&values, 0, 0)
}

/// MC estimate of the semigroup P_t w(x) = E[ w(X^x(t)) ].
pub fn semigroup_apply<F>(w: F, x: &[f64], t: f64, cfg: &McConfig) -> Result<McEstimate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let d = x.len() as u32;
    let values: Vec<f64> = flow_endpoints(d, cfg, t)?
        .into_iter()
        .map(|(m, n)| {
            let point: Vec<f64> = x.iter().zip(&n).map(|(xi, ni)| m * xi + ni).collect();
            w(&point)
        })
        .collect();
    McEstimate::from_values(&values, 0, 0)
}

/// The cone extension v(x) = |x| g(x/|x|), v(0) = 0.
pub fn cone_value(g: &BoundarySpec, x: &[f64]) -> Result<f64> {
    let r = norm(x);
    if r == 0.0 {
        return Ok(0.0);
    }
    let theta = harmonics::Direction::from_unnormalized(x.to_vec())?;
    Ok(r * g.evaluate(&theta)?)
}

/// Directional average over n_dirs of (P_t v(r theta) - u(r theta) - c t - b)^2,
/// where v is the cone extension of g and b = lambda_d * mean(g). One common
/// set of flow samples serves every direction (shared affine flow as a
/// common-random-number variance reduction).
pub fn lemma5_gap(
    g: &BoundarySpec,
    u: &EllipticSolution,
    lambda_d: f64,
    r: f64,
    t: f64,
    cfg: &McConfig,
    n_dirs: usize,
) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Precondition(format!("lemma5_gap needs r > 0, got {r}")));
    }
    let d = u.d;
    let b = lambda_d * harmonics::mean(g)?;
    let finals = flow_endpoints(d, cfg, t)?;
    let dirs = harmonics::sample_directions(d, n_dirs);
    let mut sq = Vec::with_capacity(dirs.len());
    for theta in &dirs {
        let x: Vec<f64> = theta.components().iter().map(|c| c * r).collect();
        let mut vals: Vec<f64> = finals
            .iter()
            .map(|(m, n)| {
                let point: Vec<f64> = x.iter().zip(n).map(|(xi, ni)| m * xi + ni).collect();
                cone_value(g, &point)
            })
            .collect::<Result<Vec<_>>>()?;
        let p_t_v = quad::pairwise_sum(&mut vals) / finals.len() as f64;
        let (u_val, _) = solver::evaluate(u, &x)?;
        let gap = p_t_v - u_val - u.c * t - b;
        sq.push(gap * gap);
    }
    Ok(quad::pairwise_sum(&mut sq) / dirs.len() as f64)
}

/// Counts paths violating the pathwise midpoint inequality
/// w(X^{ax+(1-a)y}(t)) <= a w(X^x(t)) + (1-a) w(X^y(t)) + 1e-12.
/// Zero for convex w, exactly, because each map x -> X^x(t) is affine.
pub fn convexity_coupling_check<F>(
    w: F,
    x: &[f64],
    y: &[f64],
    alpha: f64,
    t: f64,
    cfg: &McConfig,
) -> Result<usize>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Precondition(format!("alpha must be in [0, 1], got {alpha}")));
    }
    let d = x.len() as u32;
    let mid: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| alpha * xi + (1.0 - alpha) * yi)
        .collect();
    let mut violations = 0usize;
    for (m, n) in flow_endpoints(d, cfg, t)? {
        let push = |start: &[f64]| -> Vec<f64> {
            start.iter().zip(&n).map(|(si, ni)| m * si + ni).collect()
        };
        let lhs = w(&push(&mid));
        let rhs = alpha * w(&push(x)) + (1.0 - alpha) * w(&push(y));
        if lhs > rhs + 1e-12 {
            violations += 1;
        }
    }
    Ok(violations)
}

/// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|p, q| p.total_cmp(q));
    b.sort_by(|p, q| p.total_cmp(q));
    let (mut i, mut j) = (0usize, 0usize);
    let mut sup = 0.0f64;
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        let fa = i as f64 / a.len() as f64;
        let fb = j as f64 / b.len() as f64;
        sup = sup.max((fa - fb).abs());
    }
    sup
}
