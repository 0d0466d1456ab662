//! Numerical convexity verdicts for the solution u and the boundary cone
//! function v(x) = |x| g(x/|x|), plus the equivalence harness that treats
//! "u convex iff v convex" as a falsifiable prediction.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::harmonics::BoundarySpec;
use crate::solver::{self, EllipticSolution};

/// Outcome of a convexity check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    ConvexWithinTolerance,
    NonconvexWitnessFound,
}

/// A midpoint-convexity counterexample: w(alpha x + (1-alpha) y) exceeds the
/// chord by `violation`.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub alpha: f64,
    pub violation: f64,
}

/// Result of a convexity scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexityReport {
    pub verdict: Verdict,
    /// Minimum Hessian eigenvalue over the probed set; +infinity when the
    /// check did not probe Hessians (pure midpoint scan).
    pub min_hessian_eigenvalue: f64,
    pub witness: Option<Witness>,
}

/// The cone extension v(x) = |x| g(x/|x|), v(0) = 0; positively homogeneous
/// of degree one by construction.
pub fn cone_function(g: &BoundarySpec) -> Result<impl Fn(&[f64]) -> f64 + Sync + '_> {
    g.validate()?;
    Ok(move |x: &[f64]| crate::diffusion::cone_value(g, x).expect("cone evaluation failed"))
}

fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Result of a Hessian eigenvalue sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianScan {
    pub min_eigenvalue: f64,
    /// Probe point achieving the minimum.
    pub argmin: Vec<f64>,
    /// Probes whose function variation across the stencil was below 100x
    /// machine epsilon (FD conditioning concern).
    pub conditioning_warnings: usize,
}

/// Minimum over the probe points of the smallest eigenvalue of the
/// central-difference Hessian of w, with step h_fd.
pub fn hessian_min_eig<F>(w: &F, probes: &[Vec<f64>], h_fd: f64) -> Result<HessianScan>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if probes.is_empty() {
        return Err(Error::Precondition("hessian_min_eig needs probe points".into()));
    }
    if !(h_fd > 0.0) {
        return Err(Error::Precondition(format!("h_fd must be positive, got {h_fd}")));
    }
    let per_probe = map_indexed(probes.len(), |idx| {
        let x = &probes[idx];
        let d = x.len();
        let center = w(x);
        let mut shifted = x.clone();
        let mut hess = DMatrix::<f64>::zeros(d, d);
        let mut variation = 0.0f64;
        for i in 0..d {
            shifted[i] = x[i] + h_fd;
            let up = w(&shifted);
            shifted[i] = x[i] - h_fd;
            let dn = w(&shifted);
            shifted[i] = x[i];
            variation = variation.max((up - center).abs()).max((dn - center).abs());
            hess[(i, i)] = (up - 2.0 * center + dn) / (h_fd * h_fd);
            for j in (i + 1)..d {
                let mut cross = 0.0;
                for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                    shifted[i] = x[i] + si * h_fd;
                    shifted[j] = x[j] + sj * h_fd;
                    cross += si * sj * w(&shifted);
                }
                shifted[i] = x[i];
                shifted[j] = x[j];
                let h_ij = cross / (4.0 * h_fd * h_fd);
                hess[(i, j)] = h_ij;
                hess[(j, i)] = h_ij;
            }
        }
        let warn = variation < 100.0 * f64::EPSILON * (1.0 + center.abs());
        let eigen = hess.symmetric_eigen();
        let min = eigen.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        (min, warn)
    });
    let mut min_eigenvalue = f64::INFINITY;
    let mut argmin = probes[0].clone();
    let mut conditioning_warnings = 0;
    for (idx, (min, warn)) in per_probe.into_iter().enumerate() {
        if warn {
            conditioning_warnings += 1;
        }
        if min < min_eigenvalue {
            min_eigenvalue = min;
            argmin = probes[idx].clone();
        }
    }
    Ok(HessianScan {
        min_eigenvalue,
        argmin,
        conditioning_warnings,
    })
}

/// Deterministic source of midpoint triples (x, y, alpha) with x, y drawn
/// uniformly from the ball of the given radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripleSampler {
    pub d: u32,
    pub radius: f64,
    pub seed: u64,
}

impl TripleSampler {
    fn triple(&self, index: u64) -> (Vec<f64>, Vec<f64>, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        let mut point = || -> Vec<f64> {
            let v: Vec<f64> = (0..self.d)
                .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
                .collect();
            let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt().max(1e-300);
            let scale = self.radius * rng.gen::<f64>().powf(1.0 / self.d as f64) / norm;
            v.into_iter().map(|c| c * scale).collect()
        };
        let x = point();
        let y = point();
        let alpha = rng.gen::<f64>();
        (x, y, alpha)
    }
}

/// Sharpen a violating alpha by a ternary search of the midpoint-gap function
/// along the fixed segment.
fn refine_alpha<F>(w: &F, x: &[f64], y: &[f64], alpha0: f64) -> (f64, f64)
where
    F: Fn(&[f64]) -> f64,
{
    let wx = w(x);
    let wy = w(y);
    let gap = |alpha: f64| {
        let mid: Vec<f64> = x
            .iter()
            .zip(y)
            .map(|(xi, yi)| alpha * xi + (1.0 - alpha) * yi)
            .collect();
        w(&mid) - alpha * wx - (1.0 - alpha) * wy
    };
    let (mut lo, mut hi) = ((alpha0 - 0.2).max(0.0), (alpha0 + 0.2).min(1.0));
    for _ in 0..60 {
        let a = lo + (hi - lo) / 3.0;
        let b = hi - (hi - lo) / 3.0;
        if gap(a) < gap(b) {
            lo = a;
        } else {
            hi = b;
        }
    }
    let alpha = 0.5 * (lo + hi);
    (alpha, gap(alpha))
}

/// Scans n sampled triples for midpoint-convexity violations
/// w(alpha x + (1-alpha) y) <= alpha w(x) + (1-alpha) w(y) + tol and reports
/// the worst (refined) witness if any.
pub fn midpoint_scan<F>(w: &F, sampler: &TripleSampler, n: usize, tol: f64) -> ConvexityReport
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let gaps = map_indexed(n, |idx| {
        let (x, y, alpha) = sampler.triple(idx as u64);
        let mid: Vec<f64> = x
            .iter()
            .zip(&y)
            .map(|(xi, yi)| alpha * xi + (1.0 - alpha) * yi)
            .collect();
        let gap = w(&mid) - alpha * w(&x) - (1.0 - alpha) * w(&y);
        (gap, idx)
    });
    let worst = gaps
        .into_iter()
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .expect("midpoint_scan needs n >= 1");
    if worst.0 <= tol {
        return ConvexityReport {
            verdict: Verdict::ConvexWithinTolerance,
            min_hessian_eigenvalue: f64::INFINITY,
            witness: None,
        };
    }
    let (x, y, alpha0) = sampler.triple(worst.1 as u64);
    let (alpha, violation) = refine_alpha(w, &x, &y, alpha0);
    // Refinement can only improve the violation; fall back to the raw triple
    // if numerical flatness made it worse.
    let (alpha, violation) = if violation >= worst.0 {
        (alpha, violation)
    } else {
        (alpha0, worst.0)
    };
    ConvexityReport {
        verdict: Verdict::NonconvexWitnessFound,
        min_hessian_eigenvalue: f64::INFINITY,
        witness: Some(Witness { x, y, alpha, violation }),
    }
}

/// Probe/scan parameters for the Theorem-2 harness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeConfig {
    pub n_probes: usize,
    pub n_triples: usize,
    pub h_fd: f64,
    /// Ball radius for probes and triples.
    pub radius: f64,
    /// Exclusion radius around the origin for Hessian probes (cone functions
    /// are non-smooth there; the FD stencil of u is ill conditioned).
    pub exclusion: f64,
    pub seed: u64,
    /// Eigenvalues above -eig_tol count as convex (finite-difference noise
    /// floor).
    pub eig_tol: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            n_probes: 200,
            n_triples: 20_000,
            h_fd: 1e-3,
            radius: 0.8,
            exclusion: 0.05,
            seed: 0,
            eig_tol: 1e-3,
        }
    }
}

/// Deterministic probe points in the ball of cfg.radius, excluding the ball
/// of cfg.exclusion around the origin.
pub fn probe_points(d: u32, cfg: &ProbeConfig) -> Vec<Vec<f64>> {
    let sampler = TripleSampler {
        d,
        radius: cfg.radius,
        seed: cfg.seed ^ 0x9e37_79b9,
    };
    let mut out = Vec::with_capacity(cfg.n_probes);
    let mut index = 0u64;
    while out.len() < cfg.n_probes {
        let (x, _, _) = sampler.triple(index);
        index += 1;
        let norm = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm > cfg.exclusion {
            out.push(x);
        }
    }
    out
}

/// Runs the combined Hessian + midpoint check on a function.
fn check<F>(w: &F, d: u32, cfg: &ProbeConfig, midpoint_tol: f64) -> Result<ConvexityReport>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let probes = probe_points(d, cfg);
    let scan = hessian_min_eig(w, &probes, cfg.h_fd)?;
    let sampler = TripleSampler {
        d,
        radius: cfg.radius,
        seed: cfg.seed,
    };
    let mid = midpoint_scan(w, &sampler, cfg.n_triples, midpoint_tol);
    let nonconvex = scan.min_eigenvalue < -cfg.eig_tol || mid.witness.is_some();
    Ok(ConvexityReport {
        verdict: if nonconvex {
            Verdict::NonconvexWitnessFound
        } else {
            Verdict::ConvexWithinTolerance
        },
        min_hessian_eigenvalue: scan.min_eigenvalue,
        witness: mid.witness,
    })
}

/// Runs the convexity checks on both u (the series solution at truncation L)
/// and the cone function v, and compares verdicts. A disagreement on the
/// supported catalog falsifies the equivalence and must fail the build.
pub fn theorem2_harness(
    g: &BoundarySpec,
    max_degree: u32,
    cfg: &ProbeConfig,
) -> Result<(ConvexityReport, ConvexityReport, bool)> {
    let d = g.d();
    let u = solver::solve(g, max_degree)?;
    let scale = u_scale(&u, cfg.radius);
    // The u scan sees the truncated series; its midpoint tolerance absorbs
    // the certified truncation tail so that tail noise cannot masquerade as
    // nonconvexity.
    let tail = u.tail_bound(cfg.radius);
    let tol_u = 1e-9 * (1.0 + scale) + 2.0 * tail;
    let w_u = |x: &[f64]| solver::evaluate(&u, x).map(|(v, _)| v).unwrap_or(f64::NAN);
    let u_report = check(&w_u, d, cfg, tol_u)?;

    let v = cone_function(g)?;
    let tol_v = 1e-9 * (1.0 + cfg.radius);
    let v_report = check(&v, d, cfg, tol_v)?;

    let agree = u_report.verdict == v_report.verdict;
    Ok((u_report, v_report, agree))
}

fn u_scale(u: &EllipticSolution, radius: f64) -> f64 {
    u.spectrum
        .sup_norms
        .iter()
        .cloned()
        .fold(0.0f64, f64::max)
        * radius
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonics::BuiltinName;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn builtin(d: u32, name: BuiltinName) -> BoundarySpec {
        BoundarySpec::Builtin { d, name }
    }

    #[test]
    fn cone_function_closed_forms() {
        let g = BoundarySpec::constant(3, 1.0).unwrap();
        let v = cone_function(&g).unwrap();
        assert_relative_eq!(v(&[1.0, 2.0, 2.0]), 3.0, max_relative = 1e-14);
        assert_eq!(v(&[0.0, 0.0, 0.0]), 0.0);

        let g = builtin(2, BuiltinName::CosTheta);
        let v = cone_function(&g).unwrap();
        assert_relative_eq!(v(&[3.0, 4.0]), 3.0, max_relative = 1e-14);

        let g = builtin(2, BuiltinName::Cos2Theta);
        let v = cone_function(&g).unwrap();
        let x = [1.0f64, 2.0];
        let r = (5.0f64).sqrt();
        assert_relative_eq!(v(&x), (1.0 - 4.0) / r, max_relative = 1e-13);
    }

    #[test]
    fn cone_function_is_positively_homogeneous() {
        let g = builtin(2, BuiltinName::AbsCosTheta);
        let v = cone_function(&g).unwrap();
        let x = [0.3, -0.7];
        for lambda in [0.1, 0.5, 2.0, 10.0] {
            let scaled: Vec<f64> = x.iter().map(|c| c * lambda).collect();
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            assert!(
                (v(&scaled) - lambda * v(&x)).abs() < 1e-12 * (1.0 + lambda * r),
                "homogeneity broke at lambda = {lambda}"
            );
        }
    }

    #[test]
    fn hessian_min_eig_reference_values() {
        let probes = probe_points(2, &ProbeConfig::default());
        let sq = |x: &[f64]| x.iter().map(|c| c * c).sum::<f64>();
        let scan = hessian_min_eig(&sq, &probes, 1e-4).unwrap();
        assert_abs_diff_eq!(scan.min_eigenvalue, 2.0, epsilon = 1e-6);

        let linear = |x: &[f64]| x[0];
        let scan = hessian_min_eig(&linear, &probes, 1e-4).unwrap();
        assert_abs_diff_eq!(scan.min_eigenvalue, 0.0, epsilon = 1e-6);
    }

    #[test]
    fn solution_for_cos_2theta_has_a_negative_hessian_direction() {
        let u = solver::solve(&builtin(2, BuiltinName::Cos2Theta), 4).unwrap();
        let w = |x: &[f64]| solver::evaluate(&u, x).unwrap().0;
        let probes = probe_points(2, &ProbeConfig::default());
        let scan = hessian_min_eig(&w, &probes, 1e-3).unwrap();
        assert!(
            scan.min_eigenvalue < -1e-2,
            "expected strictly negative eigenvalue, got {}",
            scan.min_eigenvalue
        );
    }

    #[test]
    fn midpoint_scan_accepts_the_norm() {
        let w = |x: &[f64]| x.iter().map(|c| c * c).sum::<f64>().sqrt();
        let sampler = TripleSampler { d: 2, radius: 1.0, seed: 3 };
        let report = midpoint_scan(&w, &sampler, 20_000, 1e-12);
        assert_eq!(report.verdict, Verdict::ConvexWithinTolerance);
    }

    #[test]
    fn midpoint_scan_finds_the_cone_witness_for_cos_2theta() {
        let g = builtin(2, BuiltinName::Cos2Theta);
        let v = cone_function(&g).unwrap();
        // The explicit violation: v(0, 1) = v(0, -1) = -1 but the midpoint is
        // the origin where v = 0.
        let sampler = TripleSampler { d: 2, radius: 1.0, seed: 3 };
        let report = midpoint_scan(&v, &sampler, 20_000, 1e-9);
        assert_eq!(report.verdict, Verdict::NonconvexWitnessFound);
        let witness = report.witness.unwrap();
        assert!(
            witness.violation > 0.1,
            "violation only {}",
            witness.violation
        );
        // The stored witness must reproduce its violation on re-evaluation.
        let mid: Vec<f64> = witness
            .x
            .iter()
            .zip(&witness.y)
            .map(|(a, b)| witness.alpha * a + (1.0 - witness.alpha) * b)
            .collect();
        let replay = v(&mid) - witness.alpha * v(&witness.x) - (1.0 - witness.alpha) * v(&witness.y);
        assert_relative_eq!(replay, witness.violation, max_relative = 1e-10);
    }

    #[test]
    fn theorem2_catalog_cases_agree() {
        let cfg = ProbeConfig {
            n_triples: 5_000,
            n_probes: 100,
            ..ProbeConfig::default()
        };
        let (u_rep, v_rep, agree) =
            theorem2_harness(&BoundarySpec::constant(3, 1.0).unwrap(), 4, &cfg).unwrap();
        assert!(agree);
        assert_eq!(u_rep.verdict, Verdict::ConvexWithinTolerance);
        assert_eq!(v_rep.verdict, Verdict::ConvexWithinTolerance);

        let (u_rep, v_rep, agree) =
            theorem2_harness(&builtin(2, BuiltinName::CosTheta), 4, &cfg).unwrap();
        assert!(agree && u_rep.verdict == Verdict::ConvexWithinTolerance);
        drop(v_rep);

        let (u_rep, v_rep, agree) =
            theorem2_harness(&builtin(2, BuiltinName::Cos2Theta), 4, &cfg).unwrap();
        assert!(agree, "Theorem 2 disagreement for cos_2theta");
        assert_eq!(u_rep.verdict, Verdict::NonconvexWitnessFound);
        assert_eq!(v_rep.verdict, Verdict::NonconvexWitnessFound);
    }

    #[test]
    fn theorem2_convex_nonsmooth_case() {
        // g = |cos theta|: v(x) = |x_1| is convex; the solution must come out
        // convex as well (forward direction of the equivalence).
        let cfg = ProbeConfig {
            n_triples: 5_000,
            n_probes: 100,
            ..ProbeConfig::default()
        };
        let (u_rep, v_rep, agree) =
            theorem2_harness(&builtin(2, BuiltinName::AbsCosTheta), 64, &cfg).unwrap();
        assert!(agree, "u: {:?}, v: {:?}", u_rep.verdict, v_rep.verdict);
        assert_eq!(v_rep.verdict, Verdict::ConvexWithinTolerance);
    }

    #[test]
    fn verdicts_are_scale_invariant_and_stable() {
        let cfg = ProbeConfig {
            n_triples: 2_000,
            n_probes: 50,
            ..ProbeConfig::default()
        };
        let g1 = BoundarySpec::Zonal {
            d: 3,
            axis: crate::harmonics::Direction::axis(3, 0).unwrap(),
            profile_coeffs: vec![0.0, 0.0, 1.0],
        };
        let g2 = BoundarySpec::Zonal {
            d: 3,
            axis: crate::harmonics::Direction::axis(3, 0).unwrap(),
            profile_coeffs: vec![0.0, 0.0, 2.0],
        };
        let (u1, v1, a1) = theorem2_harness(&g1, 4, &cfg).unwrap();
        let (u2, v2, a2) = theorem2_harness(&g2, 4, &cfg).unwrap();
        assert!(a1 && a2);
        assert_eq!(u1.verdict, u2.verdict);
        assert_eq!(v1.verdict, v2.verdict);

        // Halving the FD step and doubling the samples keeps the verdict.
        let finer = ProbeConfig {
            h_fd: cfg.h_fd / 2.0,
            n_triples: 2 * cfg.n_triples,
            n_probes: 2 * cfg.n_probes,
            ..cfg
        };
        let (u1f, v1f, a1f) = theorem2_harness(&g1, 4, &finer).unwrap();
        assert!(a1f);
        assert_eq!(u1.verdict, u1f.verdict);
        assert_eq!(v1.verdict, v1f.verdict);
    }
}
