//! Assembly of the series solution u(r theta) = sum_l f_l(r) g_l(theta),
//! with certified evaluation (partial sum plus a tail majorant), the
//! finite-difference residual of the elliptic equation, and the boundary-gap
//! and maximum-principle diagnostics.

use crate::error::{Error, Result};
use crate::harmonics::{
    self, BoundarySpec, DegreeBlock, Direction, HarmonicSpectrum,
};
use crate::radial::{self, RadialMode};
use crate::specfun;

/// Truncation cap for the series.
pub const MAX_TRUNCATION: u32 = 128;

/// Relative threshold below which a degree block is treated as numerically
/// absent (both for evaluation and for band-limit detection).
const NEGLIGIBLE: f64 = 1e-12;

/// The assembled series solution of (1/2) sum (delta_ij + x_i x_j) d^2_ij u = c.
#[derive(Debug, Clone)]
pub struct EllipticSolution {
    pub d: u32,
    pub spectrum: HarmonicSpectrum,
    /// Truncation degree L: degrees 0..=L are summed exactly.
    pub max_degree: u32,
    /// The right-hand constant c = gamma_d * (degree-0 coefficient).
    pub c: f64,
    /// Radial modes for l = 1..=L (the l = 0 mode is the inhomogeneous f_0).
    modes: Vec<RadialMode>,
    /// Majorant for sup-norms of the unseen degrees l > L.
    tail_sup: f64,
}

impl EllipticSolution {
    /// The tail majorant sum_{l > L} envelope(l) * supnorm(g_l) at radius R,
    /// using the geometric envelope and the stored sup-norm majorant. Zero
    /// for band-limited data.
    pub fn tail_bound(&self, radius: f64) -> f64 {
        tail_majorant(self.tail_sup, self.max_degree, radius)
    }
}

fn tail_majorant(tail_sup: f64, max_degree: u32, radius: f64) -> f64 {
    if tail_sup == 0.0 || radius == 0.0 {
        return 0.0;
    }
    let delta = radial::decay_delta(radius);
    tail_sup * radial::decay_envelope(0, radius, max_degree + 1) / (1.0 - delta)
}

/// The sup-norm majorant for unseen degrees, together with a band-limit test:
/// when the top quarter of the computed degrees is negligible relative to the
/// whole spectrum, the data is treated as band-limited and the majorant is 0.
fn tail_sup_estimate(spectrum: &HarmonicSpectrum) -> f64 {
    let sups = &spectrum.sup_norms;
    let overall = sups.iter().cloned().fold(0.0f64, f64::max);
    if overall == 0.0 {
        return 0.0;
    }
    let top_start = (sups.len() * 3) / 4;
    let top = sups[top_start.max(1)..]
        .iter()
        .cloned()
        .fold(0.0f64, f64::max);
    if top <= NEGLIGIBLE * overall {
        0.0
    } else {
        // Sup-norms on the supported catalog are nonincreasing past the first
        // few degrees; the running max over l >= 1 majorizes the unseen tail.
        sups[1..].iter().cloned().fold(0.0f64, f64::max)
    }
}

/// Builds the truncated series solution for boundary data g.
pub fn solve(g: &BoundarySpec, max_degree: u32) -> Result<EllipticSolution> {
    let d = g.d();
    let spectrum = harmonics::project(g, max_degree)?;
    let coef0 = match spectrum.blocks[0] {
        DegreeBlock::Fourier { cos_coef, .. } => cos_coef,
        DegreeBlock::Zonal { coef } => coef,
    };
    let c = specfun::gamma_d(d)? * coef0;
    let modes = (1..=max_degree)
        .map(|l| RadialMode::new(d, l))
        .collect::<Result<Vec<_>>>()?;
    // Estimate the tail from a full-depth projection: the truncated spectrum
    // alone cannot distinguish band-limited data (tail exactly zero) from a
    // genuinely decaying tail above max_degree.
    let probe = if max_degree < MAX_TRUNCATION {
        harmonics::project(g, MAX_TRUNCATION)?
    } else {
        spectrum.clone()
    };
    let tail_sup = tail_sup_estimate(&probe);
    Ok(EllipticSolution {
        d,
        spectrum,
        max_degree,
        c,
        modes,
        tail_sup,
    })
}

/// The right-hand constant c = gamma_d * mean(g).
pub fn constant_c(g: &BoundarySpec) -> Result<f64> {
    Ok(specfun::gamma_d(g.d())? * harmonics::mean(g)?)
}

/// The smallest truncation degree whose tail majorant at the given radius is
/// below 1e-8, capped at MAX_TRUNCATION.
pub fn default_truncation(g: &BoundarySpec, radius: f64) -> Result<u32> {
    let spectrum = harmonics::project(g, MAX_TRUNCATION)?;
    let tail_sup = tail_sup_estimate(&spectrum);
    // Never truncate below the band actually present in the data: for
    // band-limited g the majorant vanishes at every L, but the partial sum is
    // exact only once L covers the last significant degree.
    let overall = spectrum.sup_norms.iter().cloned().fold(0.0f64, f64::max);
    let band_top = spectrum
        .sup_norms
        .iter()
        .rposition(|&s| s > NEGLIGIBLE * overall)
        .unwrap_or(0) as u32;
    for max_degree in band_top..MAX_TRUNCATION {
        if tail_majorant(tail_sup, max_degree, radius) < 1e-8 {
            return Ok(max_degree);
        }
    }
    Ok(MAX_TRUNCATION)
}

/// Evaluates u at a point of R^d: the partial sum through degree L plus a
/// certified tail majorant at R = |x|. The value is exact (tail 0) for
/// band-limited data once L covers the band.
pub fn evaluate(u: &EllipticSolution, x: &[f64]) -> Result<(f64, f64)> {
    if x.len() != u.d as usize {
        return Err(Error::DimensionMismatch {
            expected: u.d as usize,
            got: x.len(),
        });
    }
    let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
    if r == 0.0 {
        return Ok((0.0, 0.0));
    }
    let theta = Direction::from_unnormalized(x.to_vec())?;
    let overall_sup = u
        .spectrum
        .sup_norms
        .iter()
        .cloned()
        .fold(0.0f64, f64::max)
        .max(1e-300);
    let mut value = 0.0;
    for l in 0..=u.max_degree {
        let li = l as usize;
        if u.spectrum.sup_norms[li] <= NEGLIGIBLE * 1e-3 * overall_sup {
            continue;
        }
        let angular = angular_component(&u.spectrum, l, &theta)?;
        let radial_val = if l == 0 {
            // The degree-0 block is a constant kappa; its radial profile is
            // f_0 with the boundary limit f_0(r)/r -> 1.
            radial::f_0(u.d, r, radial::default_rule())?
        } else {
            radial::f_l(&u.modes[li - 1], r)?
        };
        value += angular * radial_val;
    }
    Ok((value, u.tail_bound(r)))
}

/// g_l(theta): the stored degree-l component evaluated at theta, with the
/// degree-0 constant reported directly.
fn angular_component(s: &HarmonicSpectrum, l: u32, theta: &Direction) -> Result<f64> {
    match &s.blocks[l as usize] {
        DegreeBlock::Fourier { cos_coef, sin_coef } => {
            let phase = l as f64 * theta.angle();
            Ok(cos_coef * phase.cos() + sin_coef * phase.sin())
        }
        DegreeBlock::Zonal { .. } => {
            let axis = s
                .axis
                .as_ref()
                .ok_or_else(|| Error::FormMismatch("zonal spectrum lacks an axis".into()))?;
            s.zonal_component(l, theta.dot(axis))
        }
    }
}

/// |A u (x) - c| with A the generalized Ornstein-Uhlenbeck operator, via a
/// full central-difference Hessian with step h_fd * max(1, |x|); off-diagonal
/// entries use the four-point cross stencil.
pub fn residual(u: &EllipticSolution, x: &[f64], h_fd: f64) -> Result<f64> {
    if !(h_fd > 0.0) {
        return Err(Error::Precondition(format!("h_fd must be positive, got {h_fd}")));
    }
    let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
    if r <= h_fd {
        return Err(Error::Precondition(format!(
            "residual needs |x| > h_fd to keep the stencil away from the origin (|x| = {r})"
        )));
    }
    let d = u.d as usize;
    let h = h_fd * r.max(1.0);
    let val = |y: &[f64]| -> Result<f64> { Ok(evaluate(u, y)?.0) };
    let mut shifted = x.to_vec();
    let center = val(x)?;
    let mut operator = 0.0;
    for i in 0..d {
        // Diagonal: (u(x + h e_i) - 2 u(x) + u(x - h e_i)) / h^2.
        shifted[i] = x[i] + h;
        let up = val(&shifted)?;
        shifted[i] = x[i] - h;
        let dn = val(&shifted)?;
        shifted[i] = x[i];
        let h_ii = (up - 2.0 * center + dn) / (h * h);
        operator += 0.5 * (1.0 + x[i] * x[i]) * h_ii;
        for j in (i + 1)..d {
            // Off-diagonal four-point cross stencil.
            let mut cross = 0.0;
            for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                shifted[i] = x[i] + si * h;
                shifted[j] = x[j] + sj * h;
                cross += si * sj * val(&shifted)?;
            }
            shifted[i] = x[i];
            shifted[j] = x[j];
            let h_ij = cross / (4.0 * h * h);
            // The coefficient matrix is delta_ij + x_i x_j; both (i,j) and
            // (j,i) contribute.
            operator += x[i] * x[j] * h_ij;
        }
    }
    Ok((operator - u.c).abs())
}

/// max over n_dirs sampled directions of |u(r theta)/r - g(theta)|.
pub fn boundary_gap(
    u: &EllipticSolution,
    g: &BoundarySpec,
    r: f64,
    n_dirs: usize,
) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Precondition(format!("boundary_gap needs r > 0, got {r}")));
    }
    if n_dirs < 8 {
        return Err(Error::Precondition(format!(
            "boundary_gap needs at least 8 directions, got {n_dirs}"
        )));
    }
    let mut worst = 0.0f64;
    for theta in harmonics::sample_directions(u.d, n_dirs) {
        let x: Vec<f64> = theta.components().iter().map(|c| c * r).collect();
        let (val, _) = evaluate(u, &x)?;
        let gap = (val / r - g.evaluate(&theta)?).abs();
        worst = worst.max(gap);
    }
    Ok(worst)
}

/// max over the samples of |u(x)| / ((1 + |x|) * sup|g|): an empirical lower
/// bound for the constant K in the linear-growth maximum principle. Requires
/// mean(g) = 0.
pub fn max_principle_ratio(
    u: &EllipticSolution,
    g: &BoundarySpec,
    x_samples: &[Vec<f64>],
) -> Result<f64> {
    let m = harmonics::mean(g)?;
    if m.abs() > 1e-10 {
        return Err(Error::Precondition(format!(
            "max_principle_ratio needs mean(g) = 0, got {m}"
        )));
    }
    if x_samples.is_empty() {
        return Err(Error::Precondition("max_principle_ratio needs samples".into()));
    }
    let sup_g = harmonics::sample_directions(u.d, 256)
        .iter()
        .map(|theta| g.evaluate(theta).map(f64::abs))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0f64, f64::max);
    if sup_g == 0.0 {
        return Err(Error::Precondition("g vanishes on the sample grid".into()));
    }
    let mut worst = 0.0f64;
    for x in x_samples {
        let (val, _) = evaluate(u, x)?;
        let norm = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        worst = worst.max(val.abs() / ((1.0 + norm) * sup_g));
    }
    Ok(worst)
}

/// Log-spaced radii times quasi-uniform directions: the standard sampling set
/// for growth diagnostics.
pub fn growth_samples(d: u32, r_min: f64, r_max: f64, n_radii: usize, n_dirs: usize) -> Vec<Vec<f64>> {
    let dirs = harmonics::sample_directions(d, n_dirs);
    let mut out = Vec::with_capacity(n_radii * n_dirs);
    for k in 0..n_radii {
        let t = k as f64 / (n_radii - 1).max(1) as f64;
        let r = r_min * (r_max / r_min).powf(t);
        for dir in &dirs {
            out.push(dir.components().iter().map(|c| c * r).collect());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonics::{BuiltinName, SpectrumTerm, TermKind};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn builtin(d: u32, name: BuiltinName) -> BoundarySpec {
        BoundarySpec::Builtin { d, name }
    }

    #[test]
    fn constant_data_reduces_to_f0() {
        let g = BoundarySpec::constant(3, 1.0).unwrap();
        let u = solve(&g, 4).unwrap();
        assert_relative_eq!(u.c, specfun::gamma_d(3).unwrap(), max_relative = 1e-12);
        let (val, tail) = evaluate(&u, &[0.0, 0.0, 2.0]).unwrap();
        let f0 = radial::f_0(3, 2.0, radial::default_rule()).unwrap();
        assert_relative_eq!(val, f0, max_relative = 1e-12);
        assert_eq!(tail, 0.0);
    }

    #[test]
    fn cos_theta_solution_is_the_coordinate_function() {
        let u = solve(&builtin(2, BuiltinName::CosTheta), 4).unwrap();
        assert_abs_diff_eq!(u.c, 0.0, epsilon = 1e-12);
        let (val, tail) = evaluate(&u, &[3.0, 4.0]).unwrap();
        assert_abs_diff_eq!(val, 3.0, epsilon = 1e-10);
        assert_eq!(tail, 0.0);
    }

    #[test]
    fn solution_vanishes_at_origin() {
        for g in [
            builtin(2, BuiltinName::Cos2Theta),
            builtin(3, BuiltinName::AxisCoordSquared),
            BoundarySpec::constant(5, 2.0).unwrap(),
        ] {
            let u = solve(&g, 6).unwrap();
            let zero = vec![0.0; g.d() as usize];
            assert_eq!(evaluate(&u, &zero).unwrap(), (0.0, 0.0));
        }
    }

    #[test]
    fn constant_c_values() {
        let c2 = constant_c(&BoundarySpec::constant(2, 1.0).unwrap()).unwrap();
        assert_relative_eq!(c2, 0.5, max_relative = 1e-12);
        let c3 = constant_c(&BoundarySpec::constant(3, 1.0).unwrap()).unwrap();
        assert_relative_eq!(c3, 2.0 / std::f64::consts::PI, max_relative = 1e-12);
        let c0 = constant_c(&builtin(2, BuiltinName::CosTheta)).unwrap();
        assert_abs_diff_eq!(c0, 0.0, epsilon = 1e-13);
    }

    #[test]
    fn residual_vanishes_for_linear_solution() {
        let u = solve(&builtin(2, BuiltinName::CosTheta), 4).unwrap();
        for x in [[1.0, 0.5], [-2.0, 3.0], [0.3, -0.1]] {
            assert!(residual(&u, &x, 1e-3).unwrap() < 1e-8);
        }
    }

    #[test]
    fn residual_small_for_f0_and_single_mode_solutions() {
        let u = solve(&BoundarySpec::constant(3, 1.0).unwrap(), 2).unwrap();
        let x = [0.9, 0.9, 0.6]; // |x| = 1.5 approximately
        assert!(residual(&u, &x, 1e-3).unwrap() < 1e-5);

        let u = solve(&builtin(2, BuiltinName::Cos2Theta), 4).unwrap();
        assert!(residual(&u, &[1.0, 1.0], 1e-3).unwrap() < 1e-5);
    }

    #[test]
    fn boundary_gap_decreases_along_the_radius_sweep() {
        let g = builtin(2, BuiltinName::Cos2Theta);
        let u = solve(&g, 4).unwrap();
        let g1 = boundary_gap(&u, &g, 1.0, 64).unwrap();
        let g5 = boundary_gap(&u, &g, 5.0, 64).unwrap();
        let g50 = boundary_gap(&u, &g, 50.0, 64).unwrap();
        assert!(g50 < g5 && g5 < g1, "gaps: {g1}, {g5}, {g50}");

        let g = builtin(2, BuiltinName::CosTheta);
        let u = solve(&g, 4).unwrap();
        assert!(boundary_gap(&u, &g, 7.0, 64).unwrap() < 1e-12);
    }

    #[test]
    fn max_principle_ratio_behaviour() {
        let g = builtin(2, BuiltinName::CosTheta);
        let u = solve(&g, 4).unwrap();
        let samples = growth_samples(2, 0.2, 100.0, 12, 16);
        let ratio = max_principle_ratio(&u, &g, &samples).unwrap();
        assert!(ratio <= 1.0 + 1e-10, "ratio = {ratio}");

        // Scaling g scales both sides: the ratio is unchanged.
        let g2 = BoundarySpec::Spectrum {
            d: 2,
            terms: vec![SpectrumTerm { l: 2, kind: TermKind::Cos, coef: 10.0 }],
        };
        let g1 = BoundarySpec::Spectrum {
            d: 2,
            terms: vec![SpectrumTerm { l: 2, kind: TermKind::Cos, coef: 1.0 }],
        };
        let u1 = solve(&g1, 4).unwrap();
        let u2 = solve(&g2, 4).unwrap();
        let r1 = max_principle_ratio(&u1, &g1, &samples).unwrap();
        let r2 = max_principle_ratio(&u2, &g2, &samples).unwrap();
        assert_relative_eq!(r1, r2, max_relative = 1e-10);

        // Nonzero mean violates the precondition.
        let g = BoundarySpec::constant(2, 1.0).unwrap();
        let u = solve(&g, 2).unwrap();
        assert!(matches!(
            max_principle_ratio(&u, &g, &samples),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn linearity_of_the_series() {
        let g1 = BoundarySpec::Spectrum {
            d: 2,
            terms: vec![SpectrumTerm { l: 1, kind: TermKind::Cos, coef: 1.0 }],
        };
        let g2 = BoundarySpec::Spectrum {
            d: 2,
            terms: vec![SpectrumTerm { l: 3, kind: TermKind::Sin, coef: 1.0 }],
        };
        let combined = BoundarySpec::Spectrum {
            d: 2,
            terms: vec![
                SpectrumTerm { l: 1, kind: TermKind::Cos, coef: 2.0 },
                SpectrumTerm { l: 3, kind: TermKind::Sin, coef: -0.5 },
            ],
        };
        let u1 = solve(&g1, 6).unwrap();
        let u2 = solve(&g2, 6).unwrap();
        let uc = solve(&combined, 6).unwrap();
        for x in [[0.7, 0.2], [3.0, -1.0], [0.0, 5.0]] {
            let v1 = evaluate(&u1, &x).unwrap().0;
            let v2 = evaluate(&u2, &x).unwrap().0;
            let vc = evaluate(&uc, &x).unwrap().0;
            assert_abs_diff_eq!(vc, 2.0 * v1 - 0.5 * v2, epsilon = 1e-10);
        }
    }

    #[test]
    fn truncation_refinement_stays_within_the_tail_bound() {
        let g = builtin(2, BuiltinName::AbsCosTheta);
        let u_lo = solve(&g, 16).unwrap();
        let u_hi = solve(&g, 26).unwrap();
        for x in [[0.5, 0.5], [2.0, 1.0], [10.0, -3.0]] {
            let (v_lo, tail_lo) = evaluate(&u_lo, &x).unwrap();
            let (v_hi, tail_hi) = evaluate(&u_hi, &x).unwrap();
            let allowance = tail_lo.max(tail_hi);
            assert!(
                (v_lo - v_hi).abs() <= allowance,
                "difference {} exceeds tail allowance {allowance}",
                (v_lo - v_hi).abs()
            );
        }
    }

    #[test]
    fn tail_bound_nonincreasing_in_truncation_degree() {
        let g = builtin(2, BuiltinName::AbsCosTheta);
        let mut prev = f64::INFINITY;
        for max_degree in [8, 16, 32, 64] {
            let u = solve(&g, max_degree).unwrap();
            let tail = u.tail_bound(5.0);
            assert!(tail <= prev);
            prev = tail;
        }
        assert!(prev > 0.0);
    }

    #[test]
    fn default_truncation_is_certified_and_capped() {
        let g = builtin(2, BuiltinName::AbsCosTheta);
        let at_small = default_truncation(&g, 1.0).unwrap();
        let u = solve(&g, at_small).unwrap();
        assert!(u.tail_bound(1.0) < 1e-8);
        let at_large = default_truncation(&g, 1e6).unwrap();
        assert_eq!(at_large, MAX_TRUNCATION);
        // Band-limited data needs no tail, but the band itself is kept.
        assert_eq!(default_truncation(&builtin(2, BuiltinName::CosTheta), 50.0).unwrap(), 1);
    }

    #[test]
    fn zonal_solution_matches_manual_series() {
        let g = builtin(3, BuiltinName::AxisCoordSquared);
        let u = solve(&g, 4).unwrap();
        let x = [0.3, -0.2, 1.2];
        let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        let t = x[2] / r;
        let f0 = radial::f_0(3, r, radial::default_rule()).unwrap();
        let mode2 = RadialMode::new(3, 2).unwrap();
        let f2 = radial::f_l(&mode2, r).unwrap();
        // Manual series: mean 1/3 rides f_0; the zonal remainder t'^2 - 1/3
        // rides f_2, where t' is measured against the e_1 axis.
        let t1 = x[0] / r;
        let manual = f0 / 3.0 + f2 * (t1 * t1 - 1.0 / 3.0);
        let (val, _) = evaluate(&u, &x).unwrap();
        assert_relative_eq!(val, manual, max_relative = 1e-10);
        let _ = t;
    }

    #[test]
    fn residual_grid_spot_checks_across_dimensions() {
        for (g, x) in [
            (builtin(2, BuiltinName::Cos2Theta), vec![0.2, 0.1]),
            (builtin(3, BuiltinName::AxisCoordSquared), vec![2.0, -1.0, 0.5]),
            (builtin(5, BuiltinName::AxisCoord), vec![1.0, 1.0, 0.0, -2.0, 0.3]),
        ] {
            let u = solve(&g, 6).unwrap();
            let res = residual(&u, &x, 1e-3).unwrap();
            assert!(res < 1e-5, "residual {res} for {g:?} at {x:?}");
        }
    }
}
