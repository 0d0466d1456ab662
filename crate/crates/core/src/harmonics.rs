//! Boundary data on the sphere S^{d-1}: full Fourier basis for d = 2, zonal
//! Gegenbauer basis for d >= 3, with projection, evaluation, and
//! Laplace-Beltrami eigenrelation checks.
//!
//! All inner products use the probability-normalized surface measure
//! (the measure of the whole sphere is 1); the normalization constant is
//! computed numerically by integrating 1, which guards against mistakes in
//! the weight constant.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::quad::QuadratureRule;

/// A unit vector on S^{d-1}.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction {
    components: Vec<f64>,
}

impl Direction {
    /// Builds a direction from components that must already be unit-norm
    /// (within 1e-12).
    pub fn new(components: Vec<f64>) -> Result<Self> {
        if components.len() < 2 {
            return Err(Error::Domain(format!(
                "Direction needs d >= 2 components, got {}",
                components.len()
            )));
        }
        let norm = components.iter().map(|c| c * c).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!(
                "Direction must be unit-norm, got |x| = {norm}"
            )));
        }
        Ok(Direction { components })
    }

    /// Normalizes an arbitrary nonzero vector onto the sphere.
    pub fn from_unnormalized(v: Vec<f64>) -> Result<Self> {
        let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Domain(format!(
                "cannot normalize a vector of norm {norm}"
            )));
        }
        Direction::new(v.into_iter().map(|c| c / norm).collect())
    }

    /// The d = 2 direction (cos theta, sin theta).
    pub fn from_angle(theta: f64) -> Self {
        Direction {
            components: vec![theta.cos(), theta.sin()],
        }
    }

    /// The coordinate axis e_k in dimension d.
    pub fn axis(d: u32, k: usize) -> Result<Self> {
        if k >= d as usize {
            return Err(Error::Domain(format!("axis index {k} out of range for d = {d}")));
        }
        let mut v = vec![0.0; d as usize];
        v[k] = 1.0;
        Direction::new(v)
    }

    pub fn d(&self) -> u32 {
        self.components.len() as u32
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    pub fn dot(&self, other: &Direction) -> f64 {
        self.components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a * b)
            .sum()
    }

    /// The planar angle atan2(x_2, x_1); only meaningful for d = 2.
    pub fn angle(&self) -> f64 {
        self.components[1].atan2(self.components[0])
    }
}

/// Names of the builtin boundary functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinName {
    /// g = 1 in any dimension.
    Constant,
    /// g(theta) = cos theta (d = 2 only).
    CosTheta,
    /// g(theta) = cos 2theta (d = 2 only).
    Cos2Theta,
    /// g(theta) = |cos theta| (d = 2 only).
    AbsCosTheta,
    /// g = <theta, e_1> in any dimension.
    AxisCoord,
    /// g = <theta, e_1>^2 for d >= 3.
    AxisCoordSquared,
}

impl BuiltinName {
    pub fn as_str(self) -> &'static str {
        match self {
            BuiltinName::Constant => "constant",
            BuiltinName::CosTheta => "cos_theta",
            BuiltinName::Cos2Theta => "cos_2theta",
            BuiltinName::AbsCosTheta => "abs_cos_theta",
            BuiltinName::AxisCoord => "axis_coord",
            BuiltinName::AxisCoordSquared => "axis_coord_squared",
        }
    }
}

impl FromStr for BuiltinName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(BuiltinName::Constant),
            "cos_theta" => Ok(BuiltinName::CosTheta),
            "cos_2theta" => Ok(BuiltinName::Cos2Theta),
            "abs_cos_theta" => Ok(BuiltinName::AbsCosTheta),
            "axis_coord" => Ok(BuiltinName::AxisCoord),
            "axis_coord_squared" => Ok(BuiltinName::AxisCoordSquared),
            other => Err(Error::Domain(format!("unknown builtin boundary function '{other}'"))),
        }
    }
}

/// A single Fourier term for the d = 2 spectrum form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumTerm {
    pub l: u32,
    pub kind: TermKind,
    pub coef: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TermKind {
    Cos,
    Sin,
}

/// Boundary data g on S^{d-1}, in one of three closed forms.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundarySpec {
    /// A named catalog function.
    Builtin { d: u32, name: BuiltinName },
    /// A finite Fourier sum (d = 2 only).
    Spectrum { d: u32, terms: Vec<SpectrumTerm> },
    /// A zonal function g(theta) = p(<theta, axis>) with p a polynomial given
    /// by coefficients in increasing powers of t.
    Zonal {
        d: u32,
        axis: Direction,
        profile_coeffs: Vec<f64>,
    },
}

impl BoundarySpec {
    /// The constant function g = kappa, as a degenerate zonal profile.
    pub fn constant(d: u32, kappa: f64) -> Result<Self> {
        Ok(BoundarySpec::Zonal {
            d,
            axis: Direction::axis(d, 0)?,
            profile_coeffs: vec![kappa],
        })
    }

    pub fn d(&self) -> u32 {
        match self {
            BoundarySpec::Builtin { d, .. } => *d,
            BoundarySpec::Spectrum { d, .. } => *d,
            BoundarySpec::Zonal { d, .. } => *d,
        }
    }

    /// Validates internal consistency: dimensions, builtin applicability, axis
    /// dimension, and (for spectra) the d = 2 restriction.
    pub fn validate(&self) -> Result<()> {
        let d = self.d();
        if d < 2 {
            return Err(Error::Domain(format!("boundary data needs d >= 2, got {d}")));
        }
        match self {
            BoundarySpec::Builtin { name, .. } => {
                let planar_only = matches!(
                    name,
                    BuiltinName::CosTheta | BuiltinName::Cos2Theta | BuiltinName::AbsCosTheta
                );
                if planar_only && d != 2 {
                    return Err(Error::FormMismatch(format!(
                        "builtin '{}' is defined for d = 2 only, got d = {d}",
                        name.as_str()
                    )));
                }
                if *name == BuiltinName::AxisCoordSquared && d < 3 {
                    return Err(Error::FormMismatch(format!(
                        "builtin 'axis_coord_squared' needs d >= 3, got d = {d}"
                    )));
                }
                Ok(())
            }
            BoundarySpec::Spectrum { .. } => {
                if d != 2 {
                    return Err(Error::FormMismatch(format!(
                        "the Fourier spectrum form is d = 2 only; for d = {d} use the zonal form"
                    )));
                }
                Ok(())
            }
            BoundarySpec::Zonal { axis, profile_coeffs, .. } => {
                if axis.d() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d as usize,
                        got: axis.d() as usize,
                    });
                }
                if profile_coeffs.is_empty() {
                    return Err(Error::Domain("zonal profile needs at least one coefficient".into()));
                }
                Ok(())
            }
        }
    }

    /// Evaluates g at a point of the sphere.
    pub fn evaluate(&self, theta: &Direction) -> Result<f64> {
        self.validate()?;
        if theta.d() != self.d() {
            return Err(Error::DimensionMismatch {
                expected: self.d() as usize,
                got: theta.d() as usize,
            });
        }
        let x = theta.components();
        match self {
            BoundarySpec::Builtin { name, .. } => Ok(match name {
                BuiltinName::Constant => 1.0,
                BuiltinName::CosTheta => x[0],
                BuiltinName::Cos2Theta => x[0] * x[0] - x[1] * x[1],
                BuiltinName::AbsCosTheta => x[0].abs(),
                BuiltinName::AxisCoord => x[0],
                BuiltinName::AxisCoordSquared => x[0] * x[0],
            }),
            BoundarySpec::Spectrum { terms, .. } => {
                let angle = theta.angle();
                Ok(terms
                    .iter()
                    .map(|t| {
                        let phase = t.l as f64 * angle;
                        match t.kind {
                            TermKind::Cos => t.coef * phase.cos(),
                            TermKind::Sin => t.coef * phase.sin(),
                        }
                    })
                    .sum())
            }
            BoundarySpec::Zonal { axis, profile_coeffs, .. } => {
                Ok(poly_eval(profile_coeffs, theta.dot(axis)))
            }
        }
    }

    /// For d >= 3, a closed-form zonal profile t -> g as a function of
    /// t = <theta, axis>, together with the axis. Errors with a form mismatch
    /// when g has no zonal closed form in d >= 3.
    fn zonal_profile(&self) -> Result<(Direction, Vec<f64>)> {
        match self {
            BoundarySpec::Builtin { d, name } => {
                let axis = Direction::axis(*d, 0)?;
                let coeffs = match name {
                    BuiltinName::Constant => vec![1.0],
                    BuiltinName::AxisCoord => vec![0.0, 1.0],
                    BuiltinName::AxisCoordSquared => vec![0.0, 0.0, 1.0],
                    other => {
                        return Err(Error::FormMismatch(format!(
                            "builtin '{}' has no zonal form in d >= 3",
                            other.as_str()
                        )))
                    }
                };
                Ok((axis, coeffs))
            }
            BoundarySpec::Spectrum { d, .. } => Err(Error::FormMismatch(format!(
                "Fourier spectrum form is not zonal in d = {d}"
            ))),
            BoundarySpec::Zonal { axis, profile_coeffs, .. } => {
                Ok((axis.clone(), profile_coeffs.clone()))
            }
        }
    }
}

fn poly_eval(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
}

/// One degree block of a projected spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DegreeBlock {
    /// d = 2: g_l(theta) = cos_coef cos(l theta) + sin_coef sin(l theta).
    Fourier { cos_coef: f64, sin_coef: f64 },
    /// d >= 3: g_l(theta) = coef * C_l^{(d-2)/2}(<theta, axis>) with the raw
    /// (unnormalized) Gegenbauer polynomial.
    Zonal { coef: f64 },
}

/// The spherical-harmonic projection of boundary data up to degree L.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicSpectrum {
    pub d: u32,
    /// The symmetry axis; present only for the zonal (d >= 3) basis.
    pub axis: Option<Direction>,
    /// Block for degree l at index l.
    pub blocks: Vec<DegreeBlock>,
    /// Per-degree sup-norm estimates of g_l on the sphere.
    pub sup_norms: Vec<f64>,
    /// Per-degree L^2 norms of g_l under the normalized measure.
    pub l2_norms: Vec<f64>,
}

impl HarmonicSpectrum {
    pub fn max_degree(&self) -> u32 {
        self.blocks.len() as u32 - 1
    }

    fn gegenbauer_alpha(&self) -> f64 {
        (self.d as f64 - 2.0) / 2.0
    }

    /// The degree-l component g_l as a function of t = <theta, axis>
    /// (d >= 3 only).
    pub fn zonal_component(&self, l: u32, t: f64) -> Result<f64> {
        match self.blocks.get(l as usize) {
            Some(DegreeBlock::Zonal { coef }) => {
                Ok(coef * crate::specfun::gegenbauer(l, self.gegenbauer_alpha(), t)?)
            }
            Some(DegreeBlock::Fourier { .. }) => Err(Error::FormMismatch(
                "zonal_component is for the d >= 3 basis".into(),
            )),
            None => Err(Error::Domain(format!("degree {l} not present in spectrum"))),
        }
    }
}

/// Number of trapezoid nodes used for the d = 2 Fourier projection. The
/// 4L + 16 count gives an exactness margin for band-limited data; the floor
/// keeps low-degree projections of non-smooth data (e.g. |cos theta|)
/// accurate, since the trapezoid aliasing error decays like the Fourier tail.
fn fourier_nodes(max_l: u32) -> usize {
    (4 * max_l as usize + 16).max(4096)
}

/// Quadrature nodes and weights for the zonal measure on t in [-1, 1] with
/// density proportional to (1 - t^2)^{(d-3)/2}, via the substitution
/// t = cos(phi). The substitution removes the endpoint singularity of the
/// weight for even d, so Gauss-Legendre in phi converges spectrally.
fn zonal_measure(d: u32, n: usize) -> Vec<(f64, f64)> {
    let rule = QuadratureRule::gauss_legendre(n);
    let half = std::f64::consts::PI / 2.0;
    rule.nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&u, &w)| {
            // Map [-1, 1] -> [0, pi].
            let phi = half * (u + 1.0);
            (phi.cos(), w * half * phi.sin().powi(d as i32 - 2))
        })
        .collect()
}

/// Projects g onto spherical harmonics of degree 0..=L.
///
/// For d = 2 this is trapezoidal Fourier quadrature (spectrally accurate for
/// periodic integrands); for d >= 3 the zonal coefficient is computed by
/// Gauss-Legendre quadrature in t = <theta, axis> against the weight
/// (1 - t^2)^{(d-3)/2}, normalized so the sphere has measure 1.
pub fn project(g: &BoundarySpec, max_l: u32) -> Result<HarmonicSpectrum> {
    g.validate()?;
    let d = g.d();
    if d == 2 {
        project_fourier(g, max_l)
    } else {
        project_zonal(g, max_l)
    }
}

fn project_fourier(g: &BoundarySpec, max_l: u32) -> Result<HarmonicSpectrum> {
    let n = fourier_nodes(max_l);
    let mut samples = Vec::with_capacity(n);
    for j in 0..n {
        let theta = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
        samples.push((theta, g.evaluate(&Direction::from_angle(theta))?));
    }
    let mut blocks = Vec::with_capacity(max_l as usize + 1);
    let mut sup_norms = Vec::with_capacity(max_l as usize + 1);
    let mut l2_norms = Vec::with_capacity(max_l as usize + 1);
    for l in 0..=max_l {
        let lf = l as f64;
        let mut c = 0.0;
        let mut s = 0.0;
        for &(theta, v) in &samples {
            c += v * (lf * theta).cos();
            s += v * (lf * theta).sin();
        }
        // Normalized measure dtheta/2pi; cos^2 and sin^2 average to 1/2 for
        // l >= 1, to 1 for l = 0.
        let scale = if l == 0 { 1.0 } else { 2.0 };
        c *= scale / n as f64;
        s *= scale / n as f64;
        if l == 0 {
            s = 0.0;
        }
        let amp = (c * c + s * s).sqrt();
        blocks.push(DegreeBlock::Fourier {
            cos_coef: c,
            sin_coef: s,
        });
        sup_norms.push(amp);
        l2_norms.push(if l == 0 { amp } else { amp / std::f64::consts::SQRT_2 });
    }
    Ok(HarmonicSpectrum {
        d: 2,
        axis: None,
        blocks,
        sup_norms,
        l2_norms,
    })
}

fn project_zonal(g: &BoundarySpec, max_l: u32) -> Result<HarmonicSpectrum> {
    let d = g.d();
    let (axis, profile) = g.zonal_profile()?;
    let alpha = (d as f64 - 2.0) / 2.0;
    // Nodes and weights with the sphere weight folded in, plus the
    // numerically computed normalization (integral of 1).
    let tw = zonal_measure(d, 2 * max_l as usize + 16);
    let z: f64 = tw.iter().map(|&(_, wt)| wt).sum();
    let inner = |f: &dyn Fn(f64) -> f64, h: &dyn Fn(f64) -> f64| -> f64 {
        let mut acc = 0.0;
        for &(t, wt) in &tw {
            acc += wt * f(t) * h(t);
        }
        acc / z
    };
    let gval = |t: f64| poly_eval(&profile, t);
    let mut blocks = Vec::with_capacity(max_l as usize + 1);
    let mut sup_norms = Vec::with_capacity(max_l as usize + 1);
    let mut l2_norms = Vec::with_capacity(max_l as usize + 1);
    for l in 0..=max_l {
        let basis = |t: f64| crate::specfun::gegenbauer(l, alpha, t).unwrap_or(f64::NAN);
        let norm_sq = inner(&basis, &basis);
        if !norm_sq.is_finite() || norm_sq <= 0.0 {
            return Err(Error::Quadrature {
                achieved: norm_sq,
                requested: 0.0,
            });
        }
        // Projection coefficient against the raw Gegenbauer polynomial.
        let coef = inner(&gval, &basis) / norm_sq;
        blocks.push(DegreeBlock::Zonal { coef });
        l2_norms.push(coef.abs() * norm_sq.sqrt());
        // Gegenbauer polynomials with alpha > 0 peak at t = +-1.
        let sup = coef.abs() * basis(1.0).abs().max(basis(-1.0).abs());
        sup_norms.push(sup);
    }
    Ok(HarmonicSpectrum {
        d,
        axis: Some(axis),
        blocks,
        sup_norms,
        l2_norms,
    })
}

/// Evaluates a projected spectrum at a point of the sphere: sum of g_l(theta)
/// over the stored degrees.
pub fn evaluate_spectrum(s: &HarmonicSpectrum, theta: &Direction) -> Result<f64> {
    if theta.d() != s.d {
        return Err(Error::DimensionMismatch {
            expected: s.d as usize,
            got: theta.d() as usize,
        });
    }
    match (&s.axis, s.d) {
        (None, 2) => {
            let angle = theta.angle();
            let mut acc = 0.0;
            for (l, block) in s.blocks.iter().enumerate() {
                if let DegreeBlock::Fourier { cos_coef, sin_coef } = block {
                    let phase = l as f64 * angle;
                    acc += cos_coef * phase.cos() + sin_coef * phase.sin();
                }
            }
            Ok(acc)
        }
        (Some(axis), _) => {
            let t = theta.dot(axis);
            let mut acc = 0.0;
            for l in 0..s.blocks.len() as u32 {
                acc += s.zonal_component(l, t)?;
            }
            Ok(acc)
        }
        _ => Err(Error::FormMismatch("spectrum lacks an axis for d >= 3".into())),
    }
}

/// The mean of g under the normalized sphere measure; equals the l = 0 block
/// of the projection.
pub fn mean(g: &BoundarySpec) -> Result<f64> {
    let s = project(g, 0)?;
    Ok(match s.blocks[0] {
        DegreeBlock::Fourier { cos_coef, .. } => cos_coef,
        DegreeBlock::Zonal { coef } => coef, // C_0 = 1
    })
}

/// Finite-difference residual of the Laplace-Beltrami eigenrelation
/// Delta g_l = -l(l+d-2) g_l for the degree-l block of s.
///
/// For d = 2 this is the max over a theta-grid of |g_l'' + l^2 g_l|; for
/// d >= 3 (zonal) the residual of (1-t^2) G'' - (d-1) t G' + l(l+d-2) G on an
/// interior t-grid.
pub fn eigenrelation_residual(s: &HarmonicSpectrum, l: u32) -> Result<f64> {
    let block = s
        .blocks
        .get(l as usize)
        .ok_or_else(|| Error::Domain(format!("degree {l} not present in spectrum")))?;
    let h = 1e-4;
    let eig = (l * (l + s.d - 2)) as f64;
    let mut worst = 0.0f64;
    match block {
        DegreeBlock::Fourier { cos_coef, sin_coef } => {
            let g = |theta: f64| {
                let phase = l as f64 * theta;
                cos_coef * phase.cos() + sin_coef * phase.sin()
            };
            for j in 0..64 {
                let theta = 2.0 * std::f64::consts::PI * j as f64 / 64.0;
                let second = (g(theta + h) - 2.0 * g(theta) + g(theta - h)) / (h * h);
                worst = worst.max((second + eig * g(theta)).abs());
            }
        }
        DegreeBlock::Zonal { .. } => {
            for j in 0..=36 {
                let t = -0.9 + 1.8 * j as f64 / 36.0;
                let gm = s.zonal_component(l, t - h)?;
                let g0 = s.zonal_component(l, t)?;
                let gp = s.zonal_component(l, t + h)?;
                let first = (gp - gm) / (2.0 * h);
                let second = (gp - 2.0 * g0 + gm) / (h * h);
                let res = (1.0 - t * t) * second - (s.d as f64 - 1.0) * t * first + eig * g0;
                worst = worst.max(res.abs());
            }
        }
    }
    Ok(worst)
}

/// A deterministic, quasi-uniform sample of n directions on S^{d-1}: evenly
/// spaced angles for d = 2, seeded Gaussian directions otherwise. The same
/// arguments always give the same directions.
pub fn sample_directions(d: u32, n: usize) -> Vec<Direction> {
    use rand::{Rng, SeedableRng};
    if d == 2 {
        return (0..n)
            .map(|j| Direction::from_angle(2.0 * std::f64::consts::PI * j as f64 / n as f64))
            .collect();
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5_0F_AC_E5);
    let normal = rand_distr::StandardNormal;
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(normal)).collect();
        if let Ok(dir) = Direction::from_unnormalized(v) {
            out.push(dir);
        }
    }
    out
}

/// The squared L^2 norm of g under the normalized measure, by quadrature.
/// Used for Parseval checks.
pub fn l2_norm_sq(g: &BoundarySpec) -> Result<f64> {
    g.validate()?;
    if g.d() == 2 {
        let n = 1024;
        let mut acc = 0.0;
        for j in 0..n {
            let theta = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
            let v = g.evaluate(&Direction::from_angle(theta))?;
            acc += v * v;
        }
        Ok(acc / n as f64)
    } else {
        let (_, profile) = g.zonal_profile()?;
        let tw = zonal_measure(g.d(), 2 * profile.len() + 32);
        let mut num = 0.0;
        let mut den = 0.0;
        for &(t, wt) in &tw {
            let v = poly_eval(&profile, t);
            num += wt * v * v;
            den += wt;
        }
        Ok(num / den)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn builtin(d: u32, name: BuiltinName) -> BoundarySpec {
        BoundarySpec::Builtin { d, name }
    }

    #[test]
    fn cos_theta_projects_onto_single_mode() {
        let s = project(&builtin(2, BuiltinName::CosTheta), 8).unwrap();
        for (l, block) in s.blocks.iter().enumerate() {
            let DegreeBlock::Fourier { cos_coef, sin_coef } = block else {
                panic!("expected Fourier block");
            };
            if l == 1 {
                assert_abs_diff_eq!(*cos_coef, 1.0, epsilon = 1e-12);
            } else {
                assert!(cos_coef.abs() < 1e-12 && sin_coef.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_projects_onto_degree_zero() {
        for d in [2u32, 3, 5] {
            let g = BoundarySpec::constant(d, 2.5).unwrap();
            let s = project(&g, 6).unwrap();
            assert_abs_diff_eq!(s.l2_norms[0], 2.5, epsilon = 1e-12);
            for l in 1..=6 {
                assert!(s.l2_norms[l].abs() < 1e-12, "leak at d = {d}, l = {l}");
            }
        }
    }

    #[test]
    fn axis_coord_squared_splits_into_mean_and_degree_two() {
        let g = builtin(3, BuiltinName::AxisCoordSquared);
        let s = project(&g, 4).unwrap();
        // mean of <theta,e>^2 over S^2 is 1/3, and the remainder t^2 - 1/3 is
        // an exact degree-2 zonal harmonic.
        let DegreeBlock::Zonal { coef } = s.blocks[0] else { panic!() };
        assert_abs_diff_eq!(coef, 1.0 / 3.0, epsilon = 1e-12);
        let t = 0.42;
        let g2 = s.zonal_component(2, t).unwrap();
        assert_abs_diff_eq!(g2, t * t - 1.0 / 3.0, epsilon = 1e-12);
        assert!(s.l2_norms[1].abs() < 1e-13 && s.l2_norms[3].abs() < 1e-13);
    }

    #[test]
    fn project_then_evaluate_reproduces_a_fourier_sum() {
        let g = BoundarySpec::Spectrum {
            d: 2,
            terms: vec![
                SpectrumTerm { l: 1, kind: TermKind::Cos, coef: 1.0 },
                SpectrumTerm { l: 3, kind: TermKind::Sin, coef: 0.5 },
            ],
        };
        let s = project(&g, 8).unwrap();
        let theta = Direction::from_angle(0.7);
        let direct = (0.7f64).cos() + 0.5 * (3.0 * 0.7f64).sin();
        assert_abs_diff_eq!(evaluate_spectrum(&s, &theta).unwrap(), direct, epsilon = 1e-10);
    }

    #[test]
    fn evaluate_spectrum_rejects_dimension_mismatch() {
        let s = project(&builtin(2, BuiltinName::CosTheta), 2).unwrap();
        let theta = Direction::axis(3, 2).unwrap();
        assert!(matches!(
            evaluate_spectrum(&s, &theta),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn zero_spectrum_evaluates_to_zero() {
        let g = BoundarySpec::Spectrum { d: 2, terms: vec![] };
        let s = project(&g, 4).unwrap();
        let v = evaluate_spectrum(&s, &Direction::from_angle(1.3)).unwrap();
        assert_abs_diff_eq!(v, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn mean_values() {
        assert_abs_diff_eq!(
            mean(&BoundarySpec::constant(3, 3.0).unwrap()).unwrap(),
            3.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(mean(&builtin(2, BuiltinName::CosTheta)).unwrap(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(
            mean(&builtin(3, BuiltinName::AxisCoordSquared)).unwrap(),
            1.0 / 3.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn abs_cos_theta_mean_matches_closed_form() {
        // (1/2pi) int |cos theta| = 2/pi.
        let m = mean(&builtin(2, BuiltinName::AbsCosTheta)).unwrap();
        assert_relative_eq!(m, 2.0 / std::f64::consts::PI, max_relative = 1e-6);
    }

    #[test]
    fn eigenrelation_residuals_are_small() {
        let s2 = project(&builtin(2, BuiltinName::CosTheta), 4).unwrap();
        assert!(eigenrelation_residual(&s2, 1).unwrap() < 1e-6);
        assert!(eigenrelation_residual(&s2, 0).unwrap() < 1e-12);

        let s3 = project(&builtin(3, BuiltinName::AxisCoordSquared), 4).unwrap();
        assert!(eigenrelation_residual(&s3, 2).unwrap() < 1e-6);
        assert!(eigenrelation_residual(&s3, 0).unwrap() < 1e-12);
    }

    #[test]
    fn parseval_inequality_holds_with_near_equality_for_band_limited_g() {
        let g = BoundarySpec::Spectrum {
            d: 2,
            terms: vec![
                SpectrumTerm { l: 0, kind: TermKind::Cos, coef: 0.3 },
                SpectrumTerm { l: 2, kind: TermKind::Cos, coef: -1.1 },
                SpectrumTerm { l: 5, kind: TermKind::Sin, coef: 0.7 },
            ],
        };
        let s = project(&g, 8).unwrap();
        let sum: f64 = s.l2_norms.iter().map(|n| n * n).sum();
        let total = l2_norm_sq(&g).unwrap();
        assert!(sum <= total + 1e-8);
        assert_abs_diff_eq!(sum, total, epsilon = 1e-10);

        // A non-band-limited example keeps the inequality strict.
        let g = builtin(2, BuiltinName::AbsCosTheta);
        let s = project(&g, 8).unwrap();
        let sum: f64 = s.l2_norms.iter().map(|n| n * n).sum();
        assert!(sum <= l2_norm_sq(&g).unwrap() + 1e-8);
    }

    #[test]
    fn zonal_parseval_inequality_holds() {
        let g = BoundarySpec::Zonal {
            d: 4,
            axis: Direction::axis(4, 0).unwrap(),
            profile_coeffs: vec![0.2, -1.0, 0.0, 0.5],
        };
        let s = project(&g, 6).unwrap();
        let sum: f64 = s.l2_norms.iter().map(|n| n * n).sum();
        let total = l2_norm_sq(&g).unwrap();
        assert!(sum <= total + 1e-8);
        // Band-limited (cubic) profile: equality within quadrature tolerance.
        assert_abs_diff_eq!(sum, total, epsilon = 1e-10);
    }

    #[test]
    fn sup_norms_grow_at_most_polynomially_on_the_catalog() {
        // Ratio test up to L = 60: sup-norms should not grow faster than a
        // fixed power of l on the builtin catalog.
        let s = project(&builtin(2, BuiltinName::AbsCosTheta), 60).unwrap();
        for l in 2..=60usize {
            let bound = 10.0 * (l as f64).powi(2).max(1.0);
            assert!(
                s.sup_norms[l] <= bound,
                "sup-norm at l = {l} was {}",
                s.sup_norms[l]
            );
        }
    }

    #[test]
    fn spectrum_form_rejected_for_d_three() {
        let g = BoundarySpec::Spectrum { d: 3, terms: vec![] };
        assert!(matches!(project(&g, 2), Err(Error::FormMismatch(_))));
    }

    #[test]
    fn direction_invariants() {
        assert!(Direction::new(vec![0.7, 0.7]).is_err());
        let v = Direction::from_unnormalized(vec![0.0, 0.0, 2.0]).unwrap();
        assert_abs_diff_eq!(v.components()[2], 1.0, epsilon = 1e-15);
        assert!(Direction::from_unnormalized(vec![0.0, 0.0]).is_err());
    }
}
