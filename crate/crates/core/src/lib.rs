//! Series solutions of the elliptic equation for the generalized
//! Ornstein-Uhlenbeck operator with linear growth at infinity, plus the
//! Monte Carlo machinery that validates them: radial modes, spherical
//! harmonic projection, exit probabilities, invariant-measure sampling,
//! Feynman-Kac modes, and convexity diagnostics.

pub mod convexity;
pub mod diffusion;
pub mod error;
pub mod harmonics;
pub mod quad;
pub mod radial;
pub mod solver;
pub mod specfun;

pub use error::{Error, Result};
