//! Declarative run configuration: strict JSON/TOML parsing, CLI overrides,
//! and resolution into validated domain objects.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use ou_elliptic::harmonics::{BoundarySpec, BuiltinName, Direction, SpectrumTerm, TermKind};

use crate::CliError;

/// Top-level pipeline selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Solve,
    Verify,
    Simulate,
    Convexity,
}

impl std::str::FromStr for Command {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "solve" => Ok(Command::Solve),
            "verify" => Ok(Command::Verify),
            "simulate" => Ok(Command::Simulate),
            "convexity" => Ok(Command::Convexity),
            other => Err(CliError::Config(format!(
                "unknown command '{other}' (expected solve | verify | simulate | convexity)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Boundary data document; mirrors harmonics::BoundarySpec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundaryDoc {
    Builtin {
        name: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        d: Option<u32>,
    },
    Spectrum {
        d: u32,
        terms: Vec<TermDoc>,
    },
    Zonal {
        d: u32,
        axis: Vec<f64>,
        profile_coeffs: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermDoc {
    pub l: u32,
    pub kind: String,
    pub coef: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridDoc {
    pub radii: Vec<f64>,
    pub directions: usize,
}

impl Default for GridDoc {
    fn default() -> Self {
        GridDoc {
            radii: vec![1.0, 5.0, 50.0],
            directions: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McDoc {
    #[serde(default = "default_n_paths")]
    pub n_paths: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub worker_streams: usize,
}

fn default_n_paths() -> usize {
    10_000
}
fn default_dt() -> f64 {
    2e-4
}
fn default_t_max() -> f64 {
    1.0
}
fn default_seed() -> u64 {
    42
}

impl Default for McDoc {
    fn default() -> Self {
        McDoc {
            n_paths: default_n_paths(),
            dt: default_dt(),
            t_max: default_t_max(),
            seed: default_seed(),
            worker_streams: 0,
        }
    }
}

/// The configuration document as written by the user. Unknown fields are
/// rejected everywhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<u32>,
    pub boundary: BoundaryDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lmax: Option<u32>,
    #[serde(default)]
    pub grid: GridDoc,
    #[serde(default)]
    pub mc: McDoc,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    // Delivery details: excluded from serialization so that the config hash
    // (and hence the result files) depend only on the experiment itself.
    #[serde(default, skip_serializing)]
    pub output_path: Option<String>,
    #[serde(default, skip_serializing)]
    pub format: Option<OutputFormat>,
}

impl RunConfig {
    /// Parses a config file; the format is chosen by extension (.toml vs
    /// .json), defaulting to JSON.
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        let is_toml = path.extension().is_some_and(|e| e == "toml");
        if is_toml {
            toml::from_str(&text).map_err(|e| CliError::Config(format!("TOML config error: {e}")))
        } else {
            serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("JSON config error: {e}")))
        }
    }

    /// The working dimension: explicit `dim`, or the boundary's own.
    pub fn dimension(&self) -> Result<u32, CliError> {
        let boundary_d = match &self.boundary {
            BoundaryDoc::Builtin { d, .. } => *d,
            BoundaryDoc::Spectrum { d, .. } => Some(*d),
            BoundaryDoc::Zonal { d, .. } => Some(*d),
        };
        match (self.dim, boundary_d) {
            (Some(a), Some(b)) if a != b => Err(CliError::Config(format!(
                "field 'dim' ({a}) disagrees with the boundary dimension ({b})"
            ))),
            (Some(a), _) => Ok(a),
            (None, Some(b)) => Ok(b),
            (None, None) => Ok(2),
        }
    }

    /// Builds the validated boundary object.
    pub fn boundary_spec(&self) -> Result<BoundarySpec, CliError> {
        let d = self.dimension()?;
        let spec = match &self.boundary {
            BoundaryDoc::Builtin { name, .. } => {
                let name: BuiltinName = name
                    .parse()
                    .map_err(|e| CliError::Config(format!("field 'boundary.name': {e}")))?;
                BoundarySpec::Builtin { d, name }
            }
            BoundaryDoc::Spectrum { d, terms } => {
                let terms = terms
                    .iter()
                    .map(|t| {
                        let kind = match t.kind.as_str() {
                            "cos" => TermKind::Cos,
                            "sin" => TermKind::Sin,
                            other => {
                                return Err(CliError::Config(format!(
                                    "field 'boundary.terms.kind': expected cos | sin, got '{other}'"
                                )))
                            }
                        };
                        Ok(SpectrumTerm { l: t.l, kind, coef: t.coef })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                BoundarySpec::Spectrum { d: *d, terms }
            }
            BoundaryDoc::Zonal { d, axis, profile_coeffs } => {
                let axis = Direction::from_unnormalized(axis.clone())
                    .map_err(|e| CliError::Config(format!("field 'boundary.axis': {e}")))?;
                BoundarySpec::Zonal {
                    d: *d,
                    axis,
                    profile_coeffs: profile_coeffs.clone(),
                }
            }
        };
        spec.validate()
            .map_err(|e| CliError::Config(format!("field 'boundary': {e}")))?;
        Ok(spec)
    }

    pub fn mc_config(&self) -> ou_elliptic::diffusion::McConfig {
        ou_elliptic::diffusion::McConfig {
            n_paths: self.mc.n_paths,
            dt: self.mc.dt,
            t_max: self.mc.t_max,
            seed: self.mc.seed,
            worker_streams: self.mc.worker_streams,
        }
    }

    pub fn tolerance(&self, key: &str, default: f64) -> f64 {
        self.tolerances.get(key).copied().unwrap_or(default)
    }

    /// SHA-256 of the resolved configuration document.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let canonical = serde_json::to_string(self).expect("config serialization cannot fail");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
