//! Model and sweep configuration files.

use std::path::Path;

use serde::Deserialize;
use serde_json::Value;

use qbdc_core::random_tau::TauDensity;
use qbdc_core::{Coupling, MaserParams, QuadratureRule, C64};

use crate::error::AppError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub lambda: f64,
    /// `[re, im]`.
    pub zeta: [f64; 2],
    #[serde(deserialize_with = "tagged")]
    pub coupling: CouplingConfig,
    pub dim: usize,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub theta: Option<ThetaConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CouplingConfig {
    Toy { alpha: f64, beta: f64 },
    /// The toy model with `alpha = 0`, `beta = 1`.
    Baby,
    Jc { g: f64, tau: f64 },
    JcRandom {
        g: f64,
        #[serde(deserialize_with = "tagged")]
        density: DensityConfig,
        #[serde(default)]
        quadrature: Option<QuadratureConfig>,
    },
    Explicit { alpha: Vec<f64>, beta: Vec<f64> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DensityConfig {
    Exponential { rate: f64 },
    Gamma { shape: f64, rate: f64 },
    TruncatedGaussian { mean: f64, sd: f64 },
    Tabulated { knots: Vec<[f64; 2]> },
}

/// Reads `{"kind": K, ...fields}` as the variant `K` of `T`. Unlike serde's
/// internal tagging this keeps field names in error messages.
fn tagged<'de, D, T>(de: D) -> Result<T, D::Error>
where
    D: serde::Deserializer<'de>,
    T: serde::de::DeserializeOwned,
{
    use serde::de::Error;
    let mut obj = match Value::deserialize(de)? {
        Value::Object(m) => m,
        other => return Err(D::Error::custom(format!("expected an object with a `kind` field, got {other}"))),
    };
    let kind = match obj.remove("kind") {
        Some(Value::String(k)) => k,
        Some(other) => return Err(D::Error::custom(format!("kind: expected a string, got {other}"))),
        None => return Err(D::Error::missing_field("kind")),
    };
    let external = if obj.is_empty() {
        Value::String(kind)
    } else {
        Value::Object([(kind, Value::Object(obj))].into_iter().collect())
    };
    serde_path_to_error::deserialize(external).map_err(|e| {
        let path = e.path().to_string();
        // The first segment is the variant name.
        let field = path.split_once('.').map(|(_, rest)| rest.to_string());
        match field {
            Some(f) => D::Error::custom(format!("{f}: {}", e.into_inner())),
            None => D::Error::custom(e.into_inner()),
        }
    })
}

/// Explicit composite rule; without it a rule is sized for the model.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureConfig {
    pub panels: usize,
    pub order: usize,
}

/// Inclusive evenly spaced range or an explicit list.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Range { start: f64, stop: f64, count: usize },
    List(Vec<f64>),
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::List(v) => v.clone(),
            Grid::Range { start, stop, count } => match count {
                0 => Vec::new(),
                1 => vec![*start],
                n => (0..*n).map(|i| start + (stop - start) * i as f64 / (*n - 1) as f64).collect(),
            },
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub lambda: Grid,
    /// `|zeta|` values.
    pub radius: Grid,
    /// `arg zeta` values in radians; defaults to `[0]`.
    #[serde(default)]
    pub angle: Option<Grid>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ThetaConfig {
    Vacuum,
    MaximallyMixed { support: usize },
    Number { n: usize },
}

impl std::str::FromStr for ThetaConfig {
    type Err = String;

    /// `vacuum`, `number:N` or `mixed:M`.
    fn from_str(s: &str) -> Result<Self, String> {
        let (head, arg) = s.split_once(':').unwrap_or((s, ""));
        let num = || arg.parse::<usize>().map_err(|e| format!("theta '{s}': {e}"));
        match head {
            "vacuum" if arg.is_empty() => Ok(ThetaConfig::Vacuum),
            "number" => Ok(ThetaConfig::Number { n: num()? }),
            "mixed" => Ok(ThetaConfig::MaximallyMixed { support: num()? }),
            _ => Err(format!("theta '{s}': expected vacuum, number:N or mixed:M")),
        }
    }
}

/// A model ready for evaluation.
#[derive(Debug, Clone)]
pub enum Model {
    Maser(MaserParams),
    RandomTime { lambda: f64, zeta: C64, g: f64, density: TauDensity, quadrature: Option<QuadratureConfig> },
}

impl ModelConfig {
    pub fn from_json(text: &str) -> Result<Self, AppError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            AppError::Config(format!("{path}: {}", e.into_inner()))
        })
    }

    pub fn load(path: &Path) -> Result<Self, AppError> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn zeta(&self) -> C64 {
        C64::new(self.zeta[0], self.zeta[1])
    }

    pub fn model(&self) -> Result<Model, AppError> {
        self.model_at(self.lambda, self.zeta())
    }

    /// The configured model with `lambda` and `zeta` replaced.
    pub fn model_at(&self, lambda: f64, zeta: C64) -> Result<Model, AppError> {
        let field = |name: &str, e: qbdc_core::Error| AppError::Config(format!("{name}: {e}"));
        Ok(match &self.coupling {
            CouplingConfig::Toy { alpha, beta } => {
                Model::Maser(MaserParams::toy(lambda, zeta, *alpha, *beta).map_err(|e| field("coupling", e))?)
            }
            CouplingConfig::Baby => Model::Maser(MaserParams::baby(lambda, zeta).map_err(|e| field("coupling", e))?),
            CouplingConfig::Jc { g, tau } => Model::Maser(
                MaserParams::jaynes_cummings(lambda, zeta, *g, *tau).map_err(|e| field("coupling", e))?,
            ),
            CouplingConfig::Explicit { alpha, beta } => Model::Maser(
                MaserParams::new(lambda, zeta, Coupling::Explicit { alpha: alpha.clone(), beta: beta.clone() })
                    .map_err(|e| field("coupling", e))?,
            ),
            CouplingConfig::JcRandom { g, density, quadrature } => {
                // Validates lambda and zeta the same way as the fixed-time model.
                MaserParams::jaynes_cummings(lambda, zeta, *g, 1.0).map_err(|e| field("coupling", e))?;
                let density = match density {
                    DensityConfig::Exponential { rate } => TauDensity::exponential(*rate),
                    DensityConfig::Gamma { shape, rate } => TauDensity::gamma(*shape, *rate),
                    DensityConfig::TruncatedGaussian { mean, sd } => TauDensity::truncated_gaussian(*mean, *sd),
                    DensityConfig::Tabulated { knots } => {
                        TauDensity::tabulated(knots.iter().map(|k| (k[0], k[1])).collect())
                    }
                }
                .map_err(|e| field("coupling.density", e))?;
                Model::RandomTime { lambda, zeta, g: *g, density, quadrature: *quadrature }
            }
        })
    }
}

impl Model {
    pub fn lambda(&self) -> f64 {
        match self {
            Model::Maser(p) => p.lambda(),
            Model::RandomTime { lambda, .. } => *lambda,
        }
    }

    pub fn zeta(&self) -> C64 {
        match self {
            Model::Maser(p) => p.zeta(),
            Model::RandomTime { zeta, .. } => *zeta,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Model::Maser(p) => match p.coupling() {
                Coupling::Toy { .. } => "toy",
                Coupling::JaynesCummings { .. } => "jc",
                Coupling::Explicit { .. } => "explicit",
            },
            Model::RandomTime { .. } => "jc_random",
        }
    }

    /// Quadrature rule for a truncation of size `dim`.
    pub fn rule(&self, dim: usize) -> Option<Result<QuadratureRule, qbdc_core::Error>> {
        match self {
            Model::Maser(_) => None,
            Model::RandomTime { g, density, quadrature, .. } => {
                let omega = 2.0 * g * (dim as f64).sqrt();
                Some(match quadrature {
                    Some(q) => QuadratureRule::composite(density, q.panels, q.order, omega),
                    None => QuadratureRule::for_density(density, omega),
                })
            }
        }
    }
}
