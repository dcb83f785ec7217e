//! JSON run configuration.
//!
//! ```json
//! {
//!   "model": { "Q": [[-1, 1], [2, -2]], "mu": [-1, -3], "sigma": [1, 2] },
//!   "variant": { "kind": "sticky", "a": [1, 2] },
//!   "analysis": { "q": 1, "grid": { "min": 0, "max": 5, "points": 101, "spacing": "linear" } },
//!   "simulation": { "lambda": 1e4, "horizon": 1e4, "seed": 7, "replications": 4 }
//! }
//! ```
//!
//! Unknown keys are rejected everywhere. The variant block may carry the
//! parameters of several variants; `kind` (or `--variant`) picks one.

use std::path::Path;

use mmbm_core::model::{validate_model, validate_resample};
use mmbm_core::{BoundaryVariant, Matrix, MmbmModel, StickySpec, VariantTag, Vector};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelBlock,
    #[serde(default)]
    pub variant: VariantBlock,
    #[serde(default)]
    pub analysis: AnalysisBlock,
    pub simulation: Option<SimulationBlock>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantBlock {
    #[serde(default = "standard")]
    pub kind: String,
    pub a: Option<Vec<f64>>,
    #[serde(rename = "A")]
    pub big_a: Option<Vec<Vec<f64>>>,
    #[serde(rename = "Atilde")]
    pub a_tilde: Option<Vec<Vec<f64>>>,
    #[serde(rename = "Qtilde")]
    pub q_tilde: Option<Vec<Vec<f64>>>,
}

fn standard() -> String {
    "standard".into()
}

impl Default for VariantBlock {
    fn default() -> Self {
        Self { kind: standard(), a: None, big_a: None, a_tilde: None, q_tilde: None }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisBlock {
    #[serde(default = "one")]
    pub q: f64,
    #[serde(default)]
    pub grid: GridSpec,
}

impl Default for AnalysisBlock {
    fn default() -> Self {
        Self { q: 1.0, grid: GridSpec::default() }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { min: 0.0, max: 5.0, points: 101, spacing: Spacing::Linear }
    }
}

impl GridSpec {
    pub fn levels(&self) -> Result<Vec<f64>, CliError> {
        let bad = |msg: &str| CliError::invalid("analysis.grid", msg);
        if !(self.min.is_finite() && self.max.is_finite()) {
            return Err(bad("min and max must be finite"));
        }
        if self.min < 0.0 {
            return Err(bad("levels must be nonnegative"));
        }
        if self.points == 0 {
            return Err(bad("points must be at least 1"));
        }
        if self.points == 1 {
            return Ok(vec![self.min]);
        }
        if self.max <= self.min {
            return Err(bad("max must exceed min when points > 1"));
        }
        let n = (self.points - 1) as f64;
        let xs: Vec<f64> = match self.spacing {
            Spacing::Linear => (0..self.points).map(|k| self.min + (self.max - self.min) * k as f64 / n).collect(),
            Spacing::Log => {
                if self.min <= 0.0 {
                    return Err(bad("log spacing needs min > 0"));
                }
                let (a, b) = (self.min.ln(), self.max.ln());
                (0..self.points).map(|k| (a + (b - a) * k as f64 / n).exp()).collect()
            }
        };
        // pin the endpoints against rounding in exp/ln
        let mut xs = xs;
        xs[0] = self.min;
        *xs.last_mut().unwrap() = self.max;
        if xs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(bad("levels are not strictly increasing at this resolution"));
        }
        Ok(xs)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationBlock {
    pub lambda: f64,
    pub horizon: f64,
    pub seed: u64,
    #[serde(default = "one_rep")]
    pub replications: usize,
}

fn one_rep() -> usize {
    1
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| {
            let full = e.to_string();
            let at = format!(" at line {} column {}", e.line(), e.column());
            CliError::Parse {
                line: e.line(),
                column: e.column(),
                message: full.strip_suffix(&at).unwrap_or(&full).to_string(),
            }
        })
    }

    pub fn model(&self) -> Result<MmbmModel, CliError> {
        let q = matrix("model.Q", &self.model.q)?;
        let m = q.nrows();
        let mu = vector("model.mu", &self.model.mu, m)?;
        let sigma = vector("model.sigma", &self.model.sigma, m)?;
        validate_model(q, mu, sigma).map_err(|e| CliError::Field { field: "model".into(), source: e })
    }

    pub fn variant_tag(&self) -> Result<VariantTag, CliError> {
        self.variant
            .kind
            .parse()
            .map_err(|_| CliError::invalid("variant.kind", "expected standard, sticky or resampled"))
    }

    /// The variant named by `tag`, built from this config's parameters.
    pub fn variant(&self, tag: VariantTag, model: &MmbmModel) -> Result<BoundaryVariant, CliError> {
        let m = model.phases();
        let field = |f: &str, e| CliError::Field { field: format!("variant.{f}"), source: e };
        let v = match tag {
            VariantTag::Standard => BoundaryVariant::Standard,
            VariantTag::Sticky => {
                let a = self.variant.a.as_ref().ok_or_else(|| CliError::invalid("variant.a", "required for sticky"))?;
                let a = vector("variant.a", a, m)?;
                BoundaryVariant::Sticky(StickySpec::new(a, m).map_err(|e| field("a", e))?)
            }
            VariantTag::Resampled => {
                let need = |x: &Option<Vec<Vec<f64>>>, f: &str| {
                    x.as_ref()
                        .ok_or_else(|| CliError::invalid(&format!("variant.{f}"), "required for resampled"))
                        .and_then(|rows| matrix(&format!("variant.{f}"), rows))
                };
                let a = need(&self.variant.big_a, "A")?;
                let at = need(&self.variant.a_tilde, "Atilde")?;
                let qt = match &self.variant.q_tilde {
                    Some(rows) => Some(matrix("variant.Qtilde", rows)?),
                    None => None,
                };
                let spec = validate_resample(a, at, qt, m).map_err(|e| field("A", e))?;
                // the default Q̃ = AQ must also give valid rates
                spec.q_tilde_for(model).map_err(|e| field("Qtilde", e))?;
                BoundaryVariant::Resampled(spec)
            }
        };
        v.check_against(model).map_err(|e| field("kind", e))?;
        Ok(v)
    }

    /// Every variant this config has parameters for, standard first.
    pub fn available_variants(&self, model: &MmbmModel) -> Result<Vec<BoundaryVariant>, CliError> {
        let mut out = vec![BoundaryVariant::Standard];
        if self.variant.a.is_some() {
            out.push(self.variant(VariantTag::Sticky, model)?);
        }
        if self.variant.big_a.is_some() || self.variant.a_tilde.is_some() {
            out.push(self.variant(VariantTag::Resampled, model)?);
        }
        Ok(out)
    }
}

fn matrix(field: &str, rows: &[Vec<f64>]) -> Result<Matrix, CliError> {
    let n = rows.len();
    if n == 0 {
        return Err(CliError::invalid(field, "matrix is empty"));
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(CliError::invalid(field, &format!("row {i} has {} entries, expected {n}", r.len())));
    }
    Ok(Matrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn vector(field: &str, x: &[f64], m: usize) -> Result<Vector, CliError> {
    if x.len() != m {
        return Err(CliError::invalid(field, &format!("has {} entries, expected {m}", x.len())));
    }
    Ok(Vector::from_column_slice(x))
}
