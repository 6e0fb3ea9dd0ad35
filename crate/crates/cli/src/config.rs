//! JSON run configuration. Unknown keys are rejected so typos fail
//! loudly instead of silently using a default.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use sensilogit_core::model::OddsStructure;

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Columns {
    pub panellist: String,
    pub formulation: String,
    pub attribute: String,
    pub response: String,
}

impl Default for Columns {
    fn default() -> Self {
        Columns {
            panellist: "panellist".into(),
            formulation: "formulation".into(),
            attribute: "attribute".into(),
            response: "response".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OddsName {
    Proportional,
    NonProportional,
}

impl From<OddsName> for OddsStructure {
    fn from(o: OddsName) -> Self {
        match o {
            OddsName::Proportional => OddsStructure::Proportional,
            OddsName::NonProportional => OddsStructure::NonProportional,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelBlock {
    pub random_intercept: bool,
    pub formulation_odds: OddsName,
    pub attribute_odds: OddsName,
    pub include_formulation: bool,
    pub include_attribute: bool,
}

impl Default for ModelBlock {
    fn default() -> Self {
        ModelBlock {
            random_intercept: true,
            formulation_odds: OddsName::Proportional,
            attribute_odds: OddsName::Proportional,
            include_formulation: true,
            include_attribute: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AveragingName {
    Conditional,
    Population,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitOptionsBlock {
    pub quad_order: usize,
    pub max_iter: usize,
    pub grad_tol: f64,
    /// acceptance threshold category for P(Y >= threshold)
    pub threshold: usize,
    pub averaging: AveragingName,
    pub profile_level: f64,
    /// grid size for the profile trace file (0 skips the trace)
    pub profile_points: usize,
}

impl Default for FitOptionsBlock {
    fn default() -> Self {
        FitOptionsBlock {
            quad_order: 15,
            max_iter: 300,
            grad_tol: 1e-5,
            threshold: 4,
            averaging: AveragingName::Population,
            profile_level: 0.95,
            profile_points: 9,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub data: PathBuf,
    #[serde(default)]
    pub columns: Columns,
    /// pinned level orders; first-appearance order when omitted
    #[serde(default)]
    pub formulation_order: Option<Vec<String>>,
    #[serde(default)]
    pub attribute_order: Option<Vec<String>>,
    /// number of categories in the input file
    pub scale: usize,
    /// optional collapse map, e.g. {"9": 5, "8": 5, ...}
    #[serde(default)]
    pub collapse: Option<BTreeMap<String, usize>>,
    #[serde(default)]
    pub model: ModelBlock,
    #[serde(default)]
    pub options: FitOptionsBlock,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioBlock {
    pub pattern: String,
    #[serde(default = "default_panellists")]
    pub n_panellists: usize,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_one")]
    pub sigma_u: f64,
    #[serde(default = "default_gap")]
    pub gap: f64,
    #[serde(default = "default_shift")]
    pub attribute_shift: f64,
    #[serde(default)]
    pub alpha: Option<Vec<f64>>,
}

fn default_panellists() -> usize {
    90
}
fn default_replicates() -> usize {
    200
}
fn default_one() -> f64 {
    1.0
}
fn default_gap() -> f64 {
    1.5
}
fn default_shift() -> f64 {
    0.5
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateOptionsBlock {
    pub quad_order: usize,
    pub alpha_level: f64,
    /// total fit failures tolerated before the run exits nonzero
    pub failure_budget: Option<usize>,
}

impl Default for SimulateOptionsBlock {
    fn default() -> Self {
        SimulateOptionsBlock {
            quad_order: 9,
            alpha_level: 0.05,
            failure_budget: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub scenarios: Vec<ScenarioBlock>,
    #[serde(default)]
    pub options: SimulateOptionsBlock,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConfig {
    /// treatments (formulations)
    pub t: usize,
    /// block size (servings per panellist)
    pub h: usize,
    pub panellists: usize,
    /// repeat the base design this many times; when omitted, chosen so
    /// the block count divides the panellist count if possible
    #[serde(default)]
    pub multiplier: Option<usize>,
    /// when given, only validate the quadruple (t, b, h, r)
    #[serde(default)]
    pub b: Option<usize>,
    #[serde(default)]
    pub r: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExploreConfig {
    pub data: PathBuf,
    #[serde(default)]
    pub columns: Columns,
    #[serde(default)]
    pub formulation_order: Option<Vec<String>>,
    #[serde(default)]
    pub attribute_order: Option<Vec<String>>,
    pub scale: usize,
    #[serde(default)]
    pub collapse: Option<BTreeMap<String, usize>>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

pub fn load_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
}
