//! Likelihood-ratio, Wald and chi-square tests.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::math;
use crate::mixed::{fit_mixed, MixedFitOptions};
use crate::model::{
    fit_fixed, EncodedData, FitOptions, FittedModel, ModelError, ModelSpec, OddsStructure,
};
use crate::special;

/// Small negative likelihood-ratio statistics up to this magnitude are
/// clamped to zero (optimiser noise); anything larger is an error.
const LRT_NOISE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct TestResult {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub null_desc: String,
    pub alt_desc: String,
}

/// Likelihood-ratio test of a nested pair of fits.
pub fn lrt(fit_null: &FittedModel, fit_alt: &FittedModel) -> Result<TestResult, InferenceError> {
    if fit_null.data_fingerprint != fit_alt.data_fingerprint {
        return Err(InferenceError::DifferentData);
    }
    if !fit_null.spec.is_nested_in(&fit_alt.spec) {
        return Err(InferenceError::NotNested);
    }
    let mut statistic = -2.0 * (fit_null.loglik - fit_alt.loglik);
    if statistic < -LRT_NOISE {
        return Err(InferenceError::NegativeStatistic { statistic });
    }
    if statistic < 0.0 {
        statistic = 0.0;
    }
    let df = fit_alt.spec.n_params() - fit_null.spec.n_params();
    let p_value = special::chi2_sf(statistic, df as f64);
    Ok(TestResult {
        statistic,
        df,
        p_value,
        null_desc: describe(&fit_null.spec),
        alt_desc: describe(&fit_alt.spec),
    })
}

fn describe(spec: &ModelSpec) -> String {
    let odds = if spec.is_proportional() {
        "proportional"
    } else {
        "non-proportional"
    };
    let mut terms = Vec::new();
    if spec.include_formulation {
        terms.push("formulation");
    }
    if spec.include_attribute {
        terms.push("attribute");
    }
    let terms = if terms.is_empty() {
        String::from("intercept-only")
    } else {
        terms.join(" + ")
    };
    let re = if spec.random_intercept {
        " + panellist intercept"
    } else {
        ""
    };
    format!("{odds} odds, {terms}{re}")
}

/// Fit the proportional (null) and non-proportional (alternative)
/// variants of a base spec and test proportionality.
pub fn test_proportionality(
    base: &ModelSpec,
    data: &EncodedData,
    fixed_opts: &FitOptions,
    mixed_opts: &MixedFitOptions,
) -> Result<(TestResult, FittedModel, FittedModel), InferenceError> {
    if base.j < 3 {
        return Err(InferenceError::ProportionalityVacuous { j: base.j });
    }
    let null_spec = ModelSpec {
        formulation_odds: OddsStructure::Proportional,
        attribute_odds: OddsStructure::Proportional,
        ..*base
    };
    let alt_spec = ModelSpec {
        formulation_odds: OddsStructure::NonProportional,
        attribute_odds: OddsStructure::NonProportional,
        ..*base
    };
    let fit_null = fit_spec(&null_spec, data, fixed_opts, mixed_opts)
        .map_err(|e| InferenceError::FitFailed {
            which: String::from("proportional (null)"),
            source: e,
        })?;
    let fit_alt = fit_spec(&alt_spec, data, fixed_opts, mixed_opts)
        .map_err(|e| InferenceError::FitFailed {
            which: String::from("non-proportional (alternative)"),
            source: e,
        })?;
    let test = lrt(&fit_null, &fit_alt)?;
    Ok((test, fit_null, fit_alt))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovariateTerm {
    Formulation,
    Attribute,
}

/// LRT of the spec without one term against the full spec.
pub fn test_covariate(
    spec: &ModelSpec,
    data: &EncodedData,
    term: CovariateTerm,
    fixed_opts: &FitOptions,
    mixed_opts: &MixedFitOptions,
) -> Result<TestResult, InferenceError> {
    let (present, cols) = match term {
        CovariateTerm::Formulation => (spec.include_formulation, spec.n_formulations - 1),
        CovariateTerm::Attribute => (spec.include_attribute, spec.n_attributes - 1),
    };
    if !present {
        return Err(InferenceError::TermAbsent);
    }
    if cols == 0 {
        return Err(InferenceError::SingleLevelTerm);
    }
    let null_spec = match term {
        CovariateTerm::Formulation => ModelSpec {
            include_formulation: false,
            ..*spec
        },
        CovariateTerm::Attribute => ModelSpec {
            include_attribute: false,
            ..*spec
        },
    };
    let fit_null = fit_spec(&null_spec, data, fixed_opts, mixed_opts)
        .map_err(|e| InferenceError::FitFailed {
            which: String::from("reduced (null)"),
            source: e,
        })?;
    let fit_alt = fit_spec(spec, data, fixed_opts, mixed_opts)
        .map_err(|e| InferenceError::FitFailed {
            which: String::from("full (alternative)"),
            source: e,
        })?;
    lrt(&fit_null, &fit_alt)
}

fn fit_spec(
    spec: &ModelSpec,
    data: &EncodedData,
    fixed_opts: &FitOptions,
    mixed_opts: &MixedFitOptions,
) -> Result<FittedModel, ModelError> {
    if spec.random_intercept {
        fit_mixed(spec, data, mixed_opts)
    } else {
        fit_fixed(spec, data, fixed_opts)
    }
}

/// Per-parameter Wald summary.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct WaldRow {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub z: f64,
    pub p_value: f64,
}

pub fn wald_tests(fit: &FittedModel) -> Result<Vec<WaldRow>, InferenceError> {
    let vcov = fit.vcov.as_ref().ok_or(InferenceError::VcovUnavailable)?;
    let min_eig = vcov.min_symmetric_eigenvalue();
    if min_eig < -1e-8 {
        return Err(InferenceError::VcovNotPsd { min_eig });
    }
    let estimates = fit.flat_estimates();
    let names = fit.spec.param_names();
    Ok(estimates
        .iter()
        .enumerate()
        .map(|(i, &est)| {
            let se = math::sqrt(vcov[(i, i)].max(0.0));
            let z = if se > 0.0 { est / se } else { 0.0 };
            WaldRow {
                name: names[i].clone(),
                estimate: est,
                std_error: se,
                z,
                p_value: if se > 0.0 {
                    special::normal_two_sided_p(z)
                } else {
                    1.0
                },
            }
        })
        .collect())
}

/// Pearson chi-square test of independence on a T x J count table.
pub fn chisq_association(table: &[Vec<u64>]) -> Result<TestResult, InferenceError> {
    let t = table.len();
    if t == 0 {
        return Err(InferenceError::EmptyTable);
    }
    let j = table[0].len();
    let row_sums: Vec<f64> = table.iter().map(|r| r.iter().sum::<u64>() as f64).collect();
    let col_sums: Vec<f64> = (0..j)
        .map(|c| table.iter().map(|r| r[c] as f64).sum())
        .collect();
    if let Some(r) = row_sums.iter().position(|&s| s == 0.0) {
        return Err(InferenceError::ZeroMargin {
            which: format!("row {}", r + 1),
        });
    }
    if let Some(c) = col_sums.iter().position(|&s| s == 0.0) {
        return Err(InferenceError::ZeroMargin {
            which: format!("column {}", c + 1),
        });
    }
    let total: f64 = row_sums.iter().sum();
    let mut statistic = 0.0;
    for (r, row) in table.iter().enumerate() {
        for (c, &o) in row.iter().enumerate() {
            let e = row_sums[r] * col_sums[c] / total;
            let d = o as f64 - e;
            statistic += d * d / e;
        }
    }
    let df = (t - 1) * (j - 1);
    Ok(TestResult {
        statistic,
        df,
        p_value: if df == 0 {
            1.0
        } else {
            special::chi2_sf(statistic, df as f64)
        },
        null_desc: String::from("rows and columns independent"),
        alt_desc: String::from("association present"),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum InferenceError {
    DifferentData,
    NotNested,
    NegativeStatistic { statistic: f64 },
    ProportionalityVacuous { j: usize },
    TermAbsent,
    SingleLevelTerm,
    VcovUnavailable,
    VcovNotPsd { min_eig: f64 },
    EmptyTable,
    ZeroMargin { which: String },
    FitFailed { which: String, source: ModelError },
}

impl core::fmt::Display for InferenceError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        use InferenceError::*;
        match self {
            DifferentData => write!(f, "fits were produced from different data"),
            NotNested => write!(f, "null model is not nested in the alternative"),
            NegativeStatistic { statistic } => write!(
                f,
                "likelihood-ratio statistic {statistic} is negative beyond noise; optimiser failure"
            ),
            ProportionalityVacuous { j } => {
                write!(f, "proportionality vacuous for binary response (J = {j})")
            }
            TermAbsent => write!(f, "term not present in the model spec"),
            SingleLevelTerm => write!(f, "term has a single level, no contrasts to test"),
            VcovUnavailable => write!(f, "covariance matrix unavailable for this fit"),
            VcovNotPsd { min_eig } => write!(
                f,
                "covariance matrix not positive semi-definite (min eigenvalue {min_eig})"
            ),
            EmptyTable => write!(f, "contingency table is empty"),
            ZeroMargin { which } => write!(f, "zero margin in contingency table: {which}"),
            FitFailed { which, source } => write!(f, "{which} fit failed: {source}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for InferenceError {}
