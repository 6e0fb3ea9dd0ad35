//! Conditional and population-averaged category probabilities,
//! acceptance scores P(Y >= threshold) and formulation ranking.

use alloc::string::String;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::math;
use crate::model::{
    category_probs, design_row, CategoryProbs, FittedModel, ModelError,
};
use crate::quad::QuadratureRule;

/// How category probabilities are reported for mixed fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum Averaging {
    /// conditional on a typical panellist (u = 0)
    ConditionalAtZero,
    /// integrated over the fitted random-effect distribution
    PopulationAveraged,
}

/// Category probabilities conditional on a given random-effect value.
pub fn conditional_probs(
    fit: &FittedModel,
    formulation: usize,
    attribute: usize,
    u: f64,
) -> Result<CategoryProbs, PredictError> {
    check_levels(fit, formulation, attribute)?;
    let row = design_row(
        &fit.spec,
        fit.formulation_ref,
        fit.attribute_ref,
        formulation,
        attribute,
    );
    category_probs(&fit.spec, &fit.params, &row, u).map_err(PredictError::Model)
}

/// Category probabilities integrated over N(0, sigma_hat^2) by
/// Gauss-Hermite quadrature of the given order.
pub fn population_averaged_probs(
    fit: &FittedModel,
    formulation: usize,
    attribute: usize,
    quad_order: usize,
) -> Result<CategoryProbs, PredictError> {
    check_levels(fit, formulation, attribute)?;
    let sigma = fit
        .params
        .sigma_u()
        .ok_or(PredictError::NotMixedFit)?;
    let row = design_row(
        &fit.spec,
        fit.formulation_ref,
        fit.attribute_ref,
        formulation,
        attribute,
    );
    let rule = QuadratureRule::gauss_hermite(quad_order, false);
    let j = fit.spec.j;
    let mut probs = alloc::vec![0.0; j];
    let mut monotone = true;
    for (&z, &w) in rule.nodes.iter().zip(&rule.weights) {
        let cp = category_probs(&fit.spec, &fit.params, &row, sigma * z)
            .map_err(PredictError::Model)?;
        monotone &= cp.monotone;
        for (acc, p) in probs.iter_mut().zip(&cp.probs) {
            *acc += w * p;
        }
    }
    Ok(CategoryProbs { probs, monotone })
}

fn probs_for(
    fit: &FittedModel,
    formulation: usize,
    attribute: usize,
    averaging: Averaging,
    quad_order: usize,
) -> Result<CategoryProbs, PredictError> {
    match averaging {
        Averaging::ConditionalAtZero => conditional_probs(fit, formulation, attribute, 0.0),
        Averaging::PopulationAveraged => {
            population_averaged_probs(fit, formulation, attribute, quad_order)
        }
    }
}

fn check_levels(fit: &FittedModel, formulation: usize, attribute: usize) -> Result<(), PredictError> {
    if formulation < 1 || formulation > fit.spec.n_formulations {
        return Err(PredictError::UnknownFormulation { level: formulation });
    }
    if attribute < 1 || attribute > fit.spec.n_attributes {
        return Err(PredictError::UnknownAttribute { level: attribute });
    }
    Ok(())
}

/// One (formulation, attribute) cell of the prediction table.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PredictionRow {
    pub formulation: usize,
    pub attribute: usize,
    pub probs: Vec<f64>,
    pub p_at_least: f64,
}

/// Category probabilities and P(Y >= threshold) per (formulation,
/// attribute) cell.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PredictionTable {
    pub rows: Vec<PredictionRow>,
    pub averaging: Averaging,
    pub threshold: usize,
}

pub fn prediction_table(
    fit: &FittedModel,
    threshold: usize,
    averaging: Averaging,
    quad_order: usize,
) -> Result<PredictionTable, PredictError> {
    check_threshold(fit, threshold)?;
    let mut rows = Vec::new();
    for attribute in 1..=fit.spec.n_attributes {
        for formulation in 1..=fit.spec.n_formulations {
            let cp = probs_for(fit, formulation, attribute, averaging, quad_order)?;
            let p_at_least: f64 = cp.probs[threshold - 1..].iter().sum();
            rows.push(PredictionRow {
                formulation,
                attribute,
                probs: cp.probs,
                p_at_least,
            });
        }
    }
    Ok(PredictionTable {
        rows,
        averaging,
        threshold,
    })
}

fn check_threshold(fit: &FittedModel, threshold: usize) -> Result<(), PredictError> {
    if threshold < 2 || threshold > fit.spec.j {
        return Err(PredictError::BadThreshold {
            threshold,
            j: fit.spec.j,
        });
    }
    Ok(())
}

/// P(Y >= threshold) per (attribute, formulation), plus the unweighted
/// attribute mean per formulation.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct AcceptanceScores {
    /// scores[attribute - 1][formulation - 1]
    pub per_attribute: Vec<Vec<f64>>,
    /// attribute-mean score per formulation
    pub mean: Vec<f64>,
    pub threshold: usize,
    pub averaging: Averaging,
}

pub fn acceptance_score(
    fit: &FittedModel,
    threshold: usize,
    averaging: Averaging,
    quad_order: usize,
) -> Result<AcceptanceScores, PredictError> {
    let table = prediction_table(fit, threshold, averaging, quad_order)?;
    let t = fit.spec.n_formulations;
    let l = fit.spec.n_attributes;
    let mut per_attribute = alloc::vec![alloc::vec![0.0; t]; l];
    for row in &table.rows {
        per_attribute[row.attribute - 1][row.formulation - 1] = row.p_at_least;
    }
    let mean = (0..t)
        .map(|f| per_attribute.iter().map(|a| a[f]).sum::<f64>() / l as f64)
        .collect();
    Ok(AcceptanceScores {
        per_attribute,
        mean,
        threshold,
        averaging,
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct RankEntry {
    pub formulation: usize,
    pub score: f64,
    /// shares its attribute-mean score with another formulation
    pub tied: bool,
}

/// Formulations sorted descending by attribute-mean acceptance score.
/// Ties (within 1e-12) are broken by formulation index and flagged.
pub fn rank_formulations(
    fit: &FittedModel,
    threshold: usize,
    averaging: Averaging,
    quad_order: usize,
) -> Result<Vec<RankEntry>, PredictError> {
    let scores = acceptance_score(fit, threshold, averaging, quad_order)?;
    let mut entries: Vec<RankEntry> = scores
        .mean
        .iter()
        .enumerate()
        .map(|(i, &score)| RankEntry {
            formulation: i + 1,
            score,
            tied: false,
        })
        .collect();
    entries.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .expect("finite scores")
            .then(a.formulation.cmp(&b.formulation))
    });
    for i in 0..entries.len() {
        let tied = (i > 0 && math::abs(entries[i - 1].score - entries[i].score) < 1e-12)
            || (i + 1 < entries.len()
                && math::abs(entries[i + 1].score - entries[i].score) < 1e-12);
        entries[i].tied = tied;
    }
    Ok(entries)
}

#[derive(Debug, Clone, PartialEq)]
pub enum PredictError {
    UnknownFormulation { level: usize },
    UnknownAttribute { level: usize },
    NotMixedFit,
    BadThreshold { threshold: usize, j: usize },
    Model(ModelError),
}

impl core::fmt::Display for PredictError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        use PredictError::*;
        match self {
            UnknownFormulation { level } => write!(f, "unknown formulation level {level}"),
            UnknownAttribute { level } => write!(f, "unknown attribute level {level}"),
            NotMixedFit => write!(f, "population averaging requires a random-intercept fit"),
            BadThreshold { threshold, j } => {
                write!(f, "threshold {threshold} outside 2..={j}")
            }
            Model(e) => write!(f, "{e}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for PredictError {}

/// Label helper used by exports: "F{t}".
pub fn formulation_label(t: usize) -> String {
    alloc::format!("F{t}")
}
