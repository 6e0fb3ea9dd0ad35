//! Fixed-effect cumulative logit models: specification, parameter
//! layout, likelihood, analytic gradient and maximum-likelihood fitting.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetError, DesignMatrix, OrdinalDataset};
use crate::linalg::Matrix;
use crate::math;
use crate::optim::{self, OptimOptions, OptimStatus};

/// Probability floor applied inside log-likelihoods so the line search
/// never sees -inf.
pub const PROB_FLOOR: f64 = 1e-300;

/// Absolute cap on natural-scale parameters; estimates beyond it are
/// treated as separation.
pub const SEPARATION_GUARD: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum OddsStructure {
    Proportional,
    NonProportional,
}

/// Model structure: response categories, factor terms and their odds
/// structure, optional panellist random intercept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ModelSpec {
    pub j: usize,
    pub n_formulations: usize,
    pub n_attributes: usize,
    pub include_formulation: bool,
    pub include_attribute: bool,
    pub formulation_odds: OddsStructure,
    pub attribute_odds: OddsStructure,
    pub random_intercept: bool,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.j < 2 {
            return Err(ModelError::InvalidSpec {
                reason: String::from("J must be at least 2"),
            });
        }
        let non_prop = (self.include_formulation
            && self.formulation_odds == OddsStructure::NonProportional)
            || (self.include_attribute && self.attribute_odds == OddsStructure::NonProportional);
        if non_prop && self.j < 3 {
            return Err(ModelError::InvalidSpec {
                reason: String::from("non-proportional odds requires J >= 3"),
            });
        }
        Ok(())
    }

    pub fn n_cuts(&self) -> usize {
        self.j - 1
    }

    pub fn formulation_cols(&self) -> usize {
        if self.include_formulation {
            self.n_formulations - 1
        } else {
            0
        }
    }

    pub fn attribute_cols(&self) -> usize {
        if self.include_attribute {
            self.n_attributes - 1
        } else {
            0
        }
    }

    pub fn beta_rows(&self) -> usize {
        if self.formulation_cols() == 0 {
            0
        } else {
            match self.formulation_odds {
                OddsStructure::Proportional => 1,
                OddsStructure::NonProportional => self.n_cuts(),
            }
        }
    }

    pub fn delta_rows(&self) -> usize {
        if self.attribute_cols() == 0 {
            0
        } else {
            match self.attribute_odds {
                OddsStructure::Proportional => 1,
                OddsStructure::NonProportional => self.n_cuts(),
            }
        }
    }

    pub fn n_params(&self) -> usize {
        self.n_cuts()
            + self.beta_rows() * self.formulation_cols()
            + self.delta_rows() * self.attribute_cols()
            + usize::from(self.random_intercept)
    }

    /// True when every included term has shared (proportional) slopes,
    /// in which case cutpoints are kept ordered by reparameterisation.
    pub fn is_proportional(&self) -> bool {
        (!self.include_formulation || self.formulation_odds == OddsStructure::Proportional)
            && (!self.include_attribute || self.attribute_odds == OddsStructure::Proportional)
    }

    /// Structural nesting check: `self` (null) is nested in `alt` when
    /// the parameter set of `self` maps into a subset of `alt`'s.
    pub fn is_nested_in(&self, alt: &ModelSpec) -> bool {
        if self.j != alt.j
            || self.n_formulations != alt.n_formulations
            || self.n_attributes != alt.n_attributes
            || self.random_intercept != alt.random_intercept
        {
            return false;
        }
        let term_ok = |inc0: bool, odds0: OddsStructure, inc1: bool, odds1: OddsStructure| {
            if inc0 && !inc1 {
                return false;
            }
            if inc0
                && odds0 == OddsStructure::NonProportional
                && odds1 == OddsStructure::Proportional
            {
                return false;
            }
            true
        };
        term_ok(
            self.include_formulation,
            self.formulation_odds,
            alt.include_formulation,
            alt.formulation_odds,
        ) && term_ok(
            self.include_attribute,
            self.attribute_odds,
            alt.include_attribute,
            alt.attribute_odds,
        ) && self.n_params() < alt.n_params()
    }

    /// Flat packing order: alpha, beta (row-major by category), delta
    /// (row-major), log_sigma_u.
    pub fn pack(&self, p: &ParamVector) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        out.extend_from_slice(&p.alpha);
        for row in &p.beta {
            out.extend_from_slice(row);
        }
        for row in &p.delta {
            out.extend_from_slice(row);
        }
        if let Some(ls) = p.log_sigma_u {
            out.push(ls);
        }
        out
    }

    pub fn unpack(&self, flat: &[f64]) -> Result<ParamVector, ModelError> {
        if flat.len() != self.n_params() {
            return Err(ModelError::DimensionMismatch {
                expected: self.n_params(),
                got: flat.len(),
            });
        }
        let mut k = 0;
        let alpha = flat[k..k + self.n_cuts()].to_vec();
        k += self.n_cuts();
        let mut beta = Vec::with_capacity(self.beta_rows());
        for _ in 0..self.beta_rows() {
            beta.push(flat[k..k + self.formulation_cols()].to_vec());
            k += self.formulation_cols();
        }
        let mut delta = Vec::with_capacity(self.delta_rows());
        for _ in 0..self.delta_rows() {
            delta.push(flat[k..k + self.attribute_cols()].to_vec());
            k += self.attribute_cols();
        }
        let log_sigma_u = if self.random_intercept {
            Some(flat[k])
        } else {
            None
        };
        Ok(ParamVector {
            alpha,
            beta,
            delta,
            log_sigma_u,
        })
    }

    /// Human-readable name per flat-packing position.
    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.n_params());
        for k in 1..=self.n_cuts() {
            names.push(alloc::format!("alpha_{k}"));
        }
        let cat = |rows: usize, k: usize| -> String {
            if rows == 1 {
                String::new()
            } else {
                alloc::format!("{},", k + 1)
            }
        };
        for r in 0..self.beta_rows() {
            for c in 0..self.formulation_cols() {
                names.push(alloc::format!(
                    "beta_{}F{}",
                    cat(self.beta_rows(), r),
                    c + 2
                ));
            }
        }
        for r in 0..self.delta_rows() {
            for c in 0..self.attribute_cols() {
                names.push(alloc::format!(
                    "delta_{}A{}",
                    cat(self.delta_rows(), r),
                    c + 1
                ));
            }
        }
        if self.random_intercept {
            names.push(String::from("log_sigma_u"));
        }
        names
    }
}

/// Parameter values in the layout fixed by [`ModelSpec`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ParamVector {
    /// cutpoints alpha_1..alpha_{J-1} for the cumulative logits of
    /// P(Y <= j)
    pub alpha: Vec<f64>,
    /// one row (proportional) or J-1 rows (non-proportional), each of
    /// length T-1
    pub beta: Vec<Vec<f64>>,
    /// as beta, for the attribute term (length L-1 rows)
    pub delta: Vec<Vec<f64>>,
    pub log_sigma_u: Option<f64>,
}

impl ParamVector {
    pub fn sigma_u(&self) -> Option<f64> {
        self.log_sigma_u.map(math::exp)
    }

    fn beta_row(&self, cut: usize) -> Option<&[f64]> {
        match self.beta.len() {
            0 => None,
            1 => Some(&self.beta[0]),
            _ => Some(&self.beta[cut]),
        }
    }

    fn delta_row(&self, cut: usize) -> Option<&[f64]> {
        match self.delta.len() {
            0 => None,
            1 => Some(&self.delta[0]),
            _ => Some(&self.delta[cut]),
        }
    }
}

/// Linear predictor of the cut-`k` cumulative logit (0-based cut index)
/// for one design row, conditional on random effect `u`.
pub fn linear_predictor(
    spec: &ModelSpec,
    params: &ParamVector,
    row: &[f64],
    cut: usize,
    u: f64,
) -> f64 {
    let fcols = spec.formulation_cols();
    let mut eta = params.alpha[cut] + u;
    if let Some(b) = params.beta_row(cut) {
        for (x, w) in row[..fcols].iter().zip(b) {
            eta += x * w;
        }
    }
    if let Some(d) = params.delta_row(cut) {
        for (x, w) in row[fcols..fcols + spec.attribute_cols()].iter().zip(d) {
            eta += x * w;
        }
    }
    eta
}

/// Cumulative probabilities theta_1..theta_{J-1} for one design row.
pub fn cumulative_probs(
    spec: &ModelSpec,
    params: &ParamVector,
    row: &[f64],
    u: f64,
) -> Result<Vec<f64>, ModelError> {
    check_dims(spec, params, row)?;
    Ok((0..spec.n_cuts())
        .map(|k| math::logistic(linear_predictor(spec, params, row, k, u)))
        .collect())
}

/// Category probabilities plus a monotonicity diagnostic. Under
/// non-proportional odds the cumulative probabilities can cross, which
/// shows up as negative category probabilities; `monotone` is false in
/// that case and the raw differences are returned untouched.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryProbs {
    pub probs: Vec<f64>,
    pub monotone: bool,
}

pub fn category_probs(
    spec: &ModelSpec,
    params: &ParamVector,
    row: &[f64],
    u: f64,
) -> Result<CategoryProbs, ModelError> {
    let theta = cumulative_probs(spec, params, row, u)?;
    Ok(categories_from_cumulative(&theta))
}

pub fn categories_from_cumulative(theta: &[f64]) -> CategoryProbs {
    let j = theta.len() + 1;
    let mut probs = Vec::with_capacity(j);
    let mut monotone = true;
    let mut prev = 0.0;
    for &t in theta {
        let p = t - prev;
        if p < 0.0 {
            monotone = false;
        }
        probs.push(p);
        prev = t;
    }
    probs.push(1.0 - prev);
    if 1.0 - prev < 0.0 {
        monotone = false;
    }
    CategoryProbs { probs, monotone }
}

fn check_dims(spec: &ModelSpec, params: &ParamVector, row: &[f64]) -> Result<(), ModelError> {
    let ok = params.alpha.len() == spec.n_cuts()
        && params.beta.len() == spec.beta_rows()
        && params.beta.iter().all(|r| r.len() == spec.formulation_cols())
        && params.delta.len() == spec.delta_rows()
        && params.delta.iter().all(|r| r.len() == spec.attribute_cols())
        && params.log_sigma_u.is_some() == spec.random_intercept
        && row.len() >= spec.formulation_cols() + spec.attribute_cols();
    if ok {
        Ok(())
    } else {
        Err(ModelError::DimensionMismatch {
            expected: spec.n_params(),
            got: spec.pack(params).len(),
        })
    }
}

/// Encoded observations ready for likelihood evaluation.
#[derive(Debug, Clone)]
pub struct EncodedData {
    pub design: DesignMatrix,
    pub responses: Vec<usize>,
    pub panellists: Vec<usize>,
    pub n_panellists: usize,
    pub j: usize,
    /// content hash used for structural nesting checks
    pub fingerprint: u64,
}

impl EncodedData {
    pub fn encode(
        ds: &OrdinalDataset,
        formulation_ref: usize,
        attribute_ref: usize,
    ) -> Result<Self, DatasetError> {
        let design = ds.dummy_encode(formulation_ref, attribute_ref)?;
        let responses: Vec<usize> = ds.observations().iter().map(|o| o.response).collect();
        let panellists: Vec<usize> = ds.observations().iter().map(|o| o.panellist).collect();
        let mut hash = 0xcbf29ce484222325u64;
        let mut eat = |v: u64| {
            hash ^= v;
            hash = hash.wrapping_mul(0x100000001b3);
        };
        for o in ds.observations() {
            eat(o.panellist as u64);
            eat(o.formulation as u64);
            eat(o.attribute as u64);
            eat(o.response as u64);
        }
        eat(formulation_ref as u64);
        eat(attribute_ref as u64);
        Ok(EncodedData {
            design,
            responses,
            panellists,
            n_panellists: ds.n_panellists(),
            j: ds.scale().categories(),
            fingerprint: hash,
        })
    }

    /// Encode with the conventional references: first formulation level,
    /// last attribute level.
    pub fn encode_default(ds: &OrdinalDataset) -> Result<Self, DatasetError> {
        EncodedData::encode(ds, 1, ds.n_attributes())
    }

    pub fn n_obs(&self) -> usize {
        self.responses.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoglikDiag {
    pub value: f64,
    /// observations whose category probability hit the floor
    pub floored: usize,
    /// observations with non-monotone cumulative probabilities
    pub non_monotone: usize,
}

/// Per-observation log-probability with floor; shared by the fixed and
/// conditional (mixed) likelihood paths.
fn obs_log_prob(spec: &ModelSpec, params: &ParamVector, row: &[f64], y: usize, u: f64) -> (f64, bool, bool) {
    let theta_y = if y < spec.j {
        math::logistic(linear_predictor(spec, params, row, y - 1, u))
    } else {
        1.0
    };
    let theta_prev = if y > 1 {
        math::logistic(linear_predictor(spec, params, row, y - 2, u))
    } else {
        0.0
    };
    let p = theta_y - theta_prev;
    if p <= PROB_FLOOR {
        (math::ln(PROB_FLOOR), true, p < 0.0)
    } else {
        (math::ln(p), false, false)
    }
}

pub fn loglik_fixed_diag(
    spec: &ModelSpec,
    params: &ParamVector,
    data: &EncodedData,
) -> Result<LoglikDiag, ModelError> {
    if data.j != spec.j {
        return Err(ModelError::DimensionMismatch {
            expected: spec.j,
            got: data.j,
        });
    }
    if let Some(row) = data.design.rows.first() {
        check_dims(spec, params, row)?;
    }
    let mut floored = 0;
    let mut non_monotone = 0;
    let value = math::compensated_sum(data.design.rows.iter().zip(&data.responses).map(
        |(row, &y)| {
            let (lp, fl, nm) = obs_log_prob(spec, params, row, y, 0.0);
            floored += usize::from(fl);
            non_monotone += usize::from(nm);
            lp
        },
    ));
    Ok(LoglikDiag {
        value,
        floored,
        non_monotone,
    })
}

pub fn loglik_fixed(
    spec: &ModelSpec,
    params: &ParamVector,
    data: &EncodedData,
) -> Result<f64, ModelError> {
    loglik_fixed_diag(spec, params, data).map(|d| d.value)
}

/// Analytic gradient of the fixed-effect log-likelihood in flat packing
/// order. Floored observations contribute zero gradient.
pub fn gradient_fixed(
    spec: &ModelSpec,
    params: &ParamVector,
    data: &EncodedData,
) -> Result<Vec<f64>, ModelError> {
    if data.j != spec.j {
        return Err(ModelError::DimensionMismatch {
            expected: spec.j,
            got: data.j,
        });
    }
    if let Some(row) = data.design.rows.first() {
        check_dims(spec, params, row)?;
    }
    let mut grad = vec![0.0; spec.n_params()];
    for (row, &y) in data.design.rows.iter().zip(&data.responses) {
        accumulate_conditional_gradient(spec, params, row, y, 0.0, 1.0, &mut grad);
    }
    Ok(grad)
}

/// Add `weight` times the gradient of log pi_y(row, u) with respect to
/// the flat parameter vector (excluding log_sigma_u). Used by both the
/// fixed likelihood and the quadrature path of the marginal likelihood.
pub(crate) fn accumulate_conditional_gradient(
    spec: &ModelSpec,
    params: &ParamVector,
    row: &[f64],
    y: usize,
    u: f64,
    weight: f64,
    grad: &mut [f64],
) {
    let theta_y = if y < spec.j {
        math::logistic(linear_predictor(spec, params, row, y - 1, u))
    } else {
        1.0
    };
    let theta_prev = if y > 1 {
        math::logistic(linear_predictor(spec, params, row, y - 2, u))
    } else {
        0.0
    };
    let p = theta_y - theta_prev;
    if p <= PROB_FLOOR {
        return;
    }
    // d log p / d eta_k is non-zero only for the two bracketing cuts
    let mut push = |cut: usize, deta: f64| {
        let w = weight * deta / p;
        add_eta_gradient(spec, row, cut, w, grad);
    };
    if y < spec.j {
        push(y - 1, theta_y * (1.0 - theta_y));
    }
    if y > 1 {
        push(y - 2, -(theta_prev * (1.0 - theta_prev)));
    }
}

/// Scatter d eta_cut into the flat gradient layout.
fn add_eta_gradient(spec: &ModelSpec, row: &[f64], cut: usize, w: f64, grad: &mut [f64]) {
    let cuts = spec.n_cuts();
    let fcols = spec.formulation_cols();
    let acols = spec.attribute_cols();
    grad[cut] += w;
    let mut offset = cuts;
    if spec.beta_rows() > 0 {
        let r = if spec.beta_rows() == 1 { 0 } else { cut };
        for (c, &x) in row[..fcols].iter().enumerate() {
            if x != 0.0 {
                grad[offset + r * fcols + c] += w * x;
            }
        }
        offset += spec.beta_rows() * fcols;
    }
    if spec.delta_rows() > 0 {
        let r = if spec.delta_rows() == 1 { 0 } else { cut };
        for (c, &x) in row[fcols..fcols + acols].iter().enumerate() {
            if x != 0.0 {
                grad[offset + r * acols + c] += w * x;
            }
        }
    }
}

// ---------------------------------------------------------------------
// unconstrained reparameterisation
// ---------------------------------------------------------------------

/// Map natural parameters to the optimiser space. Proportional fits use
/// (alpha_1, log successive differences) to keep cutpoints ordered;
/// non-proportional fits use the identity.
pub(crate) fn to_unconstrained(spec: &ModelSpec, flat: &[f64]) -> Vec<f64> {
    if !spec.is_proportional() || spec.n_cuts() < 2 {
        return flat.to_vec();
    }
    let mut z = flat.to_vec();
    for k in (1..spec.n_cuts()).rev() {
        let diff = flat[k] - flat[k - 1];
        z[k] = math::ln(diff.max(1e-10));
    }
    z
}

pub(crate) fn from_unconstrained(spec: &ModelSpec, z: &[f64]) -> Vec<f64> {
    if !spec.is_proportional() || spec.n_cuts() < 2 {
        return z.to_vec();
    }
    let mut flat = z.to_vec();
    for k in 1..spec.n_cuts() {
        flat[k] = flat[k - 1] + math::exp(z[k]);
    }
    flat
}

/// Chain rule: gradient in natural space -> gradient in optimiser space.
pub(crate) fn chain_gradient(spec: &ModelSpec, z: &[f64], grad_nat: &[f64]) -> Vec<f64> {
    if !spec.is_proportional() || spec.n_cuts() < 2 {
        return grad_nat.to_vec();
    }
    let cuts = spec.n_cuts();
    let mut g = grad_nat.to_vec();
    // alpha_k = z_0 + sum_{i=1..k} exp(z_i): d/dz_0 sums all cut grads,
    // d/dz_i = exp(z_i) * sum of grads of cuts >= i
    let mut suffix = 0.0;
    let mut suffixes = vec![0.0; cuts];
    for k in (0..cuts).rev() {
        suffix += grad_nat[k];
        suffixes[k] = suffix;
    }
    g[0] = suffixes[0];
    for k in 1..cuts {
        g[k] = math::exp(z[k]) * suffixes[k];
    }
    g
}

// ---------------------------------------------------------------------
// fitting
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub max_iter: usize,
    pub grad_tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iter: 300,
            grad_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum FitStatus {
    Converged,
    MaxIterations,
    LineSearchFailed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Convergence {
    pub iterations: usize,
    pub grad_norm: f64,
    pub status: FitStatus,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum FitWarning {
    /// a parameter hit the magnitude guard; estimate capped
    SeparationSuspected { param_index: usize },
    /// observations whose probability hit the floor at the optimum
    FlooredLoglik { count: usize },
    /// rows with non-monotone cumulative probabilities at the optimum
    NonMonotoneRows { count: usize },
    /// observed information could not be inverted
    VcovUnavailable,
    /// random-effect scale at its lower boundary
    BoundarySigma,
}

/// A fitted model: estimates, log-likelihood, covariance of the
/// estimates, and convergence diagnostics.
#[derive(Debug, Clone)]
pub struct FittedModel {
    pub spec: ModelSpec,
    pub params: ParamVector,
    pub loglik: f64,
    pub vcov: Option<Matrix>,
    pub n_obs: usize,
    pub convergence: Convergence,
    pub warnings: Vec<FitWarning>,
    pub data_fingerprint: u64,
    /// encoding references carried from the design matrix
    pub formulation_ref: usize,
    pub attribute_ref: usize,
}

/// Dummy-coded covariate row for a (formulation, attribute) cell, in the
/// column layout produced by `OrdinalDataset::dummy_encode`.
pub fn design_row(
    spec: &ModelSpec,
    formulation_ref: usize,
    attribute_ref: usize,
    formulation: usize,
    attribute: usize,
) -> Vec<f64> {
    let fcols = spec.formulation_cols();
    let acols = spec.attribute_cols();
    let mut row = vec![0.0; fcols + acols];
    if fcols > 0 && formulation != formulation_ref {
        let idx = (1..=spec.n_formulations)
            .filter(|&v| v != formulation_ref)
            .position(|v| v == formulation)
            .expect("formulation level registered");
        row[idx] = 1.0;
    }
    if acols > 0 && attribute != attribute_ref {
        let idx = (1..=spec.n_attributes)
            .filter(|&v| v != attribute_ref)
            .position(|v| v == attribute)
            .expect("attribute level registered");
        row[fcols + idx] = 1.0;
    }
    row
}

impl FittedModel {
    pub fn converged(&self) -> bool {
        self.convergence.status == FitStatus::Converged
    }

    pub fn flat_estimates(&self) -> Vec<f64> {
        self.spec.pack(&self.params)
    }

    /// sqrt of the diagonal of vcov, in flat packing order.
    pub fn standard_errors(&self) -> Option<Vec<f64>> {
        self.vcov
            .as_ref()
            .map(|v| (0..v.nrows).map(|i| math::sqrt(v[(i, i)].max(0.0))).collect())
    }
}

/// Cutpoint start values: empirical marginal cumulative logits.
pub fn initial_params(spec: &ModelSpec, data: &EncodedData) -> Result<ParamVector, ModelError> {
    let mut counts = vec![0usize; spec.j];
    for &y in &data.responses {
        counts[y - 1] += 1;
    }
    if let Some(cat) = counts.iter().position(|&c| c == 0) {
        return Err(ModelError::DegenerateData { category: cat + 1 });
    }
    let n = data.responses.len() as f64;
    let mut cum = 0.0;
    let alpha: Vec<f64> = counts[..spec.j - 1]
        .iter()
        .map(|&c| {
            cum += c as f64;
            math::logit((cum / n).clamp(1e-10, 1.0 - 1e-10))
        })
        .collect();
    Ok(ParamVector {
        alpha,
        beta: vec![vec![0.0; spec.formulation_cols()]; spec.beta_rows()],
        delta: vec![vec![0.0; spec.attribute_cols()]; spec.delta_rows()],
        log_sigma_u: if spec.random_intercept {
            Some(0.0)
        } else {
            None
        },
    })
}

/// Maximum-likelihood fit of the fixed-effect model.
pub fn fit_fixed(
    spec: &ModelSpec,
    data: &EncodedData,
    opts: &FitOptions,
) -> Result<FittedModel, ModelError> {
    spec.validate()?;
    if spec.random_intercept {
        return Err(ModelError::InvalidSpec {
            reason: String::from("fit_fixed requires random_intercept = false"),
        });
    }
    if data.n_obs() == 0 {
        return Err(ModelError::EmptyData);
    }
    let init = initial_params(spec, data)?;
    let z0 = to_unconstrained(spec, &spec.pack(&init));

    let f = |z: &[f64]| {
        let p = spec
            .unpack(&from_unconstrained(spec, z))
            .expect("packing length fixed by spec");
        -loglik_fixed(spec, &p, data).expect("dimensions fixed by spec")
    };
    let g = |z: &[f64]| {
        let flat = from_unconstrained(spec, z);
        let p = spec.unpack(&flat).expect("packing length fixed by spec");
        let gn = gradient_fixed(spec, &p, data).expect("dimensions fixed by spec");
        chain_gradient(spec, z, &gn)
            .iter()
            .map(|v| -v)
            .collect()
    };
    let res = optim::minimize(
        f,
        g,
        &z0,
        &OptimOptions {
            max_iter: opts.max_iter,
            grad_tol: opts.grad_tol,
        },
    );

    let mut flat = from_unconstrained(spec, &res.x);
    let mut warnings = Vec::new();
    for (i, v) in flat.iter_mut().enumerate() {
        if math::abs(*v) > SEPARATION_GUARD {
            *v = v.clamp(-SEPARATION_GUARD, SEPARATION_GUARD);
            warnings.push(FitWarning::SeparationSuspected { param_index: i });
        }
    }
    let params = spec.unpack(&flat)?;
    let diag = loglik_fixed_diag(spec, &params, data)?;
    if diag.floored > 0 {
        warnings.push(FitWarning::FlooredLoglik {
            count: diag.floored,
        });
    }
    if diag.non_monotone > 0 {
        warnings.push(FitWarning::NonMonotoneRows {
            count: diag.non_monotone,
        });
    }

    let vcov = observed_information_vcov(spec, &flat, data);
    if vcov.is_none() {
        warnings.push(FitWarning::VcovUnavailable);
    }

    Ok(FittedModel {
        spec: *spec,
        params,
        loglik: diag.value,
        vcov,
        n_obs: data.n_obs(),
        convergence: Convergence {
            iterations: res.iterations,
            grad_norm: res.grad_norm,
            status: match res.status {
                OptimStatus::Converged => FitStatus::Converged,
                OptimStatus::MaxIterations => FitStatus::MaxIterations,
                OptimStatus::LineSearchFailed => FitStatus::LineSearchFailed,
            },
        },
        warnings,
        data_fingerprint: data.fingerprint,
        formulation_ref: data.design.formulation_ref,
        attribute_ref: data.design.attribute_ref,
    })
}

/// Inverse observed information from central finite differences of the
/// analytic gradient.
fn observed_information_vcov(spec: &ModelSpec, flat: &[f64], data: &EncodedData) -> Option<Matrix> {
    let n = flat.len();
    let mut hess = Matrix::zeros(n, n);
    let mut x = flat.to_vec();
    for jcol in 0..n {
        let h = 1e-5 * (1.0 + math::abs(flat[jcol]));
        x[jcol] = flat[jcol] + h;
        let gp = gradient_fixed(spec, &spec.unpack(&x).ok()?, data).ok()?;
        x[jcol] = flat[jcol] - h;
        let gm = gradient_fixed(spec, &spec.unpack(&x).ok()?, data).ok()?;
        x[jcol] = flat[jcol];
        for i in 0..n {
            hess[(i, jcol)] = (gp[i] - gm[i]) / (2.0 * h);
        }
    }
    // symmetrise and negate: observed information = -Hessian of loglik
    let mut info = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            info[(i, j)] = -0.5 * (hess[(i, j)] + hess[(j, i)]);
        }
    }
    info.inverse().ok()
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    InvalidSpec { reason: String },
    DimensionMismatch { expected: usize, got: usize },
    DegenerateData { category: usize },
    EmptyData,
}

impl core::fmt::Display for ModelError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ModelError::InvalidSpec { reason } => write!(f, "invalid model spec: {reason}"),
            ModelError::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            ModelError::DegenerateData { category } => {
                write!(f, "response category {category} never observed")
            }
            ModelError::EmptyData => write!(f, "no observations"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ModelError {}
