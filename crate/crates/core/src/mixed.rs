//! Random-intercept (panellist) models: marginal likelihood by adaptive
//! Gauss-Hermite quadrature, mixed-model fitting, and profile-likelihood
//! confidence intervals for the random-effect scale.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::math;
use crate::model::{
    self, from_unconstrained, linear_predictor, to_unconstrained, Convergence, EncodedData,
    FitStatus, FitWarning, FittedModel, ModelError, ModelSpec, ParamVector, PROB_FLOOR,
    SEPARATION_GUARD,
};
use crate::optim::{self, OptimOptions, OptimStatus};
use crate::quad::QuadratureRule;
use crate::special;

/// sigma below this is treated as the boundary.
pub const SIGMA_BOUNDARY: f64 = 1e-6;

/// Observation indices grouped by panellist. Build once per dataset when
/// evaluating the marginal likelihood in a loop.
#[derive(Debug, Clone)]
pub struct PanellistIndex {
    groups: Vec<Vec<usize>>,
}

impl PanellistIndex {
    pub fn build(data: &EncodedData) -> Self {
        let mut groups = vec![Vec::new(); data.n_panellists];
        for (i, &p) in data.panellists.iter().enumerate() {
            groups[p].push(i);
        }
        groups.retain(|g| !g.is_empty());
        PanellistIndex { groups }
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }
}

/// Conditional log-likelihood of one panellist's observations at random
/// effect u, including the N(0, sigma^2) prior density term.
fn joint_log_density(
    spec: &ModelSpec,
    params: &ParamVector,
    data: &EncodedData,
    obs: &[usize],
    u: f64,
    sigma: f64,
) -> f64 {
    let mut h = -0.5 * (u / sigma) * (u / sigma) - math::ln(sigma) - 0.5 * math::LN_2PI;
    for &i in obs {
        let row = &data.design.rows[i];
        let y = data.responses[i];
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
        h += math::ln(p.max(PROB_FLOOR));
    }
    h
}

/// First and second derivative of the conditional log-likelihood part in
/// u (prior term included).
fn joint_log_density_derivs(
    spec: &ModelSpec,
    params: &ParamVector,
    data: &EncodedData,
    obs: &[usize],
    u: f64,
    sigma: f64,
) -> (f64, f64) {
    let mut d1 = -u / (sigma * sigma);
    let mut d2 = -1.0 / (sigma * sigma);
    for &i in obs {
        let row = &data.design.rows[i];
        let y = data.responses[i];
        let (ty, dy, d2y) = if y < spec.j {
            let s = math::logistic(linear_predictor(spec, params, row, y - 1, u));
            let sp = s * (1.0 - s);
            (s, sp, sp * (1.0 - 2.0 * s))
        } else {
            (1.0, 0.0, 0.0)
        };
        let (tp, dp, d2p) = if y > 1 {
            let s = math::logistic(linear_predictor(spec, params, row, y - 2, u));
            let sp = s * (1.0 - s);
            (s, sp, sp * (1.0 - 2.0 * s))
        } else {
            (0.0, 0.0, 0.0)
        };
        let p = ty - tp;
        if p <= PROB_FLOOR {
            continue;
        }
        let g = (dy - dp) / p;
        d1 += g;
        d2 += (d2y - d2p) / p - g * g;
    }
    (d1, d2)
}

/// Mode and curvature scale of the integrand for one panellist, by a
/// safeguarded Newton iteration. Falls back to (0, sigma) on failure.
fn find_mode(
    spec: &ModelSpec,
    params: &ParamVector,
    data: &EncodedData,
    obs: &[usize],
    sigma: f64,
) -> (f64, f64) {
    let mut u = 0.0;
    let mut h = joint_log_density(spec, params, data, obs, u, sigma);
    for _ in 0..30 {
        let (d1, d2) = joint_log_density_derivs(spec, params, data, obs, u, sigma);
        if math::abs(d1) < 1e-11 * (1.0 + math::abs(d2)) {
            break;
        }
        if d2 >= 0.0 {
            return (0.0, sigma);
        }
        let mut step = -d1 / d2;
        // damped update
        for _ in 0..20 {
            let h_new = joint_log_density(spec, params, data, obs, u + step, sigma);
            if h_new >= h - 1e-14 {
                u += step;
                h = h_new;
                break;
            }
            step *= 0.5;
        }
    }
    let (_, d2) = joint_log_density_derivs(spec, params, data, obs, u, sigma);
    if d2 < 0.0 {
        (u, 1.0 / math::sqrt(-d2))
    } else {
        (0.0, sigma)
    }
}

/// Log of one panellist's marginal likelihood contribution.
fn panellist_log_marginal(
    spec: &ModelSpec,
    params: &ParamVector,
    data: &EncodedData,
    obs: &[usize],
    sigma: f64,
    rule: &QuadratureRule,
) -> f64 {
    if rule.adaptive {
        let (m, s) = find_mode(spec, params, data, obs, sigma);
        let terms: Vec<f64> = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&z, &w)| {
                math::ln(w)
                    + 0.5 * z * z
                    + 0.5 * math::LN_2PI
                    + math::ln(s)
                    + joint_log_density(spec, params, data, obs, m + s * z, sigma)
            })
            .collect();
        math::logsumexp(&terms)
    } else {
        // nodes placed on the prior: integral g(u) phi(u; 0, sigma^2) du
        let terms: Vec<f64> = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&z, &w)| {
                let u = sigma * z;
                math::ln(w) + joint_log_density(spec, params, data, obs, u, sigma)
                    // remove the prior density, which the weights carry
                    + 0.5 * (u / sigma) * (u / sigma)
                    + math::ln(sigma)
                    + 0.5 * math::LN_2PI
            })
            .collect();
        math::logsumexp(&terms)
    }
}

/// Marginal log-likelihood of the random-intercept model: the sum over
/// panellists of the log integral of the conditional likelihood against
/// the N(0, sigma_u^2) random-effect density.
pub fn marginal_loglik(
    spec: &ModelSpec,
    params: &ParamVector,
    data: &EncodedData,
    rule: &QuadratureRule,
) -> Result<f64, ModelError> {
    let index = PanellistIndex::build(data);
    marginal_loglik_indexed(spec, params, data, &index, rule)
}

pub fn marginal_loglik_indexed(
    spec: &ModelSpec,
    params: &ParamVector,
    data: &EncodedData,
    index: &PanellistIndex,
    rule: &QuadratureRule,
) -> Result<f64, ModelError> {
    if !spec.random_intercept {
        return Err(ModelError::InvalidSpec {
            reason: String::from("marginal_loglik requires random_intercept = true"),
        });
    }
    let sigma = params.sigma_u().ok_or(ModelError::DimensionMismatch {
        expected: spec.n_params(),
        got: spec.n_params() - 1,
    })?;
    if data.j != spec.j {
        return Err(ModelError::DimensionMismatch {
            expected: spec.j,
            got: data.j,
        });
    }
    let value = math::compensated_sum(
        index
            .groups
            .iter()
            .map(|obs| panellist_log_marginal(spec, params, data, obs, sigma, rule)),
    );
    if value.is_nan() {
        return Err(ModelError::InvalidSpec {
            reason: String::from("non-finite marginal likelihood"),
        });
    }
    Ok(value)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixedFitOptions {
    pub quad_order: usize,
    pub max_iter: usize,
    pub grad_tol: f64,
}

impl Default for MixedFitOptions {
    fn default() -> Self {
        MixedFitOptions {
            quad_order: 15,
            max_iter: 300,
            grad_tol: 1e-5,
        }
    }
}

fn fd_gradient<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut xx = x.to_vec();
    for i in 0..x.len() {
        let h = 1e-6 * (1.0 + math::abs(x[i]));
        xx[i] = x[i] + h;
        let fp = f(&xx);
        xx[i] = x[i] - h;
        let fm = f(&xx);
        xx[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

/// Maximum-likelihood fit of the mixed model by quasi-Newton on the
/// quadrature objective; gradients by central finite differences.
pub fn fit_mixed(
    spec: &ModelSpec,
    data: &EncodedData,
    opts: &MixedFitOptions,
) -> Result<FittedModel, ModelError> {
    spec.validate()?;
    if !spec.random_intercept {
        return Err(ModelError::InvalidSpec {
            reason: String::from("fit_mixed requires random_intercept = true"),
        });
    }
    if data.n_obs() == 0 {
        return Err(ModelError::EmptyData);
    }
    let index = PanellistIndex::build(data);
    let rule = QuadratureRule::gauss_hermite(opts.quad_order, true);
    let init = model::initial_params(spec, data)?;
    let z0 = to_unconstrained(spec, &spec.pack(&init));

    let f = |z: &[f64]| {
        let p = spec
            .unpack(&from_unconstrained(spec, z))
            .expect("packing length fixed by spec");
        -marginal_loglik_indexed(spec, &p, data, &index, &rule).unwrap_or(f64::INFINITY)
    };
    let g = |z: &[f64]| fd_gradient(&f, z);
    let res = optim::minimize(
        &f,
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
    if params.sigma_u().unwrap_or(1.0) < 1e-4 {
        warnings.push(FitWarning::BoundarySigma);
    }
    let loglik = marginal_loglik_indexed(spec, &params, data, &index, &rule)?;

    let vcov = marginal_vcov(spec, &flat, data, &index, &rule);
    if vcov.is_none() {
        warnings.push(FitWarning::VcovUnavailable);
    }

    Ok(FittedModel {
        spec: *spec,
        params,
        loglik,
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

/// Inverse observed information of the marginal log-likelihood in the
/// natural parameter space, by second differences.
fn marginal_vcov(
    spec: &ModelSpec,
    flat: &[f64],
    data: &EncodedData,
    index: &PanellistIndex,
    rule: &QuadratureRule,
) -> Option<Matrix> {
    let n = flat.len();
    let ll = |x: &[f64]| -> Option<f64> {
        let p = spec.unpack(x).ok()?;
        marginal_loglik_indexed(spec, &p, data, index, rule).ok()
    };
    let f0 = ll(flat)?;
    let steps: Vec<f64> = flat.iter().map(|v| 1e-4 * (1.0 + math::abs(*v))).collect();
    let mut info = Matrix::zeros(n, n);
    let mut x = flat.to_vec();
    for i in 0..n {
        x[i] = flat[i] + steps[i];
        let fp = ll(&x)?;
        x[i] = flat[i] - steps[i];
        let fm = ll(&x)?;
        x[i] = flat[i];
        info[(i, i)] = -(fp - 2.0 * f0 + fm) / (steps[i] * steps[i]);
        for jj in (i + 1)..n {
            x[i] = flat[i] + steps[i];
            x[jj] = flat[jj] + steps[jj];
            let fpp = ll(&x)?;
            x[jj] = flat[jj] - steps[jj];
            let fpm = ll(&x)?;
            x[i] = flat[i] - steps[i];
            let fmm = ll(&x)?;
            x[jj] = flat[jj] + steps[jj];
            let fmp = ll(&x)?;
            x[i] = flat[i];
            x[jj] = flat[jj];
            let h = -(fpp - fpm - fmp + fmm) / (4.0 * steps[i] * steps[jj]);
            info[(i, jj)] = h;
            info[(jj, i)] = h;
        }
    }
    info.inverse().ok()
}

/// Profile-likelihood confidence interval for sigma_u.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ProfileCi {
    pub parameter: String,
    pub level: f64,
    pub lower: f64,
    pub upper: f64,
    pub contains_zero: bool,
    /// upper endpoint could not be bracketed within 10 * sigma_hat
    pub open_upper: bool,
}

/// Re-maximise all parameters except sigma at a fixed sigma, warm-started
/// from the full fit. Returns the profiled log-likelihood.
pub fn profile_loglik_at_sigma(
    fit: &FittedModel,
    data: &EncodedData,
    sigma: f64,
    opts: &MixedFitOptions,
) -> Result<f64, ModelError> {
    let spec = fit.spec;
    let index = PanellistIndex::build(data);
    let rule = QuadratureRule::gauss_hermite(opts.quad_order, true);
    let log_sigma = math::ln(sigma);
    let full = spec.pack(&fit.params);
    let n_free = full.len() - 1;
    let z_full = to_unconstrained(&spec, &full);
    let z0: Vec<f64> = z_full[..n_free].to_vec();
    // log_sigma sits last and passes through the reparameterisation
    // untouched, so we can pin it in optimiser space
    let f = |z: &[f64]| {
        let mut zz = z.to_vec();
        zz.push(log_sigma);
        let p = spec
            .unpack(&from_unconstrained(&spec, &zz))
            .expect("packing length fixed by spec");
        -marginal_loglik_indexed(&spec, &p, data, &index, &rule).unwrap_or(f64::INFINITY)
    };
    let g = |z: &[f64]| fd_gradient(&f, z);
    let res = optim::minimize(
        &f,
        g,
        &z0,
        &OptimOptions {
            max_iter: opts.max_iter,
            grad_tol: opts.grad_tol.max(1e-5),
        },
    );
    Ok(-res.f)
}

/// Endpoints of {sigma : 2 [logL(sigma_hat) - profile(sigma)] <= chi2}
/// found by bisection to 1e-4 on sigma.
pub fn profile_ci_sigma(
    fit: &FittedModel,
    data: &EncodedData,
    level: f64,
    opts: &MixedFitOptions,
) -> Result<ProfileCi, ModelError> {
    if !fit.spec.random_intercept {
        return Err(ModelError::InvalidSpec {
            reason: String::from("profile CI requires a random-intercept fit"),
        });
    }
    let sigma_hat = fit.params.sigma_u().expect("random-intercept fit");
    let ll_hat = fit.loglik;
    let threshold = special::chi2_quantile(level, 1.0);
    let deviance = |sigma: f64| -> Result<f64, ModelError> {
        let lp = profile_loglik_at_sigma(fit, data, sigma, opts)?;
        Ok(2.0 * (ll_hat - lp))
    };

    // lower endpoint
    let lo_bound = SIGMA_BOUNDARY;
    let (lower, contains_zero) = if sigma_hat <= lo_bound {
        (lo_bound, true)
    } else if deviance(lo_bound)? <= threshold {
        (lo_bound, true)
    } else {
        let mut lo = lo_bound;
        let mut hi = sigma_hat;
        while hi - lo > 1e-4 {
            let mid = 0.5 * (lo + hi);
            if deviance(mid)? > threshold {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (0.5 * (lo + hi), false)
    };

    // upper endpoint: bracket by doubling
    let cap = 10.0 * sigma_hat.max(SIGMA_BOUNDARY);
    let mut hi = (2.0 * sigma_hat).max(0.1);
    let mut open_upper = false;
    loop {
        if hi >= cap {
            hi = cap;
            if deviance(hi)? <= threshold {
                open_upper = true;
            }
            break;
        }
        if deviance(hi)? > threshold {
            break;
        }
        hi *= 2.0;
    }
    let upper = if open_upper {
        cap
    } else {
        let mut lo = sigma_hat.max(SIGMA_BOUNDARY);
        let mut up = hi;
        while up - lo > 1e-4 {
            let mid = 0.5 * (lo + up);
            if deviance(mid)? > threshold {
                up = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + up)
    };

    Ok(ProfileCi {
        parameter: String::from("sigma_u"),
        level,
        lower,
        upper,
        contains_zero,
        open_upper,
    })
}

/// (sigma, profiled log-likelihood) pairs over a grid, for plotting.
pub fn profile_trace(
    fit: &FittedModel,
    data: &EncodedData,
    grid: &[f64],
    opts: &MixedFitOptions,
) -> Result<Vec<(f64, f64)>, ModelError> {
    grid.iter()
        .map(|&s| profile_loglik_at_sigma(fit, data, s, opts).map(|ll| (s, ll)))
        .collect()
}
