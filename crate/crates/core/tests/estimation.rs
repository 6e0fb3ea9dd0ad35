//! Estimation checks against independent oracles: finite-difference
//! gradients, brute-force trapezoid marginalisation, and closed-form
//! intercept-only fits.

use sensilogit_core::math;
use sensilogit_core::mixed::{fit_mixed, marginal_loglik, MixedFitOptions};
use sensilogit_core::model::{
    category_probs, fit_fixed, gradient_fixed, loglik_fixed, EncodedData, FitOptions, ModelSpec,
    OddsStructure, ParamVector,
};
use sensilogit_core::quad::QuadratureRule;
use sensilogit_core::simulate::{simulate_dataset, true_model, ScenarioSpec};
use sensilogit_core::special::normal_pdf;

fn test_data(pattern: &str, n: usize, seed: u64) -> EncodedData {
    let scenario = ScenarioSpec::new(pattern, n, 1, seed);
    let ds = simulate_dataset(&scenario, 0).unwrap();
    EncodedData::encode_default(&ds).unwrap()
}

fn fixed_spec(odds: OddsStructure) -> ModelSpec {
    ModelSpec {
        j: 5,
        n_formulations: 3,
        n_attributes: 2,
        include_formulation: true,
        include_attribute: true,
        formulation_odds: odds,
        attribute_odds: odds,
        random_intercept: false,
    }
}

/// Central finite differences of the fixed log-likelihood in the flat
/// parameter packing.
fn fd_gradient(spec: &ModelSpec, flat: &[f64], data: &EncodedData) -> Vec<f64> {
    let mut g = vec![0.0; flat.len()];
    let mut x = flat.to_vec();
    for i in 0..flat.len() {
        let h = 1e-6 * (1.0 + flat[i].abs());
        x[i] = flat[i] + h;
        let fp = loglik_fixed(spec, &spec.unpack(&x).unwrap(), data).unwrap();
        x[i] = flat[i] - h;
        let fm = loglik_fixed(spec, &spec.unpack(&x).unwrap(), data).unwrap();
        x[i] = flat[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

#[test]
fn analytic_gradient_matches_finite_differences() {
    let data = test_data("F3<F1<F2", 25, 314);
    for odds in [OddsStructure::Proportional, OddsStructure::NonProportional] {
        let spec = fixed_spec(odds);
        // a few deliberately off-centre points
        let points: Vec<Vec<f64>> = vec![
            {
                let mut v = vec![0.0; spec.n_params()];
                let cuts = [-1.5, -0.4, 0.6, 1.8];
                v[..4].copy_from_slice(&cuts);
                v
            },
            {
                let mut v = vec![0.1; spec.n_params()];
                let cuts = [-2.2, -1.0, 0.3, 2.5];
                v[..4].copy_from_slice(&cuts);
                for (i, vi) in v.iter_mut().enumerate().skip(4) {
                    *vi = 0.3 * ((i % 5) as f64 - 2.0);
                }
                v
            },
        ];
        for flat in points {
            let params = spec.unpack(&flat).unwrap();
            let analytic = gradient_fixed(&spec, &params, &data).unwrap();
            let numeric = fd_gradient(&spec, &flat, &data);
            for (i, (a, n)) in analytic.iter().zip(&numeric).enumerate() {
                let scale = 1.0 + n.abs();
                assert!(
                    (a - n).abs() / scale < 1e-5,
                    "component {i} ({odds:?}): analytic {a}, numeric {n}"
                );
            }
        }
    }
}

#[test]
fn marginal_loglik_matches_trapezoid_oracle() {
    let data = test_data("F1<F2<F3", 12, 99);
    let (spec, mut params) = true_model(&ScenarioSpec::new("F1<F2<F3", 12, 1, 0)).unwrap();
    params.log_sigma_u = Some(math::ln(1.3));
    let sigma = 1.3;

    // brute force: per panellist, trapezoid over u of
    // exp(conditional loglik) * normal density
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); data.n_panellists];
    for (i, &p) in data.panellists.iter().enumerate() {
        groups[p].push(i);
    }
    let n_grid = 100_000usize;
    let lo = -10.0 * sigma;
    let hi = 10.0 * sigma;
    let h = (hi - lo) / n_grid as f64;
    let mut oracle = 0.0;
    for obs in groups.iter().filter(|g| !g.is_empty()) {
        let integrand = |u: f64| -> f64 {
            let mut cond = 0.0;
            for &i in obs {
                let row = &data.design.rows[i];
                let cp = category_probs(&spec, &params, row, u).unwrap();
                cond += cp.probs[data.responses[i] - 1].ln();
            }
            cond.exp() * normal_pdf(u, 0.0, sigma)
        };
        let mut s = 0.5 * (integrand(lo) + integrand(hi));
        for k in 1..n_grid {
            s += integrand(lo + k as f64 * h);
        }
        oracle += (s * h).ln();
    }

    let rule = QuadratureRule::gauss_hermite(15, true);
    let got = marginal_loglik(&spec, &params, &data, &rule).unwrap();
    assert!(
        (got - oracle).abs() < 1e-8,
        "quadrature {got}, trapezoid oracle {oracle}"
    );
}

#[test]
fn tiny_sigma_recovers_fixed_loglik() {
    let data = test_data("F1=F2=F3", 15, 5);
    let (spec, mut params) = true_model(&ScenarioSpec::new("F1=F2=F3", 15, 1, 0)).unwrap();
    params.log_sigma_u = Some(-20.0);
    let rule = QuadratureRule::gauss_hermite(15, true);
    let mixed = marginal_loglik(&spec, &params, &data, &rule).unwrap();

    let fixed_spec = ModelSpec {
        random_intercept: false,
        ..spec
    };
    let fixed_params = ParamVector {
        log_sigma_u: None,
        ..params
    };
    let fixed = loglik_fixed(&fixed_spec, &fixed_params, &data).unwrap();
    assert!(
        (mixed - fixed).abs() < 1e-6,
        "mixed at sigma~0 {mixed}, fixed {fixed}"
    );
}

#[test]
fn intercept_only_fit_matches_empirical_frequencies() {
    let data = test_data("F1<F2<F3", 40, 21);
    let spec = ModelSpec {
        include_formulation: false,
        include_attribute: false,
        ..fixed_spec(OddsStructure::Proportional)
    };
    let fit = fit_fixed(&spec, &data, &FitOptions::default()).unwrap();
    assert!(fit.converged());

    let n = data.n_obs() as f64;
    let mut counts = [0.0; 5];
    for &y in &data.responses {
        counts[y - 1] += 1.0;
    }
    // the intercept-only MLE reproduces the empirical cumulative
    // proportions exactly (up to optimiser tolerance)
    let mut cum = 0.0;
    for k in 0..4 {
        cum += counts[k] / n;
        let fitted = math::logistic(fit.params.alpha[k]);
        assert!(
            (fitted - cum).abs() < 1e-5,
            "cut {k}: fitted {fitted}, empirical {cum}"
        );
    }
}

#[test]
fn fixed_fit_recovers_strong_truth() {
    let scenario = ScenarioSpec {
        sigma_u: 0.0,
        ..ScenarioSpec::new("F3<F1<F2", 250, 1, 2024)
    };
    let ds = simulate_dataset(&scenario, 0).unwrap();
    let data = EncodedData::encode_default(&ds).unwrap();
    let spec = fixed_spec(OddsStructure::Proportional);
    let fit = fit_fixed(&spec, &data, &FitOptions::default()).unwrap();
    assert!(fit.converged());
    let (_, truth) = true_model(&scenario).unwrap();
    let se = fit.standard_errors().unwrap();
    let est = fit.flat_estimates();
    let tru = spec.pack(&ParamVector {
        log_sigma_u: None,
        ..truth
    });
    for i in 0..est.len() {
        assert!(
            (est[i] - tru[i]).abs() < 4.0 * se[i].max(0.05),
            "param {i}: estimate {} vs truth {} (se {})",
            est[i],
            tru[i],
            se[i]
        );
    }
}

#[test]
fn mixed_fit_converges_and_finds_dispersion() {
    let scenario = ScenarioSpec {
        sigma_u: 1.5,
        ..ScenarioSpec::new("F1<F2<F3", 60, 1, 77)
    };
    let ds = simulate_dataset(&scenario, 0).unwrap();
    let data = EncodedData::encode_default(&ds).unwrap();
    let (spec, _) = true_model(&scenario).unwrap();
    let opts = MixedFitOptions {
        quad_order: 9,
        ..MixedFitOptions::default()
    };
    let fit = fit_mixed(&spec, &data, &opts).unwrap();
    assert!(fit.converged());
    let sigma = fit.params.sigma_u().unwrap();
    assert!(
        sigma > 0.8 && sigma < 2.5,
        "sigma estimate {sigma} far from truth 1.5"
    );
    // the mixed loglik must beat the fixed fit's by a clear margin on
    // data with real panellist heterogeneity
    let fspec = ModelSpec {
        random_intercept: false,
        ..spec
    };
    let ffit = fit_fixed(&fspec, &data, &FitOptions::default()).unwrap();
    assert!(fit.loglik > ffit.loglik + 2.0);
}
