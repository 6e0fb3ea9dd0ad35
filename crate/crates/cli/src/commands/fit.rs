//! The full analysis pipeline: proportionality test, covariate tests,
//! final fit, random-effect profile CI, predictions and ranking.

use std::path::Path;

use serde::Serialize;

use sensilogit_core::dataset::{HedonicScale, OrdinalDataset};
use sensilogit_core::inference::{
    test_covariate, test_proportionality, wald_tests, CovariateTerm, TestResult, WaldRow,
};
use sensilogit_core::mixed::{
    fit_mixed, profile_ci_sigma, profile_trace, MixedFitOptions, ProfileCi,
};
use sensilogit_core::model::{
    fit_fixed, EncodedData, FitOptions, FittedModel, ModelSpec, OddsStructure,
};
use sensilogit_core::predict::{prediction_table, rank_formulations, Averaging, RankEntry};

use crate::config::{AveragingName, FitConfig};
use crate::error::CliError;
use crate::io::{collapse_from_pairs, fmt_p, load_csv, OutDir};

#[derive(Serialize)]
struct TestsFile {
    proportionality: Option<TestResult>,
    formulation: Option<TestResult>,
    attribute: Option<TestResult>,
}

#[derive(Serialize)]
struct FitFile {
    model: String,
    n_obs: usize,
    n_panellists: usize,
    loglik: f64,
    converged: bool,
    iterations: usize,
    warnings: Vec<String>,
    parameters: Vec<WaldRow>,
    sigma_u: Option<f64>,
    sigma_ci: Option<ProfileCi>,
    threshold: usize,
    averaging: &'static str,
    ranking: Vec<RankEntry>,
}

pub fn run(config_path: &Path, cfg: &FitConfig, out: &Path) -> Result<(), CliError> {
    let out = OutDir::create(out)?;
    out.write_meta("fit", config_path)?;

    // --- ingest -------------------------------------------------------
    let ds = load_stage(cfg)?;
    let data = EncodedData::encode_default(&ds)
        .map_err(|e| CliError::Data(format!("stage encode: {e}")))?;
    let spec = spec_from(cfg, &ds);
    spec.validate()
        .map_err(|e| CliError::Usage(format!("stage encode: {e}")))?;

    let fixed_opts = FitOptions {
        max_iter: cfg.options.max_iter,
        grad_tol: cfg.options.grad_tol.min(1e-6),
    };
    let mixed_opts = MixedFitOptions {
        quad_order: cfg.options.quad_order,
        max_iter: cfg.options.max_iter,
        grad_tol: cfg.options.grad_tol,
    };

    let mut summary = String::new();
    summary.push_str(&format!(
        "Data: {} observations, {} panellists, {} formulations, {} attributes, {}-category scale\n\n",
        data.n_obs(),
        ds.n_panellists(),
        ds.n_formulations(),
        ds.n_attributes(),
        spec.j,
    ));

    // --- proportionality ---------------------------------------------
    let mut tests = TestsFile {
        proportionality: None,
        formulation: None,
        attribute: None,
    };
    let mut reuse: Option<FittedModel> = None;
    let covariates_present = (spec.include_formulation && spec.n_formulations > 1)
        || (spec.include_attribute && spec.n_attributes > 1);
    if spec.j >= 3 && covariates_present {
        let (test, fit_null, fit_alt) = test_proportionality(&spec, &data, &fixed_opts, &mixed_opts)
            .map_err(|e| CliError::Numeric(format!("stage proportionality: {e}")))?;
        summary.push_str(&format!(
            "Proportionality (LRT): statistic {:.4}, df {}, p {}\n  -> proportional odds {} at the 5% level\n\n",
            test.statistic,
            test.df,
            fmt_p(test.p_value),
            if test.p_value < 0.05 { "rejected" } else { "not rejected" },
        ));
        if spec.is_proportional() {
            reuse = Some(fit_null);
        } else if spec.formulation_odds == OddsStructure::NonProportional
            && spec.attribute_odds == OddsStructure::NonProportional
        {
            reuse = Some(fit_alt);
        }
        tests.proportionality = Some(test);
    } else {
        summary.push_str("Proportionality test skipped (vacuous for this model)\n\n");
    }

    // --- covariate tests ---------------------------------------------
    for (term, name, slot) in [
        (CovariateTerm::Formulation, "formulation", 0usize),
        (CovariateTerm::Attribute, "attribute", 1),
    ] {
        let present = match term {
            CovariateTerm::Formulation => spec.include_formulation && spec.n_formulations > 1,
            CovariateTerm::Attribute => spec.include_attribute && spec.n_attributes > 1,
        };
        if !present {
            continue;
        }
        let test = test_covariate(&spec, &data, term, &fixed_opts, &mixed_opts)
            .map_err(|e| CliError::Numeric(format!("stage covariate {name}: {e}")))?;
        summary.push_str(&format!(
            "{name} effect (LRT): statistic {:.4}, df {}, p {}\n",
            test.statistic,
            test.df,
            fmt_p(test.p_value),
        ));
        if slot == 0 {
            tests.formulation = Some(test);
        } else {
            tests.attribute = Some(test);
        }
    }
    summary.push('\n');
    out.write_json("tests.json", &tests)?;

    // --- final fit ----------------------------------------------------
    let fit = match reuse {
        Some(f) => f,
        None => fit_model(&spec, &data, &fixed_opts, &mixed_opts)
            .map_err(|e| CliError::Numeric(format!("stage final fit: {e}")))?,
    };
    if !fit.converged() {
        return Err(CliError::Numeric(format!(
            "stage final fit: did not converge after {} iterations (gradient norm {:.3e})",
            fit.convergence.iterations, fit.convergence.grad_norm
        )));
    }
    let wald = wald_tests(&fit)
        .map_err(|e| CliError::Numeric(format!("stage standard errors: {e}")))?;
    summary.push_str(&format!(
        "Final model: {}\nLog-likelihood: {:.4} ({} observations)\n\nParameter estimates:\n",
        model_desc(&spec),
        fit.loglik,
        fit.n_obs,
    ));
    for row in &wald {
        summary.push_str(&format!(
            "  {:<14} {:>9.4}  (se {:.4}, p {})\n",
            row.name,
            row.estimate,
            row.std_error,
            fmt_p(row.p_value),
        ));
    }
    summary.push('\n');

    // --- profile CI for sigma_u --------------------------------------
    let mut sigma_ci = None;
    if spec.random_intercept {
        let sigma_hat = fit.params.sigma_u().expect("random-intercept fit");
        let ci = profile_ci_sigma(&fit, &data, cfg.options.profile_level, &mixed_opts)
            .map_err(|e| CliError::Numeric(format!("stage profile CI: {e}")))?;
        summary.push_str(&format!(
            "Random effect: sigma_u {:.4}, {:.0}% profile CI [{:.4}, {:.4}{}]\n\n",
            sigma_hat,
            100.0 * ci.level,
            ci.lower,
            ci.upper,
            if ci.open_upper { "+" } else { "" },
        ));
        if cfg.options.profile_points > 0 {
            let lo = (0.5 * ci.lower).max(0.02);
            let hi = 1.2 * ci.upper.max(sigma_hat);
            let k = cfg.options.profile_points;
            let grid: Vec<f64> = (0..k)
                .map(|i| lo + (hi - lo) * i as f64 / (k - 1).max(1) as f64)
                .collect();
            let trace = profile_trace(&fit, &data, &grid, &mixed_opts)
                .map_err(|e| CliError::Numeric(format!("stage profile trace: {e}")))?;
            let mut csv = String::from("sigma,profile_loglik\n");
            for (s, ll) in trace {
                csv.push_str(&format!("{s},{ll}\n"));
            }
            out.write("profile.csv", &csv)?;
        }
        sigma_ci = Some(ci);
    }

    // --- predictions and ranking -------------------------------------
    let averaging = match (cfg.options.averaging, spec.random_intercept) {
        (AveragingName::Population, true) => Averaging::PopulationAveraged,
        _ => Averaging::ConditionalAtZero,
    };
    let threshold = cfg.options.threshold;
    let table = prediction_table(&fit, threshold, averaging, cfg.options.quad_order)
        .map_err(|e| CliError::Numeric(format!("stage predictions: {e}")))?;
    let mut csv = String::from("attribute,formulation");
    for j in 1..=spec.j {
        csv.push_str(&format!(",p{j}"));
    }
    csv.push_str(&format!(",p_at_least_{threshold}\n"));
    for row in &table.rows {
        csv.push_str(&format!(
            "{},{}",
            ds.attribute_names()[row.attribute - 1],
            ds.formulation_names()[row.formulation - 1],
        ));
        for p in &row.probs {
            csv.push_str(&format!(",{p}"));
        }
        csv.push_str(&format!(",{}\n", row.p_at_least));
    }
    out.write("predictions.csv", &csv)?;

    let ranking = rank_formulations(&fit, threshold, averaging, cfg.options.quad_order)
        .map_err(|e| CliError::Numeric(format!("stage ranking: {e}")))?;
    summary.push_str(&format!(
        "Acceptance P(Y >= {threshold}), attribute mean, best to worst:\n"
    ));
    for entry in &ranking {
        summary.push_str(&format!(
            "  {:<8} {:.4}{}\n",
            ds.formulation_names()[entry.formulation - 1],
            entry.score,
            if entry.tied { "  (tied)" } else { "" },
        ));
    }
    let top: Vec<&str> = ranking
        .iter()
        .take(3)
        .map(|e| ds.formulation_names()[e.formulation - 1].as_str())
        .collect();
    let worst = ranking.last().map(|e| ds.formulation_names()[e.formulation - 1].as_str());
    summary.push_str(&format!(
        "\nMost accepted: {}; least accepted: {}\n",
        top.join(", "),
        worst.unwrap_or("-"),
    ));

    // --- machine-readable fit report ---------------------------------
    let report = FitFile {
        model: model_desc(&spec),
        n_obs: fit.n_obs,
        n_panellists: ds.n_panellists(),
        loglik: fit.loglik,
        converged: fit.converged(),
        iterations: fit.convergence.iterations,
        warnings: fit.warnings.iter().map(|w| format!("{w:?}")).collect(),
        parameters: wald,
        sigma_u: fit.params.sigma_u(),
        sigma_ci,
        threshold,
        averaging: match averaging {
            Averaging::PopulationAveraged => "population",
            Averaging::ConditionalAtZero => "conditional",
        },
        ranking,
    };
    out.write_json("fit.json", &report)?;
    out.write("summary.txt", &summary)?;
    Ok(())
}

fn load_stage(cfg: &FitConfig) -> Result<OrdinalDataset, CliError> {
    let scale = HedonicScale::numeric(cfg.scale);
    let ds = load_csv(
        &cfg.data,
        &cfg.columns,
        scale,
        cfg.formulation_order.as_deref(),
        cfg.attribute_order.as_deref(),
    )?;
    match &cfg.collapse {
        None => Ok(ds),
        Some(pairs) => {
            let map = collapse_from_pairs(pairs, cfg.scale)?;
            ds.collapse_scale(&map)
                .map_err(|e| CliError::Data(format!("stage collapse: {e}")))
        }
    }
}

fn spec_from(cfg: &FitConfig, ds: &OrdinalDataset) -> ModelSpec {
    ModelSpec {
        j: ds.scale().categories(),
        n_formulations: ds.n_formulations(),
        n_attributes: ds.n_attributes(),
        include_formulation: cfg.model.include_formulation,
        include_attribute: cfg.model.include_attribute,
        formulation_odds: cfg.model.formulation_odds.into(),
        attribute_odds: cfg.model.attribute_odds.into(),
        random_intercept: cfg.model.random_intercept,
    }
}

fn fit_model(
    spec: &ModelSpec,
    data: &EncodedData,
    fixed_opts: &FitOptions,
    mixed_opts: &MixedFitOptions,
) -> Result<FittedModel, sensilogit_core::model::ModelError> {
    if spec.random_intercept {
        fit_mixed(spec, data, mixed_opts)
    } else {
        fit_fixed(spec, data, fixed_opts)
    }
}

fn model_desc(spec: &ModelSpec) -> String {
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
    format!(
        "cumulative logit, {odds} odds, {terms}{}",
        if spec.random_intercept {
            " + panellist random intercept"
        } else {
            ""
        }
    )
}
