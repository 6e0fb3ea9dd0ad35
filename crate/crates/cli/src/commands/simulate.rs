//! Concordance study runner.

use std::path::Path;

use sensilogit_core::mixed::MixedFitOptions;
use sensilogit_core::simulate::{concordance_study, ScenarioSpec, StudyOptions};

use crate::config::SimulateConfig;
use crate::error::CliError;
use crate::io::OutDir;

pub fn run(
    config_path: &Path,
    cfg: &SimulateConfig,
    seed_override: Option<u64>,
    out: &Path,
) -> Result<(), CliError> {
    let out = OutDir::create(out)?;
    out.write_meta("simulate", config_path)?;

    let master_seed = seed_override.or(cfg.seed).unwrap_or(1);
    let scenarios: Vec<ScenarioSpec> = cfg
        .scenarios
        .iter()
        .map(|s| {
            let mut spec = ScenarioSpec::new(&s.pattern, s.n_panellists, s.replicates, master_seed);
            spec.sigma_u = s.sigma_u;
            spec.gap = s.gap;
            spec.attribute_shift = s.attribute_shift;
            if let Some(alpha) = &s.alpha {
                spec.alpha = alpha.clone();
            }
            spec
        })
        .collect();
    let opts = StudyOptions {
        mixed: MixedFitOptions {
            quad_order: cfg.options.quad_order,
            ..MixedFitOptions::default()
        },
        alpha_level: cfg.options.alpha_level,
    };
    let report = concordance_study(&scenarios, &opts)
        .map_err(|e| CliError::Numeric(format!("study failed: {e}")))?;

    let mut csv = String::from(
        "scenario,replicates,unified_rate,attribute_a_rate,attribute_b_rate,\
unified_rate_with_failures,attribute_a_rate_with_failures,attribute_b_rate_with_failures,\
unified_failures,attribute_a_failures,attribute_b_failures\n",
    );
    let mut summary = String::from("Concordance study\n\n");
    let mut total_failures = 0usize;
    for s in &report.scenarios {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            s.pattern,
            s.replicates,
            s.unified.rate(),
            s.attribute_a.rate(),
            s.attribute_b.rate(),
            s.unified.rate_with_failures(),
            s.attribute_a.rate_with_failures(),
            s.attribute_b.rate_with_failures(),
            s.unified.failures,
            s.attribute_a.failures,
            s.attribute_b.failures,
        ));
        summary.push_str(&format!(
            "{}: {} replicates, concordance unified {:.1}%, attribute A {:.1}%, attribute B {:.1}%",
            s.pattern,
            s.replicates,
            100.0 * s.unified.rate(),
            100.0 * s.attribute_a.rate(),
            100.0 * s.attribute_b.rate(),
        ));
        let failures = s.unified.failures + s.attribute_a.failures + s.attribute_b.failures;
        if failures > 0 {
            summary.push_str(&format!(" ({failures} failed fits excluded)"));
        }
        summary.push('\n');
        total_failures += failures;
    }
    summary.push_str(&format!("\nmaster seed: {master_seed}\n"));
    out.write("concordance.csv", &csv)?;
    out.write_json("concordance.json", &report)?;
    out.write("summary.txt", &summary)?;

    if let Some(budget) = cfg.options.failure_budget {
        if total_failures > budget {
            return Err(CliError::Numeric(format!(
                "{total_failures} fit failures exceed the budget of {budget}"
            )));
        }
    }
    Ok(())
}
