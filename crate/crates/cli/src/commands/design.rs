//! Balanced incomplete block design generation and panellist schedules.

use std::path::Path;

use sensilogit_core::design::{assign_panellists, generate_bibd, validate_bibd, DesignError};

use crate::config::DesignConfig;
use crate::error::CliError;
use crate::io::OutDir;

const NODE_BUDGET: u64 = 50_000_000;

pub fn run(
    config_path: &Path,
    cfg: &DesignConfig,
    seed_override: Option<u64>,
    out: &Path,
) -> Result<(), CliError> {
    let out = OutDir::create(out)?;
    out.write_meta("design", config_path)?;
    let seed = seed_override.or(cfg.seed).unwrap_or(1);

    let mut summary = String::new();

    // validate an explicit quadruple when given
    if let (Some(b), Some(r)) = (cfg.b, cfg.r) {
        match validate_bibd(cfg.t, b, cfg.h, r) {
            Ok(params) => summary.push_str(&format!(
                "Requested design (t={}, b={}, h={}, r={}) is admissible with lambda={}\n\n",
                params.t, params.b, params.h, params.r, params.lambda,
            )),
            Err(DesignError::ConditionsViolated(violations)) => {
                let mut msg =
                    format!("design (t={}, b={b}, h={}, r={r}) inadmissible:", cfg.t, cfg.h);
                for v in &violations {
                    msg.push_str(&format!("\n  - {v}"));
                }
                return Err(CliError::Data(msg));
            }
            Err(e) => return Err(CliError::Data(e.to_string())),
        }
    }

    // pick a multiplier so the block count divides the panellist count
    let multiplier = match cfg.multiplier {
        Some(m) => m,
        None => {
            let base = generate_bibd(cfg.t, cfg.h, 1, NODE_BUDGET)
                .map_err(|e| CliError::Numeric(format!("generation failed: {e}")))?;
            let b0 = base.blocks.len();
            (1..=cfg.panellists)
                .find(|m| cfg.panellists % (m * b0) == 0)
                .unwrap_or(1)
        }
    };
    let layout = generate_bibd(cfg.t, cfg.h, multiplier, NODE_BUDGET)
        .map_err(|e| CliError::Numeric(format!("generation failed: {e}")))?;
    layout
        .verify()
        .map_err(|e| CliError::Numeric(format!("generated design failed verification: {e}")))?;
    summary.push_str(&format!(
        "Generated design: t={}, b={}, h={}, r={}, lambda={}\n",
        layout.params.t, layout.params.b, layout.params.h, layout.params.r, layout.params.lambda,
    ));

    let schedule = assign_panellists(&layout, cfg.panellists, seed)
        .map_err(|e| CliError::Data(e.to_string()))?;
    summary.push_str(&format!(
        "Schedule: {} panellists, {} servings each, seed {}\n",
        cfg.panellists, layout.params.h, seed,
    ));

    let mut csv = String::from("panellist,block,position,formulation\n");
    for a in &schedule {
        for (pos, &f) in a.order.iter().enumerate() {
            csv.push_str(&format!(
                "P{},{},{},F{}\n",
                a.panellist + 1,
                a.block + 1,
                pos + 1,
                f,
            ));
        }
    }
    out.write("layout.csv", &csv)?;
    out.write("summary.txt", &summary)?;
    Ok(())
}
