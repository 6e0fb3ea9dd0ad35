//! Exploratory screening: chi-square association per attribute and
//! correspondence-analysis coordinates.

use std::path::Path;

use serde::Serialize;

use sensilogit_core::ca::mca_coordinates;
use sensilogit_core::dataset::HedonicScale;
use sensilogit_core::inference::{chisq_association, TestResult};

use crate::config::ExploreConfig;
use crate::error::CliError;
use crate::io::{collapse_from_pairs, fmt_p, load_csv, OutDir};

#[derive(Serialize)]
struct AttributeTest {
    attribute: String,
    #[serde(flatten)]
    test: TestResult,
}

#[derive(Serialize)]
struct ExploreTests {
    chi_square: Vec<AttributeTest>,
    total_inertia: f64,
    inertia_share: [f64; 2],
}

pub fn run(config_path: &Path, cfg: &ExploreConfig, out: &Path) -> Result<(), CliError> {
    let out = OutDir::create(out)?;
    out.write_meta("explore", config_path)?;

    let scale = HedonicScale::numeric(cfg.scale);
    let mut ds = load_csv(
        &cfg.data,
        &cfg.columns,
        scale,
        cfg.formulation_order.as_deref(),
        cfg.attribute_order.as_deref(),
    )?;
    if let Some(pairs) = &cfg.collapse {
        let map = collapse_from_pairs(pairs, cfg.scale)?;
        ds = ds
            .collapse_scale(&map)
            .map_err(|e| CliError::Data(format!("collapse: {e}")))?;
    }

    let mut summary = String::from("Exploratory analysis\n\nChi-square association (formulation x response):\n");
    let mut chi_square = Vec::new();
    for a in 1..=ds.n_attributes() {
        let name = ds.attribute_names()[a - 1].clone();
        let table = ds
            .contingency_table(a)
            .map_err(|e| CliError::Data(e.to_string()))?;
        let test = chisq_association(&table)
            .map_err(|e| CliError::Numeric(format!("attribute {name}: {e}")))?;
        summary.push_str(&format!(
            "  {:<12} statistic {:.4}, df {}, p {}\n",
            name,
            test.statistic,
            test.df,
            fmt_p(test.p_value),
        ));
        chi_square.push(AttributeTest {
            attribute: name,
            test,
        });
    }

    let mca = mca_coordinates(&ds).map_err(|e| CliError::Numeric(e.to_string()))?;
    summary.push_str(&format!(
        "\nMultiple correspondence analysis: total inertia {:.4}; axes 1-2 carry {:.1}% + {:.1}%\n",
        mca.total_inertia,
        100.0 * mca.inertia_share[0],
        100.0 * mca.inertia_share[1],
    ));
    if !mca.dropped.is_empty() {
        summary.push_str(&format!(
            "warning: never-observed categories dropped: {}\n",
            mca.dropped.join(", "),
        ));
    }

    let mut csv = String::from("label,axis1,axis2,type\n");
    for p in &mca.points {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            p.label,
            p.coords[0],
            p.coords[1],
            p.kind.as_str(),
        ));
    }
    out.write("coords.csv", &csv)?;
    out.write_json(
        "tests.json",
        &ExploreTests {
            chi_square,
            total_inertia: mca.total_inertia,
            inertia_share: mca.inertia_share,
        },
    )?;
    out.write("summary.txt", &summary)?;
    Ok(())
}
