//! CSV ingestion and artifact writing.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sensilogit_core::dataset::{CollapseMap, DatasetBuilder, HedonicScale, OrdinalDataset};

use crate::config::Columns;
use crate::error::CliError;

pub fn load_csv(
    path: &Path,
    columns: &Columns,
    scale: HedonicScale,
    formulation_order: Option<&[String]>,
    attribute_order: Option<&[String]>,
) -> Result<OrdinalDataset, CliError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Data(format!("cannot read header of {}: {e}", path.display())))?
        .clone();
    let col = |name: &str| -> Result<usize, CliError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Data(format!("missing column {name:?} in {}", path.display())))
    };
    let ip = col(&columns.panellist)?;
    let iff = col(&columns.formulation)?;
    let ia = col(&columns.attribute)?;
    let ir = col(&columns.response)?;

    let mut builder = DatasetBuilder::new(scale);
    if let Some(order) = formulation_order {
        builder = builder.with_formulation_order(order.to_vec());
    }
    if let Some(order) = attribute_order {
        builder = builder.with_attribute_order(order.to_vec());
    }
    for (line, record) in reader.records().enumerate() {
        let record =
            record.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let field = |i: usize| -> Result<&str, CliError> {
            record.get(i).ok_or_else(|| {
                CliError::Data(format!("{} row {}: short record", path.display(), line + 2))
            })
        };
        let response: usize = field(ir)?.trim().parse().map_err(|_| {
            CliError::Data(format!(
                "{} row {}: unparsable response {:?}",
                path.display(),
                line + 2,
                field(ir).unwrap_or("")
            ))
        })?;
        builder
            .push(field(ip)?, field(iff)?, field(ia)?, response)
            .map_err(|e| {
                CliError::Data(format!("{} row {}: {e}", path.display(), line + 2))
            })?;
    }
    builder
        .build()
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Build a collapse map from JSON-style {"source": target} pairs.
pub fn collapse_from_pairs(
    pairs: &BTreeMap<String, usize>,
    source_j: usize,
) -> Result<CollapseMap, CliError> {
    let mut mapping = vec![0usize; source_j];
    let mut seen = vec![false; source_j];
    for (key, &target) in pairs {
        let source: usize = key
            .parse()
            .map_err(|_| CliError::Usage(format!("collapse key {key:?} is not an integer")))?;
        if source < 1 || source > source_j {
            return Err(CliError::Usage(format!(
                "collapse key {source} outside 1..={source_j}"
            )));
        }
        mapping[source - 1] = target;
        seen[source - 1] = true;
    }
    if let Some(missing) = seen.iter().position(|&s| !s) {
        return Err(CliError::Usage(format!(
            "collapse map does not cover source category {}",
            missing + 1
        )));
    }
    let target_j = *pairs.values().max().expect("non-empty map");
    CollapseMap::new(source_j, target_j, mapping)
        .map_err(|e| CliError::Usage(format!("invalid collapse map: {e}")))
}

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(path: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(path)
            .map_err(|e| CliError::Data(format!("cannot create {}: {e}", path.display())))?;
        Ok(OutDir {
            root: path.to_path_buf(),
        })
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.root.join(name);
        std::fs::write(&path, contents)
            .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
    }

    pub fn write_json<T: serde::Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Numeric(format!("cannot serialise {name}: {e}")))?;
        text.push('\n');
        self.write(name, &text)
    }

    /// Wall-clock details live here and nowhere else, so every other
    /// artifact is byte-reproducible.
    pub fn write_meta(&self, command: &str, config: &Path) -> Result<(), CliError> {
        let now = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        self.write(
            "meta.txt",
            &format!(
                "command: {command}\nconfig: {}\nunix_time: {now}\n",
                config.display()
            ),
        )
    }
}

/// Report-style p-value display; full precision stays in the JSON files.
pub fn fmt_p(p: f64) -> String {
    if p < 0.001 {
        String::from("< 0.001")
    } else if p < 0.01 {
        String::from("< 0.01")
    } else {
        format!("{p:.3}")
    }
}
