//! Data model for ordinal sensory experiments: factor registries,
//! hedonic scale collapse, dummy encoding and contingency tabulation.
//!
//! Level and category indices are 1-based throughout, matching the usual
//! sensory-study notation (formulations F1..FT, categories 1..J).

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Ordered response categories measuring degrees of liking.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct HedonicScale {
    labels: Vec<String>,
}

impl HedonicScale {
    pub fn new(labels: Vec<String>) -> Result<Self, DatasetError> {
        if labels.len() < 2 {
            return Err(DatasetError::ScaleTooSmall { j: labels.len() });
        }
        for (i, a) in labels.iter().enumerate() {
            if labels[i + 1..].contains(a) {
                return Err(DatasetError::DuplicateScaleLabel { label: a.clone() });
            }
        }
        Ok(HedonicScale { labels })
    }

    /// Numeric scale "1".."J".
    pub fn numeric(j: usize) -> Self {
        HedonicScale {
            labels: (1..=j).map(|c| c.to_string()).collect(),
        }
    }

    pub fn categories(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// Order-preserving surjection from a source scale onto a coarser one.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct CollapseMap {
    source_j: usize,
    target_j: usize,
    /// mapping[c - 1] is the target category of source category c
    mapping: Vec<usize>,
}

impl CollapseMap {
    pub fn new(source_j: usize, target_j: usize, mapping: Vec<usize>) -> Result<Self, DatasetError> {
        if mapping.len() != source_j {
            return Err(DatasetError::CollapseNotTotal {
                mapped: mapping.len(),
                source_j,
            });
        }
        let mut seen = vec![false; target_j];
        for (c, &t) in mapping.iter().enumerate() {
            if t < 1 || t > target_j {
                return Err(DatasetError::CollapseTargetOutOfRange {
                    source: c + 1,
                    target: t,
                    target_j,
                });
            }
            seen[t - 1] = true;
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(DatasetError::CollapseNotSurjective {
                missing: missing + 1,
            });
        }
        for w in mapping.windows(2) {
            if w[1] < w[0] {
                return Err(DatasetError::CollapseNotMonotone);
            }
        }
        Ok(CollapseMap {
            source_j,
            target_j,
            mapping,
        })
    }

    /// The 9-to-5 collapse used for sparse 9-point hedonic data:
    /// {1,2} -> 1, {3,4} -> 2, {5} -> 3, {6,7} -> 4, {8,9} -> 5.
    pub fn nine_to_five() -> Self {
        CollapseMap::new(9, 5, vec![1, 1, 2, 2, 3, 4, 4, 5, 5]).expect("static map is valid")
    }

    pub fn identity(j: usize) -> Self {
        CollapseMap::new(j, j, (1..=j).collect()).expect("identity map is valid")
    }

    pub fn source_categories(&self) -> usize {
        self.source_j
    }

    pub fn target_categories(&self) -> usize {
        self.target_j
    }

    pub fn apply(&self, category: usize) -> usize {
        self.mapping[category - 1]
    }
}

/// One panellist's response to one (formulation, attribute) cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Observation {
    /// index into the panellist registry (0-based)
    pub panellist: usize,
    /// formulation level, 1..=T
    pub formulation: usize,
    /// attribute level, 1..=L
    pub attribute: usize,
    /// response category, 1..=J
    pub response: usize,
}

/// Immutable collection of observations with their factor registries.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct OrdinalDataset {
    observations: Vec<Observation>,
    scale: HedonicScale,
    formulations: Vec<String>,
    attributes: Vec<String>,
    panellists: Vec<String>,
}

impl OrdinalDataset {
    pub fn new(
        observations: Vec<Observation>,
        scale: HedonicScale,
        formulations: Vec<String>,
        attributes: Vec<String>,
        panellists: Vec<String>,
    ) -> Result<Self, DatasetError> {
        if formulations.is_empty() || attributes.is_empty() || panellists.is_empty() {
            return Err(DatasetError::EmptyRegistry);
        }
        let j = scale.categories();
        let mut seen = alloc::collections::BTreeSet::new();
        for obs in &observations {
            if obs.panellist >= panellists.len() {
                return Err(DatasetError::UnknownPanellist { index: obs.panellist });
            }
            if obs.formulation < 1 || obs.formulation > formulations.len() {
                return Err(DatasetError::UnknownFormulationLevel {
                    level: obs.formulation,
                });
            }
            if obs.attribute < 1 || obs.attribute > attributes.len() {
                return Err(DatasetError::UnknownAttributeLevel {
                    level: obs.attribute,
                });
            }
            if obs.response < 1 || obs.response > j {
                return Err(DatasetError::ResponseOutOfRange {
                    response: obs.response,
                    j,
                });
            }
            if !seen.insert((obs.panellist, obs.formulation, obs.attribute)) {
                return Err(DatasetError::DuplicateTriple {
                    panellist: panellists[obs.panellist].clone(),
                    formulation: obs.formulation,
                    attribute: obs.attribute,
                });
            }
        }
        Ok(OrdinalDataset {
            observations,
            scale,
            formulations,
            attributes,
            panellists,
        })
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn scale(&self) -> &HedonicScale {
        &self.scale
    }

    pub fn n_formulations(&self) -> usize {
        self.formulations.len()
    }

    pub fn n_attributes(&self) -> usize {
        self.attributes.len()
    }

    pub fn n_panellists(&self) -> usize {
        self.panellists.len()
    }

    pub fn formulation_names(&self) -> &[String] {
        &self.formulations
    }

    pub fn attribute_names(&self) -> &[String] {
        &self.attributes
    }

    pub fn panellist_ids(&self) -> &[String] {
        &self.panellists
    }

    /// Replace every response through an order-preserving collapse map.
    pub fn collapse_scale(&self, map: &CollapseMap) -> Result<OrdinalDataset, DatasetError> {
        if map.source_categories() != self.scale.categories() {
            return Err(DatasetError::CollapseSourceMismatch {
                map_source: map.source_categories(),
                scale_j: self.scale.categories(),
            });
        }
        let observations = self
            .observations
            .iter()
            .map(|o| Observation {
                response: map.apply(o.response),
                ..*o
            })
            .collect();
        Ok(OrdinalDataset {
            observations,
            scale: HedonicScale::numeric(map.target_categories()),
            formulations: self.formulations.clone(),
            attributes: self.attributes.clone(),
            panellists: self.panellists.clone(),
        })
    }

    /// Dummy (treatment-contrast) encoding of the formulation and
    /// attribute factors. Column order: formulation levels except the
    /// reference (ascending), then attribute levels except the reference.
    pub fn dummy_encode(
        &self,
        formulation_ref: usize,
        attribute_ref: usize,
    ) -> Result<DesignMatrix, DatasetError> {
        let t = self.n_formulations();
        let l = self.n_attributes();
        if formulation_ref < 1 || formulation_ref > t {
            return Err(DatasetError::UnknownFormulationLevel {
                level: formulation_ref,
            });
        }
        if attribute_ref < 1 || attribute_ref > l {
            return Err(DatasetError::UnknownAttributeLevel {
                level: attribute_ref,
            });
        }
        let f_levels: Vec<usize> = (1..=t).filter(|&v| v != formulation_ref).collect();
        let a_levels: Vec<usize> = (1..=l).filter(|&v| v != attribute_ref).collect();
        let mut col_names = Vec::with_capacity(f_levels.len() + a_levels.len());
        for &v in &f_levels {
            col_names.push(format!("F{v}"));
        }
        for &v in &a_levels {
            col_names.push(format!("A:{}", self.attributes[v - 1]));
        }
        let rows = self
            .observations
            .iter()
            .map(|o| {
                let mut row = vec![0.0; f_levels.len() + a_levels.len()];
                if let Some(k) = f_levels.iter().position(|&v| v == o.formulation) {
                    row[k] = 1.0;
                }
                if let Some(k) = a_levels.iter().position(|&v| v == o.attribute) {
                    row[f_levels.len() + k] = 1.0;
                }
                row
            })
            .collect();
        Ok(DesignMatrix {
            rows,
            col_names,
            formulation_cols: f_levels.len(),
            attribute_cols: a_levels.len(),
            formulation_ref,
            attribute_ref,
        })
    }

    /// T x J count matrix for one attribute.
    pub fn contingency_table(&self, attribute: usize) -> Result<Vec<Vec<u64>>, DatasetError> {
        if attribute < 1 || attribute > self.n_attributes() {
            return Err(DatasetError::UnknownAttributeLevel { level: attribute });
        }
        let t = self.n_formulations();
        let j = self.scale.categories();
        let mut table = vec![vec![0u64; j]; t];
        for o in &self.observations {
            if o.attribute == attribute {
                table[o.formulation - 1][o.response - 1] += 1;
            }
        }
        Ok(table)
    }

    /// Observations restricted to one attribute (registries preserved,
    /// attribute registry reduced to the single level).
    pub fn filter_attribute(&self, attribute: usize) -> Result<OrdinalDataset, DatasetError> {
        if attribute < 1 || attribute > self.n_attributes() {
            return Err(DatasetError::UnknownAttributeLevel { level: attribute });
        }
        let observations = self
            .observations
            .iter()
            .filter(|o| o.attribute == attribute)
            .map(|o| Observation { attribute: 1, ..*o })
            .collect();
        OrdinalDataset::new(
            observations,
            self.scale.clone(),
            self.formulations.clone(),
            vec![self.attributes[attribute - 1].clone()],
            self.panellists.clone(),
        )
    }
}

/// 0/1 indicator matrix with one row per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub rows: Vec<Vec<f64>>,
    pub col_names: Vec<String>,
    pub formulation_cols: usize,
    pub attribute_cols: usize,
    pub formulation_ref: usize,
    pub attribute_ref: usize,
}

impl DesignMatrix {
    pub fn ncols(&self) -> usize {
        self.formulation_cols + self.attribute_cols
    }
}

/// Incremental construction with first-appearance (or pinned) level order.
pub struct DatasetBuilder {
    scale: HedonicScale,
    formulations: Vec<String>,
    attributes: Vec<String>,
    panellists: Vec<String>,
    pinned_formulations: bool,
    pinned_attributes: bool,
    observations: Vec<Observation>,
}

impl DatasetBuilder {
    pub fn new(scale: HedonicScale) -> Self {
        DatasetBuilder {
            scale,
            formulations: Vec::new(),
            attributes: Vec::new(),
            panellists: Vec::new(),
            pinned_formulations: false,
            pinned_attributes: false,
            observations: Vec::new(),
        }
    }

    /// Pin the formulation level order instead of first-appearance order.
    pub fn with_formulation_order(mut self, levels: Vec<String>) -> Self {
        self.formulations = levels;
        self.pinned_formulations = true;
        self
    }

    /// Pin the attribute level order instead of first-appearance order.
    pub fn with_attribute_order(mut self, levels: Vec<String>) -> Self {
        self.attributes = levels;
        self.pinned_attributes = true;
        self
    }

    pub fn push(
        &mut self,
        panellist: &str,
        formulation: &str,
        attribute: &str,
        response: usize,
    ) -> Result<(), DatasetError> {
        if response < 1 || response > self.scale.categories() {
            return Err(DatasetError::ResponseOutOfRange {
                response,
                j: self.scale.categories(),
            });
        }
        let p = register(&mut self.panellists, panellist, false)
            .expect("panellist registry is never pinned");
        let f = register(&mut self.formulations, formulation, self.pinned_formulations)?;
        let a = register(&mut self.attributes, attribute, self.pinned_attributes)?;
        self.observations.push(Observation {
            panellist: p,
            formulation: f + 1,
            attribute: a + 1,
            response,
        });
        Ok(())
    }

    pub fn build(self) -> Result<OrdinalDataset, DatasetError> {
        OrdinalDataset::new(
            self.observations,
            self.scale,
            self.formulations,
            self.attributes,
            self.panellists,
        )
    }
}

fn register(registry: &mut Vec<String>, name: &str, pinned: bool) -> Result<usize, DatasetError> {
    if let Some(i) = registry.iter().position(|x| x == name) {
        return Ok(i);
    }
    if pinned {
        return Err(DatasetError::LevelNotInPinnedOrder {
            level: name.to_string(),
        });
    }
    registry.push(name.to_string());
    Ok(registry.len() - 1)
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetError {
    ScaleTooSmall { j: usize },
    DuplicateScaleLabel { label: String },
    CollapseNotTotal { mapped: usize, source_j: usize },
    CollapseTargetOutOfRange { source: usize, target: usize, target_j: usize },
    CollapseNotSurjective { missing: usize },
    CollapseNotMonotone,
    CollapseSourceMismatch { map_source: usize, scale_j: usize },
    EmptyRegistry,
    UnknownPanellist { index: usize },
    UnknownFormulationLevel { level: usize },
    UnknownAttributeLevel { level: usize },
    ResponseOutOfRange { response: usize, j: usize },
    DuplicateTriple { panellist: String, formulation: usize, attribute: usize },
    LevelNotInPinnedOrder { level: String },
}

impl core::fmt::Display for DatasetError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        use DatasetError::*;
        match self {
            ScaleTooSmall { j } => write!(f, "hedonic scale needs at least 2 categories, got {j}"),
            DuplicateScaleLabel { label } => write!(f, "duplicate scale label '{label}'"),
            CollapseNotTotal { mapped, source_j } => {
                write!(f, "collapse map covers {mapped} of {source_j} source categories")
            }
            CollapseTargetOutOfRange { source, target, target_j } => write!(
                f,
                "collapse maps source category {source} to {target}, outside 1..={target_j}"
            ),
            CollapseNotSurjective { missing } => {
                write!(f, "collapse map not surjective: target category {missing} unused")
            }
            CollapseNotMonotone => write!(f, "collapse map not order-preserving"),
            CollapseSourceMismatch { map_source, scale_j } => write!(
                f,
                "collapse map source has {map_source} categories but the scale has {scale_j}"
            ),
            EmptyRegistry => write!(f, "dataset requires non-empty factor registries"),
            UnknownPanellist { index } => write!(f, "panellist index {index} not registered"),
            UnknownFormulationLevel { level } => {
                write!(f, "formulation level {level} not registered")
            }
            UnknownAttributeLevel { level } => write!(f, "attribute level {level} not registered"),
            ResponseOutOfRange { response, j } => {
                write!(f, "response {response} out of range 1..={j}")
            }
            DuplicateTriple { panellist, formulation, attribute } => write!(
                f,
                "duplicate (panellist, formulation, attribute) triple ({panellist}, F{formulation}, A{attribute})"
            ),
            LevelNotInPinnedOrder { level } => {
                write!(f, "level '{level}' absent from the pinned level ordering")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for DatasetError {}
