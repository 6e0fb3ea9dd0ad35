//! Correspondence analysis of count tables and the stacked-indicator
//! (multiple correspondence) variant over a dataset.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::dataset::OrdinalDataset;
use crate::linalg::{jacobi_eigen, Matrix};
use crate::math;

/// Singular values below this are treated as structural zeros.
const SV_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct CaResult {
    /// principal coordinates, two axes per row category
    pub row_coords: Vec<[f64; 2]>,
    /// principal coordinates, two axes per column category
    pub col_coords: Vec<[f64; 2]>,
    /// all non-trivial singular values, descending
    pub singular_values: Vec<f64>,
    /// proportion of total inertia carried by each retained axis
    pub inertia_share: [f64; 2],
    pub total_inertia: f64,
}

/// Standard correspondence analysis: P = table/n, residuals
/// S = D_r^{-1/2} (P - r c^T) D_c^{-1/2}, singular value decomposition
/// of S, principal coordinates D_r^{-1/2} U Sigma and D_c^{-1/2} V Sigma.
/// The first two axes are retained; total inertia is the sum of all
/// squared singular values (= chi-square / n).
pub fn correspondence_analysis(table: &[Vec<u64>]) -> Result<CaResult, CaError> {
    let t = table.len();
    if t == 0 || table[0].is_empty() {
        return Err(CaError::EmptyTable);
    }
    let j = table[0].len();
    if table.iter().any(|row| row.len() != j) {
        return Err(CaError::RaggedTable);
    }
    let row_sums: Vec<f64> = table.iter().map(|r| r.iter().sum::<u64>() as f64).collect();
    let col_sums: Vec<f64> = (0..j)
        .map(|c| table.iter().map(|r| r[c] as f64).sum())
        .collect();
    if let Some(i) = row_sums.iter().position(|&s| s == 0.0) {
        return Err(CaError::ZeroMargin {
            which: format!("row {}", i + 1),
        });
    }
    if let Some(c) = col_sums.iter().position(|&s| s == 0.0) {
        return Err(CaError::ZeroMargin {
            which: format!("column {}", c + 1),
        });
    }
    let n: f64 = row_sums.iter().sum();
    let r: Vec<f64> = row_sums.iter().map(|&s| s / n).collect();
    let c: Vec<f64> = col_sums.iter().map(|&s| s / n).collect();

    let mut s = Matrix::zeros(t, j);
    for i in 0..t {
        for k in 0..j {
            let p = table[i][k] as f64 / n;
            s[(i, k)] = (p - r[i] * c[k]) / math::sqrt(r[i] * c[k]);
        }
    }

    // Singular values of S from the eigen-decomposition of S^T S
    // (or S S^T when that side is smaller).
    let small_is_cols = j <= t;
    let gram = if small_is_cols {
        s.transpose().matmul(&s)
    } else {
        s.matmul(&s.transpose())
    };
    let (vals, vecs) = jacobi_eigen(&gram, 400);
    let m = gram.nrows;
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| vals[b].partial_cmp(&vals[a]).expect("finite eigenvalues"));

    let max_rank = (t - 1).min(j - 1);
    let singular_values: Vec<f64> = order
        .iter()
        .take(max_rank)
        .map(|&k| math::sqrt(vals[k].max(0.0)))
        .collect();
    let total_inertia: f64 = singular_values.iter().map(|&sv| sv * sv).sum();

    let mut row_coords = vec![[0.0; 2]; t];
    let mut col_coords = vec![[0.0; 2]; j];
    let mut inertia_share = [0.0; 2];
    for axis in 0..2.min(singular_values.len()) {
        let sv = singular_values[axis];
        if sv <= SV_TOL {
            continue;
        }
        let k = order[axis];
        // unit eigenvector on the small side; the other side follows
        // from u = S v / sigma (or v = S^T u / sigma)
        let small: Vec<f64> = (0..m).map(|i| vecs[(i, k)]).collect();
        let (u, v): (Vec<f64>, Vec<f64>) = if small_is_cols {
            let u: Vec<f64> = (0..t)
                .map(|i| (0..j).map(|q| s[(i, q)] * small[q]).sum::<f64>() / sv)
                .collect();
            (u, small)
        } else {
            let v: Vec<f64> = (0..j)
                .map(|q| (0..t).map(|i| s[(i, q)] * small[i]).sum::<f64>() / sv)
                .collect();
            (small, v)
        };
        // orient so the first row point with a non-negligible
        // coordinate is non-negative
        let flip = u
            .iter()
            .map(|&ui| ui * sv)
            .find(|co| math::abs(*co) > SV_TOL)
            .map_or(false, |co| co < 0.0);
        let sgn = if flip { -1.0 } else { 1.0 };
        for i in 0..t {
            row_coords[i][axis] = sgn * sv * u[i] / math::sqrt(r[i]);
        }
        for q in 0..j {
            col_coords[q][axis] = sgn * sv * v[q] / math::sqrt(c[q]);
        }
        if total_inertia > 0.0 {
            inertia_share[axis] = sv * sv / total_inertia;
        }
    }

    Ok(CaResult {
        row_coords,
        col_coords,
        singular_values,
        inertia_share,
        total_inertia,
    })
}

/// Category kind in the stacked indicator matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum McaKind {
    Formulation,
    Attribute,
    Category,
}

impl McaKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            McaKind::Formulation => "formulation",
            McaKind::Attribute => "attribute",
            McaKind::Category => "category",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct McaPoint {
    pub label: String,
    pub kind: McaKind,
    pub coords: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct McaResult {
    pub points: Vec<McaPoint>,
    pub singular_values: Vec<f64>,
    pub inertia_share: [f64; 2],
    pub total_inertia: f64,
    /// labels of never-observed categories dropped from the analysis
    pub dropped: Vec<String>,
}

/// Correspondence analysis of the stacked indicator (disjunctive)
/// matrix: one row per observation, indicator columns for formulation
/// levels, attribute levels and response categories. Never-observed
/// levels are dropped and reported.
pub fn mca_coordinates(ds: &OrdinalDataset) -> Result<McaResult, CaError> {
    let t = ds.n_formulations();
    let l = ds.n_attributes();
    let j = ds.scale().categories();
    let obs = ds.observations();
    if obs.is_empty() {
        return Err(CaError::EmptyTable);
    }

    let mut labels: Vec<(String, McaKind)> = Vec::with_capacity(t + l + j);
    for name in ds.formulation_names() {
        labels.push((name.clone(), McaKind::Formulation));
    }
    for name in ds.attribute_names() {
        labels.push((name.clone(), McaKind::Attribute));
    }
    for name in ds.scale().labels() {
        labels.push((name.clone(), McaKind::Category));
    }

    let ncols = t + l + j;
    let mut table: Vec<Vec<u64>> = Vec::with_capacity(obs.len());
    for o in obs {
        let mut row = vec![0u64; ncols];
        row[o.formulation - 1] = 1;
        row[t + o.attribute - 1] = 1;
        row[t + l + o.response - 1] = 1;
        table.push(row);
    }

    // drop empty columns (never-observed levels) before the decomposition
    let col_sums: Vec<u64> = (0..ncols).map(|c| table.iter().map(|r| r[c]).sum()).collect();
    let keep: Vec<usize> = (0..ncols).filter(|&c| col_sums[c] > 0).collect();
    let dropped: Vec<String> = (0..ncols)
        .filter(|&c| col_sums[c] == 0)
        .map(|c| labels[c].0.clone())
        .collect();
    let reduced: Vec<Vec<u64>> = table
        .iter()
        .map(|row| keep.iter().map(|&c| row[c]).collect())
        .collect();

    let ca = correspondence_analysis(&reduced)?;
    let points = keep
        .iter()
        .zip(&ca.col_coords)
        .map(|(&c, coords)| McaPoint {
            label: labels[c].0.clone(),
            kind: labels[c].1,
            coords: *coords,
        })
        .collect();
    Ok(McaResult {
        points,
        singular_values: ca.singular_values,
        inertia_share: ca.inertia_share,
        total_inertia: ca.total_inertia,
        dropped,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum CaError {
    EmptyTable,
    RaggedTable,
    ZeroMargin { which: String },
}

impl core::fmt::Display for CaError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            CaError::EmptyTable => write!(f, "table is empty"),
            CaError::RaggedTable => write!(f, "table rows have unequal lengths"),
            CaError::ZeroMargin { which } => write!(f, "zero margin: {which}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for CaError {}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::chisq_association;

    #[test]
    fn proportional_rows_zero_inertia() {
        let table = vec![vec![10u64, 20, 30], vec![20, 40, 60], vec![5, 10, 15]];
        let r = correspondence_analysis(&table).unwrap();
        assert!(r.total_inertia < 1e-12);
        for p in r.row_coords.iter().chain(&r.col_coords) {
            assert!(p[0].abs() < 1e-8 && p[1].abs() < 1e-8);
        }
    }

    #[test]
    fn diagonal_2x2_unit_inertia() {
        let table = vec![vec![10u64, 0], vec![0, 10]];
        let r = correspondence_analysis(&table).unwrap();
        assert_eq!(r.singular_values.len(), 1);
        assert!((r.singular_values[0] - 1.0).abs() < 1e-10);
        assert!((r.total_inertia - 1.0).abs() < 1e-10);
        // opposite-sign row points, first one positive
        assert!(r.row_coords[0][0] > 0.0);
        assert!((r.row_coords[0][0] + r.row_coords[1][0]).abs() < 1e-10);
    }

    #[test]
    fn inertia_matches_chi_square() {
        let table = vec![
            vec![12u64, 5, 9, 2],
            vec![3, 14, 6, 8],
            vec![7, 4, 11, 10],
        ];
        let n: u64 = table.iter().flatten().sum();
        let r = correspondence_analysis(&table).unwrap();
        let chi = chisq_association(&table).unwrap();
        assert!((r.total_inertia * n as f64 - chi.statistic).abs() < 1e-8);
    }

    #[test]
    fn scale_invariance() {
        let table = vec![vec![4u64, 9, 1], vec![6, 2, 8]];
        let scaled: Vec<Vec<u64>> = table
            .iter()
            .map(|r| r.iter().map(|&x| 7 * x).collect())
            .collect();
        let a = correspondence_analysis(&table).unwrap();
        let b = correspondence_analysis(&scaled).unwrap();
        assert!((a.total_inertia - b.total_inertia).abs() < 1e-10);
        for (pa, pb) in a.row_coords.iter().zip(&b.row_coords) {
            assert!((pa[0] - pb[0]).abs() < 1e-10);
            assert!((pa[1] - pb[1]).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_margin_named() {
        let table = vec![vec![0u64, 0], vec![3, 4]];
        match correspondence_analysis(&table).unwrap_err() {
            CaError::ZeroMargin { which } => assert_eq!(which, "row 1"),
            other => panic!("unexpected {other}"),
        }
    }
}
