//! From gradient fields to a signed adjacency matrix.
//!
//! For each target gene and cell, gradient magnitudes are z-scored across
//! regulators. The edge `j -> i` gets magnitude equal to the fraction of
//! cells where regulator `j`'s z-score exceeds the threshold, and the sign
//! most common among `j`'s gradients over those cells' population.

use std::collections::BTreeMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dbscan::{dbscan, median_knn_distance, NOISE};
use crate::error::{GrnError, Result};
use crate::ovr::GradientField;

/// Default z-score cut-off for counting a cell towards an edge.
pub const Z_THRESHOLD: f64 = 1.0;

/// Scores must beat the threshold by this much. With two regulators the
/// z-scores are exactly +-1 and rounding alone would otherwise decide.
const Z_TOLERANCE: f64 = 1e-9;

/// Signed weights `A[j][i]` for regulator `j` acting on target `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyMatrix {
    pub weights: Array2<f64>,
    pub gene_names: Vec<String>,
}

impl AdjacencyMatrix {
    pub fn zeros(gene_names: Vec<String>) -> Self {
        let g = gene_names.len();
        AdjacencyMatrix {
            weights: Array2::zeros((g, g)),
            gene_names,
        }
    }

    pub fn n_genes(&self) -> usize {
        self.gene_names.len()
    }
}

/// Cells over which an adjacency is computed.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSubset {
    pub indices: Vec<usize>,
    pub label: String,
}

impl CellSubset {
    pub fn new(indices: Vec<usize>, label: impl Into<String>) -> Result<Self> {
        if indices.is_empty() {
            return Err(GrnError::config("cell subset is empty"));
        }
        Ok(CellSubset {
            indices,
            label: label.into(),
        })
    }

    pub fn all(n_cells: usize) -> Self {
        CellSubset {
            indices: (0..n_cells).collect(),
            label: "all".into(),
        }
    }
}

/// DBSCAN settings. `eps = None` uses the median 4-NN distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    pub eps: Option<f64>,
    pub min_points: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            eps: None,
            min_points: 5,
        }
    }
}

/// Z-scores of `|v|` with population standard deviation.
///
/// Returns `(scores, degenerate)`; when all magnitudes are equal the scores
/// are all zero and `degenerate` is set.
pub fn standardize(gradients: &[f64]) -> Result<(Vec<f64>, bool)> {
    if gradients.len() < 2 {
        return Err(GrnError::domain("standardization needs at least 2 regulators"));
    }
    let mut out = vec![0.0; gradients.len()];
    let degenerate = standardize_into(gradients.iter().copied(), &mut out);
    Ok((out, degenerate))
}

fn standardize_into(gradients: impl Iterator<Item = f64> + Clone, out: &mut [f64]) -> bool {
    let n = out.len() as f64;
    let mean = gradients.clone().map(f64::abs).sum::<f64>() / n;
    let var = gradients
        .clone()
        .map(|v| (v.abs() - mean).powi(2))
        .sum::<f64>()
        / n;
    let std = var.sqrt();
    if !(std > 1e-14 * mean.max(f64::MIN_POSITIVE)) || !std.is_finite() {
        out.iter_mut().for_each(|o| *o = 0.0);
        return true;
    }
    for (o, v) in out.iter_mut().zip(gradients) {
        *o = (v.abs() - mean) / std;
    }
    false
}

/// Z-scores for every (regulator, cell) of a field.
fn field_zscores(field: &GradientField) -> Array2<f64> {
    let mut z = Array2::zeros(field.values.dim());
    let mut buf = vec![0.0; field.values.nrows()];
    let mut degenerate = 0;
    for (p, col) in field.values.columns().into_iter().enumerate() {
        if buf.len() >= 2 {
            if standardize_into(col.iter().copied(), &mut buf) {
                degenerate += 1;
            }
        } else {
            buf.iter_mut().for_each(|b| *b = 0.0);
        }
        z.column_mut(p).iter_mut().zip(&buf).for_each(|(a, &b)| *a = b);
    }
    if degenerate > 0 {
        log::debug!(
            "target {}: {degenerate} cells with equal gradient magnitudes scored as no signal",
            field.target
        );
    }
    z
}

/// Majority sign over the cells; zeros abstain, ties fall back to the sign
/// of the mean gradient, and a zero mean gives no sign.
fn vote_sign(values: impl Iterator<Item = f64>) -> f64 {
    let (mut pos, mut neg, mut sum) = (0usize, 0usize, 0.0);
    for v in values {
        if v > 0.0 {
            pos += 1;
        } else if v < 0.0 {
            neg += 1;
        }
        sum += v;
    }
    match pos.cmp(&neg) {
        std::cmp::Ordering::Greater => 1.0,
        std::cmp::Ordering::Less => -1.0,
        std::cmp::Ordering::Equal => {
            if sum > 0.0 {
                1.0
            } else if sum < 0.0 {
                -1.0
            } else {
                0.0
            }
        }
    }
}

/// Edge weight from one regulator's gradients and z-scores over a set of
/// cells: majority sign times the fraction of cells above the threshold.
pub fn vote_edge(gradients: &[f64], zscores: &[f64], z_threshold: f64) -> f64 {
    assert_eq!(gradients.len(), zscores.len());
    if gradients.is_empty() {
        return 0.0;
    }
    let count = zscores.iter().filter(|&&z| z > z_threshold + Z_TOLERANCE).count();
    if count == 0 {
        return 0.0;
    }
    vote_sign(gradients.iter().copied()) * count as f64 / gradients.len() as f64
}

fn column_from_scores(
    field: &GradientField,
    z: &Array2<f64>,
    cells: &CellSubset,
    n_genes: usize,
    z_threshold: f64,
) -> Result<Vec<f64>> {
    let c = field.n_cells();
    if let Some(&bad) = cells.indices.iter().find(|&&p| p >= c) {
        return Err(GrnError::Shape {
            expected: c,
            got: bad + 1,
        });
    }
    if cells.indices.is_empty() {
        return Err(GrnError::config("cell subset is empty"));
    }
    let mut column = vec![0.0; n_genes];
    let mut grads = vec![0.0; cells.indices.len()];
    let mut scores = vec![0.0; cells.indices.len()];
    for (r, &j) in field.regulators.iter().enumerate() {
        for (k, &p) in cells.indices.iter().enumerate() {
            grads[k] = field.values[[r, p]];
            scores[k] = z[[r, p]];
        }
        column[j] = vote_edge(&grads, &scores, z_threshold);
    }
    Ok(column)
}

/// Column `target` of the adjacency matrix computed over `cells`.
/// The returned vector has one entry per gene; the target's own entry is 0.
pub fn sparsify(field: &GradientField, cells: &CellSubset, z_threshold: f64) -> Result<Vec<f64>> {
    let n_genes = field.regulators.len() + 1;
    if field.regulators.iter().any(|&j| j >= n_genes) || field.target >= n_genes {
        return Err(GrnError::Shape {
            expected: n_genes,
            got: field.regulators.iter().copied().max().unwrap_or(0) + 1,
        });
    }
    column_from_scores(field, &field_zscores(field), cells, n_genes, z_threshold)
}

fn check_fields(fields: &[GradientField], n_genes: usize) -> Result<usize> {
    for i in 0..n_genes {
        if !fields.iter().any(|f| f.target == i) {
            return Err(GrnError::IncompleteInput(format!("no gradient field for gene {i}")));
        }
    }
    let c = fields.first().map_or(0, GradientField::n_cells);
    if fields.iter().any(|f| f.n_cells() != c || f.regulators.len() + 1 != n_genes) {
        return Err(GrnError::IncompleteInput("gradient fields disagree in shape".into()));
    }
    Ok(c)
}

/// Assembles the adjacency matrix from one field per target gene.
/// `cells = None` uses every cell.
pub fn infer_grn(
    fields: &[GradientField],
    gene_names: &[String],
    cells: Option<&CellSubset>,
    z_threshold: f64,
) -> Result<AdjacencyMatrix> {
    let g = gene_names.len();
    let c = check_fields(fields, g)?;
    let all = CellSubset::all(c);
    let cells = cells.unwrap_or(&all);
    let mut adj = AdjacencyMatrix::zeros(gene_names.to_vec());
    for f in fields {
        let col = sparsify(f, cells, z_threshold)?;
        for (j, w) in col.into_iter().enumerate() {
            if j != f.target {
                adj.weights[[j, f.target]] = w;
            }
        }
    }
    Ok(adj)
}

/// Per-cell feature vectors: all targets' gradient vectors concatenated
/// (target-major), length `g * (g - 1)`.
pub fn cell_features(fields: &[GradientField]) -> Vec<Vec<f64>> {
    let mut ordered: Vec<&GradientField> = fields.iter().collect();
    ordered.sort_by_key(|f| f.target);
    let c = ordered.first().map_or(0, |f| f.n_cells());
    (0..c)
        .map(|p| {
            ordered
                .iter()
                .flat_map(|f| f.values.column(p).to_vec())
                .collect()
        })
        .collect()
}

fn heuristic_eps(points: &[Vec<f64>]) -> f64 {
    let e = median_knn_distance(points, 4);
    if e > 0.0 {
        e
    } else {
        f64::MIN_POSITIVE
    }
}

/// The `eps` used when none is configured: median distance from each
/// cell's gradient features to its 4th nearest neighbour.
pub fn default_eps(fields: &[GradientField]) -> f64 {
    heuristic_eps(&cell_features(fields))
}

/// DBSCAN over per-cell gradient features. Returns one label per cell,
/// `-1` for outliers.
pub fn cluster_gradients(fields: &[GradientField], config: &ClusterConfig) -> Result<Vec<i64>> {
    let g = fields.len();
    check_fields(fields, g)?;
    if config.min_points == 0 {
        return Err(GrnError::config("min_points must be at least 1"));
    }
    let points = cell_features(fields);
    if points.is_empty() {
        return Ok(Vec::new());
    }
    if points.iter().all(|p| p == &points[0]) {
        return Ok(vec![0; points.len()]);
    }
    let eps = match config.eps {
        Some(e) if e > 0.0 && e.is_finite() => e,
        Some(e) => return Err(GrnError::config(format!("eps must be positive, got {e}"))),
        None => heuristic_eps(&points),
    };
    Ok(dbscan(&points, eps, config.min_points))
}

/// One adjacency per non-outlier cluster label.
pub fn infer_cluster_grns(
    fields: &[GradientField],
    gene_names: &[String],
    labels: &[i64],
    z_threshold: f64,
) -> Result<BTreeMap<i64, AdjacencyMatrix>> {
    let c = check_fields(fields, gene_names.len())?;
    if labels.len() != c {
        return Err(GrnError::Shape {
            expected: c,
            got: labels.len(),
        });
    }
    let mut groups: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (p, &l) in labels.iter().enumerate() {
        if l != NOISE {
            groups.entry(l).or_default().push(p);
        }
    }
    groups
        .into_iter()
        .map(|(l, idx)| {
            let subset = CellSubset::new(idx, format!("cluster{l}"))?;
            Ok((l, infer_grn(fields, gene_names, Some(&subset), z_threshold)?))
        })
        .collect()
}
