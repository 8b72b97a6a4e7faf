//! One-vs-rest orchestration: for each gene, train a predictor on all other
//! genes and evaluate its input gradients at every cell.

use std::collections::HashSet;

use ndarray::{Array1, Array2, Axis};
use rayon::prelude::*;

use crate::error::{GrnError, Result};
use crate::kan::KanNetwork;
use crate::seed::derive_seed;
use crate::trainer::{train_predictor, TrainConfig, TrainReport};

/// Genes x cells expression matrix with identifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionMatrix {
    values: Array2<f64>,
    gene_names: Vec<String>,
    cell_ids: Vec<String>,
}

impl ExpressionMatrix {
    pub fn new(values: Array2<f64>, gene_names: Vec<String>, cell_ids: Vec<String>) -> Result<Self> {
        let (g, c) = values.dim();
        if g < 2 || c < 2 {
            return Err(GrnError::config(format!(
                "expression matrix needs at least 2 genes and 2 cells, got {g}x{c}"
            )));
        }
        if gene_names.len() != g {
            return Err(GrnError::Shape {
                expected: g,
                got: gene_names.len(),
            });
        }
        if cell_ids.len() != c {
            return Err(GrnError::Shape {
                expected: c,
                got: cell_ids.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(GrnError::domain("expression values must be finite"));
        }
        let mut seen = HashSet::new();
        for name in &gene_names {
            if !seen.insert(name.as_str()) {
                return Err(GrnError::config(format!("duplicate gene name {name:?}")));
            }
        }
        Ok(ExpressionMatrix {
            values,
            gene_names,
            cell_ids,
        })
    }

    /// Matrix with generated identifiers `g0.. / cell0..`.
    pub fn from_values(values: Array2<f64>) -> Result<Self> {
        let (g, c) = values.dim();
        let genes = (0..g).map(|i| format!("g{i}")).collect();
        let cells = (0..c).map(|p| format!("cell{p}")).collect();
        Self::new(values, genes, cells)
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn gene_names(&self) -> &[String] {
        &self.gene_names
    }

    pub fn cell_ids(&self) -> &[String] {
        &self.cell_ids
    }

    pub fn n_genes(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cells(&self) -> usize {
        self.values.ncols()
    }

    pub fn gene_index(&self, name: &str) -> Option<usize> {
        self.gene_names.iter().position(|g| g == name)
    }

    /// Matrix restricted to the given cells, in the given order.
    pub fn select_cells(&self, cells: &[usize]) -> Result<Self> {
        let values = self.values.select(Axis(1), cells);
        let ids = cells.iter().map(|&p| self.cell_ids[p].clone()).collect();
        Self::new(values, self.gene_names.clone(), ids)
    }
}

/// Regressors and target for the predictor of one gene.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneView {
    pub target_index: usize,
    /// `(g - 1) x c`, rows in original gene order with the target removed.
    pub regressors: Array2<f64>,
    pub target: Array1<f64>,
    /// Row of `regressors` -> original gene index.
    pub index_map: Vec<usize>,
}

pub fn build_gene_view(x: &ExpressionMatrix, i: usize) -> Result<GeneView> {
    let g = x.n_genes();
    if i >= g {
        return Err(GrnError::config(format!("gene index {i} out of range for {g} genes")));
    }
    let index_map: Vec<usize> = (0..g).filter(|&j| j != i).collect();
    Ok(GeneView {
        target_index: i,
        regressors: x.values.select(Axis(0), &index_map),
        target: x.values.row(i).to_owned(),
        index_map,
    })
}

/// Input gradients of one target's predictor at every cell.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    pub target: usize,
    /// Original gene index of each row.
    pub regulators: Vec<usize>,
    /// `(g - 1) x c` gradient values in raw expression units.
    pub values: Array2<f64>,
}

impl GradientField {
    pub fn zeros(target: usize, n_genes: usize, n_cells: usize) -> Self {
        let regulators: Vec<usize> = (0..n_genes).filter(|&j| j != target).collect();
        GradientField {
            target,
            values: Array2::zeros((regulators.len(), n_cells)),
            regulators,
        }
    }

    pub fn n_cells(&self) -> usize {
        self.values.ncols()
    }
}

/// A trained predictor for one gene.
#[derive(Debug, Clone)]
pub struct TrainedPredictor {
    pub gene: usize,
    pub network: KanNetwork,
    pub report: TrainReport,
}

/// Outcome of training the predictor of one gene.
#[derive(Debug)]
pub struct GeneOutcome {
    pub gene: usize,
    pub result: Result<TrainedPredictor>,
}

/// Seed of gene `i`'s predictor, independent of scheduling order.
pub fn gene_seed(master: u64, gene: usize) -> u64 {
    derive_seed(master, gene as u64)
}

/// Trains one predictor per gene. Runs on the current rayon pool; results
/// are ordered by gene index and identical for any worker count.
pub fn train_all(x: &ExpressionMatrix, config: &TrainConfig) -> Vec<GeneOutcome> {
    (0..x.n_genes())
        .into_par_iter()
        .map(|i| GeneOutcome {
            gene: i,
            result: train_gene(x, i, config),
        })
        .collect()
}

fn train_gene(x: &ExpressionMatrix, i: usize, config: &TrainConfig) -> Result<TrainedPredictor> {
    let view = build_gene_view(x, i)?;
    let cfg = TrainConfig {
        seed: gene_seed(config.seed, i),
        ..config.clone()
    };
    let inputs = view.regressors.t();
    let (network, report) = train_predictor(inputs, view.target.view(), &cfg)?;
    Ok(TrainedPredictor {
        gene: i,
        network,
        report,
    })
}

/// Input gradients of one predictor at every cell of `x`.
pub fn predictor_gradients(
    predictor: &TrainedPredictor,
    x: &ExpressionMatrix,
) -> Result<GradientField> {
    let view = build_gene_view(x, predictor.gene)?;
    let d = view.regressors.nrows();
    if predictor.network.input_dim() != d {
        return Err(GrnError::Shape {
            expected: d,
            got: predictor.network.input_dim(),
        });
    }
    let mut values = Array2::zeros((d, x.n_cells()));
    let mut input = vec![0.0; d];
    for (p, col) in view.regressors.axis_iter(Axis(1)).enumerate() {
        input.iter_mut().zip(col.iter()).for_each(|(a, &b)| *a = b);
        let grad = predictor.network.input_gradient(&input)?;
        values.column_mut(p).assign(&Array1::from(grad));
    }
    Ok(GradientField {
        target: predictor.gene,
        regulators: view.index_map,
        values,
    })
}

/// Gradient fields for every gene, in gene order. Genes whose training
/// failed get an all-zero field and a warning.
pub fn evaluate_gradients(outcomes: &[GeneOutcome], x: &ExpressionMatrix) -> Result<Vec<GradientField>> {
    let g = x.n_genes();
    if outcomes.len() != g {
        return Err(GrnError::Shape {
            expected: g,
            got: outcomes.len(),
        });
    }
    outcomes
        .par_iter()
        .map(|o| match &o.result {
            Ok(p) => predictor_gradients(p, x),
            Err(e) => {
                log::warn!(
                    "no predictor for gene {}: {e}; using zero gradients",
                    x.gene_names()[o.gene]
                );
                Ok(GradientField::zeros(o.gene, g, x.n_cells()))
            }
        })
        .collect()
}
