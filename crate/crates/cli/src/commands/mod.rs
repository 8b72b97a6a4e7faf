//! Subcommand implementations and the helpers they share.

pub mod bench;
pub mod cluster;
pub mod eval;
pub mod infer;
pub mod simulate;
pub mod toy;

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use grnkan::grn::{infer_grn, AdjacencyMatrix};
use grnkan::io;
use grnkan::ovr::{evaluate_gradients, train_all, ExpressionMatrix, GeneOutcome, GradientField};
use grnkan::trainer::TrainConfig;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::manifest::RunOutput;

pub(crate) fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))
}

pub(crate) fn load_expression(path: &Path) -> CliResult<ExpressionMatrix> {
    io::read_expression(open(path)?).map_err(|e| CliError::from(e).context(&path.display().to_string()))
}

/// Everything produced by training and sparsifying one dataset.
pub struct Inference {
    pub outcomes: Vec<GeneOutcome>,
    pub fields: Vec<GradientField>,
    pub adjacency: AdjacencyMatrix,
}

/// Trains all per-gene predictors and infers the signed adjacency matrix.
/// Fails only when no gene could be trained.
pub fn infer_network(x: &ExpressionMatrix, config: &TrainConfig, z_threshold: f64) -> CliResult<Inference> {
    let outcomes = train_all(x, config);
    if let Some(err) = outcomes
        .iter()
        .all(|o| o.result.is_err())
        .then(|| outcomes.iter().find_map(|o| o.result.as_ref().err()))
        .flatten()
    {
        return Err(CliError::from(err).context("every gene failed to train"));
    }
    let fields = evaluate_gradients(&outcomes, x)?;
    let adjacency = infer_grn(&fields, x.gene_names(), None, z_threshold)?;
    Ok(Inference {
        outcomes,
        fields,
        adjacency,
    })
}

#[derive(Debug, Serialize)]
pub struct GeneLog {
    pub gene: String,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs_run: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stopped_early: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_train_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_test_loss: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub loss_history: Vec<(f64, f64)>,
}

pub fn training_log(outcomes: &[GeneOutcome], names: &[String]) -> Vec<GeneLog> {
    outcomes
        .iter()
        .map(|o| match &o.result {
            Ok(p) => GeneLog {
                gene: names[o.gene].clone(),
                ok: true,
                error: None,
                epochs_run: Some(p.report.epochs_run),
                stopped_early: Some(p.report.stopped_early),
                final_train_loss: Some(p.report.final_train_loss),
                final_test_loss: Some(p.report.final_test_loss),
                loss_history: p.report.loss_history.clone(),
            },
            Err(e) => GeneLog {
                gene: names[o.gene].clone(),
                ok: false,
                error: Some(e.to_string()),
                epochs_run: None,
                stopped_early: None,
                final_train_loss: None,
                final_test_loss: None,
                loss_history: Vec::new(),
            },
        })
        .collect()
}

/// Dense matrix plus ranked signed edge list under `prefix`.
pub(crate) fn write_network(out: &mut RunOutput, prefix: &str, adj: &AdjacencyMatrix) -> CliResult<()> {
    out.write(&format!("{prefix}adjacency.csv"), |w| {
        Ok(io::write_dense(w, &adj.weights, &adj.gene_names)?)
    })?;
    out.write(&format!("{prefix}edges.csv"), |w| {
        Ok(io::write_edge_list(w, &adj.weights, &adj.gene_names, true)?)
    })?;
    Ok(())
}
