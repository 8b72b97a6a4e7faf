use std::io::{BufRead, Write};
use std::path::Path;

use grnkan::io;
use grnkan::metrics::{evaluate, EvaluationResult, GroundTruthNetwork};
use ndarray::Array2;
use serde::Serialize;

use super::open;
use crate::error::{CliError, CliResult};
use crate::manifest::{write_atomic, MANIFEST_NAME};
use crate::{Context, EvalArgs};

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub dataset: Option<String>,
    pub seed: Option<u64>,
    pub k: usize,
    pub auroc: f64,
    pub auprc: f64,
    pub shd: f64,
    pub fdr: f64,
    pub signed_auroc: Option<f64>,
    pub signed_auprc: Option<f64>,
}

impl EvalReport {
    pub fn new(r: &EvaluationResult, k: usize, signed: bool) -> Self {
        EvalReport {
            dataset: None,
            seed: None,
            k,
            auroc: r.auroc,
            auprc: r.auprc,
            shd: r.shd,
            fdr: r.fdr,
            signed_auroc: signed.then_some(r.signed_auroc),
            signed_auprc: signed.then_some(r.signed_auprc),
        }
    }
}

fn first_line(path: &Path) -> CliResult<String> {
    let mut line = String::new();
    open(path)?.read_line(&mut line)?;
    Ok(line)
}

/// Predicted weights and their gene order. Edge lists have no gene header,
/// so their genes are the truth genes followed by any extra ones.
fn read_prediction(path: &Path, truth: &GroundTruthNetwork) -> CliResult<(Array2<f64>, Vec<String>)> {
    let head = first_line(path)?;
    let ctx = |e: grnkan::GrnError| CliError::from(e).context(&path.display().to_string());
    if head.trim_start().to_ascii_lowercase().starts_with("gene1") {
        let mut names = truth.gene_names().to_vec();
        let mut rdr = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(open(path)?);
        for rec in rdr.records() {
            let rec = rec.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            for name in rec.iter().take(2) {
                if !names.iter().any(|n| n == name) {
                    names.push(name.to_string());
                }
            }
        }
        let m = io::read_edge_list(open(path)?, &names).map_err(ctx)?;
        Ok((m, names))
    } else {
        io::read_dense(open(path)?).map_err(ctx)
    }
}

/// Re-indexes `truth` onto `names`, failing with the list of truth genes
/// the prediction does not cover.
fn align(truth: &GroundTruthNetwork, names: &[String]) -> CliResult<GroundTruthNetwork> {
    let pos = |n: &String| names.iter().position(|m| m == n);
    let missing: Vec<&str> = truth
        .gene_names()
        .iter()
        .filter(|n| pos(n).is_none())
        .map(String::as_str)
        .collect();
    if !missing.is_empty() {
        return Err(CliError::Data(format!(
            "prediction lacks truth genes: {}",
            missing.join(", ")
        )));
    }
    let tn = truth.gene_names();
    let edges = truth
        .edges()
        .iter()
        .map(|&(s, t, sign)| (pos(&tn[s]).unwrap(), pos(&tn[t]).unwrap(), sign))
        .collect();
    Ok(GroundTruthNetwork::new(names.to_vec(), edges)?)
}

fn neighbour_manifest(file: &Path) -> Option<serde_json::Value> {
    let dir = file.parent()?;
    let text = std::fs::read_to_string(dir.join(MANIFEST_NAME)).ok()?;
    serde_json::from_str(&text).ok()
}

/// Scores `pred` against `truth`; `dataset` and `seed` are taken from the
/// manifests next to the input files when present.
pub fn evaluate_files(pred: &Path, truth_path: &Path, signed: bool, k: Option<usize>) -> CliResult<EvalReport> {
    let truth = io::read_truth(open(truth_path)?, None)
        .map_err(|e| CliError::from(e).context(&truth_path.display().to_string()))?;
    if truth.edges().is_empty() {
        return Err(CliError::Data(format!("{} has no edges", truth_path.display())));
    }
    let (weights, names) = read_prediction(pred, &truth)?;
    if names.len() < 2 {
        return Err(CliError::Data("prediction needs at least two genes".into()));
    }
    let truth = align(&truth, &names)?;
    let k = k.unwrap_or(truth.edges().len());
    let result = evaluate(&weights, &truth, Some(k))?;
    let mut report = EvalReport::new(&result, k, signed);
    let truth_manifest = neighbour_manifest(truth_path);
    report.dataset = truth_manifest
        .as_ref()
        .and_then(|m| m["config"]["network"].as_str().map(str::to_string))
        .or_else(|| {
            let dir = truth_path.parent()?.file_name()?;
            Some(dir.to_string_lossy().into_owned())
        });
    report.seed = neighbour_manifest(pred)
        .or(truth_manifest)
        .and_then(|m| m["seed"].as_u64());
    Ok(report)
}

pub fn run(args: &EvalArgs, _ctx: &Context) -> CliResult<()> {
    let report = evaluate_files(&args.pred, &args.truth, args.signed, args.k)?;
    match &args.out {
        Some(path) => write_atomic(path, |w| {
            serde_json::to_writer_pretty(&mut *w, &report)?;
            writeln!(w)?;
            Ok(())
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            serde_json::to_writer_pretty(&mut stdout, &report)?;
            writeln!(stdout)?;
            Ok(())
        }
    }
}
