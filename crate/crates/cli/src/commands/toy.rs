use grnkan::forest::{genie3_infer, ForestConfig, ImportanceMatrix};
use grnkan::io;
use grnkan::ovr::GradientField;
use grnkan::synth::{toy_branches, toy_ground_truth, BranchToyConfig};
use serde::Serialize;
use serde_json::json;

use super::{infer_network, training_log, write_network};
use crate::error::CliResult;
use crate::manifest::RunOutput;
use crate::{Context, ToyArgs};

const X: usize = 0;
const Y: usize = 1;
const Z: usize = 2;
/// Forest importance above which an edge counts as found.
pub const TREE_DETECTED: f64 = 0.8;
/// Fraction of cells whose `dy/dx` sign must match their branch.
pub const KAN_DETECTED: f64 = 0.5;

#[derive(Debug, Clone, Serialize)]
pub struct TreeSummary {
    pub x_to_y: f64,
    pub y_to_x: f64,
    /// Largest importance of `z` for `x` or `y`.
    pub z: f64,
    pub status: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct KanSummary {
    pub x_to_y: f64,
    pub y_to_x: f64,
    /// Cells with `dy/dx > 0`.
    pub positive_fraction: f64,
    /// Cells with `dy/dx < 0`.
    pub negative_fraction: f64,
    /// Cells whose `dy/dx` sign matches the slope of their branch.
    pub sign_agreement: f64,
    pub median_abs_gradient: f64,
    pub status: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub branch: String,
    pub cells: usize,
    pub seed: u64,
    pub tree: TreeSummary,
    pub kan: KanSummary,
}

pub fn tree_summary(imp: &ImportanceMatrix) -> TreeSummary {
    let w = &imp.weights;
    let x_to_y = w[[X, Y]];
    TreeSummary {
        x_to_y,
        y_to_x: w[[Y, X]],
        z: w[[Z, X]].max(w[[Z, Y]]),
        status: if x_to_y > TREE_DETECTED { "detected" } else { "missed" },
    }
}

/// `dy/dx` at every cell.
pub fn dy_dx(fields: &[GradientField]) -> Vec<f64> {
    let f = fields.iter().find(|f| f.target == Y).expect("field for y");
    let r = f.regulators.iter().position(|&j| j == X).expect("x regulates y");
    f.values.row(r).to_vec()
}

/// `labels` are branch names per cell (`red` has slope +1, `blue` -1).
pub fn kan_summary(weights: &ndarray::Array2<f64>, grads: &[f64], labels: &[String]) -> KanSummary {
    let n = grads.len().max(1) as f64;
    let frac = |pred: &dyn Fn(usize, f64) -> bool| {
        grads.iter().enumerate().filter(|&(p, &g)| pred(p, g)).count() as f64 / n
    };
    let sign_agreement = frac(&|p, g| match labels[p].as_str() {
        "blue" => g < 0.0,
        _ => g > 0.0,
    });
    let mut abs: Vec<f64> = grads.iter().map(|g| g.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let median_abs_gradient = match abs.len() {
        0 => 0.0,
        m if m % 2 == 1 => abs[m / 2],
        m => 0.5 * (abs[m / 2 - 1] + abs[m / 2]),
    };
    KanSummary {
        x_to_y: weights[[X, Y]],
        y_to_x: weights[[Y, X]],
        positive_fraction: frac(&|_, g| g > 0.0),
        negative_fraction: frac(&|_, g| g < 0.0),
        sign_agreement,
        median_abs_gradient,
        status: if sign_agreement >= KAN_DETECTED { "detected" } else { "missed" },
    }
}

pub fn run(args: &ToyArgs, ctx: &Context) -> CliResult<()> {
    let defaults = BranchToyConfig::default();
    let toy_cfg = BranchToyConfig {
        n_cells: ctx.file.pick_or(args.cells, "cells", defaults.n_cells)?,
        noise_std: ctx.file.pick_or(args.toy_noise, "toy_noise", defaults.noise_std)?,
        seed: ctx.seed,
        ..defaults
    };
    let forest_cfg = ForestConfig {
        n_trees: ctx.file.pick_or(args.trees, "trees", ForestConfig::default().n_trees)?,
        seed: ctx.seed,
        ..ForestConfig::default()
    };
    let train_cfg = args.train.resolve(&ctx.file, ctx.seed)?;
    let z = args.train.z_threshold(&ctx.file)?;

    let data = toy_branches(&toy_cfg, args.branch)?;
    let x = &data.matrix;
    let truth = toy_ground_truth(args.branch);
    let mut out = RunOutput::create(&args.out)?;
    out.write("expression.csv", |w| Ok(io::write_expression(w, x)?))?;
    out.write("labels.csv", |w| Ok(io::write_labels(w, x.cell_ids(), &data.branch_labels)?))?;
    out.write("truth.csv", |w| Ok(io::write_truth(w, &truth)?))?;

    let imp = genie3_infer(x, &forest_cfg)?;
    out.write("tree_importance.csv", |w| Ok(io::write_dense(w, &imp.weights, &imp.gene_names)?))?;
    out.write("tree_edges.csv", |w| {
        Ok(io::write_edge_list(w, &imp.weights, &imp.gene_names, false)?)
    })?;

    let inf = infer_network(x, &train_cfg, z)?;
    write_network(&mut out, "kan_", &inf.adjacency)?;
    out.write_json("kan_training_log.json", &training_log(&inf.outcomes, x.gene_names()))?;

    let comparison = Comparison {
        branch: format!("{:?}", args.branch).to_lowercase(),
        cells: x.n_cells(),
        seed: ctx.seed,
        tree: tree_summary(&imp),
        kan: kan_summary(&inf.adjacency.weights, &dy_dx(&inf.fields), &data.branch_labels),
    };
    out.write_json("comparison.json", &comparison)?;
    log::info!(
        "tree x->y {:.3} ({}), kan dy/dx sign agreement {:.3} ({})",
        comparison.tree.x_to_y,
        comparison.tree.status,
        comparison.kan.sign_agreement,
        comparison.kan.status
    );
    let config = json!({ "toy": toy_cfg, "forest": forest_cfg, "train": train_cfg, "z_threshold": z });
    out.finish("toy-demo", ctx.seed, ctx.workers, config)?;
    Ok(())
}
