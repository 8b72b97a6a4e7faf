use std::collections::BTreeMap;

use grnkan::dbscan::NOISE;
use grnkan::grn::{cluster_gradients, default_eps, infer_cluster_grns, ClusterConfig, Z_THRESHOLD};
use grnkan::io;
use serde::Serialize;
use serde_json::json;

use super::{load_expression, open, write_network};
use crate::error::{CliError, CliResult};
use crate::manifest::RunOutput;
use crate::{ClusterArgs, Context};

#[derive(Debug, Serialize)]
struct ClusterSummary {
    eps: f64,
    min_points: usize,
    n_clusters: usize,
    n_outliers: usize,
    /// Cells per cluster label.
    sizes: BTreeMap<i64, usize>,
}

pub fn run(args: &ClusterArgs, ctx: &Context) -> CliResult<()> {
    let defaults = ClusterConfig::default();
    let eps = ctx.file.pick(args.eps, "eps")?;
    let min_points = ctx.file.pick_or(args.min_points, "min_points", defaults.min_points)?;
    let z = ctx.file.pick_or(args.z_threshold, "z_threshold", Z_THRESHOLD)?;
    if !z.is_finite() {
        return Err(CliError::Usage(format!("z threshold must be finite, got {z}")));
    }

    let x = load_expression(&args.expr)?;
    let fields = io::read_gradients(open(&args.grads)?, x.gene_names(), x.cell_ids())
        .map_err(|e| CliError::from(e).context(&args.grads.display().to_string()))?;
    let mut out = RunOutput::create(&args.out)?;
    out.input(&args.expr);
    out.input(&args.grads);

    let cfg = ClusterConfig { eps, min_points };
    let labels = cluster_gradients(&fields, &cfg)?;
    let eps_used = eps.unwrap_or_else(|| default_eps(&fields));
    let mut sizes = BTreeMap::new();
    for &l in labels.iter().filter(|&&l| l != NOISE) {
        *sizes.entry(l).or_insert(0) += 1;
    }
    let n_outliers = labels.iter().filter(|&&l| l == NOISE).count();
    if sizes.is_empty() {
        log::warn!("every cell is an outlier at eps {eps_used}; no cluster networks written");
    }

    let grns = infer_cluster_grns(&fields, x.gene_names(), &labels, z)?;
    out.write("clusters.csv", |w| Ok(io::write_labels(w, x.cell_ids(), &labels)?))?;
    for (label, adj) in &grns {
        write_network(&mut out, &format!("cluster{label}_"), adj)?;
    }
    let summary = ClusterSummary {
        eps: eps_used,
        min_points,
        n_clusters: sizes.len(),
        n_outliers,
        sizes,
    };
    out.write_json("clusters.json", &summary)?;
    let config = json!({ "eps": eps, "min_points": min_points, "z_threshold": z });
    out.finish("cluster-grn", ctx.seed, ctx.workers, config)?;
    Ok(())
}
