use std::path::Path;

use grnkan::io;
use grnkan::synth::{builtin_network, simulate_cells, toy_branches, toy_ground_truth, Branch, BranchToyConfig, NetworkSpec};
use serde_json::json;

use super::open;
use crate::error::{CliError, CliResult};
use crate::manifest::RunOutput;
use crate::{Context, SimulateArgs};

pub const DEFAULT_CELLS: usize = 2000;

fn toy_branch(name: &str) -> Option<Branch> {
    name.to_ascii_lowercase().strip_prefix("toy-")?.parse().ok()
}

fn network_spec(name: &str, out: &mut RunOutput) -> CliResult<NetworkSpec> {
    let path = Path::new(name);
    if path.is_file() {
        let spec: NetworkSpec = serde_json::from_reader(open(path)?)
            .map_err(|e| CliError::Data(format!("bad network file {name}: {e}")))?;
        spec.validate()?;
        out.input(path);
        return Ok(spec);
    }
    builtin_network(name).map_err(|e| CliError::Usage(e.to_string()))
}

pub fn run(args: &SimulateArgs, ctx: &Context) -> CliResult<()> {
    let cells = ctx.file.pick_or(args.cells, "cells", DEFAULT_CELLS)?;
    let mut out = RunOutput::create(&args.out)?;
    if let Some(branch) = toy_branch(&args.network) {
        let per_branch = match branch {
            Branch::Both if cells % 2 != 0 => {
                return Err(CliError::Usage(format!(
                    "toy-both splits cells evenly between branches; {cells} is odd"
                )))
            }
            Branch::Both => cells / 2,
            _ => cells,
        };
        let cfg = BranchToyConfig {
            n_cells: per_branch,
            noise_std: ctx.file.pick_or(args.toy_noise, "toy_noise", BranchToyConfig::default().noise_std)?,
            seed: ctx.seed,
            ..BranchToyConfig::default()
        };
        let data = toy_branches(&cfg, branch)?;
        let truth = toy_ground_truth(branch);
        out.write("expression.csv", |w| Ok(io::write_expression(w, &data.matrix)?))?;
        out.write("truth.csv", |w| Ok(io::write_truth(w, &truth)?))?;
        out.write("labels.csv", |w| {
            Ok(io::write_labels(w, data.matrix.cell_ids(), &data.branch_labels)?)
        })?;
        let config = json!({ "network": args.network, "toy": cfg });
        out.finish("simulate", ctx.seed, ctx.workers, config)?;
        return Ok(());
    }

    let spec = network_spec(&args.network, &mut out)?;
    let cfg = args.sim.resolve(&ctx.file, cells, ctx.seed)?;
    let x = simulate_cells(&spec, &cfg)?;
    let truth = spec.ground_truth()?;
    out.write("expression.csv", |w| Ok(io::write_expression(w, &x)?))?;
    out.write("truth.csv", |w| Ok(io::write_truth(w, &truth)?))?;
    let config = json!({ "network": args.network, "simulation": cfg });
    out.finish("simulate", ctx.seed, ctx.workers, config)?;
    log::info!("simulated {} genes x {} cells", x.n_genes(), x.n_cells());
    Ok(())
}
