use grnkan::io;
use serde_json::json;

use super::{infer_network, load_expression, training_log, write_network};
use crate::error::CliResult;
use crate::manifest::RunOutput;
use crate::{Context, InferArgs};

pub fn run(args: &InferArgs, ctx: &Context) -> CliResult<()> {
    let cfg = args.train.resolve(&ctx.file, ctx.seed)?;
    let z = args.train.z_threshold(&ctx.file)?;
    let x = load_expression(&args.expr)?;
    let mut out = RunOutput::create(&args.out)?;
    out.input(&args.expr);

    let inf = infer_network(&x, &cfg, z)?;
    let failed = inf.outcomes.iter().filter(|o| o.result.is_err()).count();
    if failed > 0 {
        log::warn!("{failed} of {} genes failed to train", x.n_genes());
    }
    write_network(&mut out, "", &inf.adjacency)?;
    out.write("gradients.csv", |w| {
        Ok(io::write_gradients(w, &inf.fields, x.gene_names(), x.cell_ids())?)
    })?;
    out.write_json("training_log.json", &training_log(&inf.outcomes, x.gene_names()))?;
    let config = json!({ "train": cfg, "z_threshold": z });
    out.finish("infer", ctx.seed, ctx.workers, config)?;
    Ok(())
}
