use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use grnkan::metrics::{evaluate, EvaluationResult};
use grnkan::synth::{builtin_network, simulate_cells};
use serde::Serialize;
use serde_json::json;

use super::{infer_network, open};
use crate::error::{CliError, CliResult};
use crate::manifest::RunOutput;
use crate::{BenchArgs, Context};

pub const METRICS: [&str; 6] = ["auroc", "auprc", "shd", "fdr", "signed_auroc", "signed_auprc"];

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteEntry {
    pub network: String,
    pub cells: usize,
    pub seeds: Vec<u64>,
}

/// Reads `network,cells,seeds` rows; seeds are separated by `;` or spaces.
pub fn read_suite(path: &Path) -> CliResult<Vec<SuiteEntry>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(open(path)?);
    let bad = |line: u64, msg: String| CliError::Data(format!("{} line {line}: {msg}", path.display()));
    let mut entries = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 3 {
            return Err(bad(line, format!("expected 3 fields, found {}", rec.len())));
        }
        let cells = rec[1]
            .parse()
            .map_err(|_| bad(line, format!("bad cell count {:?}", &rec[1])))?;
        let seeds = rec[2]
            .split(|c: char| c == ';' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|_| bad(line, format!("bad seed {s:?}"))))
            .collect::<CliResult<Vec<u64>>>()?;
        if seeds.is_empty() {
            return Err(bad(line, "no seeds".into()));
        }
        entries.push(SuiteEntry {
            network: rec[0].to_string(),
            cells,
            seeds,
        });
    }
    if entries.is_empty() {
        return Err(CliError::Data(format!("{} lists no runs", path.display())));
    }
    Ok(entries)
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub network: String,
    pub cells: usize,
    pub genes: usize,
    pub seed: u64,
    pub replicate: usize,
    pub workers: usize,
    pub seconds: f64,
    pub metrics: Option<EvaluationResult>,
    pub error: Option<String>,
}

fn one_run(entry: &SuiteEntry, seed: u64, args: &BenchArgs, ctx: &Context) -> CliResult<(usize, f64, EvaluationResult)> {
    let spec = builtin_network(&entry.network).map_err(|e| CliError::Usage(e.to_string()))?;
    let sim = args.sim.resolve(&ctx.file, entry.cells, seed)?;
    let train = args.train.resolve(&ctx.file, seed)?;
    let z = args.train.z_threshold(&ctx.file)?;
    let x = simulate_cells(&spec, &sim)?;
    let truth = spec.ground_truth()?;
    let start = Instant::now();
    let inf = infer_network(&x, &train, z)?;
    let seconds = start.elapsed().as_secs_f64();
    let metrics = evaluate(&inf.adjacency.weights, &truth, None)?;
    Ok((x.n_genes(), seconds, metrics))
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / n;
    let std = if v.len() > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

fn metric(m: &EvaluationResult, name: &str) -> f64 {
    match name {
        "auroc" => m.auroc,
        "auprc" => m.auprc,
        "shd" => m.shd,
        "fdr" => m.fdr,
        "signed_auroc" => m.signed_auroc,
        _ => m.signed_auprc,
    }
}

fn file_stem(network: &str) -> String {
    network
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '-' })
        .collect()
}

pub fn run(args: &BenchArgs, ctx: &Context) -> CliResult<()> {
    let entries = read_suite(&args.suite)?;
    let runs = ctx.file.pick_or(args.runs, "runs", 1)?;
    if runs == 0 {
        return Err(CliError::Usage("--runs must be at least 1".into()));
    }
    for e in &entries {
        builtin_network(&e.network).map_err(|err| CliError::Usage(err.to_string()))?;
    }
    let mut out = RunOutput::create(&args.out)?;
    out.input(&args.suite);

    let mut records = Vec::new();
    for entry in &entries {
        for &seed in &entry.seeds {
            for rep in 0..runs {
                let (genes, seconds, metrics, error) = match one_run(entry, seed, args, ctx) {
                    Ok((g, s, m)) => (g, s, Some(m), None),
                    Err(e) => {
                        log::warn!("{} cells={} seed={seed} run {rep} failed: {e}", entry.network, entry.cells);
                        (0, f64::NAN, None, Some(e.to_string()))
                    }
                };
                let rec = RunRecord {
                    network: entry.network.clone(),
                    cells: entry.cells,
                    genes,
                    seed,
                    replicate: rep,
                    workers: ctx.workers,
                    seconds,
                    metrics,
                    error,
                };
                let name = format!("runs/{}_c{}_s{seed}_r{rep}.json", file_stem(&entry.network), entry.cells);
                out.write_json(&name, &rec)?;
                log::info!("{} cells={} seed={seed} run {rep}: {seconds:.3}s", entry.network, entry.cells);
                records.push(rec);
            }
        }
    }

    // Replicates repeat the same computation, so metrics use replicate 0.
    let mut groups: BTreeMap<(String, usize), Vec<&RunRecord>> = BTreeMap::new();
    for r in &records {
        groups.entry((r.network.clone(), r.cells)).or_default().push(r);
    }
    let order: Vec<(String, usize)> = {
        let mut seen = Vec::new();
        for e in &entries {
            let key = (e.network.clone(), e.cells);
            if !seen.contains(&key) {
                seen.push(key);
            }
        }
        seen
    };
    out.write("aggregate.csv", |w| {
        let mut header = vec!["network".to_string(), "cells".into(), "n_runs".into(), "n_failed".into()];
        for m in METRICS {
            header.push(format!("{m}_mean"));
            header.push(format!("{m}_std"));
        }
        writeln!(w, "{}", header.join(","))?;
        for key in &order {
            let rs = &groups[key];
            let firsts: Vec<&EvaluationResult> = rs
                .iter()
                .filter(|r| r.replicate == 0)
                .filter_map(|r| r.metrics.as_ref())
                .collect();
            let failed = rs.iter().filter(|r| r.replicate == 0 && r.metrics.is_none()).count();
            let mut row = vec![key.0.clone(), key.1.to_string(), firsts.len().to_string(), failed.to_string()];
            for m in METRICS {
                let vals: Vec<f64> = firsts.iter().map(|r| metric(r, m)).collect();
                let (mean, std) = mean_std(&vals);
                row.push(mean.to_string());
                row.push(std.to_string());
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    })?;
    out.write("timing.csv", |w| {
        writeln!(w, "network,cells,genes,workers,runs,seconds_mean,seconds_std")?;
        for key in &order {
            let ok: Vec<&&RunRecord> = groups[key].iter().filter(|r| r.metrics.is_some()).collect();
            let secs: Vec<f64> = ok.iter().map(|r| r.seconds).collect();
            let genes = ok.first().map_or(0, |r| r.genes);
            let (mean, std) = mean_std(&secs);
            writeln!(w, "{},{},{genes},{},{},{mean},{std}", key.0, key.1, ctx.workers, secs.len())?;
        }
        Ok(())
    })?;
    let config = json!({
        "runs": runs,
        "train": args.train.resolve(&ctx.file, ctx.seed)?,
        "simulation": args.sim.resolve(&ctx.file, 1, ctx.seed)?,
    });
    out.finish("bench", ctx.seed, ctx.workers, config)?;
    Ok(())
}
