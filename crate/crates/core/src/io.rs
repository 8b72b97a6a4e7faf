//! CSV formats for expression matrices, networks, gradients and labels.
//!
//! Floats are written with Rust's shortest round-trip formatting, so every
//! writer here is read back bit-exactly by its reader.

use std::collections::HashMap;
use std::fmt::Display;
use std::io::{Read, Write};

use ndarray::Array2;

use crate::error::{GrnError, Result};
use crate::metrics::{GroundTruthNetwork, Sign};
use crate::ovr::{ExpressionMatrix, GradientField};

fn csv_err(e: csv::Error) -> GrnError {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => GrnError::Io(io),
        kind => GrnError::Parse {
            line,
            message: format!("{kind:?}"),
        },
    }
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(r)
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().flexible(true).from_writer(w)
}

/// Records paired with their 1-based line numbers.
fn records<R: Read>(r: R) -> Result<Vec<(usize, Vec<String>)>> {
    let mut rows = Vec::new();
    for rec in reader(r).into_records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        rows.push((line, rec.iter().map(str::to_string).collect()));
    }
    Ok(rows)
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    let v: f64 = s.parse().map_err(|_| GrnError::Parse {
        line,
        message: format!("not a number: {s:?}"),
    })?;
    if !v.is_finite() {
        return Err(GrnError::Parse {
            line,
            message: format!("non-finite value {s:?}"),
        });
    }
    Ok(v)
}

fn expect_len(row: &[String], n: usize, line: usize) -> Result<()> {
    if row.len() != n {
        return Err(GrnError::Parse {
            line,
            message: format!("expected {n} fields, found {}", row.len()),
        });
    }
    Ok(())
}

fn finish<W: Write>(w: csv::Writer<W>) -> Result<()> {
    w.into_inner()
        .map_err(|e| GrnError::Io(e.into_error()))?
        .flush()?;
    Ok(())
}

fn index_of(names: &[String]) -> HashMap<&str, usize> {
    names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect()
}

/// Reads a genes-by-cells matrix: header `gene,<cell ids>`, then one row
/// per gene starting with its name.
pub fn read_expression<R: Read>(r: R) -> Result<ExpressionMatrix> {
    let rows = records(r)?;
    let Some(((_, header), body)) = rows.split_first() else {
        return Err(GrnError::Parse {
            line: 1,
            message: "empty expression file".into(),
        });
    };
    let cells: Vec<String> = header[1..].to_vec();
    let mut genes = Vec::with_capacity(body.len());
    let mut values = Vec::with_capacity(body.len() * cells.len());
    for (line, row) in body {
        expect_len(row, header.len(), *line)?;
        genes.push(row[0].clone());
        for s in &row[1..] {
            values.push(parse_f64(s, *line)?);
        }
    }
    let m = Array2::from_shape_vec((genes.len(), cells.len()), values)
        .expect("row lengths checked");
    ExpressionMatrix::new(m, genes, cells)
}

pub fn write_expression<W: Write>(w: W, x: &ExpressionMatrix) -> Result<()> {
    let mut out = writer(w);
    let mut header = vec!["gene".to_string()];
    header.extend(x.cell_ids().iter().cloned());
    out.write_record(&header).map_err(csv_err)?;
    for (name, row) in x.gene_names().iter().zip(x.values().rows()) {
        let mut rec = vec![name.clone()];
        rec.extend(row.iter().map(|v| v.to_string()));
        out.write_record(&rec).map_err(csv_err)?;
    }
    finish(out)
}

/// Reads `Gene1,Gene2,Type` edges. With `gene_names` given, every gene must
/// be one of them; otherwise genes are numbered in order of appearance.
pub fn read_truth<R: Read>(r: R, gene_names: Option<&[String]>) -> Result<GroundTruthNetwork> {
    let rows = records(r)?;
    let mut names: Vec<String> = gene_names.map(<[String]>::to_vec).unwrap_or_default();
    let mut index: HashMap<String, usize> =
        names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
    let mut edges = Vec::new();
    for (k, (line, row)) in rows.iter().enumerate() {
        if k == 0 && row.first().is_some_and(|h| h.eq_ignore_ascii_case("gene1")) {
            continue;
        }
        expect_len(row, 3, *line)?;
        let mut lookup = |name: &str| -> Result<usize> {
            if let Some(&i) = index.get(name) {
                return Ok(i);
            }
            if gene_names.is_some() {
                return Err(GrnError::Parse {
                    line: *line,
                    message: format!("unknown gene {name:?}"),
                });
            }
            names.push(name.to_string());
            index.insert(name.to_string(), names.len() - 1);
            Ok(names.len() - 1)
        };
        let s = lookup(&row[0])?;
        let t = lookup(&row[1])?;
        let sign = Sign::parse(&row[2]).ok_or_else(|| GrnError::Parse {
            line: *line,
            message: format!("edge type must be + or -, got {:?}", row[2]),
        })?;
        edges.push((s, t, sign));
    }
    GroundTruthNetwork::new(names, edges)
}

pub fn write_truth<W: Write>(w: W, truth: &GroundTruthNetwork) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["Gene1", "Gene2", "Type"]).map_err(csv_err)?;
    let names = truth.gene_names();
    for &(s, t, sign) in truth.edges() {
        out.write_record([names[s].as_str(), names[t].as_str(), sign.symbol()])
            .map_err(csv_err)?;
    }
    finish(out)
}

/// Square matrix with gene names on both axes; rows are regulators.
pub fn write_dense<W: Write>(w: W, weights: &Array2<f64>, names: &[String]) -> Result<()> {
    let mut out = writer(w);
    let mut header = vec!["gene".to_string()];
    header.extend(names.iter().cloned());
    out.write_record(&header).map_err(csv_err)?;
    for (name, row) in names.iter().zip(weights.rows()) {
        let mut rec = vec![name.clone()];
        rec.extend(row.iter().map(|v| v.to_string()));
        out.write_record(&rec).map_err(csv_err)?;
    }
    finish(out)
}

pub fn read_dense<R: Read>(r: R) -> Result<(Array2<f64>, Vec<String>)> {
    let rows = records(r)?;
    let Some(((_, header), body)) = rows.split_first() else {
        return Err(GrnError::Parse {
            line: 1,
            message: "empty matrix file".into(),
        });
    };
    let names: Vec<String> = header[1..].to_vec();
    let g = names.len();
    if body.len() != g {
        return Err(GrnError::Parse {
            line: body.last().map_or(1, |(l, _)| *l),
            message: format!("expected {g} rows, found {}", body.len()),
        });
    }
    let mut m = Array2::zeros((g, g));
    for (j, (line, row)) in body.iter().enumerate() {
        expect_len(row, g + 1, *line)?;
        if row[0] != names[j] {
            return Err(GrnError::Parse {
                line: *line,
                message: format!("row {:?} does not match column {:?}", row[0], names[j]),
            });
        }
        for (i, s) in row[1..].iter().enumerate() {
            m[[j, i]] = parse_f64(s, *line)?;
        }
    }
    Ok((m, names))
}

/// Nonzero off-diagonal entries by decreasing magnitude, ties by
/// `(source, target)` name.
pub fn ranked_edges(weights: &Array2<f64>, names: &[String]) -> Vec<(usize, usize, f64)> {
    let mut edges: Vec<(usize, usize, f64)> = weights
        .indexed_iter()
        .filter(|&((j, i), &w)| j != i && w != 0.0)
        .map(|((j, i), &w)| (j, i, w))
        .collect();
    edges.sort_by(|a, b| {
        b.2.abs()
            .total_cmp(&a.2.abs())
            .then_with(|| names[a.0].cmp(&names[b.0]))
            .then_with(|| names[a.1].cmp(&names[b.1]))
    });
    edges
}

/// `Gene1,Gene2,EdgeWeight[,Sign]`. Unsigned output omits the sign column.
pub fn write_edge_list<W: Write>(
    w: W,
    weights: &Array2<f64>,
    names: &[String],
    signed: bool,
) -> Result<()> {
    let mut out = writer(w);
    if signed {
        out.write_record(["Gene1", "Gene2", "EdgeWeight", "Sign"])
    } else {
        out.write_record(["Gene1", "Gene2", "EdgeWeight"])
    }
    .map_err(csv_err)?;
    for (j, i, wt) in ranked_edges(weights, names) {
        let mut rec = vec![names[j].clone(), names[i].clone()];
        if signed {
            rec.push(wt.abs().to_string());
            rec.push(if wt > 0.0 { "+" } else { "-" }.to_string());
        } else {
            rec.push(wt.to_string());
        }
        out.write_record(&rec).map_err(csv_err)?;
    }
    finish(out)
}

/// Rebuilds the matrix from an edge list over known genes.
pub fn read_edge_list<R: Read>(r: R, names: &[String]) -> Result<Array2<f64>> {
    let index = index_of(names);
    let mut m = Array2::zeros((names.len(), names.len()));
    for (k, (line, row)) in records(r)?.into_iter().enumerate() {
        if k == 0 && row[0] == "Gene1" {
            continue;
        }
        if row.len() != 3 && row.len() != 4 {
            return Err(GrnError::Parse {
                line,
                message: format!("expected 3 or 4 fields, found {}", row.len()),
            });
        }
        let gene = |s: &str| {
            index.get(s).copied().ok_or_else(|| GrnError::Parse {
                line,
                message: format!("unknown gene {s:?}"),
            })
        };
        let (j, i) = (gene(&row[0])?, gene(&row[1])?);
        let mut w = parse_f64(&row[2], line)?;
        if let Some(s) = row.get(3) {
            let sign = Sign::parse(s).ok_or_else(|| GrnError::Parse {
                line,
                message: format!("bad sign {s:?}"),
            })?;
            w = w.abs() * sign.value();
        }
        m[[j, i]] = w;
    }
    Ok(m)
}

/// Long format `target_gene,regulator_gene,cell_id,gradient`.
pub fn write_gradients<W: Write>(
    w: W,
    fields: &[GradientField],
    gene_names: &[String],
    cell_ids: &[String],
) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["target_gene", "regulator_gene", "cell_id", "gradient"])
        .map_err(csv_err)?;
    for f in fields {
        for (r, &j) in f.regulators.iter().enumerate() {
            for (p, v) in f.values.row(r).iter().enumerate() {
                out.write_record([
                    gene_names[f.target].as_str(),
                    gene_names[j].as_str(),
                    cell_ids[p].as_str(),
                    &v.to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
    }
    finish(out)
}

/// Reads a long gradient table back into one field per target gene.
pub fn read_gradients<R: Read>(
    r: R,
    gene_names: &[String],
    cell_ids: &[String],
) -> Result<Vec<GradientField>> {
    let genes = index_of(gene_names);
    let cells = index_of(cell_ids);
    let g = gene_names.len();
    let mut fields: Vec<GradientField> = (0..g)
        .map(|i| GradientField::zeros(i, g, cell_ids.len()))
        .collect();
    let mut seen = vec![false; g];
    for (k, (line, row)) in records(r)?.into_iter().enumerate() {
        if k == 0 && row[0] == "target_gene" {
            continue;
        }
        expect_len(&row, 4, line)?;
        let find = |map: &HashMap<&str, usize>, s: &str| {
            map.get(s).copied().ok_or_else(|| GrnError::Parse {
                line,
                message: format!("unknown name {s:?}"),
            })
        };
        let (i, j, p) = (find(&genes, &row[0])?, find(&genes, &row[1])?, find(&cells, &row[2])?);
        if i == j {
            return Err(GrnError::Parse {
                line,
                message: "self gradient".into(),
            });
        }
        let r = if j < i { j } else { j - 1 };
        fields[i].values[[r, p]] = parse_f64(&row[3], line)?;
        seen[i] = true;
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(GrnError::IncompleteInput(format!(
            "no gradients for target {}",
            gene_names[i]
        )));
    }
    Ok(fields)
}

/// `cell_id,label`.
pub fn write_labels<W: Write, L: Display>(w: W, cell_ids: &[String], labels: &[L]) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["cell_id", "label"]).map_err(csv_err)?;
    for (c, l) in cell_ids.iter().zip(labels) {
        out.write_record([c.as_str(), &l.to_string()]).map_err(csv_err)?;
    }
    finish(out)
}

pub fn read_labels<R: Read>(r: R) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (k, (line, row)) in records(r)?.into_iter().enumerate() {
        if k == 0 && row[0] == "cell_id" {
            continue;
        }
        expect_len(&row, 2, line)?;
        let mut it = row.into_iter();
        out.push((it.next().unwrap(), it.next().unwrap()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn expression_round_trip() {
        let x = ExpressionMatrix::new(
            array![[0.1, 1.0 / 3.0, 2.5e-17], [4.0, -0.0, 7.125]],
            names(&["a", "b"]),
            names(&["c1", "c2", "c3"]),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_expression(&mut buf, &x).unwrap();
        let back = read_expression(buf.as_slice()).unwrap();
        assert_eq!(back.values(), x.values());
        assert_eq!(back.gene_names(), x.gene_names());
        assert_eq!(back.cell_ids(), x.cell_ids());
    }

    #[test]
    fn expression_errors_carry_lines() {
        let ragged = "gene,c1,c2\na,1,2\nb,3\n";
        match read_expression(ragged.as_bytes()) {
            Err(GrnError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let bad = "gene,c1,c2\na,1,2\nb,3,x\n";
        match read_expression(bad.as_bytes()) {
            Err(GrnError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn truth_round_trip_and_minus() {
        let text = "Gene1,Gene2,Type\ng1,g2,+\ng2,g3,\u{2212}\n";
        let t = read_truth(text.as_bytes(), None).unwrap();
        assert_eq!(t.gene_names(), names(&["g1", "g2", "g3"]).as_slice());
        assert_eq!(t.sign(1, 2), Some(Sign::Repression));
        let mut buf = Vec::new();
        write_truth(&mut buf, &t).unwrap();
        let back = read_truth(buf.as_slice(), Some(t.gene_names())).unwrap();
        assert_eq!(back, t);
        assert!(read_truth("g1,g9,+\n".as_bytes(), Some(t.gene_names())).is_err());
    }

    #[test]
    fn edge_list_order_and_round_trip() {
        let n = names(&["b", "a", "c"]);
        let w = array![[0.9, -0.5, 0.0], [0.5, 0.0, 0.25], [0.0, -0.75, 0.0]];
        let e = ranked_edges(&w, &n);
        let order: Vec<(usize, usize)> = e.iter().map(|&(j, i, _)| (j, i)).collect();
        // |0.75| first, then the 0.5 tie broken by names: (a,b) before (b,a)
        assert_eq!(order, vec![(2, 1), (1, 0), (0, 1), (1, 2)]);
        let mut buf = Vec::new();
        write_edge_list(&mut buf, &w, &n, true).unwrap();
        let back = read_edge_list(buf.as_slice(), &n).unwrap();
        let mut expect = w.clone();
        expect[[0, 0]] = 0.0;
        assert_eq!(back, expect);
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().nth(1), Some("c,a,0.75,-"));
    }

    #[test]
    fn dense_and_gradients_round_trip() {
        let n = names(&["x", "y", "z"]);
        let w = array![[0.0, 1.0, -0.125], [0.3, 0.0, 0.0], [0.0, 0.0, 0.0]];
        let mut buf = Vec::new();
        write_dense(&mut buf, &w, &n).unwrap();
        assert_eq!(read_dense(buf.as_slice()).unwrap(), (w, n.clone()));

        let cells = names(&["p", "q"]);
        let fields: Vec<GradientField> = (0..3)
            .map(|i| {
                let mut f = GradientField::zeros(i, 3, 2);
                f.values.iter_mut().enumerate().for_each(|(k, v)| *v = (k + i) as f64 * 0.1);
                f
            })
            .collect();
        let mut buf = Vec::new();
        write_gradients(&mut buf, &fields, &n, &cells).unwrap();
        assert_eq!(read_gradients(buf.as_slice(), &n, &cells).unwrap(), fields);
    }

    #[test]
    fn labels_round_trip() {
        let cells = names(&["a", "b"]);
        let mut buf = Vec::new();
        write_labels(&mut buf, &cells, &[0i64, -1]).unwrap();
        let back = read_labels(buf.as_slice()).unwrap();
        assert_eq!(back, vec![("a".into(), "0".into()), ("b".into(), "-1".into())]);
    }
}
