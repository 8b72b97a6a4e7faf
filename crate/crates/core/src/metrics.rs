//! Scoring of predicted networks against a directed ground truth.
//!
//! Candidate pairs are all ordered pairs `(j, i)` with `j != i`; the
//! diagonal never enters any metric. Scores are ranked by magnitude.
//! ROC curves are integrated with the trapezoid rule, PR curves step-wise
//! as `sum (R_k - R_{k-1}) * P_k` over descending unique thresholds.

use std::collections::{HashMap, HashSet};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{GrnError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Activation,
    Repression,
}

impl Sign {
    pub fn of(w: f64) -> Option<Sign> {
        if w > 0.0 {
            Some(Sign::Activation)
        } else if w < 0.0 {
            Some(Sign::Repression)
        } else {
            None
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Sign::Activation => 1.0,
            Sign::Repression => -1.0,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Sign::Activation => "+",
            Sign::Repression => "-",
        }
    }

    /// Accepts `+`, `-` and the Unicode minus.
    pub fn parse(s: &str) -> Option<Sign> {
        match s.trim() {
            "+" | "activation" | "1" => Some(Sign::Activation),
            "-" | "\u{2212}" | "repression" | "-1" => Some(Sign::Repression),
            _ => None,
        }
    }
}

/// Directed, signed reference network.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthNetwork {
    gene_names: Vec<String>,
    edges: Vec<(usize, usize, Sign)>,
    lookup: HashMap<(usize, usize), Sign>,
}

impl GroundTruthNetwork {
    /// Self-loops are dropped with a warning; duplicate pairs are an error.
    pub fn new(gene_names: Vec<String>, edges: Vec<(usize, usize, Sign)>) -> Result<Self> {
        let g = gene_names.len();
        let mut kept = Vec::with_capacity(edges.len());
        let mut lookup = HashMap::new();
        let mut seen = HashSet::new();
        for (s, t, sign) in edges {
            if s >= g || t >= g {
                return Err(GrnError::config(format!("edge ({s}, {t}) outside {g} genes")));
            }
            if !seen.insert((s, t)) {
                return Err(GrnError::config(format!(
                    "duplicate truth edge {} -> {}",
                    gene_names[s], gene_names[t]
                )));
            }
            if s == t {
                log::warn!("dropping self-loop on {} from ground truth", gene_names[s]);
                continue;
            }
            lookup.insert((s, t), sign);
            kept.push((s, t, sign));
        }
        Ok(GroundTruthNetwork {
            gene_names,
            edges: kept,
            lookup,
        })
    }

    pub fn gene_names(&self) -> &[String] {
        &self.gene_names
    }

    pub fn n_genes(&self) -> usize {
        self.gene_names.len()
    }

    pub fn edges(&self) -> &[(usize, usize, Sign)] {
        &self.edges
    }

    pub fn sign(&self, source: usize, target: usize) -> Option<Sign> {
        self.lookup.get(&(source, target)).copied()
    }

    /// Number of off-diagonal candidate pairs, `g * (g - 1)`.
    pub fn n_candidates(&self) -> usize {
        let g = self.n_genes();
        g * (g - 1)
    }

    pub fn density(&self) -> f64 {
        self.edges.len() as f64 / self.n_candidates() as f64
    }

    /// Signed dense matrix: `+1`/`-1` at edges, 0 elsewhere.
    pub fn to_matrix(&self) -> Array2<f64> {
        let g = self.n_genes();
        let mut m = Array2::zeros((g, g));
        for &(s, t, sign) in &self.edges {
            m[[s, t]] = sign.value();
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluationResult {
    pub auroc: f64,
    pub auprc: f64,
    pub shd: f64,
    pub fdr: f64,
    pub signed_auroc: f64,
    pub signed_auprc: f64,
}

fn check_dims(scores: &Array2<f64>, truth: &GroundTruthNetwork) -> Result<()> {
    let g = truth.n_genes();
    if g < 2 {
        return Err(GrnError::UndefinedMetric("need at least 2 genes".into()));
    }
    if scores.dim() != (g, g) {
        return Err(GrnError::Shape {
            expected: g,
            got: scores.nrows().max(scores.ncols()),
        });
    }
    let p = truth.edges().len();
    if p == 0 || p == truth.n_candidates() {
        return Err(GrnError::UndefinedMetric(format!(
            "ground truth has {p} of {} possible edges; ranking metrics need both classes",
            truth.n_candidates()
        )));
    }
    Ok(())
}

/// Ranked candidates as `(|score|, is_positive)`.
fn ranked(scores: &Array2<f64>, truth: &GroundTruthNetwork, signed: bool) -> Vec<(f64, bool)> {
    let g = truth.n_genes();
    let mut items = Vec::with_capacity(g * (g - 1));
    for j in 0..g {
        for i in 0..g {
            if i == j {
                continue;
            }
            let w = scores[[j, i]];
            let pos = match truth.sign(j, i) {
                None => false,
                Some(s) => !signed || Sign::of(w) == Some(s),
            };
            items.push((w.abs(), pos));
        }
    }
    items.sort_by(|a, b| b.0.total_cmp(&a.0));
    items
}

/// `(tp, fp)` after each block of tied scores, descending.
fn sweep(items: &[(f64, bool)]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut k = 0;
    while k < items.len() {
        let s = items[k].0;
        while k < items.len() && items[k].0 == s {
            if items[k].1 {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            k += 1;
        }
        out.push((tp, fp));
    }
    out
}

fn roc_area(points: &[(f64, f64)], n_pos: f64, n_neg: f64) -> f64 {
    let (mut area, mut px, mut py) = (0.0, 0.0, 0.0);
    for &(tp, fp) in points {
        let (x, y) = (fp / n_neg, tp / n_pos);
        area += (x - px) * (y + py) / 2.0;
        px = x;
        py = y;
    }
    area
}

fn pr_area(points: &[(f64, f64)], n_pos: f64) -> f64 {
    let (mut area, mut pr) = (0.0, 0.0);
    for &(tp, fp) in points {
        let r = tp / n_pos;
        if tp + fp > 0.0 {
            area += (r - pr) * tp / (tp + fp);
        }
        pr = r;
    }
    area
}

fn negatives(items: &[(f64, bool)]) -> f64 {
    items.iter().filter(|i| !i.1).count() as f64
}

/// Area under the ROC curve of `|scores|` against the unsigned truth.
pub fn auroc(scores: &Array2<f64>, truth: &GroundTruthNetwork) -> Result<f64> {
    check_dims(scores, truth)?;
    let items = ranked(scores, truth, false);
    let n_pos = truth.edges().len() as f64;
    Ok(roc_area(&sweep(&items), n_pos, negatives(&items)))
}

/// Area under the precision-recall curve of `|scores|`.
pub fn auprc(scores: &Array2<f64>, truth: &GroundTruthNetwork) -> Result<f64> {
    check_dims(scores, truth)?;
    let items = ranked(scores, truth, false);
    Ok(pr_area(&sweep(&items), truth.edges().len() as f64))
}

/// Signed ROC area. A pair is a hit only if it is a true edge and the
/// predicted sign matches; sign-mismatched true pairs rank as false
/// positives. Recall is measured against all true edges, so a curve whose
/// signs are partly wrong ends below `TPR = 1`.
pub fn signed_auroc(weights: &Array2<f64>, truth: &GroundTruthNetwork) -> Result<f64> {
    check_dims(weights, truth)?;
    let items = ranked(weights, truth, true);
    let n_pos = truth.edges().len() as f64;
    Ok(roc_area(&sweep(&items), n_pos, negatives(&items)))
}

/// Signed PR area under the same hit rule as [`signed_auroc`].
pub fn signed_auprc(weights: &Array2<f64>, truth: &GroundTruthNetwork) -> Result<f64> {
    check_dims(weights, truth)?;
    let items = ranked(weights, truth, true);
    Ok(pr_area(&sweep(&items), truth.edges().len() as f64))
}

/// Top-`k` nonzero entries by magnitude, ties broken by
/// `(source name, target name)`.
pub fn top_k_edges(weights: &Array2<f64>, names: &[String], k: usize) -> Vec<(usize, usize)> {
    let g = names.len();
    let mut cand: Vec<(usize, usize)> = (0..g)
        .flat_map(|j| (0..g).filter(move |&i| i != j).map(move |i| (j, i)))
        .filter(|&(j, i)| weights[[j, i]] != 0.0)
        .collect();
    cand.sort_by(|&(a, b), &(c, d)| {
        weights[[c, d]]
            .abs()
            .total_cmp(&weights[[a, b]].abs())
            .then_with(|| names[a].cmp(&names[c]))
            .then_with(|| names[b].cmp(&names[d]))
    });
    let cap = g * (g - 1);
    if k > cap {
        log::warn!("edge budget {k} exceeds {cap} candidate pairs; capping");
    }
    cand.truncate(k.min(cap));
    cand
}

fn check_square(weights: &Array2<f64>, truth: &GroundTruthNetwork) -> Result<()> {
    let g = truth.n_genes();
    if weights.dim() != (g, g) {
        return Err(GrnError::Shape {
            expected: g,
            got: weights.nrows(),
        });
    }
    Ok(())
}

/// Structural Hamming distance between the top-`k` binarization and the
/// (unsigned) truth.
pub fn shd(weights: &Array2<f64>, truth: &GroundTruthNetwork, k: usize) -> Result<usize> {
    check_square(weights, truth)?;
    let pred: HashSet<(usize, usize)> = top_k_edges(weights, truth.gene_names(), k)
        .into_iter()
        .collect();
    let tp = pred.iter().filter(|&&(j, i)| truth.sign(j, i).is_some()).count();
    Ok((pred.len() - tp) + (truth.edges().len() - tp))
}

/// `FP / (FP + TP)` over the top-`k` binarization; 0 when nothing is predicted.
pub fn fdr(weights: &Array2<f64>, truth: &GroundTruthNetwork, k: usize) -> Result<f64> {
    check_square(weights, truth)?;
    if k == 0 {
        return Err(GrnError::UndefinedMetric("FDR needs an edge budget k >= 1".into()));
    }
    let pred = top_k_edges(weights, truth.gene_names(), k);
    if pred.is_empty() {
        return Ok(0.0);
    }
    let fp = pred.iter().filter(|&&(j, i)| truth.sign(j, i).is_none()).count();
    Ok(fp as f64 / pred.len() as f64)
}

/// All six metrics; `k` defaults to the number of true edges.
pub fn evaluate(
    weights: &Array2<f64>,
    truth: &GroundTruthNetwork,
    k: Option<usize>,
) -> Result<EvaluationResult> {
    let k = k.unwrap_or(truth.edges().len());
    Ok(EvaluationResult {
        auroc: auroc(weights, truth)?,
        auprc: auprc(weights, truth)?,
        shd: shd(weights, truth, k)? as f64,
        fdr: fdr(weights, truth, k.max(1))?,
        signed_auroc: signed_auroc(weights, truth)?,
        signed_auprc: signed_auprc(weights, truth)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn names(g: usize) -> Vec<String> {
        (0..g).map(|i| format!("g{i}")).collect()
    }

    fn chain4() -> GroundTruthNetwork {
        GroundTruthNetwork::new(
            names(4),
            vec![
                (0, 1, Sign::Activation),
                (1, 2, Sign::Repression),
                (2, 3, Sign::Activation),
            ],
        )
        .unwrap()
    }

    #[test]
    fn perfect_and_constant_rankings() {
        let t = chain4();
        let w = t.to_matrix();
        assert_eq!(auroc(&w, &t).unwrap(), 1.0);
        assert_eq!(auprc(&w, &t).unwrap(), 1.0);
        assert_eq!(signed_auroc(&w, &t).unwrap(), 1.0);
        assert_eq!(signed_auprc(&w, &t).unwrap(), 1.0);
        let c = Array2::from_elem((4, 4), 0.3);
        assert_eq!(auroc(&c, &t).unwrap(), 0.5);
        assert!((auprc(&c, &t).unwrap() - 3.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn flipped_signs_penalized() {
        let t = chain4();
        let w = -t.to_matrix();
        assert!(signed_auroc(&w, &t).unwrap() < auroc(&w, &t).unwrap());
    }

    #[test]
    fn undefined_truths() {
        let empty = GroundTruthNetwork::new(names(3), vec![]).unwrap();
        let w = Array2::zeros((3, 3));
        assert!(matches!(auroc(&w, &empty), Err(GrnError::UndefinedMetric(_))));
        let all: Vec<_> = (0..2)
            .flat_map(|j| (0..2).filter(move |&i| i != j).map(move |i| (j, i, Sign::Activation)))
            .collect();
        let full = GroundTruthNetwork::new(names(2), all).unwrap();
        assert!(auprc(&Array2::zeros((2, 2)), &full).is_err());
    }

    #[test]
    fn self_loops_dropped_and_duplicates_rejected() {
        let t = GroundTruthNetwork::new(
            names(3),
            vec![(0, 0, Sign::Activation), (0, 1, Sign::Activation)],
        )
        .unwrap();
        assert_eq!(t.edges().len(), 1);
        assert!(GroundTruthNetwork::new(
            names(3),
            vec![(0, 1, Sign::Activation), (0, 1, Sign::Repression)]
        )
        .is_err());
    }

    #[test]
    fn shd_and_fdr_hand_counts() {
        let t = chain4();
        assert_eq!(shd(&t.to_matrix(), &t, 3).unwrap(), 0);
        assert_eq!(shd(&Array2::zeros((4, 4)), &t, 0).unwrap(), 3);
        assert_eq!(shd(&Array2::zeros((4, 4)), &t, 3).unwrap(), 3);
        assert_eq!(fdr(&t.to_matrix(), &t, 3).unwrap(), 0.0);

        // top-3: (0,1) 0.9 true, (3,0) 0.8 false, (1,0) 0.5 false; (1,2) 0.1 left out
        let w = array![
            [0.0, 0.9, 0.0, 0.0],
            [0.5, 0.0, 0.1, 0.0],
            [0.0, 0.0, 0.0, 0.0],
            [0.8, 0.0, 0.0, 0.0],
        ];
        // 2 false positives + 2 missed edges
        assert_eq!(shd(&w, &t, 3).unwrap(), 4);
        assert!((fdr(&w, &t, 3).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(fdr(&w, &t, 0).is_err());

        let wrong = array![
            [0.0, 0.0, 0.0, 0.7],
            [0.0, 0.0, 0.0, 0.6],
            [0.9, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.0],
        ];
        assert_eq!(fdr(&wrong, &t, 3).unwrap(), 1.0);
    }

    #[test]
    fn top_k_tie_break_by_name() {
        let w = Array2::from_elem((3, 3), 1.0);
        let top = top_k_edges(&w, &names(3), 2);
        assert_eq!(top, vec![(0, 1), (0, 2)]);
        assert_eq!(top_k_edges(&w, &names(3), 100).len(), 6);
    }

    #[test]
    fn diagonal_is_ignored() {
        let t = chain4();
        let mut w = array![
            [0.0, 0.4, 0.2, 0.1],
            [0.3, 0.0, -0.7, 0.5],
            [0.05, 0.6, 0.0, 0.9],
            [0.15, 0.25, 0.35, 0.0],
        ];
        let before = evaluate(&w, &t, None).unwrap();
        for i in 0..4 {
            w[[i, i]] = 100.0 * (i as f64 + 1.0);
        }
        assert_eq!(before, evaluate(&w, &t, None).unwrap());
    }
}
