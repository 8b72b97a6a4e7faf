//! Random-forest regression with impurity importances, and the one-vs-rest
//! importance baseline built on it.

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GrnError, Result};
use crate::ovr::{build_gene_view, gene_seed, ExpressionMatrix};
use crate::seed::{derive_seed, rng_for};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Features tried per split; `None` means `ceil(sqrt(d))`.
    pub max_features: Option<usize>,
    pub min_samples_leaf: usize,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_features: None,
            min_samples_leaf: 5,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestConfig {
    fn features_per_split(&self, d: usize) -> Result<usize> {
        let m = self
            .max_features
            .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize);
        if m == 0 || m > d {
            return Err(GrnError::config(format!(
                "max_features must lie in 1..={d}, got {m}"
            )));
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<Node>,
    /// Summed squared-error reduction per feature.
    importance: Vec<f64>,
}

impl RegressionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count()
    }

    pub fn raw_importance(&self) -> &[f64] {
        &self.importance
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    trees: Vec<RegressionTree>,
    n_features: usize,
    n_samples: usize,
}

impl Forest {
    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}

struct Builder<'a> {
    x: ArrayView2<'a, f64>,
    y: ArrayView1<'a, f64>,
    min_leaf: usize,
    m_try: usize,
    nodes: Vec<Node>,
    importance: Vec<f64>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
    n_left: usize,
}

fn sse(y: ArrayView1<f64>, idx: &[usize]) -> (f64, f64) {
    let n = idx.len() as f64;
    let mean = idx.iter().map(|&i| y[i]).sum::<f64>() / n;
    let s = idx.iter().map(|&i| (y[i] - mean).powi(2)).sum();
    (mean, s)
}

impl Builder<'_> {
    fn grow(&mut self, idx: &mut [usize], rng: &mut ChaCha8Rng) -> usize {
        let (mean, total) = sse(self.y, idx);
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf(mean));
        if idx.len() < 2 * self.min_leaf || total <= 1e-12 * idx.len() as f64 * (1.0 + mean * mean) {
            return at;
        }
        let d = self.x.ncols();
        let Some(best) = sample(rng, d, self.m_try)
            .into_iter()
            .filter_map(|f| self.best_split(idx, f, total))
            .max_by(|a, b| a.gain.total_cmp(&b.gain).then(b.feature.cmp(&a.feature)))
        else {
            return at;
        };
        self.importance[best.feature] += best.gain;
        let f = best.feature;
        idx.sort_by(|&a, &b| self.x[[a, f]].total_cmp(&self.x[[b, f]]));
        let (l, r) = idx.split_at_mut(best.n_left);
        let left = self.grow(l, rng);
        let right = self.grow(r, rng);
        self.nodes[at] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        at
    }

    fn best_split(&self, idx: &[usize], f: usize, total: f64) -> Option<BestSplit> {
        let mut order: Vec<usize> = idx.to_vec();
        order.sort_by(|&a, &b| self.x[[a, f]].total_cmp(&self.x[[b, f]]));
        let n = order.len();
        let sum: f64 = order.iter().map(|&i| self.y[i]).sum();
        let sum_sq: f64 = order.iter().map(|&i| self.y[i] * self.y[i]).sum();
        let (mut ls, mut lsq) = (0.0, 0.0);
        let mut best: Option<BestSplit> = None;
        for k in 1..n {
            let yi = self.y[order[k - 1]];
            ls += yi;
            lsq += yi * yi;
            if k < self.min_leaf || n - k < self.min_leaf {
                continue;
            }
            let (a, b) = (self.x[[order[k - 1], f]], self.x[[order[k], f]]);
            if a == b {
                continue;
            }
            let (nl, nr) = (k as f64, (n - k) as f64);
            let rs = sum - ls;
            let left_sse = lsq - ls * ls / nl;
            let right_sse = (sum_sq - lsq) - rs * rs / nr;
            let gain = total - left_sse - right_sse;
            if best.as_ref().is_none_or(|bs| gain > bs.gain) {
                best = Some(BestSplit {
                    feature: f,
                    threshold: 0.5 * (a + b),
                    gain,
                    n_left: k,
                });
            }
        }
        best.filter(|b| b.gain > 0.0).map(|mut b| {
            b.gain = b.gain.min(total);
            b
        })
    }
}

fn fit_tree(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    mut idx: Vec<usize>,
    min_leaf: usize,
    m_try: usize,
    rng: &mut ChaCha8Rng,
) -> RegressionTree {
    let mut b = Builder {
        x,
        y,
        min_leaf,
        m_try,
        nodes: Vec::new(),
        importance: vec![0.0; x.ncols()],
    };
    b.grow(&mut idx, rng);
    RegressionTree {
        nodes: b.nodes,
        importance: b.importance,
    }
}

/// Fits a forest on `inputs` (samples x features).
pub fn fit_forest(
    inputs: ArrayView2<f64>,
    targets: ArrayView1<f64>,
    config: &ForestConfig,
) -> Result<Forest> {
    let (c, d) = inputs.dim();
    if targets.len() != c {
        return Err(GrnError::Shape {
            expected: c,
            got: targets.len(),
        });
    }
    if config.n_trees == 0 {
        return Err(GrnError::config("n_trees must be at least 1"));
    }
    if config.min_samples_leaf == 0 {
        return Err(GrnError::config("min_samples_leaf must be at least 1"));
    }
    if c < 2 * config.min_samples_leaf {
        return Err(GrnError::config(format!(
            "{c} samples is fewer than twice min_samples_leaf ({})",
            config.min_samples_leaf
        )));
    }
    let m_try = config.features_per_split(d)?;
    if inputs.iter().chain(targets.iter()).any(|v| !v.is_finite()) {
        return Err(GrnError::domain("non-finite value in forest inputs"));
    }
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_for(config.seed, t as u64);
            let idx: Vec<usize> = if config.bootstrap {
                (0..c).map(|_| rng.random_range(0..c)).collect()
            } else {
                (0..c).collect()
            };
            fit_tree(inputs, targets, idx, config.min_samples_leaf, m_try, &mut rng)
        })
        .collect();
    Ok(Forest {
        trees,
        n_features: d,
        n_samples: c,
    })
}

/// Mean per-tree squared-error reduction per feature, normalized to sum 1.
/// All zeros when no tree ever split.
pub fn importance_scores(forest: &Forest) -> Vec<f64> {
    let mut imp = vec![0.0; forest.n_features];
    let scale = 1.0 / (forest.trees.len() as f64 * forest.n_samples as f64);
    for t in &forest.trees {
        for (a, b) in imp.iter_mut().zip(&t.importance) {
            *a += b * scale;
        }
    }
    let total: f64 = imp.iter().sum();
    if total > 0.0 {
        imp.iter_mut().for_each(|v| *v /= total);
    }
    imp
}

/// Importances `I[j][i]` of regulator `j` for target `i`; each column sums
/// to 1 unless the target carried no signal.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceMatrix {
    pub weights: Array2<f64>,
    pub gene_names: Vec<String>,
}

/// Fits one forest per gene on the other genes.
pub fn genie3_infer(x: &ExpressionMatrix, config: &ForestConfig) -> Result<ImportanceMatrix> {
    let g = x.n_genes();
    let columns: Vec<Result<Vec<f64>>> = (0..g)
        .into_par_iter()
        .map(|i| {
            let view = build_gene_view(x, i)?;
            let cfg = ForestConfig {
                seed: derive_seed(gene_seed(config.seed, i), 3),
                ..config.clone()
            };
            let forest = fit_forest(view.regressors.t(), view.target.view(), &cfg)?;
            let imp = importance_scores(&forest);
            let mut col = vec![0.0; g];
            for (r, &j) in view.index_map.iter().enumerate() {
                col[j] = imp[r];
            }
            Ok(col)
        })
        .collect();
    let mut weights = Array2::zeros((g, g));
    for (i, col) in columns.into_iter().enumerate() {
        match col {
            Ok(col) => weights.column_mut(i).assign(&ndarray::Array1::from(col)),
            Err(GrnError::Config(m)) => return Err(GrnError::Config(m)),
            Err(e) => log::warn!("forest for gene {} failed: {e}; column zeroed", x.gene_names()[i]),
        }
    }
    Ok(ImportanceMatrix {
        weights,
        gene_names: x.gene_names().to_vec(),
    })
}
