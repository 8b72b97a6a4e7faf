//! Three-gene branching toy: `y = x + e` on the red branch, `y = -x + e` on
//! the blue branch, `z` pure noise. Both branches share the network
//! `x <-> y` with `z` isolated.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{GrnError, Result};
use crate::metrics::{GroundTruthNetwork, Sign};
use crate::ovr::ExpressionMatrix;
use crate::seed::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Red,
    Blue,
    Both,
}

impl std::str::FromStr for Branch {
    type Err = GrnError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "red" => Ok(Branch::Red),
            "blue" => Ok(Branch::Blue),
            "both" => Ok(Branch::Both),
            _ => Err(GrnError::config(format!("unknown branch {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchToyConfig {
    /// Cells per branch.
    pub n_cells: usize,
    pub noise_std: f64,
    pub x_range: (f64, f64),
    pub seed: u64,
}

impl Default for BranchToyConfig {
    fn default() -> Self {
        BranchToyConfig {
            n_cells: 500,
            noise_std: 0.1,
            x_range: (0.0, 1.0),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ToyDataset {
    /// Genes `x, y, z` by cells.
    pub matrix: ExpressionMatrix,
    /// `"red"` or `"blue"` per cell.
    pub branch_labels: Vec<String>,
}

pub fn toy_branches(config: &BranchToyConfig, branch: Branch) -> Result<ToyDataset> {
    if config.n_cells == 0 {
        return Err(GrnError::config("toy dataset needs at least one cell per branch"));
    }
    if !(config.noise_std >= 0.0 && config.noise_std.is_finite()) {
        return Err(GrnError::config("noise std must be nonnegative"));
    }
    let (lo, hi) = config.x_range;
    if !(lo < hi) {
        return Err(GrnError::config("empty x range"));
    }
    let branches: &[(f64, &str)] = match branch {
        Branch::Red => &[(1.0, "red")],
        Branch::Blue => &[(-1.0, "blue")],
        Branch::Both => &[(1.0, "red"), (-1.0, "blue")],
    };
    let c = config.n_cells * branches.len();
    let mut rng = rng_for(config.seed, 0);
    let normal = if config.noise_std > 0.0 {
        Some(Normal::new(0.0, config.noise_std).map_err(|e| GrnError::config(e.to_string()))?)
    } else {
        None
    };
    let noise = |rng: &mut rand_chacha::ChaCha8Rng| normal.map_or(0.0, |n| n.sample(rng));

    let mut values = Array2::zeros((3, c));
    let mut labels = Vec::with_capacity(c);
    let mut p = 0;
    for &(slope, label) in branches {
        for _ in 0..config.n_cells {
            let x = rng.random_range(lo..=hi);
            values[[0, p]] = x;
            values[[1, p]] = slope * x + noise(&mut rng);
            values[[2, p]] = noise(&mut rng);
            labels.push(label.to_string());
            p += 1;
        }
    }
    let genes = vec!["x".to_string(), "y".to_string(), "z".to_string()];
    let cells = (0..c).map(|p| format!("cell{p}")).collect();
    Ok(ToyDataset {
        matrix: ExpressionMatrix::new(values, genes, cells)?,
        branch_labels: labels,
    })
}

/// `x -> y` and `y -> x`, signed by the branch slope (positive for `Both`).
pub fn toy_ground_truth(branch: Branch) -> GroundTruthNetwork {
    let sign = match branch {
        Branch::Blue => Sign::Repression,
        _ => Sign::Activation,
    };
    GroundTruthNetwork::new(
        vec!["x".into(), "y".into(), "z".into()],
        vec![(0, 1, sign), (1, 0, sign)],
    )
    .expect("static toy network is valid")
}
