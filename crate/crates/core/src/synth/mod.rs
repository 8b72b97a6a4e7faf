//! Synthetic single-cell expression in the style of Boolean-rule simulators:
//! regulatory rules are compiled to Hill-function drift terms and integrated
//! as a chemical Langevin SDE with Euler-Maruyama.

mod networks;
mod toy;

use std::collections::HashSet;

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GrnError, Result};
use crate::metrics::{GroundTruthNetwork, Sign};
use crate::ovr::ExpressionMatrix;
use crate::seed::rng_for;

pub use networks::{builtin_network, BUILTIN_NAMES};
pub use toy::{toy_branches, toy_ground_truth, Branch, BranchToyConfig, ToyDataset};

/// How the activators of a gene are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Combine {
    /// Product of activator Hill terms.
    And,
    /// `1 - prod(1 - hill)` over activators.
    Or,
}

/// Directed, signed regulatory network with per-gene combination rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub genes: Vec<String>,
    /// `(source, target, sign)` by gene index.
    pub edges: Vec<(usize, usize, Sign)>,
    pub rules: Vec<Combine>,
    /// Basal production fraction per gene, in `[0, 1]`.
    pub basal: Vec<f64>,
}

impl NetworkSpec {
    /// Spec with AND rules and no basal production.
    pub fn new(genes: Vec<String>, edges: Vec<(usize, usize, Sign)>) -> Result<Self> {
        let g = genes.len();
        let spec = NetworkSpec {
            genes,
            edges,
            rules: vec![Combine::And; g],
            basal: vec![0.0; g],
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn n_genes(&self) -> usize {
        self.genes.len()
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.genes.len();
        if g == 0 {
            return Err(GrnError::Spec("network has no genes".into()));
        }
        if self.rules.len() != g || self.basal.len() != g {
            return Err(GrnError::Spec("rules and basal rates must cover every gene".into()));
        }
        let mut names = HashSet::new();
        for n in &self.genes {
            if !names.insert(n) {
                return Err(GrnError::Spec(format!("duplicate gene {n:?}")));
            }
        }
        let mut pairs = HashSet::new();
        for &(s, t, _) in &self.edges {
            if s >= g || t >= g {
                return Err(GrnError::Spec(format!("edge ({s}, {t}) references an unknown gene")));
            }
            if !pairs.insert((s, t)) {
                return Err(GrnError::Spec(format!(
                    "duplicate edge {} -> {}",
                    self.genes[s], self.genes[t]
                )));
            }
        }
        if self.basal.iter().any(|b| !(0.0..=1.0).contains(b)) {
            return Err(GrnError::Spec("basal production must lie in [0, 1]".into()));
        }
        let has_source = (0..g).any(|i| {
            self.basal[i] > 0.0
                || !self
                    .edges
                    .iter()
                    .any(|&(_, t, s)| t == i && s == Sign::Activation)
        });
        if !has_source {
            return Err(GrnError::Spec(
                "every gene needs an activator and none has basal production".into(),
            ));
        }
        Ok(())
    }

    pub fn ground_truth(&self) -> Result<GroundTruthNetwork> {
        GroundTruthNetwork::new(self.genes.clone(), self.edges.clone())
    }
}

/// Kinetic and sampling parameters of the simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub n_cells: usize,
    pub t_max: f64,
    pub dt: f64,
    pub hill_n: f64,
    pub hill_k: f64,
    /// Production rate `m`.
    pub production: f64,
    /// Degradation rate `lambda`.
    pub degradation: f64,
    /// Langevin noise scale `sigma`.
    pub noise: f64,
    /// Initial concentrations are drawn from `U(0, init_scale)`.
    pub init_scale: f64,
    /// Sample every cell at `t_max` instead of a uniform random time.
    pub sample_at_end: bool,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        let m = 20.0;
        let lambda = 10.0;
        SimulationConfig {
            n_cells: 2000,
            t_max: 2.0,
            dt: 0.01,
            hill_n: 10.0,
            hill_k: 0.5 * m / lambda,
            production: m,
            degradation: lambda,
            noise: 0.5 * f64::sqrt(m),
            init_scale: 0.1 * m / lambda,
            sample_at_end: false,
            seed: 0,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("t_max", self.t_max),
            ("dt", self.dt),
            ("hill_n", self.hill_n),
            ("hill_k", self.hill_k),
            ("production", self.production),
            ("degradation", self.degradation),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(GrnError::config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.dt < self.t_max) {
            return Err(GrnError::config("dt must be smaller than t_max"));
        }
        if !(self.noise >= 0.0 && self.init_scale >= 0.0) {
            return Err(GrnError::config("noise and init_scale must be nonnegative"));
        }
        if self.n_cells == 0 {
            return Err(GrnError::config("n_cells must be positive"));
        }
        Ok(())
    }
}

/// `x^n / (k^n + x^n)`.
pub fn hill_activation(x: f64, k: f64, n: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(GrnError::domain(format!("negative concentration {x}")));
    }
    if !(k > 0.0 && n > 0.0) {
        return Err(GrnError::domain("Hill threshold and coefficient must be positive"));
    }
    Ok(hill(x, k, n))
}

fn hill(x: f64, k: f64, n: f64) -> f64 {
    // (x/k)^n / (1 + (x/k)^n), stable for large ratios
    let r = (x / k).powf(n);
    if r.is_infinite() {
        1.0
    } else {
        r / (1.0 + r)
    }
}

/// Drift `dX_i/dt = m * R_i(X) - lambda * X_i` compiled from a spec.
#[derive(Debug, Clone)]
pub struct OdeSystem {
    activators: Vec<Vec<usize>>,
    repressors: Vec<Vec<usize>>,
    rules: Vec<Combine>,
    basal: Vec<f64>,
    production: f64,
    degradation: f64,
    hill_n: f64,
    hill_k: f64,
}

pub fn build_ode(spec: &NetworkSpec, config: &SimulationConfig) -> Result<OdeSystem> {
    spec.validate()?;
    config.validate()?;
    let g = spec.n_genes();
    let mut activators = vec![Vec::new(); g];
    let mut repressors = vec![Vec::new(); g];
    for &(s, t, sign) in &spec.edges {
        match sign {
            Sign::Activation => activators[t].push(s),
            Sign::Repression => repressors[t].push(s),
        }
    }
    Ok(OdeSystem {
        activators,
        repressors,
        rules: spec.rules.clone(),
        basal: spec.basal.clone(),
        production: config.production,
        degradation: config.degradation,
        hill_n: config.hill_n,
        hill_k: config.hill_k,
    })
}

impl OdeSystem {
    pub fn n_genes(&self) -> usize {
        self.rules.len()
    }

    /// Regulatory input `R_i(X)` in `[0, 1]`.
    pub fn regulation(&self, i: usize, x: &[f64]) -> f64 {
        let h = |j: usize| hill(x[j].max(0.0), self.hill_k, self.hill_n);
        let act = &self.activators[i];
        let a = if act.is_empty() {
            1.0
        } else {
            match self.rules[i] {
                Combine::And => act.iter().map(|&j| h(j)).product(),
                Combine::Or => 1.0 - act.iter().map(|&j| 1.0 - h(j)).product::<f64>(),
            }
        };
        let r: f64 = self.repressors[i].iter().map(|&j| 1.0 - h(j)).product();
        let rule = a * r;
        self.basal[i] + (1.0 - self.basal[i]) * rule
    }

    pub fn drift(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.production * self.regulation(i, x) - self.degradation * x[i];
        }
    }
}

/// One Euler-Maruyama trajectory from `x` over `duration`, reflecting at 0.
fn integrate(
    ode: &OdeSystem,
    x: &mut [f64],
    duration: f64,
    dt: f64,
    noise: f64,
    rng: &mut impl Rng,
    genes: &[String],
) -> Result<()> {
    let g = x.len();
    let mut drift = vec![0.0; g];
    let steps = (duration / dt).ceil() as usize;
    let mut t = 0.0;
    for step in 0..steps {
        let h = (duration - t).min(dt);
        if h <= 0.0 {
            break;
        }
        ode.drift(x, &mut drift);
        let sq = h.sqrt();
        for i in 0..g {
            let mut v = x[i] + drift[i] * h;
            if noise > 0.0 {
                let xi: f64 = rng.sample(StandardNormal);
                v += noise * x[i].max(0.0).sqrt() * sq * xi;
            }
            v = v.abs();
            if !v.is_finite() || v > 1e12 {
                return Err(GrnError::Simulation {
                    gene: genes[i].clone(),
                    step,
                });
            }
            x[i] = v;
        }
        t += h;
    }
    Ok(())
}

/// Simulates `n_cells` independent cells. Each starts from a random
/// near-zero state and is observed at its own time in `[0, t_max]`.
pub fn simulate_cells(spec: &NetworkSpec, config: &SimulationConfig) -> Result<ExpressionMatrix> {
    let ode = build_ode(spec, config)?;
    let g = spec.n_genes();
    let cells: Vec<Vec<f64>> = (0..config.n_cells)
        .into_par_iter()
        .map(|p| {
            let mut rng = rng_for(config.seed, p as u64);
            let mut x: Vec<f64> = (0..g)
                .map(|_| {
                    if config.init_scale > 0.0 {
                        rng.random_range(0.0..config.init_scale)
                    } else {
                        0.0
                    }
                })
                .collect();
            let t = if config.sample_at_end {
                config.t_max
            } else {
                rng.random_range(0.0..=config.t_max)
            };
            integrate(&ode, &mut x, t, config.dt, config.noise, &mut rng, &spec.genes)?;
            Ok(x)
        })
        .collect::<Result<_>>()?;
    let values = Array2::from_shape_fn((g, config.n_cells), |(i, p)| cells[p][i]);
    let ids = (0..config.n_cells).map(|p| format!("cell{p}")).collect();
    ExpressionMatrix::new(values, spec.genes.clone(), ids)
}
