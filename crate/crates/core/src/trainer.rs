//! Full-batch training of a single KAN predictor: random train/test split,
//! MSE loss, Adam with global-norm gradient clipping and gap-based early
//! stopping.

use ndarray::{ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{GrnError, Result};
use crate::kan::{KanConfig, KanNetwork, Normalization};
use crate::seed::{derive_seed, rng_for};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub clip_norm: f64,
    /// Fraction of samples used for fitting.
    pub split_ratio: f64,
    pub gap_threshold: f64,
    /// Consecutive epochs the test/train gap must exceed the threshold.
    pub gap_patience: usize,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Return the weights with the lowest test loss instead of the last ones.
    pub restore_best: bool,
    pub kan: KanConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 3000,
            learning_rate: 1e-4,
            clip_norm: 100.0,
            split_ratio: 0.8,
            gap_threshold: 0.0005,
            gap_patience: 10,
            seed: 0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            restore_best: false,
            kan: KanConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(GrnError::config(format!(
                "split ratio must be in (0, 1), got {}",
                self.split_ratio
            )));
        }
        let positive = [
            ("learning_rate", self.learning_rate),
            ("clip_norm", self.clip_norm),
            ("gap_threshold", self.gap_threshold),
            ("adam_eps", self.adam_eps),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(GrnError::config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.gap_patience == 0 {
            return Err(GrnError::config("gap_patience must be at least 1"));
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(GrnError::config(format!("{name} must be in [0, 1), got {b}")));
            }
        }
        Ok(())
    }
}

/// Per-epoch record of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub final_train_loss: f64,
    pub final_test_loss: f64,
    pub stopped_early: bool,
    /// `(train, test)` loss at the start of each epoch.
    pub loss_history: Vec<(f64, f64)>,
}

/// Random partition of `0..n` into sorted train and test index sets with
/// `round(ratio * n)` training samples.
pub fn split_train_test(n: usize, ratio: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(GrnError::config(format!("split ratio must be in (0, 1), got {ratio}")));
    }
    let n_train = (ratio * n as f64).round() as usize;
    if n < 2 || n_train == 0 || n_train >= n {
        return Err(GrnError::config(format!(
            "{n} samples cannot be split {ratio} into two nonempty parts"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng_for(seed, 0));
    let mut train = idx[..n_train].to_vec();
    let mut test = idx[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn mse_loss(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.is_empty() {
        return Err(GrnError::domain("mse of empty input"));
    }
    if predictions.len() != targets.len() {
        return Err(GrnError::Shape {
            expected: predictions.len(),
            got: targets.len(),
        });
    }
    let sum: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / predictions.len() as f64)
}

/// True iff the test/train gap exceeded `threshold` in each of the last
/// `patience` epochs.
pub fn early_stop_check(history: &[(f64, f64)], threshold: f64, patience: usize) -> bool {
    if patience == 0 || history.len() < patience {
        return false;
    }
    history[history.len() - patience..]
        .iter()
        .all(|&(train, test)| test - train > threshold)
}

/// Adam optimizer state over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub clip_norm: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n_params: usize, config: &TrainConfig) -> Self {
        Adam {
            learning_rate: config.learning_rate,
            beta1: config.adam_beta1,
            beta2: config.adam_beta2,
            eps: config.adam_eps,
            clip_norm: config.clip_norm,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    /// Clips `grads` in place to global L2 norm `clip_norm`, then applies one
    /// bias-corrected Adam update to `params`. Returns the pre-clip norm.
    pub fn step(&mut self, params: &mut [f64], grads: &mut [f64]) -> Result<f64> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(GrnError::Shape {
                expected: self.m.len(),
                got: grads.len(),
            });
        }
        let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
        if !norm.is_finite() {
            return Err(GrnError::Training {
                epoch: self.t as usize,
                message: "non-finite gradient".into(),
            });
        }
        if norm > self.clip_norm {
            let s = self.clip_norm / norm;
            grads.iter_mut().for_each(|g| *g *= s);
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mh = self.m[i] / bc1;
            let vh = self.v[i] / bc2;
            params[i] -= self.learning_rate * mh / (vh.sqrt() + self.eps);
        }
        Ok(norm)
    }
}

/// Trains a fresh network to predict `targets` (length c) from `inputs`
/// (c x d). Normalization is fitted on the training split only; test
/// samples never contribute to the updates.
pub fn train_predictor(
    inputs: ArrayView2<f64>,
    targets: ArrayView1<f64>,
    config: &TrainConfig,
) -> Result<(KanNetwork, TrainReport)> {
    config.validate()?;
    let (c, d) = inputs.dim();
    if targets.len() != c {
        return Err(GrnError::Shape {
            expected: c,
            got: targets.len(),
        });
    }
    if d == 0 {
        return Err(GrnError::config("predictor needs at least one input"));
    }
    if inputs.iter().chain(targets.iter()).any(|v| !v.is_finite()) {
        return Err(GrnError::domain("training data must be finite"));
    }
    let (train, test) = split_train_test(c, config.split_ratio, derive_seed(config.seed, 1))?;
    let rows: Vec<Vec<f64>> = inputs.outer_iter().map(|r| r.to_vec()).collect();

    let mut net = KanNetwork::init(d, &config.kan, derive_seed(config.seed, 2))?;
    net.set_normalization(Normalization::min_max(
        d,
        train.iter().map(|&i| rows[i].as_slice()),
    ))?;

    let mut tape = net.tape();
    let mut params = net.params();
    let mut grads = vec![0.0; params.len()];
    let mut adam = Adam::new(params.len(), config);
    let mut history = Vec::new();
    let mut stopped_early = false;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let n_train = train.len() as f64;

    for epoch in 0..config.epochs {
        grads.iter_mut().for_each(|g| *g = 0.0);
        let mut train_loss = 0.0;
        for &i in &train {
            let y = net.forward_tape(&rows[i], &mut tape);
            let r = y - targets[i];
            train_loss += r * r;
            net.backprop(&mut tape, 2.0 * r / n_train, Some(&mut grads), None);
        }
        train_loss /= n_train;
        let test_loss = mean_loss(&net, &rows, targets, &test, &mut tape);
        if !train_loss.is_finite() || !test_loss.is_finite() {
            return Err(GrnError::Training {
                epoch,
                message: format!("loss diverged (train {train_loss}, test {test_loss})"),
            });
        }
        history.push((train_loss, test_loss));
        if config.restore_best && best.as_ref().is_none_or(|(b, _)| test_loss < *b) {
            best = Some((test_loss, params.clone()));
        }
        if early_stop_check(&history, config.gap_threshold, config.gap_patience) {
            stopped_early = true;
            break;
        }
        adam.step(&mut params, &mut grads).map_err(|e| match e {
            GrnError::Training { message, .. } => GrnError::Training { epoch, message },
            other => other,
        })?;
        net.set_params(&params)?;
    }
    if let Some((_, p)) = best {
        net.set_params(&p)?;
    }

    let final_train_loss = mean_loss(&net, &rows, targets, &train, &mut tape);
    let final_test_loss = mean_loss(&net, &rows, targets, &test, &mut tape);
    let report = TrainReport {
        epochs_run: history.len(),
        final_train_loss,
        final_test_loss,
        stopped_early,
        loss_history: history,
    };
    Ok((net, report))
}

fn mean_loss(
    net: &KanNetwork,
    rows: &[Vec<f64>],
    targets: ArrayView1<f64>,
    idx: &[usize],
    tape: &mut crate::kan::Tape,
) -> f64 {
    let sum: f64 = idx
        .iter()
        .map(|&i| {
            let r = net.forward_tape(&rows[i], tape) - targets[i];
            r * r
        })
        .sum();
    sum / idx.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{Array1, Array2};
    use proptest::prelude::*;

    #[test]
    fn split_sizes() {
        let (tr, te) = split_train_test(10, 0.8, 3).unwrap();
        assert_eq!((tr.len(), te.len()), (8, 2));
        assert!(tr.iter().all(|i| !te.contains(i)));
        let (tr, te) = split_train_test(2, 0.5, 3).unwrap();
        assert_eq!((tr.len(), te.len()), (1, 1));
        assert_eq!(split_train_test(10, 0.8, 3).unwrap(), split_train_test(10, 0.8, 3).unwrap());
        assert!(split_train_test(1, 0.5, 0).is_err());
        assert!(split_train_test(3, 0.99, 0).is_err());
    }

    proptest! {
        #[test]
        fn split_is_disjoint_cover(n in 2usize..200, ratio in 0.05f64..0.95, seed in any::<u64>()) {
            if let Ok((tr, te)) = split_train_test(n, ratio, seed) {
                let mut all: Vec<usize> = tr.iter().chain(&te).copied().collect();
                all.sort_unstable();
                prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
                prop_assert_eq!(tr.len(), (ratio * n as f64).round() as usize);
            }
        }
    }

    #[test]
    fn mse_cases() {
        assert_eq!(mse_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse_loss(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        let p = [0.3, -1.2, 2.5, 0.0, 4.1];
        let t = [0.1, -1.0, 3.0, 1.0, 4.0];
        // 0.04 + 0.04 + 0.25 + 1 + 0.01 = 1.34
        assert!((mse_loss(&p, &t).unwrap() - 1.34 / 5.0).abs() < 1e-15);
        assert!(mse_loss(&[], &[]).is_err());
    }

    #[test]
    fn adam_zero_gradient_is_noop() {
        let cfg = TrainConfig::default();
        let mut adam = Adam::new(3, &cfg);
        let mut p = vec![1.0, -2.0, 0.5];
        adam.step(&mut p, &mut [0.0; 3]).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn adam_first_step_closed_form() {
        let cfg = TrainConfig::default();
        let mut adam = Adam::new(1, &cfg);
        let mut p = [0.0];
        adam.step(&mut p, &mut [1.0]).unwrap();
        // m_hat = v_hat = 1 after bias correction
        let expect = -1e-4 * 1.0 / (1.0 + 1e-8);
        assert!((p[0] - expect).abs() < 1e-18);
    }

    #[test]
    fn adam_clips_global_norm() {
        let cfg = TrainConfig::default();
        let mut adam = Adam::new(2, &cfg);
        let mut p = [0.0, 0.0];
        let mut g = [120.0, 160.0];
        let norm = adam.step(&mut p, &mut g).unwrap();
        assert_eq!(norm, 200.0);
        assert!((g[0] - 60.0).abs() < 1e-12 && (g[1] - 80.0).abs() < 1e-12);
    }

    #[test]
    fn adam_rejects_non_finite() {
        let mut adam = Adam::new(1, &TrainConfig::default());
        assert!(matches!(
            adam.step(&mut [0.0], &mut [f64::NAN]),
            Err(GrnError::Training { .. })
        ));
    }

    #[test]
    fn early_stop_rules() {
        let mut h = vec![(0.0, 0.001); 10];
        assert!(early_stop_check(&h, 0.0005, 10));
        h[9] = (0.0, 0.0001);
        assert!(!early_stop_check(&h, 0.0005, 10));
        let neg = vec![(0.01, 0.0); 20];
        assert!(!early_stop_check(&neg, 0.0005, 10));
        assert!(!early_stop_check(&h[..5], 0.0005, 10));
    }

    fn quick_config(epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            learning_rate: 1e-2,
            gap_threshold: 1e3,
            kan: KanConfig {
                hidden_widths: Some(vec![3]),
                ..KanConfig::default()
            },
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_epochs_returns_initial_network() {
        let x = Array2::from_shape_fn((10, 2), |(i, j)| (i * 2 + j) as f64 * 0.1);
        let y = Array1::zeros(10);
        let (_, rep) = train_predictor(x.view(), y.view(), &quick_config(0)).unwrap();
        assert_eq!(rep.epochs_run, 0);
        assert!(rep.loss_history.is_empty());
        assert!(!rep.stopped_early);
    }

    #[test]
    fn learns_constant_target() {
        let x = Array2::from_shape_fn((40, 2), |(i, j)| ((i * 7 + j * 3) % 11) as f64);
        let y = Array1::zeros(40);
        let (_, rep) = train_predictor(x.view(), y.view(), &quick_config(50)).unwrap();
        assert_eq!(rep.loss_history.len(), 50);
        assert!(rep.final_train_loss < rep.loss_history[0].0);
    }

    #[test]
    fn training_is_deterministic() {
        let x = Array2::from_shape_fn((30, 2), |(i, j)| ((i * 5 + j) % 7) as f64);
        let y = x.column(0).mapv(|v| v * 0.3);
        let a = train_predictor(x.view(), y.view(), &quick_config(20)).unwrap();
        let b = train_predictor(x.view(), y.view(), &quick_config(20)).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn rejects_bad_inputs() {
        let x = Array2::<f64>::zeros((1, 2));
        let y = Array1::zeros(1);
        assert!(train_predictor(x.view(), y.view(), &quick_config(1)).is_err());
        let x = Array2::<f64>::zeros((5, 2));
        let y = Array1::zeros(4);
        assert!(train_predictor(x.view(), y.view(), &quick_config(1)).is_err());
        let cfg = TrainConfig {
            split_ratio: 1.0,
            ..quick_config(1)
        };
        assert!(train_predictor(x.view(), Array1::zeros(5).view(), &cfg).is_err());
    }
}
