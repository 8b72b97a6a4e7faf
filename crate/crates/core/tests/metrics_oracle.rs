use grnkan::metrics::{auprc, auroc, evaluate, shd, signed_auprc, signed_auroc, GroundTruthNetwork, Sign};
use grnkan::seed::rng_for;
use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng;

fn names(g: usize) -> Vec<String> {
    (0..g).map(|i| format!("g{i}")).collect()
}

/// Enumerates every threshold `t` and counts `|score| >= t` directly.
fn brute_force(scores: &Array2<f64>, truth: &GroundTruthNetwork, signed: bool) -> (f64, f64) {
    let g = truth.n_genes();
    let mut cands = Vec::new();
    for j in 0..g {
        for i in 0..g {
            if i != j {
                let w = scores[[j, i]];
                let hit = match truth.sign(j, i) {
                    Some(s) => !signed || (w > 0.0 && s == Sign::Activation) || (w < 0.0 && s == Sign::Repression),
                    None => false,
                };
                cands.push((w.abs(), hit));
            }
        }
    }
    let p = truth.edges().len() as f64;
    let n = cands.iter().filter(|c| !c.1).count() as f64;
    let mut thresholds: Vec<f64> = cands.iter().map(|c| c.0).collect();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let (mut roc, mut pr) = (0.0, 0.0);
    let (mut fpr0, mut tpr0, mut rec0) = (0.0, 0.0, 0.0);
    for t in thresholds {
        let tp = cands.iter().filter(|c| c.0 >= t && c.1).count() as f64;
        let fp = cands.iter().filter(|c| c.0 >= t && !c.1).count() as f64;
        let (fpr, tpr) = (fp / n, tp / p);
        roc += 0.5 * (fpr - fpr0) * (tpr + tpr0);
        if tp + fp > 0.0 {
            pr += (tpr - rec0) * tp / (tp + fp);
        }
        fpr0 = fpr;
        tpr0 = tpr;
        rec0 = tpr;
    }
    (roc, pr)
}

fn random_truth(rng: &mut impl Rng, g: usize, n_edges: usize) -> GroundTruthNetwork {
    let mut pairs: Vec<(usize, usize)> = (0..g)
        .flat_map(|j| (0..g).filter(move |&i| i != j).map(move |i| (j, i)))
        .collect();
    let mut edges = Vec::new();
    for _ in 0..n_edges {
        let k = rng.random_range(0..pairs.len());
        let (s, t) = pairs.swap_remove(k);
        let sign = if rng.random::<bool>() { Sign::Activation } else { Sign::Repression };
        edges.push((s, t, sign));
    }
    GroundTruthNetwork::new(names(g), edges).unwrap()
}

fn random_scores(rng: &mut impl Rng, g: usize, levels: u32) -> Array2<f64> {
    // coarse levels force ties
    Array2::from_shape_fn((g, g), |_| {
        let v = rng.random_range(0..levels) as f64 / levels as f64;
        if rng.random::<bool>() { v } else { -v }
    })
}

#[test]
fn random_instances_match_brute_force() {
    let mut rng = rng_for(11, 0);
    for trial in 0..400 {
        let truth = random_truth(&mut rng, 4, 1 + trial % 4);
        let s = random_scores(&mut rng, 4, if trial % 2 == 0 { 4 } else { 1000 });
        let (roc, pr) = brute_force(&s, &truth, false);
        let (sroc, spr) = brute_force(&s, &truth, true);
        assert!((auroc(&s, &truth).unwrap() - roc).abs() < 1e-12);
        assert!((auprc(&s, &truth).unwrap() - pr).abs() < 1e-12);
        assert!((signed_auroc(&s, &truth).unwrap() - sroc).abs() < 1e-12);
        assert!((signed_auprc(&s, &truth).unwrap() - spr).abs() < 1e-12);
    }
}

#[test]
fn constant_scores_give_density() {
    let mut rng = rng_for(12, 0);
    for e in 1..8 {
        let truth = random_truth(&mut rng, 5, e);
        let s = Array2::from_elem((5, 5), 0.3);
        assert!((auprc(&s, &truth).unwrap() - truth.density()).abs() < 1e-12);
        assert!((auroc(&s, &truth).unwrap() - 0.5).abs() < 1e-12);
    }
}

#[test]
fn perfect_prediction_scores_zero_shd() {
    let mut rng = rng_for(13, 0);
    let truth = random_truth(&mut rng, 6, 7);
    let w = truth.to_matrix();
    let r = evaluate(&w, &truth, None).unwrap();
    assert_eq!((r.auroc, r.auprc, r.shd, r.fdr), (1.0, 1.0, 0.0, 0.0));
    assert_eq!((r.signed_auroc, r.signed_auprc), (1.0, 1.0));
    assert_eq!(shd(&w, &truth, 0).unwrap(), 7);
}

proptest! {
    #[test]
    fn monotone_transform_invariance(seed in 0u64..10_000) {
        let mut rng = rng_for(seed, 1);
        let truth = random_truth(&mut rng, 5, 4);
        let s = random_scores(&mut rng, 5, 50);
        let t = s.mapv(|v| v.signum() * (v.abs().powi(3) + 0.5 * v.abs()));
        prop_assert!((auroc(&s, &truth).unwrap() - auroc(&t, &truth).unwrap()).abs() < 1e-12);
        prop_assert!((signed_auroc(&s, &truth).unwrap() - signed_auroc(&t, &truth).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn reversed_ranking_complements(seed in 0u64..10_000) {
        let mut rng = rng_for(seed, 2);
        let truth = random_truth(&mut rng, 4, 3);
        // distinct positive magnitudes, no ties
        let mut vals: Vec<f64> = (1..=16).map(|v| v as f64).collect();
        for k in (1..16).rev() {
            vals.swap(k, rng.random_range(0..=k));
        }
        let s = Array2::from_shape_vec((4, 4), vals).unwrap();
        let r = s.mapv(|v| 100.0 - v);
        let sum = auroc(&s, &truth).unwrap() + auroc(&r, &truth).unwrap();
        prop_assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_never_matters(seed in 0u64..10_000, d in -5.0f64..5.0) {
        let mut rng = rng_for(seed, 3);
        let truth = random_truth(&mut rng, 4, 3);
        let s = random_scores(&mut rng, 4, 10);
        let mut t = s.clone();
        for g in 0..4 {
            t[[g, g]] = d * (g as f64 + 1.0);
        }
        prop_assert_eq!(evaluate(&s, &truth, None).unwrap(), evaluate(&t, &truth, None).unwrap());
    }
}
