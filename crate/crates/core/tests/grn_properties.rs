use grnkan::dbscan::NOISE;
use grnkan::grn::{
    cluster_gradients, infer_cluster_grns, infer_grn, sparsify, standardize, CellSubset,
    ClusterConfig, Z_THRESHOLD,
};
use grnkan::ovr::GradientField;
use grnkan::seed::rng_for;
use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Normal};

fn names(g: usize) -> Vec<String> {
    (0..g).map(|i| format!("g{i}")).collect()
}

fn random_fields(seed: u64, g: usize, c: usize) -> Vec<GradientField> {
    let mut rng = rng_for(seed, 0);
    (0..g)
        .map(|i| {
            let mut f = GradientField::zeros(i, g, c);
            f.values.iter_mut().for_each(|v| *v = rng.random_range(-3.0..3.0));
            f
        })
        .collect()
}

proptest! {
    #[test]
    fn adjacency_bounds_and_diagonal(seed in 0u64..5000, g in 3usize..7, c in 1usize..40) {
        let fields = random_fields(seed, g, c);
        let adj = infer_grn(&fields, &names(g), None, Z_THRESHOLD).unwrap();
        for j in 0..g {
            prop_assert_eq!(adj.weights[[j, j]], 0.0);
            for i in 0..g {
                prop_assert!(adj.weights[[j, i]].abs() <= 1.0);
            }
        }
    }

    #[test]
    fn scaling_one_cell_keeps_its_zscores(seed in 0u64..5000, scale in 0.01f64..50.0, p in 0usize..20) {
        let fields = random_fields(seed, 5, 20);
        for f in &fields {
            let cell = f.values.column(p).to_vec();
            let scaled: Vec<f64> = cell.iter().map(|v| v * scale).collect();
            let (a, _) = standardize(&cell).unwrap();
            let (b, _) = standardize(&scaled).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn quiet_cells_never_raise_magnitude(seed in 0u64..5000) {
        // appended cells have all regulators equal in magnitude, so z = 0
        let base = random_fields(seed, 4, 15);
        let mut grown = Vec::new();
        for f in &base {
            let mut v = Array2::zeros((3, 25));
            v.slice_mut(ndarray::s![.., ..15]).assign(&f.values);
            v.slice_mut(ndarray::s![.., 15..]).fill(0.7);
            grown.push(GradientField { target: f.target, regulators: f.regulators.clone(), values: v });
        }
        let a = infer_grn(&base, &names(4), None, Z_THRESHOLD).unwrap();
        let b = infer_grn(&grown, &names(4), None, Z_THRESHOLD).unwrap();
        for (x, y) in a.weights.iter().zip(b.weights.iter()) {
            prop_assert!(y.abs() <= x.abs() + 1e-15);
        }
    }

    #[test]
    fn zscores_moments(v in proptest::collection::vec(-1e3f64..1e3, 2..50)) {
        let (z, degenerate) = standardize(&v).unwrap();
        if !degenerate {
            let n = z.len() as f64;
            let mean = z.iter().sum::<f64>() / n;
            let sd = (z.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
            prop_assert!(mean.abs() < 1e-9 && (sd - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn full_population_matches_formula() {
    let fields = random_fields(3, 4, 30);
    let adj = infer_grn(&fields, &names(4), None, Z_THRESHOLD).unwrap();
    for f in &fields {
        let col = sparsify(f, &CellSubset::all(30), Z_THRESHOLD).unwrap();
        for (r, &j) in f.regulators.iter().enumerate() {
            assert_eq!(adj.weights[[j, f.target]], col[j]);
            // recompute by hand: z-score each cell, count cells above 1
            let mut count = 0;
            let (mut pos, mut neg) = (0, 0);
            for p in 0..30 {
                let cell: Vec<f64> = f.values.column(p).to_vec();
                let (z, _) = standardize(&cell).unwrap();
                if z[r] > 1.0 {
                    count += 1;
                }
                let v = f.values[[r, p]];
                if v > 0.0 {
                    pos += 1;
                } else if v < 0.0 {
                    neg += 1;
                }
            }
            let mean: f64 = f.values.row(r).sum();
            let sign = if pos > neg || (pos == neg && mean > 0.0) {
                1.0
            } else if pos < neg || mean < 0.0 {
                -1.0
            } else {
                0.0
            };
            assert_eq!(col[j], if count == 0 { 0.0 } else { sign * count as f64 / 30.0 });
        }
    }
}

fn blob_fields(seed: u64, per_blob: usize) -> Vec<GradientField> {
    let g = 3;
    let c = 2 * per_blob;
    let mut rng = rng_for(seed, 0);
    let noise = Normal::new(0.0, 0.05).unwrap();
    (0..g)
        .map(|i| {
            let mut f = GradientField::zeros(i, g, c);
            for p in 0..c {
                let center = if p < per_blob { 1.0 } else { -1.0 };
                for r in 0..g - 1 {
                    f.values[[r, p]] = center * (r as f64 + 1.0) + noise.sample(&mut rng);
                }
            }
            f
        })
        .collect()
}

#[test]
fn two_blobs_two_clusters() {
    let fields = blob_fields(1, 60);
    let labels = cluster_gradients(&fields, &ClusterConfig { eps: Some(0.5), min_points: 5 }).unwrap();
    assert!(labels[..60].iter().all(|&l| l == labels[0]));
    assert!(labels[60..].iter().all(|&l| l == labels[60]));
    assert_ne!(labels[0], labels[60]);
    assert!(labels.iter().all(|&l| l != NOISE));
    let auto = cluster_gradients(&fields, &ClusterConfig::default()).unwrap();
    let mut distinct: Vec<i64> = auto.iter().copied().filter(|&l| l != NOISE).collect();
    distinct.sort();
    distinct.dedup();
    assert_eq!(distinct.len(), 2);
}

#[test]
fn tiny_eps_is_all_noise() {
    let fields = blob_fields(2, 30);
    let labels = cluster_gradients(&fields, &ClusterConfig { eps: Some(1e-9), min_points: 2 }).unwrap();
    assert!(labels.iter().all(|&l| l == NOISE));
}

#[test]
fn duplicated_cells_keep_structure() {
    let fields = blob_fields(3, 40);
    let doubled: Vec<GradientField> = fields
        .iter()
        .map(|f| {
            let c = f.n_cells();
            let v = Array2::from_shape_fn((f.values.nrows(), 2 * c), |(r, p)| f.values[[r, p % c]]);
            GradientField { target: f.target, regulators: f.regulators.clone(), values: v }
        })
        .collect();
    let a = cluster_gradients(&fields, &ClusterConfig { eps: Some(0.4), min_points: 4 }).unwrap();
    let b = cluster_gradients(&doubled, &ClusterConfig { eps: Some(0.4), min_points: 8 }).unwrap();
    assert_eq!(a, b[..80].to_vec());
    assert_eq!(a, b[80..].to_vec());
}

#[test]
fn cluster_grns_partition_cells() {
    let fields = blob_fields(4, 50);
    let labels = cluster_gradients(&fields, &ClusterConfig { eps: Some(0.5), min_points: 5 }).unwrap();
    let grns = infer_cluster_grns(&fields, &names(3), &labels, Z_THRESHOLD).unwrap();
    assert_eq!(grns.len(), 2);
    let one = vec![0i64; 100];
    let single = infer_cluster_grns(&fields, &names(3), &one, Z_THRESHOLD).unwrap();
    let global = infer_grn(&fields, &names(3), None, Z_THRESHOLD).unwrap();
    assert_eq!(single[&0], global);
    let mut with_noise = one.clone();
    with_noise[0] = NOISE;
    let g = infer_cluster_grns(&fields, &names(3), &with_noise, Z_THRESHOLD).unwrap();
    let subset = CellSubset::new((1..100).collect(), "rest").unwrap();
    assert_eq!(g[&0], infer_grn(&fields, &names(3), Some(&subset), Z_THRESHOLD).unwrap());
}
