use grnkan::grn::{infer_grn, Z_THRESHOLD};
use grnkan::ovr::{evaluate_gradients, train_all, ExpressionMatrix};
use grnkan::seed::rng_for;
use grnkan::trainer::{mse_loss, train_predictor, TrainConfig};
use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};

fn fast() -> TrainConfig {
    TrainConfig {
        epochs: 500,
        learning_rate: 1e-2,
        ..TrainConfig::default()
    }
}

#[test]
fn learns_identity_on_unit_interval() {
    let mut rng = rng_for(5, 0);
    let x = Array2::from_shape_fn((500, 1), |_| rng.random::<f64>());
    let y = x.column(0).to_owned();
    let cfg = TrainConfig {
        gap_threshold: 1e9,
        ..fast()
    };
    let (net, report) = train_predictor(x.view(), y.view(), &cfg).unwrap();
    assert!(report.final_test_loss < 0.01, "{report:?}");
    let preds: Vec<f64> = x.rows().into_iter().map(|r| net.forward(&r.to_vec()).unwrap()).collect();
    assert!(mse_loss(&preds, y.as_slice().unwrap()).unwrap() < 0.01);
}

fn linear_system(seed: u64) -> ExpressionMatrix {
    // x uniform, y = 2x + noise, two unrelated noise genes
    let mut rng = rng_for(seed, 0);
    let noise = Normal::new(0.0, 0.05).unwrap();
    let c = 400;
    let mut v = Array2::zeros((4, c));
    for p in 0..c {
        let x: f64 = rng.random();
        v[[0, p]] = x;
        v[[1, p]] = 2.0 * x + noise.sample(&mut rng);
        v[[2, p]] = rng.random();
        v[[3, p]] = rng.random();
    }
    ExpressionMatrix::new(
        v,
        ["x", "y", "u", "w"].iter().map(|s| s.to_string()).collect(),
        (0..c).map(|p| format!("c{p}")).collect(),
    )
    .unwrap()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[test]
fn linear_system_slope_and_edge() {
    let x = linear_system(3);
    let cfg = TrainConfig {
        gap_threshold: 1e9,
        ..fast()
    };
    let outcomes = train_all(&x, &cfg);
    let fields = evaluate_gradients(&outcomes, &x).unwrap();
    assert_eq!(fields.len(), 4);
    let fy = &fields[1];
    assert_eq!(fy.regulators, vec![0, 2, 3]);
    let slope = median(fy.values.row(0).to_vec());
    assert!((1.5..=2.5).contains(&slope), "median slope {slope}");

    let adj = infer_grn(&fields, x.gene_names(), None, Z_THRESHOLD).unwrap();
    let w = &adj.weights;
    assert!(w[[0, 1]] > 0.0);
    let largest = w
        .indexed_iter()
        .filter(|((j, i), _)| j != i)
        .map(|(_, v)| v.abs())
        .fold(0.0, f64::max);
    assert_eq!(w[[0, 1]].abs(), largest);
    for g in 0..4 {
        assert_eq!(w[[g, g]], 0.0);
    }
}

#[test]
fn gradients_match_single_point_evaluation() {
    let x = linear_system(4);
    let cfg = TrainConfig {
        epochs: 20,
        ..fast()
    };
    let outcomes = train_all(&x, &cfg);
    let fields = evaluate_gradients(&outcomes, &x).unwrap();
    let net = &outcomes[2].result.as_ref().unwrap().network;
    let v = x.values();
    for p in [0, 17, 399] {
        let input = [v[[0, p]], v[[1, p]], v[[3, p]]];
        let g = net.input_gradient(&input).unwrap();
        assert_eq!(fields[2].values.column(p).to_vec(), g);
    }
}

#[test]
fn pipeline_is_independent_of_thread_count() {
    let x = linear_system(6);
    let cfg = TrainConfig {
        epochs: 30,
        ..fast()
    };
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let o = train_all(&x, &cfg);
            evaluate_gradients(&o, &x).unwrap()
        })
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn failed_gene_gives_zero_field() {
    let x = linear_system(7);
    let cfg = TrainConfig {
        learning_rate: f64::NAN,
        epochs: 3,
        ..TrainConfig::default()
    };
    let outcomes = train_all(&x, &cfg);
    assert!(outcomes.iter().all(|o| o.result.is_err()));
    let fields = evaluate_gradients(&outcomes, &x).unwrap();
    assert_eq!(fields.len(), 4);
    assert!(fields.iter().all(|f| f.values.iter().all(|&v| v == 0.0)));
}
