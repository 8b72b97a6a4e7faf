//! Kolmogorov-Arnold networks built from B-spline activations, with exact
//! forward, input-gradient and parameter-gradient passes.

mod network;
mod spline;

pub use network::{
    default_hidden_widths, BaseInit, KanConfig, KanLayer, KanNetwork, Normalization,
    ParamGradients, Tape,
};
pub use spline::{sigmoid, silu, silu_derivative, SplineActivation, SplineGrid, MAX_ORDER};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_for;
    use rand::Rng;

    fn small_config() -> KanConfig {
        KanConfig {
            hidden_widths: Some(vec![3, 2]),
            spline_init_scale: 1.0,
            ..KanConfig::default()
        }
    }

    fn rel_close(a: f64, b: f64, rel: f64, abs: f64) -> bool {
        (a - b).abs() <= abs.max(rel * a.abs().max(b.abs()))
    }

    #[test]
    fn default_widths() {
        let net = KanNetwork::init(6, &KanConfig::default(), 1).unwrap();
        assert_eq!(net.widths(), vec![13, 27, 13, 1]);
        let net = KanNetwork::init(1, &KanConfig::default(), 1).unwrap();
        assert_eq!(net.widths(), vec![3, 7, 3, 1]);
        assert!(KanNetwork::init(0, &KanConfig::default(), 1).is_err());
    }

    #[test]
    fn init_is_deterministic() {
        let a = KanNetwork::init(4, &KanConfig::default(), 42).unwrap();
        let b = KanNetwork::init(4, &KanConfig::default(), 42).unwrap();
        let c = KanNetwork::init(4, &KanConfig::default(), 43).unwrap();
        assert_eq!(a.params(), b.params());
        assert_ne!(a.params(), c.params());
    }

    #[test]
    fn single_layer_reduces_to_activation() {
        let grid = SplineGrid::uniform(-0.2, 1.2, 10, 3).unwrap();
        let w: Vec<f64> = (0..13).map(|i| (i as f64 * 0.37).sin()).collect();
        let layer = KanLayer::new(1, 1, grid.clone(), vec![0.8], w.clone()).unwrap();
        let net = KanNetwork::from_layers(vec![layer], Normalization::identity(1)).unwrap();
        let act = SplineActivation::new(0.8, w, grid).unwrap();
        for x in [-0.1, 0.2, 0.55, 1.1, 2.0] {
            assert!((net.forward(&[x]).unwrap() - act.forward(x).unwrap()).abs() < 1e-14);
        }
    }

    #[test]
    fn two_layers_match_manual_composition() {
        let net = KanNetwork::init(
            3,
            &KanConfig {
                hidden_widths: Some(vec![2]),
                spline_init_scale: 1.0,
                ..KanConfig::default()
            },
            5,
        )
        .unwrap();
        let x = [0.1, 0.7, 0.45];
        let l0 = &net.layers()[0];
        let l1 = &net.layers()[1];
        let hidden: Vec<f64> = (0..2)
            .map(|q| (0..3).map(|p| l0.activation(q, p).forward(x[p]).unwrap()).sum())
            .collect();
        let out: f64 = (0..2)
            .map(|p| l1.activation(0, p).forward(hidden[p]).unwrap())
            .sum();
        assert!((net.forward(&x).unwrap() - out).abs() < 1e-13);
    }

    #[test]
    fn identity_like_gradient_uses_normalization_scale() {
        let grid = SplineGrid::uniform(-0.2, 1.2, 10, 3).unwrap();
        let layer = KanLayer::new(1, 1, grid, vec![1.0], vec![0.0; 13]).unwrap();
        let norm = Normalization {
            shift: vec![2.0],
            scale: vec![0.25],
        };
        let net = KanNetwork::from_layers(vec![layer], norm).unwrap();
        // raw x = 2 normalizes to 0, where SiLU' = 0.5
        let g = net.input_gradient(&[2.0]).unwrap();
        assert!((g[0] - 0.5 * 0.25).abs() < 1e-15);
    }

    #[test]
    fn zero_network_has_zero_gradient() {
        let cfg = KanConfig {
            base_init: BaseInit::Constant(0.0),
            spline_init_scale: 0.0,
            ..KanConfig::default()
        };
        let net = KanNetwork::init(3, &cfg, 1).unwrap();
        assert_eq!(net.forward(&[0.2, 0.3, 0.4]).unwrap(), 0.0);
        assert!(net.input_gradient(&[0.2, 0.3, 0.4]).unwrap().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let mut rng = rng_for(99, 0);
        for trial in 0..20 {
            let mut net = KanNetwork::init(3, &small_config(), trial).unwrap();
            net.set_normalization(Normalization {
                shift: vec![0.5, -1.0, 0.0],
                scale: vec![0.5, 0.25, 2.0],
            })
            .unwrap();
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..3.0)).collect();
            let g = net.input_gradient(&x).unwrap();
            let h = 1e-5;
            for p in 0..3 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[p] += h;
                xm[p] -= h;
                let fd = (net.forward(&xp).unwrap() - net.forward(&xm).unwrap()) / (2.0 * h);
                assert!(rel_close(g[p], fd, 1e-4, 1e-7), "trial {trial} p {p}: {} vs {fd}", g[p]);
            }
        }
    }

    #[test]
    fn parameter_gradients_zero_at_target() {
        let net = KanNetwork::init(2, &small_config(), 3).unwrap();
        let x = [0.3, 0.6];
        let y = net.forward(&x).unwrap();
        let g = net.parameter_gradients(&x, y).unwrap();
        assert!(g.flat().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_activation_base_gradient_closed_form() {
        let grid = SplineGrid::uniform(-0.2, 1.2, 10, 3).unwrap();
        let w: Vec<f64> = (0..13).map(|i| 0.01 * i as f64).collect();
        let layer = KanLayer::new(1, 1, grid, vec![0.7], w).unwrap();
        let net = KanNetwork::from_layers(vec![layer], Normalization::identity(1)).unwrap();
        let (x, t) = (0.4, 1.5);
        let f = net.forward(&[x]).unwrap();
        let g = net.parameter_gradients(&[x], t).unwrap();
        assert!((g.base(0)[0] - 2.0 * (f - t) * silu(x)).abs() < 1e-14);
    }

    #[test]
    fn parameter_gradients_match_finite_differences() {
        let net = KanNetwork::init(2, &small_config(), 8).unwrap();
        let x = [0.35, 0.8];
        let t = 0.3;
        let g = net.parameter_gradients(&x, t).unwrap();
        let base = net.params();
        let h = 1e-6;
        let loss = |p: &[f64]| {
            let mut n = net.clone();
            n.set_params(p).unwrap();
            (n.forward(&x).unwrap() - t).powi(2)
        };
        for i in 0..base.len() {
            let mut pp = base.clone();
            let mut pm = base.clone();
            pp[i] += h;
            pm[i] -= h;
            let fd = (loss(&pp) - loss(&pm)) / (2.0 * h);
            assert!(rel_close(g.flat()[i], fd, 1e-4, 1e-7), "param {i}: {} vs {fd}", g.flat()[i]);
        }
    }

    #[test]
    fn shape_errors() {
        let net = KanNetwork::init(3, &small_config(), 1).unwrap();
        assert!(matches!(
            net.forward(&[1.0, 2.0]),
            Err(crate::GrnError::Shape { expected: 3, got: 2 })
        ));
        assert!(net.forward(&[1.0, f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn json_round_trip_is_exact() {
        let mut net = KanNetwork::init(3, &KanConfig::default(), 11).unwrap();
        net.set_normalization(Normalization {
            shift: vec![0.1, 0.2, 0.3],
            scale: vec![1.0 / 3.0, 7.0, 0.1],
        })
        .unwrap();
        let back = KanNetwork::from_json(&net.to_json().unwrap()).unwrap();
        assert_eq!(net, back);
    }

    #[test]
    fn json_rejects_broken_chain() {
        let net = KanNetwork::init(2, &small_config(), 1).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&net.to_json().unwrap()).unwrap();
        v["layers"][1]["n_in"] = serde_json::json!(4);
        assert!(KanNetwork::from_json(&v.to_string()).is_err());
    }
}
