use proptest::prelude::*;
use rand::{Rng as _, SeedableRng};
use stackdx::data::{Fingerprint, LabeledDataset};
use stackdx::mlp::{fit_mlp, AdamConfig, softmax, Input, Mlp, MlpArchitecture, MlpParams, Mode};
use stackdx::rng::{Rng, RngPlan};

proptest! {
    #[test]
    fn softmax_is_a_distribution(z in prop::collection::vec(-700.0f64..700.0, 1..8)) {
        let p = softmax(&z);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn softmax_ignores_shifts(z in prop::collection::vec(-50.0f64..50.0, 2..6), c in -100.0f64..100.0) {
        let shifted: Vec<f64> = z.iter().map(|v| v + c).collect();
        for (a, b) in softmax(&z).iter().zip(softmax(&shifted)) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn output_bias_gradient_is_probs_minus_one_hot(seed in 0u64..500, target in 0usize..2) {
        let arch = MlpArchitecture::new(4, vec![6, 3], 0.0);
        let net = Mlp::init(arch, seed, Fingerprint::anonymous(4)).unwrap();
        let mut rng = Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let cache = net.forward(Input::Dense(&x), Mode::Eval, &mut rng).unwrap();
        let grads = net.backward(&cache, target).unwrap();
        let out = grads.layers.last().unwrap();
        for (k, g) in out.bias.iter().enumerate() {
            let expected = cache.probs[k] - f64::from(u8::from(k == target));
            prop_assert!((g - expected).abs() < 1e-15);
        }
    }
}

#[test]
fn sparse_and_dense_inputs_agree() {
    let arch = MlpArchitecture::new(6, vec![5], 0.2);
    let net = Mlp::init(arch, 4, Fingerprint::anonymous(6)).unwrap();
    let active = [1u32, 4];
    let dense = [0.0, 1.0, 0.0, 0.0, 1.0, 0.0];
    let mut rng = Rng::seed_from_u64(0);
    let s = net.forward(Input::Sparse(&active), Mode::Eval, &mut rng).unwrap();
    let d = net.forward(Input::Dense(&dense), Mode::Eval, &mut rng).unwrap();
    assert_eq!(s.probs, d.probs);
    let gs = net.backward(&s, 1).unwrap();
    let gd = net.backward(&d, 1).unwrap();
    assert_eq!(gs, gd);
}

#[test]
fn training_separates_a_simple_rule() {
    let mut rng = Rng::seed_from_u64(8);
    let rows: Vec<Vec<u32>> = (0..200).map(|_| (0..8u32).filter(|_| rng.random_bool(0.4)).collect()).collect();
    let labels: Vec<u8> = rows.iter().map(|r| u8::from(r.contains(&3))).collect();
    let data = LabeledDataset::from_rows(8, rows, labels).unwrap();
    let params = MlpParams {
        hidden: vec![16, 8],
        dropout: 0.1,
        epochs: 40,
        adam: AdamConfig {
            learning_rate: 1e-2,
            ..AdamConfig::default()
        },
        ..MlpParams::default()
    };
    let trained = fit_mlp(&data, &params, &RngPlan::new(2)).unwrap();
    assert!(trained.loss_trace.last().unwrap() < &(0.5 * trained.loss_trace[0]));
    assert!(trained.net.predict_proba(Input::Sparse(&[3])).unwrap() > 0.9);
    assert!(trained.net.predict_proba(Input::Sparse(&[0, 5])).unwrap() < 0.1);

    let again = fit_mlp(&data, &params, &RngPlan::new(2)).unwrap();
    assert_eq!(trained.net.layers, again.net.layers);
}

#[test]
fn eval_mode_is_deterministic() {
    let arch = MlpArchitecture::new(3, vec![4, 4], 0.5);
    let net = Mlp::init(arch, 1, Fingerprint::anonymous(3)).unwrap();
    let x = [0.3, -0.2, 0.9];
    let a = net.forward(Input::Dense(&x), Mode::Eval, &mut Rng::seed_from_u64(1)).unwrap();
    let b = net.forward(Input::Dense(&x), Mode::Eval, &mut Rng::seed_from_u64(2)).unwrap();
    assert_eq!(a.probs, b.probs);
    assert!(a.masks.iter().all(Option::is_none));
}
