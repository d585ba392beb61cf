use proptest::prelude::*;
use svann_core::autodiff::check::relative_error;
use svann_core::network::{
    forward_network, init_network, loss_and_gradient, train, Activation, Architecture, Dataset, InitScheme, Loss,
    Optimizer, TrainConfig,
};
use svann_core::rng::SplitMix64;
use svann_core::Network64;

fn separable(seed: u64, n: usize) -> Dataset<f64> {
    // Labels from a fixed line with a margin band removed.
    let mut rng = SplitMix64::new(seed);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    while xs.len() < n {
        let a = rng.uniform(-1.0, 1.0);
        let b = rng.uniform(-1.0, 1.0);
        let s = 0.8 * a - 0.6 * b + 0.1;
        if s.abs() < 0.1 {
            continue;
        }
        xs.push(vec![a, b]);
        ys.push(vec![if s > 0.0 { 1.0 } else { 0.0 }]);
    }
    Dataset::new(xs, ys)
}

/// Classic perceptron; returns true once a full pass makes no mistakes.
fn perceptron_separates(data: &Dataset<f64>) -> bool {
    let mut w = [0.0f64; 3];
    for _ in 0..10_000 {
        let mut mistakes = 0;
        for (x, y) in data.features.iter().zip(&data.targets) {
            let target = if y[0] > 0.5 { 1.0 } else { -1.0 };
            let act = w[0] * x[0] + w[1] * x[1] + w[2];
            if target * act <= 0.0 {
                w[0] += target * x[0];
                w[1] += target * x[1];
                w[2] += target;
                mistakes += 1;
            }
        }
        if mistakes == 0 {
            return true;
        }
    }
    false
}

#[test]
fn separable_data_reaches_high_accuracy() {
    let data = separable(11, 200);
    assert!(perceptron_separates(&data));
    let arch = Architecture::new(vec![2, 1], vec![Activation::Sigmoid]).unwrap();
    let net: Network64 = init_network(&arch, InitScheme::Uniform { lo: -0.5, hi: 0.5 }, 4).unwrap().with_biases(true);
    let cfg = TrainConfig { learning_rate: 0.5, epochs: 500, batch_size: 20, loss: Loss::BinaryCrossEntropy, seed: 1, ..Default::default() };
    let (trained, history) = train(&net, &data, &cfg).unwrap();
    assert_eq!(history.len(), 500);
    let correct = data
        .features
        .iter()
        .zip(&data.targets)
        .filter(|(x, y)| (trained.predict(x).unwrap()[0] >= 0.5) == (y[0] > 0.5))
        .count();
    let acc = correct as f64 / data.len() as f64;
    assert!(acc >= 0.99, "accuracy {acc}");
}

#[test]
fn training_is_deterministic() {
    let data = separable(5, 60);
    let arch = Architecture::uniform(vec![2, 4, 1], Activation::Tanh, Activation::Sigmoid).unwrap();
    let net: Network64 = init_network(&arch, InitScheme::Uniform { lo: -0.5, hi: 0.5 }, 8).unwrap().with_biases(true);
    for optimizer in [Optimizer::Sgd, Optimizer::adam()] {
        let cfg = TrainConfig { learning_rate: 0.05, epochs: 20, batch_size: 7, loss: Loss::BinaryCrossEntropy, optimizer, seed: 3 };
        let (a, ha) = train(&net, &data, &cfg).unwrap();
        let (b, hb) = train(&net, &data, &cfg).unwrap();
        assert_eq!(ha, hb);
        assert_eq!(a, b);
    }
}

#[test]
fn linear_single_layer_is_dot_product() {
    let arch = Architecture::new(vec![5, 1], vec![Activation::Linear]).unwrap();
    let net: Network64 = init_network(&arch, InitScheme::Uniform { lo: -2.0, hi: 2.0 }, 12).unwrap();
    let x = [0.3, -1.1, 2.5, 0.0, 0.7];
    let w = &net.weights()[0][0];
    let dot = w.iter().zip(&x).fold(0.0, |s, (a, b)| s + a * b);
    assert_eq!(forward_network(&net, &x).unwrap().output_values()[0], dot);
    assert_eq!(net.predict(&x).unwrap()[0], dot);
}

#[test]
fn forward_gradients_reach_weights_and_inputs() {
    let net: Network64 = init_network(&Architecture::toy(), InitScheme::Constant { value: 0.5 }, 0).unwrap();
    let f = forward_network(&net, &[0.1, 0.1]).unwrap();
    assert!((f.output_values()[0] - 0.5250).abs() < 5e-5);
    let g = f.tape.backward_with(&f.values, f.outputs[0]).unwrap();
    // ∂ŷ/∂w5 = σ(0.1).
    assert!((g.get(f.params[4]) - 0.52498).abs() < 1e-5);
    assert!((g.get(f.inputs[0]) - 0.12469).abs() < 1e-5);
}

fn fd_gradient(net: &Network64, data: &Dataset<f64>, rows: &[usize], loss: &Loss<f64>, h: f64) -> Vec<f64> {
    let base = net.params();
    (0..base.len())
        .map(|k| {
            let mut p = base.clone();
            let mut n = net.clone();
            p[k] = base[k] + h;
            n.set_params(&p).unwrap();
            let up = loss_and_gradient(&n, data, rows, loss).unwrap().0;
            p[k] = base[k] - h;
            n.set_params(&p).unwrap();
            let down = loss_and_gradient(&n, data, rows, loss).unwrap().0;
            (up - down) / (2.0 * h)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn training_loss_gradient_matches_finite_differences(seed in 0u64..10_000, bce in any::<bool>()) {
        let mut rng = SplitMix64::new(seed);
        let data = separable(seed, 40);
        let arch = Architecture::uniform(vec![2, 5, 3, 1], Activation::Tanh, Activation::Sigmoid).unwrap();
        let net: Network64 = init_network(&arch, InitScheme::Uniform { lo: -1.0, hi: 1.0 }, seed).unwrap().with_biases(true);
        let rows: Vec<usize> = (0..8).map(|_| rng.below(40) as usize).collect();
        let loss = if bce { Loss::BinaryCrossEntropy } else { Loss::Mse };
        let (_, grad) = loss_and_gradient(&net, &data, &rows, &loss).unwrap();
        let fd = fd_gradient(&net, &data, &rows, &loss, 1e-5);
        for (a, n) in grad.iter().zip(&fd) {
            prop_assert!(relative_error(*a, *n) < 1e-4, "{} vs {}", a, n);
        }
    }
}
