use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use svann_core::autodiff::{check_gradients, check_second_order, random_graph, sigmoid, toy_graph, trace_csv};
use svann_core::Tape64;

fn central(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

#[test]
fn toy_forward_column() {
    let toy = toy_graph::<f64>();
    let v = toy.named.tape.evaluate(&toy.named.point).unwrap();
    assert_abs_diff_eq!(v[toy.v[0].index()], 0.05, epsilon = 5e-5);
    assert_abs_diff_eq!(v[toy.v[4].index()], 0.1, epsilon = 5e-5);
    assert_abs_diff_eq!(v[toy.v[6].index()], 0.5250, epsilon = 5e-5);
    assert_abs_diff_eq!(v[toy.v[8].index()], 0.2625, epsilon = 5e-5);
    assert_abs_diff_eq!(v[toy.y_hat.index()], 0.5250, epsilon = 5e-5);
}

#[test]
fn toy_zero_output_weights() {
    let toy = toy_graph::<f64>();
    let v = toy.named.tape.evaluate(&[0.0; 8]).unwrap();
    assert_eq!(v[toy.y_hat.index()], 0.0);
}

#[test]
fn toy_backward_column() {
    let mut toy = toy_graph::<f64>();
    let assign: Vec<_> = toy.named.tape.inputs().iter().copied().zip(toy.named.point.clone()).collect();
    toy.named.tape.forward(&assign).unwrap();
    let g = toy.named.tape.backward(toy.y_hat).unwrap();
    assert_eq!(g.get(toy.y_hat), 1.0);
    assert_abs_diff_eq!(g.get(toy.v[8]), 1.0, epsilon = 5e-5);
    assert_abs_diff_eq!(g.get(toy.v[6]), 0.5, epsilon = 5e-5);
    assert_abs_diff_eq!(g.get(toy.w[4]), 0.5250, epsilon = 5e-5);

    // Finite-difference oracle for the sigmoid-dependent entries.
    let y_of_v5 = |v5: f64| 0.5 * sigmoid(v5) + 0.5 * sigmoid(0.1);
    let fd = central(y_of_v5, 0.1, 1e-5);
    assert_abs_diff_eq!(g.get(toy.v[4]), fd, epsilon = 1e-8);
    assert_abs_diff_eq!(g.get(toy.v[4]), 0.12469, epsilon = 5e-6);
    let y_of_x = |x: f64| 0.5 * sigmoid(0.5 * x + 0.05) * 2.0;
    assert_abs_diff_eq!(g.get(toy.x), central(y_of_x, 0.1, 1e-5), epsilon = 1e-8);
    assert_abs_diff_eq!(g.get(toy.x), 0.12469, epsilon = 5e-6);
}

#[test]
fn toy_gradient_check() {
    let toy = toy_graph::<f64>();
    let r = check_gradients(&toy.named.tape, toy.y_hat, &toy.named.point, 1e-5, 1e-6).unwrap();
    assert!(r.passed(), "{r:?}");
    assert_eq!(r.entries.len(), 8);
}

#[test]
fn trace_csv_matches_backward() {
    let toy = toy_graph::<f64>();
    let csv = trace_csv(&toy.named).unwrap();
    assert!(csv.contains("\r\nv7,sigmoid,0.524979,0.500000\r\n"));
    assert!(csv.contains("\r\nw5,input,0.500000,0.524979\r\n"));
}

#[test]
fn random_graphs_first_and_second_order() {
    for seed in 0..100u64 {
        let mut g = random_graph::<f64>(seed, 50);
        assert!(g.tape.len() <= 50);
        let first = check_gradients(&g.tape, g.output, &g.point, 1e-5, 1e-6).unwrap();
        assert!(first.passed(), "seed {seed}: {:?}", first.max_rel_error);
        let second = check_second_order(&mut g.tape, g.output, &g.point, 1e-4, 1e-4).unwrap();
        assert!(second.passed(), "seed {seed}: {:?}", second.max_rel_error);
    }
}

#[test]
fn backward_is_bit_deterministic() {
    let g = random_graph::<f64>(42, 50);
    let v = g.tape.evaluate(&g.point).unwrap();
    let a = g.tape.backward_with(&v, g.output).unwrap();
    let b = g.tape.backward_with(&v, g.output).unwrap();
    for (x, y) in a.adjoints().iter().zip(b.adjoints()) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
}

#[test]
fn concurrent_backward_on_shared_tape() {
    let g = random_graph::<f64>(3, 50);
    let serial = {
        let v = g.tape.evaluate(&g.point).unwrap();
        g.tape.backward_with(&v, g.output).unwrap()
    };
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..4)
            .map(|_| {
                s.spawn(|| {
                    let v = g.tape.evaluate(&g.point).unwrap();
                    g.tape.backward_with(&v, g.output).unwrap()
                })
            })
            .collect();
        for h in handles {
            assert_eq!(h.join().unwrap(), serial);
        }
    });
}

#[test]
fn single_precision_tape() {
    let mut t = svann_core::Tape32::new();
    let x = t.input("x");
    let y = t.sigmoid(x);
    t.forward(&[(x, 0.1f32)]).unwrap();
    assert!((t.backward(y).unwrap().get(x) - 0.24937).abs() < 1e-5);
}

proptest! {
    #[test]
    fn weighted_sum_adjoints_are_exact(cs in prop::collection::vec(-10.0f64..10.0, 1..12), x0 in -5.0f64..5.0) {
        let mut t = Tape64::new();
        let xs: Vec<_> = (0..cs.len()).map(|i| t.input(format!("x{i}"))).collect();
        let terms: Vec<_> = xs.iter().zip(&cs).map(|(&x, &c)| { let k = t.constant(c); t.mul(k, x) }).collect();
        let y = t.sum(&terms);
        let v = t.evaluate(&vec![x0; cs.len()]).unwrap();
        let g = t.backward_with(&v, y).unwrap();
        prop_assert_eq!(g.get(y), 1.0);
        for (&x, &c) in xs.iter().zip(&cs) {
            prop_assert_eq!(g.get(x), c);
        }
    }

    #[test]
    fn forward_never_changes_structure(seed in 0u64..1000) {
        let mut g = random_graph::<f64>(seed, 40);
        let before = g.tape.ops().to_vec();
        let assign: Vec<_> = g.tape.inputs().iter().copied().zip(g.point.clone()).collect();
        g.tape.forward(&assign).unwrap();
        g.tape.backward(g.output).unwrap();
        prop_assert_eq!(g.tape.ops(), &before[..]);
    }

    #[test]
    fn polynomial_second_derivative(a in -3.0f64..3.0, b in -3.0f64..3.0, x0 in -2.0f64..2.0) {
        // y = a x³ + b x²  →  y'' = 6 a x + 2 b
        let mut t = Tape64::new();
        let x = t.input("x");
        let ca = t.constant(a);
        let cb = t.constant(b);
        let x3 = t.powi(x, 3);
        let x2 = t.mul(x, x);
        let p = t.mul(ca, x3);
        let q = t.mul(cb, x2);
        let y = t.add(p, q);
        let d = t.derive(y, x).unwrap();
        let d2 = t.derive(d, x).unwrap();
        let v = t.evaluate(&[x0]).unwrap();
        prop_assert!((v[d2.index()] - (6.0 * a * x0 + 2.0 * b)).abs() < 1e-12);
    }
}

