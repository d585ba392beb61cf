use std::time::Instant;

use svann_core::network::{init_network, Architecture, InitScheme};
use svann_core::pinn::{
    build_pinn_loss, heterogeneity_experiment, run_paper_trace, solve_transport, transport_problem, HeteroConfig,
    LossMode, TransportConfig, ZoneBvp,
};

/// Loop, w1..w6, ŷ, loss.
const TABLE: [[f64; 9]; 6] = [
    [0.0, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.525, 2.01],
    [1.0, 0.487, 0.487, 0.495, 0.495, 0.389, 0.389, 0.408, 1.52],
    [2.0, 0.476, 0.476, 0.491, 0.491, 0.28, 0.28, 0.294, 1.05],
    [3.0, 0.469, 0.469, 0.488, 0.488, 0.173, 0.173, 0.182, 0.6],
    [4.0, 0.464, 0.464, 0.486, 0.487, 0.067, 0.067, 0.07, 0.17],
    [5.0, 0.462, 0.462, 0.486, 0.486, -0.038, -0.038, -0.04, -0.25],
];

#[test]
fn paper_trace_closed_forms() {
    let rows = run_paper_trace(5, 0.1f64);
    assert_eq!(rows.len(), 6);
    assert!((rows[0].y_hat - 0.52498).abs() < 1e-5);
    assert!((rows[0].loss - 2.01466).abs() < 1e-5);
    assert!((rows[1].w[4] - 0.38904).abs() < 1e-5);
    assert!((rows[1].y_hat - 0.40809).abs() < 1e-5);
    assert!((rows[1].loss - 1.51403).abs() < 1e-5);
    assert!((rows[5].y_hat + 0.03928).abs() < 1e-5);
    assert!((rows[5].loss + 0.24904).abs() < 1e-5);
    assert_eq!(run_paper_trace(5, 0.1f64), rows);
}

/// Every printed cell but the loop-1 loss lies within ±0.005; that one sits
/// 0.006 away because the printed weights are rounded.
#[test]
fn paper_trace_against_table() {
    let rows = run_paper_trace(5, 0.1f64);
    let mut outside = Vec::new();
    for (row, expected) in rows.iter().zip(TABLE) {
        let got = [row.w[0], row.w[1], row.w[2], row.w[3], row.w[4], row.w[5], row.y_hat, row.loss];
        for (col, (g, e)) in got.iter().zip(&expected[1..]).enumerate() {
            if (g - e).abs() > 0.005 {
                outside.push((row.loop_index, col, *g));
            }
        }
    }
    assert_eq!(outside.len(), 1, "{outside:?}");
    assert_eq!((outside[0].0, outside[0].1), (1, 7));
}

#[test]
fn squared_loss_is_non_negative() {
    let cfg = TransportConfig { collocation: (5, 4), initial_points: 5, boundary_points: 3, ..Default::default() };
    let problem = transport_problem::<f64>(&cfg);
    let arch = Architecture::uniform(vec![2, 4, 1], svann_core::network::Activation::Tanh, svann_core::network::Activation::Linear).unwrap();
    for seed in 0..10 {
        let net = init_network::<f64>(&arch, InitScheme::Uniform { lo: -2.0, hi: 2.0 }, seed).unwrap().with_biases(true);
        let mut loss = build_pinn_loss(&problem, &net, LossMode::Squared).unwrap();
        let e = loss.evaluate(&net.params()).unwrap();
        assert!(e.loss >= 0.0 && e.residual_term >= 0.0 && e.condition_term >= 0.0);
    }
}

#[test]
fn zero_epochs_reports_untrained_error() {
    let cfg = TransportConfig { epochs: 0, ..Default::default() };
    let (net, report) = solve_transport::<f64>(&cfg).unwrap();
    let (again, _) = solve_transport::<f64>(&TransportConfig { epochs: 0, ..Default::default() }).unwrap();
    assert_eq!(net, again);
    assert!(report.loss_history.is_empty());
    assert!(report.rmse > 0.05);
}

#[test]
fn transport_default_config() {
    let start = Instant::now();
    let (_, report) = solve_transport::<f64>(&TransportConfig::default()).unwrap();
    eprintln!("transport: rmse {:.4} residual {:.3e} in {:?}", report.rmse, report.residual_term, start.elapsed());
    assert!(report.rmse <= 0.05, "rmse {}", report.rmse);
    assert!(report.mean_abs_residual <= report.residual_term.sqrt() + 1e-6);
}

#[test]
fn hetero_report_shape_and_degenerate_zones() {
    let cfg = HeteroConfig {
        zones: [ZoneBvp::flat(), ZoneBvp { name: "flat-copy".into(), ..ZoneBvp::flat() }],
        seeds: vec![0, 1],
        epochs: 300,
        ..Default::default()
    };
    let report = heterogeneity_experiment::<f64>(&cfg).unwrap();
    assert_eq!(report.cells.len(), 12);
    for seed in [0, 1] {
        let m1 = report.error(seed, "M1", "flat").unwrap();
        let m2 = report.error(seed, "M2", "flat-copy").unwrap();
        let m3 = report.error(seed, "M3", "flat").unwrap();
        assert!((m1 - m2).abs() < 1e-9);
        assert!((m3 - m1).abs() <= 1e-3 + 0.1 * m1, "{m1} {m3}");
    }
}

#[test]
fn hetero_default_postulate() {
    let start = Instant::now();
    let cfg = HeteroConfig::default();
    let report = heterogeneity_experiment::<f64>(&cfg).unwrap();
    assert_eq!(report.cells.len(), 6 * cfg.seeds.len());
    let holds = |k| report.seeds().iter().filter(|&&s| report.postulate_holds(s, k)).count();
    eprintln!("{}", report.to_csv());
    eprintln!("hetero: {} / {} in {:?}", holds(0), holds(1), start.elapsed());
    assert!(holds(0) >= 9 && holds(1) >= 9);
}
