//! Acceptance criteria 1–11. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any result differs from the expected state.

use std::collections::BTreeSet;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use svann_core::autodiff::check::relative_error;
use svann_core::autodiff::{check_gradients, check_second_order, random_graph, toy_graph};
use svann_core::indices::IndexId;
use svann_core::metrics::{summarize, ConfusionMatrix};
use svann_core::network::{init_network, loss_and_gradient, Activation, Architecture, Dataset, InitScheme, Loss};
use svann_core::pinn::{exact_transport, heterogeneity_experiment, solve_transport, Convention, HeteroConfig, TransportConfig};
use svann_core::raster::{bilinear_upsample, tile, tile_grid, Band, GeoTransform, Mask, Raster, NON_WETLAND, WETLAND};
use svann_core::rng::SplitMix64;
use svann_core::rules::RuleSet;
use svann_core::svann::{run_svann_experiment, SvannExperimentConfig, SVANN_NAME};
use svann_core::{Network64, Summary64};

struct Outcome {
    pass: bool,
    detail: String,
    /// The recorded result; only criterion 6 is recorded as failing.
    expected: bool,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, expected: pass, detail }
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let took = start.elapsed();
    if let Some(limit) = limit {
        if took >= limit {
            o.pass = false;
        }
    }
    o.detail = format!("{}; {:.2?}", o.detail, took);
    o
}

fn criterion_1() -> Outcome {
    let text = include_str!("../../core/tests/data/published_confusion.csv");
    let mut worst = 0.0f64;
    let mut rows = 0;
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let n = |i: usize| f[i].parse::<u64>().unwrap();
        let x = |i: usize| f[i].parse::<f64>().unwrap();
        let s: Summary64 = summarize(&ConfusionMatrix::new(n(3), n(4), n(5), n(6)));
        for (got, want) in [(s.precision, x(7)), (s.recall, x(8)), (s.f1, x(9))] {
            worst = worst.max((got - want).abs());
        }
        rows += 1;
    }
    outcome(rows == 18 && worst <= 1e-3, format!("{rows} published rows, worst deviation {worst:.5}"))
}

fn criterion_2() -> Outcome {
    let count = |w, h| {
        let (c, r) = tile_grid(w, h, 256, true);
        c * r
    };
    let (a, b) = (count(8306, 5434), count(9046, 5709));
    // The grid count must agree with what tiling actually yields.
    let r = Raster::new(600, 300, vec![Band::new("v", vec![0.0; 180_000])], GeoTransform::unit(), None).unwrap();
    let real = tile(&r, &Mask::filled(600, 300, 0), 256, true).unwrap().len();
    outcome(a == 672 && b == 770 && real == count(600, 300), format!("{a} and {b} tiles"))
}

fn criterion_3() -> Outcome {
    let (w, h) = (37, 23);
    let mut rng = SplitMix64::new(3);
    let bands = vec![
        Band::new("const", vec![0.3172; w * h]),
        Band::new("noise", (0..w * h).map(|_| rng.next_f64() as f32).collect()),
    ];
    let r = Raster::new(w, h, bands, GeoTransform::new(0.0, 0.0, 30.0, 30.0), None).unwrap();
    let up = bilinear_upsample(&r, 4).unwrap();
    let ratio = up.len() as f64 / r.len() as f64;
    let constant = up.band("const").unwrap().data.iter().all(|&v| v == 0.3172);
    outcome(up.len() == 16 * r.len() && constant, format!("pixel ratio {ratio}, constant band exact: {constant}"))
}

fn criterion_4() -> Outcome {
    let mut toy = toy_graph::<f64>();
    let v = toy.named.tape.evaluate(&toy.named.point).unwrap();
    let forward = [v[toy.v[0].index()], v[toy.v[4].index()], v[toy.v[6].index()], v[toy.v[8].index()], v[toy.y_hat.index()]];
    let want = [0.05, 0.1, 0.525, 0.2625, 0.525];
    let fwd_ok = forward.iter().zip(want).all(|(g, w)| (g - w).abs() < 5e-5);
    let assign: Vec<_> = toy.named.tape.inputs().iter().copied().zip(toy.named.point.clone()).collect();
    toy.named.tape.forward(&assign).unwrap();
    let g = toy.named.tape.backward(toy.y_hat).unwrap();
    let back = [g.get(toy.y_hat), g.get(toy.v[6]), g.get(toy.w[4])];
    let back_ok = back.iter().zip([1.0, 0.5, 0.525]).all(|(g, w)| (g - w).abs() < 5e-5);
    let sig = |z: f64| 1.0 / (1.0 + (-z).exp());
    let h = 1e-5;
    // ŷ depends on v5 only through 0.5·σ(v5).
    let fd = (0.5 * sig(0.1 + h) - 0.5 * sig(0.1 - h)) / (2.0 * h);
    let d = g.get(toy.v[4]);
    let sig_ok = (d - fd).abs() < 1e-8 && (d - 0.12469).abs() < 5e-6;
    outcome(
        fwd_ok && back_ok && sig_ok,
        format!(
            "forward {:.4?}, backward {:.4?}, sigmoid-path adjoint {d:.5} vs finite difference {:.5}",
            forward, back, fd
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut worst1 = 0.0f64;
    let mut worst2 = 0.0f64;
    let mut kinds = BTreeSet::new();
    let mut max_nodes = 0;
    let mut ok = true;
    for seed in 0..100u64 {
        let mut g = random_graph::<f64>(seed, 50);
        max_nodes = max_nodes.max(g.tape.len());
        kinds.extend(g.tape.ops().iter().map(|op| op.kind().name()));
        let first = check_gradients(&g.tape, g.output, &g.point, 1e-5, 1e-6).unwrap();
        let second = check_second_order(&mut g.tape, g.output, &g.point, 1e-4, 1e-4).unwrap();
        ok &= first.passed() && second.passed();
        worst1 = worst1.max(first.max_rel_error);
        worst2 = worst2.max(second.max_rel_error);
    }
    // Full training losses of small networks against parameter finite differences.
    let mut worst_net = 0.0f64;
    for seed in 0..8u64 {
        let mut rng = SplitMix64::new(seed);
        let x: Vec<Vec<f64>> = (0..24).map(|_| vec![rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)]).collect();
        let y: Vec<Vec<f64>> = x.iter().map(|p| vec![if p[0] + 0.5 * p[1] > 0.0 { 1.0 } else { 0.0 }]).collect();
        let data = Dataset::new(x, y);
        let arch = Architecture::uniform(vec![2, 5, 3, 1], Activation::Tanh, Activation::Sigmoid).unwrap();
        let net: Network64 = init_network(&arch, InitScheme::Uniform { lo: -1.0, hi: 1.0 }, seed).unwrap().with_biases(true);
        let rows: Vec<usize> = (0..data.len()).collect();
        let loss = if seed % 2 == 0 { Loss::BinaryCrossEntropy } else { Loss::Mse };
        let (_, grad) = loss_and_gradient(&net, &data, &rows, &loss).unwrap();
        let base = net.params();
        for k in 0..base.len() {
            let at = |delta: f64| {
                let mut p = base.clone();
                p[k] += delta;
                let mut n = net.clone();
                n.set_params(&p).unwrap();
                loss_and_gradient(&n, &data, &rows, &loss).unwrap().0
            };
            let h = 1e-5;
            worst_net = worst_net.max(relative_error(grad[k], (at(h) - at(-h)) / (2.0 * h)));
        }
    }
    // Input, Constant and the twelve operations.
    ok &= worst_net < 1e-6 && kinds.len() == 14 && max_nodes <= 50;
    outcome(
        ok,
        format!(
            "100 graphs, {} op kinds, at most {max_nodes} nodes; worst relative error {worst1:.1e} first order, {worst2:.1e} second order, {worst_net:.1e} on network losses",
            kinds.len()
        ),
    )
}

/// Loop, w1..w6, ŷ, loss as printed.
const TABLE_4: [[f64; 9]; 6] = [
    [0.0, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.525, 2.01],
    [1.0, 0.487, 0.487, 0.495, 0.495, 0.389, 0.389, 0.408, 1.52],
    [2.0, 0.476, 0.476, 0.491, 0.491, 0.28, 0.28, 0.294, 1.05],
    [3.0, 0.469, 0.469, 0.488, 0.488, 0.173, 0.173, 0.182, 0.6],
    [4.0, 0.464, 0.464, 0.486, 0.487, 0.067, 0.067, 0.07, 0.17],
    [5.0, 0.462, 0.462, 0.486, 0.486, -0.038, -0.038, -0.04, -0.25],
];

const COLUMNS: [&str; 8] = ["w1", "w2", "w3", "w4", "w5", "w6", "y_hat", "loss"];

fn criterion_6() -> Outcome {
    let out = Command::new(env!("CARGO_BIN_EXE_svann"))
        .args(["pinn", "paper-trace", "--iters", "5", "--lr", "0.1"])
        .output()
        .expect("running svann");
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<Vec<f64>> =
        text.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    let mut outside = Vec::new();
    let mut ends_ok = rows.len() == 6 && out.status.success();
    for (row, want) in rows.iter().zip(TABLE_4) {
        for c in 1..9 {
            if (row[c] - want[c]).abs() > 0.005 {
                outside.push(format!("loop {} {} {:.4} vs {}", row[0], COLUMNS[c - 1], row[c], want[c]));
            }
        }
    }
    if ends_ok {
        ends_ok = (rows[0][7] - 0.525).abs() <= 0.005
            && (rows[0][8] - 2.01).abs() <= 0.005
            && (rows[5][7] + 0.04).abs() <= 0.005
            && (rows[5][8] + 0.25).abs() <= 0.005;
    }
    let within = 48 - outside.len();
    // Recorded state: the printed loop-1 loss is inconsistent with the
    // update rule applied to the printed loop-0 weights.
    let documented = ends_ok && outside.len() == 1 && outside[0].starts_with("loop 1 loss");
    Outcome {
        pass: ends_ok && outside.is_empty(),
        expected: !documented,
        detail: format!(
            "{within}/48 cells within ±0.005, loop-0 and loop-5 match: {ends_ok}; outside: {}",
            if outside.is_empty() { "none".to_string() } else { outside.join(", ") }
        ),
    }
}

fn criterion_7() -> Outcome {
    let p: f64 = exact_transport(0.1, 0.1, 3.0, Convention::Paper);
    let d: f64 = exact_transport(0.1, 0.1, 3.0, Convention::Decaying);
    outcome((p + 0.208).abs() <= 1e-3 && (d + 0.1922).abs() <= 1e-4, format!("paper {p:.4}, decaying {d:.4}"))
}

fn criterion_8() -> Outcome {
    let (_, report) = solve_transport::<f64>(&TransportConfig::default()).unwrap();
    outcome(report.rmse <= 0.05, format!("RMSE {:.4} on a 50×25 grid", report.rmse))
}

fn criterion_9() -> Outcome {
    let cfg = HeteroConfig::default();
    let report = heterogeneity_experiment::<f64>(&cfg).unwrap();
    let holds = |k| report.seeds().iter().filter(|&&s| report.postulate_holds(s, k)).count();
    let n = report.seeds().len();
    let (a, b) = (holds(0), holds(1));
    outcome(n == 10 && a >= 9 && b >= 9, format!("postulate holds in {a}/{n} runs for {} and {b}/{n} for {}", report.zones[0], report.zones[1]))
}

fn criterion_10() -> Outcome {
    let ndvi = RuleSet::default_for(&IndexId::Ndvi).unwrap();
    let ndwi = RuleSet::default_for(&IndexId::Ndwi).unwrap();
    let (w, n) = (WETLAND, NON_WETLAND);
    let got_v: Vec<u8> = [-0.5, 0.0, 0.1, 0.5, 0.73, 0.9].iter().map(|&v| ndvi.classify_value(v).unwrap()).collect();
    let got_w: Vec<u8> = [-0.7, -0.6, 0.0].iter().map(|&v| ndwi.classify_value(v).unwrap()).collect();
    outcome(got_v == [n, n, w, w, n, n] && got_w == [n, w, w], format!("NDVI {got_v:?}, NDWI {got_w:?}"))
}

fn criterion_11() -> Outcome {
    let mut interpreted = 0;
    let mut split_selection = 0;
    for seed in 0..10 {
        let out = run_svann_experiment(&SvannExperimentConfig { seed, ..Default::default() }).unwrap();
        let c = &out.comparison;
        if c.rank1(SVANN_NAME, "A") == Some("rule:NDVI") && c.rank1(SVANN_NAME, "B") == Some("rule:NDWI") {
            interpreted += 1;
        }
        if out.selection.model_for("A") == Some("SVANN-A-NDVI") && out.selection.model_for("B") == Some("SVANN-B-NDWI") {
            split_selection += 1;
        }
    }
    outcome(
        interpreted >= 9 && split_selection >= 9,
        format!("rank-1 rules match the generating rules in {interpreted}/10 runs; selection picks NDVI in A and NDWI in B in {split_selection}/10"),
    )
}

fn main() -> ExitCode {
    type Check = fn() -> Outcome;
    let criteria: [(Check, Option<Duration>); 11] = [
        (criterion_1, Some(Duration::from_secs(1))),
        (criterion_2, None),
        (criterion_3, None),
        (criterion_4, None),
        (criterion_5, Some(Duration::from_secs(30))),
        (criterion_6, None),
        (criterion_7, None),
        (criterion_8, Some(Duration::from_secs(60))),
        (criterion_9, Some(Duration::from_secs(300))),
        (criterion_10, None),
        (criterion_11, Some(Duration::from_secs(300))),
    ];
    let mut unexpected = 0;
    for (i, (check, limit)) in criteria.into_iter().enumerate() {
        let o = timed(limit, check);
        println!("criterion {}: {} ({})", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if o.pass != o.expected {
            unexpected += 1;
        }
    }
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{unexpected} criteria differ from their recorded state");
        ExitCode::FAILURE
    }
}
