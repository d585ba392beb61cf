use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use svann_core::raster::{read_mask, write_raster, Band, GeoTransform, Raster, SceneSpec, WETLAND};

fn svann(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_svann")).args(args).output().expect("running svann")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn help_lists_every_flag() {
    let cases: &[(&[&str], &[&str])] = &[
        (&[], &["synth", "preprocess", "index", "rules", "train", "evaluate", "compare", "experiment", "pinn", "ad"]),
        (&["synth"], &["--config", "--seed", "--out"]),
        (&["preprocess"], &["--input", "--mask", "--upsample", "--tile-size", "--keep-partial", "--split", "--seed", "--out"]),
        (&["index"], &["--input", "--index", "--out"]),
        (&["rules"], &["--input", "--index", "--ruleset", "--out"]),
        (&["train"], &["--config", "--seed", "--mode", "--out"]),
        (&["evaluate"], &["--pred", "--truth", "--model", "--zone", "--out"]),
        (&["compare"], &["--config", "--seed", "--mode", "--out"]),
        (&["experiment"], &["upsampling", "svann-vs-osfa"]),
        (&["experiment", "upsampling"], &["--config", "--seed", "--mode", "--out", "--factor"]),
        (&["experiment", "svann-vs-osfa"], &["--config", "--seed", "--mode", "--out"]),
        (&["pinn"], &["demo-transport", "paper-trace", "heterogeneity"]),
        (&["pinn", "demo-transport"], &["--config", "--seed", "--out"]),
        (&["pinn", "paper-trace"], &["--iters", "--lr", "--out"]),
        (&["pinn", "heterogeneity"], &["--config", "--seed", "--out"]),
        (&["ad"], &["trace"]),
        (&["ad", "trace"], &["--config", "--out"]),
    ];
    for (path, flags) in cases {
        let mut args = path.to_vec();
        args.push("--help");
        let out = svann(&args);
        assert_eq!(out.status.code(), Some(0), "{args:?}");
        let text = String::from_utf8_lossy(&out.stdout);
        for f in *flags {
            assert!(text.contains(f), "{args:?} help lacks {f}");
        }
    }
}

#[test]
fn usage_and_data_errors() {
    let out = svann(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(svann(&[]).status.code(), Some(1));
    assert_eq!(svann(&["index", "--input", "x.svr", "--index", "evi"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.svr");
    assert_eq!(svann(&["index", "--input", p(&missing), "--index", "ndvi", "--out", p(dir.path())]).status.code(), Some(2));
    assert_eq!(svann_cli::dispatch(["svann", "--version"]), 0);
    assert_eq!(svann_cli::dispatch(["svann", "pinn", "paper-trace", "--iters", "x"]), 1);
}

#[test]
fn synth_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("two_zone.json");
    fs::write(&cfg, serde_json::to_string(&SceneSpec::two_zone(40, 20, 30.0, 0.05)).unwrap()).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        assert!(svann(&["synth", "--config", p(&cfg), "--seed", "7", "--out", p(out)]).status.success());
    }
    for f in ["scene.svr", "truth.svr", "truth.png", "polygons.geojson", "zones.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let c = dir.path().join("c");
    svann(&["synth", "--config", p(&cfg), "--seed", "8", "--out", p(&c)]);
    assert_ne!(fs::read(a.join("scene.svr")).unwrap(), fs::read(c.join("scene.svr")).unwrap());
}

#[test]
fn rules_on_constant_ndvi_half_is_all_wetland() {
    let dir = tempfile::tempdir().unwrap();
    let n = 6 * 4;
    let bands = vec![
        Band::new("Blue", vec![0.1; n]),
        Band::new("Green", vec![0.2; n]),
        Band::new("Red", vec![0.1; n]),
        Band::new("NIR", vec![0.3; n]),
    ];
    let scene = Raster::new(6, 4, bands, GeoTransform::unit(), None).unwrap();
    let path = dir.path().join("scene.svr");
    write_raster(&scene, &path).unwrap();
    let out = svann(&["rules", "--index", "ndvi", "--input", p(&path), "--out", p(dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (mask, _) = read_mask(&dir.path().join("ndvi_mask.svr")).unwrap();
    assert_eq!(mask.count(WETLAND), n);
    let png = image::open(dir.path().join("ndvi_mask.png")).unwrap().to_luma8();
    assert!(png.pixels().all(|px| px.0[0] == 255));

    // The same through an index raster.
    assert!(svann(&["index", "--input", p(&path), "--index", "ndvi", "--out", p(dir.path())]).status.success());
    let sub = dir.path().join("via_index");
    assert!(svann(&["rules", "--input", p(&dir.path().join("ndvi.svr")), "--out", p(&sub)]).status.success());
    assert_eq!(read_mask(&sub.join("ndvi_mask.svr")).unwrap().0, mask);
    assert_eq!(svann(&["rules", "--input", p(&path), "--out", p(&sub)]).status.code(), Some(1));
}

#[test]
fn evaluate_and_preprocess() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(svann(&["synth", "--out", p(d)]).status.success());
    let truth = d.join("truth.svr");
    let out = svann(&["evaluate", "--pred", p(&truth), "--truth", p(&truth), "--out", p(d)]);
    assert!(out.status.success());
    let csv = fs::read_to_string(d.join("metrics.csv")).unwrap();
    assert!(csv.starts_with("model,zone,tn,fp,fn,tp,precision,recall,f1,accuracy\r\n"));
    assert!(csv.contains(",1.000000,1.000000,1.000000,1.000000\r\n"));

    let pre = d.join("pre");
    let scene = d.join("scene.svr");
    let args = ["preprocess", "--input", p(&scene), "--mask", p(&truth), "--upsample", "2", "--tile-size", "16", "--out", p(&pre)];
    assert!(svann(&args).status.success());
    let manifest = fs::read_to_string(pre.join("tiles.csv")).unwrap();
    // 128×64 after upsampling gives 8×4 tiles.
    assert_eq!(manifest.lines().count(), 1 + 32);
    for split in ["train", "val", "test"] {
        assert!(manifest.contains(&format!(",{split},")));
    }
    assert!(pre.join("tiles/r0003_c0007_mask.svr").exists());
    let bad = svann(&["preprocess", "--input", p(&scene), "--split", "0.5,0.5,0.5", "--out", p(&pre)]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn experiment_outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = svann(&["experiment", "svann-vs-osfa", "--seed", "2", "--out", p(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["metrics.csv", "validation.csv", "selection.csv", "comparison.csv", "summary.txt", "models/OSFA.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let summary = fs::read_to_string(a.join("summary.txt")).unwrap();
    assert!(summary.contains("SVANN in zone A: closest interpretable model is rule:NDVI"));
    assert!(fs::read_dir(a.join("predictions")).unwrap().count() > 0);

    let cfg = dir.path().join("exp.json");
    let doc = svann_cli::ExperimentConfig {
        output_dir: Some(dir.path().join("from_config")),
        ..Default::default()
    };
    fs::write(&cfg, doc.to_json()).unwrap();
    assert!(svann(&["compare", "--config", p(&cfg), "--mode", "svann-e"]).status.success());
    assert!(dir.path().join("from_config/comparison.csv").exists());
    assert!(svann(&["train", "--config", p(&cfg), "--out", p(&dir.path().join("t"))]).status.success());
    assert!(dir.path().join("t/models/SVANN-B-NDWI.json").exists());
}

#[test]
fn paper_trace_and_ad_trace() {
    let out = svann(&["pinn", "paper-trace", "--iters", "5", "--lr", "0.1"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("loop,w1,w2,w3,w4,w5,w6,y_hat,loss\r\n0,0.5000,"));
    assert_eq!(text.lines().count(), 7);
    let out = svann(&["ad", "trace"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("node,op,forward,adjoint\r\n"));
    assert!(text.contains("w5,input,0.500000,0.524979"));
}
