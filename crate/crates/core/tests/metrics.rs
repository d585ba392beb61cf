use proptest::prelude::*;
use svann_core::metrics::{rows_to_csv, summarize, ConfusionMatrix, MetricRow};
use svann_core::Summary64;

const PUBLISHED: &str = include_str!("data/published_confusion.csv");

fn published() -> Vec<(String, ConfusionMatrix, [f64; 3])> {
    PUBLISHED
        .lines()
        .skip(1)
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            let n = |i: usize| f[i].parse::<u64>().unwrap();
            let x = |i: usize| f[i].parse::<f64>().unwrap();
            (f[2].to_string(), ConfusionMatrix::new(n(3), n(4), n(5), n(6)), [x(7), x(8), x(9)])
        })
        .collect()
}

#[test]
fn published_rows_reproduce() {
    let rows = published();
    assert_eq!(rows.len(), 18);
    for (model, cm, [p, r, f1]) in rows {
        let s: Summary64 = summarize(&cm);
        assert!((s.precision - p).abs() <= 1e-3, "{model} precision {}", s.precision);
        assert!((s.recall - r).abs() <= 1e-3, "{model} recall {}", s.recall);
        assert!((s.f1 - f1).abs() <= 1e-3, "{model} f1 {}", s.f1);
        assert!(!s.degenerate.any());
    }
}

#[test]
fn csv_quotes_fields_and_uses_crlf() {
    let csv = rows_to_csv(&[MetricRow::new("a,b", "z\"1", ConfusionMatrix::new(1, 2, 3, 4))]);
    let line = csv.split("\r\n").nth(1).unwrap();
    assert!(line.starts_with("\"a,b\",\"z\"\"1\",1,2,3,4,"));
}

proptest! {
    #[test]
    fn summaries_are_bounded(tn in 0u64..1000, fp in 0u64..1000, fn_ in 0u64..1000, tp in 0u64..1000) {
        let s: Summary64 = summarize(&ConfusionMatrix::new(tn, fp, fn_, tp));
        for v in [s.precision, s.recall, s.f1, s.accuracy] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert!(s.f1 <= s.precision.max(s.recall) + 1e-12);
        prop_assert!(s.f1 >= s.precision.min(s.recall) - 1e-12 || s.degenerate.f1);
    }
}
