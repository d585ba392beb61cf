use std::fmt::Write as _;

use crate::autodiff::sigmoid;
use crate::Scalar;

/// Toy network state after `loop_index` updates.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow<T> {
    pub loop_index: usize,
    pub w: [T; 6],
    pub y_hat: T,
    pub loss: T,
}

pub const TRACE_CSV_HEADER: &str = "loop,w1,w2,w3,w4,w5,w6,y_hat,loss";

impl<T: Scalar> TraceRow<T> {
    pub fn csv_line(&self) -> String {
        let mut s = self.loop_index.to_string();
        for v in self.w.iter().chain([&self.y_hat, &self.loss]) {
            let _ = write!(s, ",{:.4}", v.to_f64_lossy());
        }
        s
    }
}

impl<T: Scalar> TraceRow<T> {
    /// CSV with header, one line per row.
    pub fn to_csv(rows: &[Self]) -> String {
        let mut out = format!("{TRACE_CSV_HEADER}\r\n");
        for r in rows {
            out.push_str(&r.csv_line());
            out.push_str("\r\n");
        }
        out
    }
}

/// Hand-derived gradient trace of the toy network on the linear transport
/// loss at the single sample `x = t = 0.1`, starting from all weights 0.5.
///
/// The sigmoid slope is taken as `f(1 + f)` throughout, gradients are
/// evaluated at the old weights, and each update is
/// `wᵢ ← wᵢ − η·(∂L/∂wᵢ)·aᵢ` where `aᵢ` is `x` for the hidden weights and the
/// hidden unit's activation for the output weights.
pub fn run_paper_trace<T: Scalar>(iterations: usize, learning_rate: T) -> Vec<TraceRow<T>> {
    let x = T::lit(0.1);
    let t = T::lit(0.1);
    let one = T::one();
    let three = T::lit(3.0);
    let mut w = [T::lit(0.5); 6];
    let mut rows = Vec::with_capacity(iterations + 1);
    for k in 0..=iterations {
        let [w1, w2, w3, w4, w5, w6] = w;
        let f13 = sigmoid(w1 * x + w3 * t);
        let f24 = sigmoid(w2 * x + w4 * t);
        let f1 = sigmoid(w1 * x);
        let f2 = sigmoid(w2 * x);
        let a = three * w1 + w3;
        let b = three * w2 + w4;
        let y_hat = w5 * f13 + w6 * f24;
        let loss = w5 * f13 * (one + f13) * a + w6 * f24 * (one + f24) * b + f1 * w5 + f2 * w6 - x * (-x * x).exp();
        rows.push(TraceRow { loop_index: k, w, y_hat, loss });
        if k == iterations {
            break;
        }
        let g13 = f13 * (one + f13);
        let g24 = f24 * (one + f24);
        let d1 = x * w5 * a * f13 * (one + f13).powi(2) + w5 * g13 * (x * a * f13 + three) + x * w5 * f1 * (one + f1);
        let d2 = x * w6 * b * f24 * (one + f24).powi(2) + w6 * g24 * (x * b * f24 + three) + x * w6 * f2 * (one + f2);
        let d3 = t * w5 * a * f13 * (one + f13).powi(2) + w5 * g13 * (t * a * f13 + one);
        let d4 = t * w6 * b * f24 * (one + f24).powi(2) + w6 * g24 * (t * b * f24 + one);
        let d5 = g13 * a + f1;
        let d6 = g24 * b + f2;
        let eta = learning_rate;
        w = [
            w1 - eta * d1 * x,
            w2 - eta * d2 * x,
            w3 - eta * d3 * x,
            w4 - eta * d4 * x,
            w5 - eta * d5 * f13,
            w6 - eta * d6 * f24,
        ];
    }
    rows
}

/// Sign convention of the exponent in the closed-form transport solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Convention {
    /// `ξ·e^{−ξ²}`, consistent with the initial condition `x·e^{−x²}`.
    #[default]
    Decaying,
    /// `ξ·e^{+ξ²}`.
    Paper,
}

/// Closed-form solution of `u_t + v·u_x = 0` with `ξ = x − v·t`.
pub fn exact_transport<T: Scalar>(x: T, t: T, velocity: T, convention: Convention) -> T {
    let xi = x - velocity * t;
    match convention {
        Convention::Decaying => xi * (-(xi * xi)).exp(),
        Convention::Paper => xi * (xi * xi).exp(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_values() {
        let p: f64 = exact_transport(0.1, 0.1, 3.0, Convention::Paper);
        assert!((p + 0.2082).abs() < 5e-5, "{p}");
        let d: f64 = exact_transport(0.1, 0.1, 3.0, Convention::Decaying);
        assert!((d + 0.1922).abs() < 5e-5, "{d}");
        for x in [0.0f64, 0.3, 0.8] {
            assert_eq!(exact_transport(x, 0.0, 3.0, Convention::Decaying), x * (-(x * x)).exp());
            assert_eq!(exact_transport(x, 0.0, 3.0, Convention::Paper), x * (x * x).exp());
        }
    }

    #[test]
    fn zero_iterations_is_initial_state() {
        let rows = run_paper_trace(0, 0.1f64);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].w, [0.5; 6]);
    }

    #[test]
    fn csv_shape() {
        let csv = TraceRow::to_csv(&run_paper_trace(2, 0.1f64));
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], TRACE_CSV_HEADER);
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0,0.5000,0.5000,"));
    }
}
