use super::{sigmoid, NodeId, OpKind, Result, Tape};
use crate::rng::SplitMix64;
use crate::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheckEntry<T> {
    pub input: NodeId,
    pub analytic: T,
    pub numeric: T,
    pub rel_error: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheck<T> {
    pub entries: Vec<GradientCheckEntry<T>>,
    pub max_rel_error: T,
    pub tolerance: T,
}

impl<T: Scalar> GradientCheck<T> {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= self.tolerance
    }
}

/// `|a − n| / max(|a|, |n|, 1)`.
pub fn relative_error<T: Scalar>(a: T, n: T) -> T {
    (a - n).abs() / a.abs().max(n.abs()).max(T::one())
}

fn finish<T: Scalar>(entries: Vec<GradientCheckEntry<T>>, tolerance: T) -> GradientCheck<T> {
    let max_rel_error = entries.iter().map(|e| e.rel_error).fold(T::zero(), T::max);
    GradientCheck { entries, max_rel_error, tolerance }
}

/// Compares reverse-mode adjoints of every input against central differences.
///
/// # Panics
/// If `h` is not positive.
pub fn check_gradients<T: Scalar>(
    tape: &Tape<T>,
    output: NodeId,
    input_values: &[T],
    h: T,
    tolerance: T,
) -> Result<GradientCheck<T>> {
    assert!(h > T::zero(), "finite-difference step must be positive");
    let values = tape.evaluate(input_values)?;
    let record = tape.backward_with(&values, output)?;
    let mut point = input_values.to_vec();
    let mut scratch = Vec::new();
    let two = T::lit(2.0);
    let mut entries = Vec::with_capacity(point.len());
    for (k, &id) in tape.inputs().iter().enumerate() {
        let x0 = point[k];
        point[k] = x0 + h;
        tape.evaluate_into(&point, &mut scratch)?;
        let up = scratch[output.index()];
        point[k] = x0 - h;
        tape.evaluate_into(&point, &mut scratch)?;
        let down = scratch[output.index()];
        point[k] = x0;
        let numeric = (up - down) / (two * h);
        let analytic = record.get(id);
        entries.push(GradientCheckEntry { input: id, analytic, numeric, rel_error: relative_error(analytic, numeric) });
    }
    Ok(finish(entries, tolerance))
}

/// Compares `derive(derive(output, x), x)` against the second difference
/// `D(h) = (f(x+h) − 2f(x) + f(x−h)) / h²` for every input `x`, refined by
/// one Richardson step `(4·D(h/2) − D(h)) / 3`.
///
/// Appends the derivative nodes to `tape`.
pub fn check_second_order<T: Scalar>(
    tape: &mut Tape<T>,
    output: NodeId,
    input_values: &[T],
    h: T,
    tolerance: T,
) -> Result<GradientCheck<T>> {
    assert!(h > T::zero(), "finite-difference step must be positive");
    let inputs = tape.inputs().to_vec();
    let mut second = Vec::with_capacity(inputs.len());
    for &x in &inputs {
        let d = tape.derive(output, x)?;
        second.push(tape.derive(d, x)?);
    }
    let values = tape.evaluate(input_values)?;
    let f0 = values[output.index()];
    let mut point = input_values.to_vec();
    let mut scratch = Vec::new();
    let two = T::lit(2.0);
    let mut second_difference = |k: usize, step: T, point: &mut Vec<T>| -> Result<T> {
        let x0 = point[k];
        point[k] = x0 + step;
        tape.evaluate_into(point, &mut scratch)?;
        let up = scratch[output.index()];
        point[k] = x0 - step;
        tape.evaluate_into(point, &mut scratch)?;
        let down = scratch[output.index()];
        point[k] = x0;
        Ok((up - two * f0 + down) / (step * step))
    };
    let mut entries = Vec::with_capacity(inputs.len());
    for (k, &id) in inputs.iter().enumerate() {
        let coarse = second_difference(k, h, &mut point)?;
        let fine = second_difference(k, h / two, &mut point)?;
        let numeric = (T::lit(4.0) * fine - coarse) / T::lit(3.0);
        let analytic = values[second[k].index()];
        entries.push(GradientCheckEntry { input: id, analytic, numeric, rel_error: relative_error(analytic, numeric) });
    }
    Ok(finish(entries, tolerance))
}

/// Seeded random tape with its input point and output node.
#[derive(Debug, Clone)]
pub struct RandomGraph<T> {
    pub tape: Tape<T>,
    pub output: NodeId,
    pub point: Vec<T>,
}

const KINDS: [OpKind<f64>; 13] = [
    OpKind::Add,
    OpKind::Sub,
    OpKind::Mul,
    OpKind::Div,
    OpKind::Neg,
    OpKind::Exp,
    OpKind::Ln,
    OpKind::PowInt(2),
    OpKind::PowInt(-1),
    OpKind::Sin,
    OpKind::Cos,
    OpKind::Sigmoid,
    OpKind::Tanh,
];

fn apply(kind: OpKind<f64>, a: f64, b: f64) -> Option<f64> {
    let v = match kind {
        OpKind::Add => a + b,
        OpKind::Sub => a - b,
        OpKind::Mul => a * b,
        OpKind::Div if b.abs() > 0.3 => a / b,
        OpKind::Neg => -a,
        OpKind::Exp if a.abs() < 2.0 => a.exp(),
        OpKind::Ln if a > 0.2 => a.ln(),
        OpKind::PowInt(n) if n < 0 && a.abs() > 0.3 => a.powi(n),
        OpKind::PowInt(n) if n >= 0 => a.powi(n),
        OpKind::Sin => a.sin(),
        OpKind::Cos => a.cos(),
        OpKind::Sigmoid => sigmoid(a),
        OpKind::Tanh => a.tanh(),
        _ => return None,
    };
    (v.abs() < 20.0).then_some(v)
}

fn cast<T: Scalar>(kind: OpKind<f64>) -> OpKind<T> {
    match kind {
        OpKind::Input => OpKind::Input,
        OpKind::Constant(c) => OpKind::Constant(T::lit(c)),
        OpKind::Add => OpKind::Add,
        OpKind::Sub => OpKind::Sub,
        OpKind::Mul => OpKind::Mul,
        OpKind::Div => OpKind::Div,
        OpKind::Neg => OpKind::Neg,
        OpKind::Exp => OpKind::Exp,
        OpKind::Ln => OpKind::Ln,
        OpKind::PowInt(n) => OpKind::PowInt(n),
        OpKind::Sin => OpKind::Sin,
        OpKind::Cos => OpKind::Cos,
        OpKind::Sigmoid => OpKind::Sigmoid,
        OpKind::Tanh => OpKind::Tanh,
    }
}

/// Builds a random graph of at most `max_nodes` nodes (minimum 30) that
/// uses every op kind.
///
/// Operands are chosen so every intermediate value stays moderate at the
/// returned point: logs and reciprocals only see arguments bounded away from
/// zero and exponentials only small arguments. Inputs lie in [0.3, 1.5], so
/// every kind always has at least one admissible operand.
pub fn random_graph<T: Scalar>(seed: u64, max_nodes: usize) -> RandomGraph<T> {
    let max_nodes = max_nodes.max(30);
    let mut rng = SplitMix64::new(seed);
    let mut tape = Tape::new();
    let n_inputs = 2 + rng.below(3) as usize;
    let mut vals: Vec<f64> = Vec::new();
    let mut point = Vec::new();
    for k in 0..n_inputs {
        tape.input(format!("x{k}"));
        let v = rng.uniform(0.3, 1.5);
        point.push(T::lit(v));
        vals.push(v);
    }
    let c = rng.uniform(0.5, 2.0);
    tape.constant(T::lit(c));
    vals.push(c);

    let mut schedule = KINDS.to_vec();
    crate::rng::shuffle(&mut rng, &mut schedule);
    // Room for the final sin/add chain over the inputs.
    let body_end = max_nodes - 2 * n_inputs;
    let mut step = 0;
    while tape.len() < body_end {
        let kind = schedule.get(step).copied().unwrap_or_else(|| KINDS[rng.below(13) as usize]);
        step += 1;
        let binary = matches!(kind, OpKind::Add | OpKind::Sub | OpKind::Mul | OpKind::Div);
        let n = vals.len();
        // Recent nodes first, then everything else from a random offset.
        let offset = rng.below(n as u64) as usize;
        let a_order = (0..n.min(6)).map(|i| n - 1 - i).chain((0..n).map(|i| (i + offset) % n));
        let b_start = rng.below(n as u64) as usize;
        let mut chosen = None;
        'search: for a in a_order {
            for j in 0..if binary { n } else { 1 } {
                let b = (b_start + j) % n;
                if let Some(v) = apply(kind, vals[a], vals[b]) {
                    chosen = Some((a, b, v));
                    break 'search;
                }
            }
        }
        let (a, b, v) = chosen.expect("inputs admit every kind");
        let mut ids = vec![tape.node(a).unwrap()];
        if binary {
            ids.push(tape.node(b).unwrap());
        }
        tape.build(cast(kind), &ids).unwrap();
        vals.push(v);
    }
    // Tie every input into the output so no gradient is trivially zero.
    let mut acc = NodeId(tape.len() - 1);
    for k in 0..n_inputs {
        let x = tape.inputs()[k];
        let s = tape.sin(x);
        acc = tape.add(acc, s);
    }
    RandomGraph { tape, output: acc, point }
}
