//! Scalar reverse-mode automatic differentiation.
//!
//! A [`Tape`] is an append-only list of elementary operations whose operands
//! always precede them, so node order is a topological order. Values are
//! computed by a forward sweep and adjoints by one reverse sweep.
//! [`Tape::derive`] instead appends the derivative as new nodes, which can
//! be differentiated again for second-order terms.

pub mod check;
mod derive;
mod spec;

use thiserror::Error;

use crate::Scalar;

pub use check::{check_gradients, check_second_order, random_graph, GradientCheck, GradientCheckEntry, RandomGraph};
pub use spec::{toy_graph, trace_csv, InputSpec, NamedTape, NodeSpec, TapeSpec, ToyGraph};

#[derive(Debug, Error, PartialEq)]
pub enum AdError {
    #[error("unknown node id {0}")]
    UnknownNode(usize),
    #[error("{kind} takes {expected} operand(s), got {got}")]
    Arity { kind: &'static str, expected: usize, got: usize },
    #[error("input `{0}` has no assigned value")]
    UnassignedInput(String),
    #[error("expected {expected} input values, got {got}")]
    InputCount { expected: usize, got: usize },
    #[error("node {0} is not an input")]
    NotAnInput(usize),
    #[error("backward requires a forward pass over the current tape")]
    NotEvaluated,
    #[error("tape spec: {0}")]
    Spec(String),
}

pub type Result<T> = std::result::Result<T, AdError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Operation recorded at a node, with operand ids.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Op<T> {
    /// Input with its ordinal among the tape's inputs.
    Input(usize),
    Constant(T),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Div(NodeId, NodeId),
    Neg(NodeId),
    Exp(NodeId),
    Ln(NodeId),
    PowInt(NodeId, i32),
    Sin(NodeId),
    Cos(NodeId),
    Sigmoid(NodeId),
    Tanh(NodeId),
}

/// Operation kind without operands, for [`Tape::build`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OpKind<T> {
    Input,
    Constant(T),
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Exp,
    Ln,
    PowInt(i32),
    Sin,
    Cos,
    Sigmoid,
    Tanh,
}

impl<T> OpKind<T> {
    pub fn name(&self) -> &'static str {
        match self {
            OpKind::Input => "input",
            OpKind::Constant(_) => "const",
            OpKind::Add => "add",
            OpKind::Sub => "sub",
            OpKind::Mul => "mul",
            OpKind::Div => "div",
            OpKind::Neg => "neg",
            OpKind::Exp => "exp",
            OpKind::Ln => "ln",
            OpKind::PowInt(_) => "pow_int",
            OpKind::Sin => "sin",
            OpKind::Cos => "cos",
            OpKind::Sigmoid => "sigmoid",
            OpKind::Tanh => "tanh",
        }
    }

    fn arity(&self) -> usize {
        match self {
            OpKind::Input | OpKind::Constant(_) => 0,
            OpKind::Add | OpKind::Sub | OpKind::Mul | OpKind::Div => 2,
            _ => 1,
        }
    }
}

impl<T: Copy> Op<T> {
    pub fn kind(&self) -> OpKind<T> {
        match *self {
            Op::Input(_) => OpKind::Input,
            Op::Constant(c) => OpKind::Constant(c),
            Op::Add(..) => OpKind::Add,
            Op::Sub(..) => OpKind::Sub,
            Op::Mul(..) => OpKind::Mul,
            Op::Div(..) => OpKind::Div,
            Op::Neg(_) => OpKind::Neg,
            Op::Exp(_) => OpKind::Exp,
            Op::Ln(_) => OpKind::Ln,
            Op::PowInt(_, n) => OpKind::PowInt(n),
            Op::Sin(_) => OpKind::Sin,
            Op::Cos(_) => OpKind::Cos,
            Op::Sigmoid(_) => OpKind::Sigmoid,
            Op::Tanh(_) => OpKind::Tanh,
        }
    }

    pub fn operands(&self) -> impl Iterator<Item = NodeId> {
        let (a, b) = match *self {
            Op::Input(_) | Op::Constant(_) => (None, None),
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::Div(a, b) => (Some(a), Some(b)),
            Op::Neg(a) | Op::Exp(a) | Op::Ln(a) | Op::PowInt(a, _) | Op::Sin(a) | Op::Cos(a) | Op::Sigmoid(a) | Op::Tanh(a) => {
                (Some(a), None)
            }
        };
        a.into_iter().chain(b)
    }
}

#[inline]
pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Tape<T> {
    nodes: Vec<Op<T>>,
    inputs: Vec<NodeId>,
    input_names: Vec<String>,
    values: Vec<T>,
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new(), inputs: Vec::new(), input_names: Vec::new(), values: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn op(&self, id: NodeId) -> &Op<T> {
        &self.nodes[id.0]
    }

    pub fn ops(&self) -> &[Op<T>] {
        &self.nodes
    }

    /// Input nodes in creation order; dense input vectors follow this order.
    pub fn inputs(&self) -> &[NodeId] {
        &self.inputs
    }

    pub fn input_count(&self) -> usize {
        self.inputs.len()
    }

    /// Ordinal of an input node, or `None` for any other node.
    pub fn input_ordinal(&self, id: NodeId) -> Option<usize> {
        match self.nodes.get(id.0) {
            Some(Op::Input(k)) => Some(*k),
            _ => None,
        }
    }

    pub fn input_name(&self, id: NodeId) -> Option<&str> {
        self.input_ordinal(id).map(|k| self.input_names[k].as_str())
    }

    pub fn node(&self, index: usize) -> Result<NodeId> {
        if index < self.nodes.len() {
            Ok(NodeId(index))
        } else {
            Err(AdError::UnknownNode(index))
        }
    }

    #[inline]
    fn push(&mut self, op: Op<T>) -> NodeId {
        let id = NodeId(self.nodes.len());
        for o in op.operands() {
            assert!(o.0 < id.0, "operand {} does not precede node {}", o.0, id.0);
        }
        self.nodes.push(op);
        id
    }

    /// Checked construction from a kind and operand list.
    pub fn build(&mut self, kind: OpKind<T>, operands: &[NodeId]) -> Result<NodeId> {
        if operands.len() != kind.arity() {
            return Err(AdError::Arity { kind: kind.name(), expected: kind.arity(), got: operands.len() });
        }
        if let Some(bad) = operands.iter().find(|o| o.0 >= self.nodes.len()) {
            return Err(AdError::UnknownNode(bad.0));
        }
        let a = operands.first().copied();
        let b = operands.get(1).copied();
        Ok(match kind {
            OpKind::Input => self.input(format!("in{}", self.inputs.len())),
            OpKind::Constant(c) => self.constant(c),
            OpKind::Add => self.add(a.unwrap(), b.unwrap()),
            OpKind::Sub => self.sub(a.unwrap(), b.unwrap()),
            OpKind::Mul => self.mul(a.unwrap(), b.unwrap()),
            OpKind::Div => self.div(a.unwrap(), b.unwrap()),
            OpKind::Neg => self.neg(a.unwrap()),
            OpKind::Exp => self.exp(a.unwrap()),
            OpKind::Ln => self.ln(a.unwrap()),
            OpKind::PowInt(n) => self.powi(a.unwrap(), n),
            OpKind::Sin => self.sin(a.unwrap()),
            OpKind::Cos => self.cos(a.unwrap()),
            OpKind::Sigmoid => self.sigmoid(a.unwrap()),
            OpKind::Tanh => self.tanh(a.unwrap()),
        })
    }

    pub fn input(&mut self, name: impl Into<String>) -> NodeId {
        let k = self.inputs.len();
        let id = self.push(Op::Input(k));
        self.inputs.push(id);
        self.input_names.push(name.into());
        id
    }

    pub fn constant(&mut self, value: T) -> NodeId {
        self.push(Op::Constant(value))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::Mul(a, b))
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::Div(a, b))
    }

    pub fn neg(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Neg(a))
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Exp(a))
    }

    pub fn ln(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Ln(a))
    }

    pub fn powi(&mut self, a: NodeId, n: i32) -> NodeId {
        self.push(Op::PowInt(a, n))
    }

    pub fn sin(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Sin(a))
    }

    pub fn cos(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Cos(a))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Tanh(a))
    }

    /// Left fold of additions; a single term is returned as is.
    pub fn sum(&mut self, terms: &[NodeId]) -> NodeId {
        match terms.split_first() {
            None => self.constant(T::zero()),
            Some((&first, rest)) => rest.iter().fold(first, |acc, &t| self.add(acc, t)),
        }
    }

    /// Forward sweep with input values given densely in input order.
    pub fn evaluate(&self, input_values: &[T]) -> Result<Vec<T>> {
        let mut out = Vec::with_capacity(self.nodes.len());
        self.evaluate_into(input_values, &mut out)?;
        Ok(out)
    }

    /// Like [`Tape::evaluate`] but reuses `out`'s allocation.
    pub fn evaluate_into(&self, input_values: &[T], out: &mut Vec<T>) -> Result<()> {
        if input_values.len() != self.inputs.len() {
            return Err(AdError::InputCount { expected: self.inputs.len(), got: input_values.len() });
        }
        out.clear();
        out.reserve(self.nodes.len());
        for op in &self.nodes {
            let v = match *op {
                Op::Input(k) => input_values[k],
                Op::Constant(c) => c,
                Op::Add(a, b) => out[a.0] + out[b.0],
                Op::Sub(a, b) => out[a.0] - out[b.0],
                Op::Mul(a, b) => out[a.0] * out[b.0],
                Op::Div(a, b) => out[a.0] / out[b.0],
                Op::Neg(a) => -out[a.0],
                Op::Exp(a) => out[a.0].exp(),
                Op::Ln(a) => out[a.0].ln(),
                Op::PowInt(a, n) => out[a.0].powi(n),
                Op::Sin(a) => out[a.0].sin(),
                Op::Cos(a) => out[a.0].cos(),
                Op::Sigmoid(a) => sigmoid(out[a.0]),
                Op::Tanh(a) => out[a.0].tanh(),
            };
            out.push(v);
        }
        Ok(())
    }

    /// Dense input vector from `(input, value)` pairs; every input must appear.
    pub fn assignment(&self, assignments: &[(NodeId, T)]) -> Result<Vec<T>> {
        let mut dense: Vec<Option<T>> = vec![None; self.inputs.len()];
        for &(id, v) in assignments {
            let k = self.input_ordinal(id).ok_or(AdError::NotAnInput(id.0))?;
            dense[k] = Some(v);
        }
        dense
            .into_iter()
            .enumerate()
            .map(|(k, v)| v.ok_or_else(|| AdError::UnassignedInput(self.input_names[k].clone())))
            .collect()
    }

    /// Forward sweep that caches primal values on the tape.
    pub fn forward(&mut self, assignments: &[(NodeId, T)]) -> Result<&[T]> {
        let dense = self.assignment(assignments)?;
        let mut values = std::mem::take(&mut self.values);
        self.evaluate_into(&dense, &mut values)?;
        self.values = values;
        Ok(&self.values)
    }

    /// Cached value of a node from the last [`Tape::forward`].
    pub fn value(&self, id: NodeId) -> Option<T> {
        if self.values.len() == self.nodes.len() {
            self.values.get(id.0).copied()
        } else {
            None
        }
    }

    /// Reverse sweep over the cached forward values.
    pub fn backward(&self, output: NodeId) -> Result<GradientRecord<T>> {
        if self.values.len() != self.nodes.len() || self.nodes.is_empty() {
            return Err(AdError::NotEvaluated);
        }
        self.backward_with(&self.values, output)
    }

    /// Reverse sweep over caller-supplied forward values.
    pub fn backward_with(&self, values: &[T], output: NodeId) -> Result<GradientRecord<T>> {
        if output.0 >= self.nodes.len() {
            return Err(AdError::UnknownNode(output.0));
        }
        if values.len() != self.nodes.len() {
            return Err(AdError::NotEvaluated);
        }
        let mut adjoints = Vec::new();
        self.adjoints_into(values, output, &mut adjoints);
        Ok(GradientRecord { output, adjoints })
    }

    /// Fills `adj` with `∂output/∂node` for nodes `0..=output`.
    ///
    /// `values` must come from a forward sweep of this tape.
    pub fn adjoints_into(&self, values: &[T], output: NodeId, adj: &mut Vec<T>) {
        adj.clear();
        adj.resize(output.0 + 1, T::zero());
        adj[output.0] = T::one();
        for i in (0..=output.0).rev() {
            let g = adj[i];
            if g == T::zero() {
                continue;
            }
            match self.nodes[i] {
                Op::Input(_) | Op::Constant(_) => {}
                Op::Add(a, b) => {
                    adj[a.0] = adj[a.0] + g;
                    adj[b.0] = adj[b.0] + g;
                }
                Op::Sub(a, b) => {
                    adj[a.0] = adj[a.0] + g;
                    adj[b.0] = adj[b.0] - g;
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (values[a.0], values[b.0]);
                    adj[a.0] = adj[a.0] + g * vb;
                    adj[b.0] = adj[b.0] + g * va;
                }
                Op::Div(a, b) => {
                    let vb = values[b.0];
                    adj[a.0] = adj[a.0] + g / vb;
                    adj[b.0] = adj[b.0] - g * values[i] / vb;
                }
                Op::Neg(a) => adj[a.0] = adj[a.0] - g,
                Op::Exp(a) => adj[a.0] = adj[a.0] + g * values[i],
                Op::Ln(a) => adj[a.0] = adj[a.0] + g / values[a.0],
                Op::PowInt(a, n) => {
                    if n != 0 {
                        let d = T::from_i32(n).unwrap() * values[a.0].powi(n - 1);
                        adj[a.0] = adj[a.0] + g * d;
                    }
                }
                Op::Sin(a) => adj[a.0] = adj[a.0] + g * values[a.0].cos(),
                Op::Cos(a) => adj[a.0] = adj[a.0] - g * values[a.0].sin(),
                Op::Sigmoid(a) => {
                    let s = values[i];
                    adj[a.0] = adj[a.0] + g * s * (T::one() - s);
                }
                Op::Tanh(a) => {
                    let t = values[i];
                    adj[a.0] = adj[a.0] + g * (T::one() - t * t);
                }
            }
        }
    }
}

/// Adjoints `∂output/∂node` for every node up to the output.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientRecord<T> {
    output: NodeId,
    adjoints: Vec<T>,
}

impl<T: Scalar> GradientRecord<T> {
    pub fn output(&self) -> NodeId {
        self.output
    }

    /// Adjoint of `id`; nodes after the output have zero adjoint.
    pub fn get(&self, id: NodeId) -> T {
        self.adjoints.get(id.0).copied().unwrap_or_else(T::zero)
    }

    pub fn adjoints(&self) -> &[T] {
        &self.adjoints
    }

    /// Adjoints of the tape's inputs in input order.
    pub fn wrt_inputs(&self, tape: &Tape<T>) -> Vec<T> {
        tape.inputs().iter().map(|&id| self.get(id)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_forward() {
        let mut t = Tape::<f64>::new();
        let a = t.input("a");
        let b = t.input("b");
        let s = t.build(OpKind::Add, &[a, b]).unwrap();
        let v = t.forward(&[(a, 2.0), (b, 3.0)]).unwrap();
        assert_eq!(v[s.index()], 5.0);
    }

    #[test]
    fn sigmoid_values() {
        let mut t = Tape::<f64>::new();
        let x = t.input("x");
        let s = t.build(OpKind::Sigmoid, &[x]).unwrap();
        t.forward(&[(x, 0.0)]).unwrap();
        assert_eq!(t.value(s), Some(0.5));
        t.forward(&[(x, 0.1)]).unwrap();
        let expected = 1.0 / (1.0 + (-0.1f64).exp());
        assert!((t.value(s).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.52498).abs() < 1e-5);
    }

    #[test]
    fn build_checks_arity_and_ids() {
        let mut t = Tape::<f64>::new();
        let x = t.input("x");
        assert_eq!(
            t.build(OpKind::Add, &[x]),
            Err(AdError::Arity { kind: "add", expected: 2, got: 1 })
        );
        let foreign = NodeId(5);
        assert_eq!(t.build(OpKind::Neg, &[foreign]), Err(AdError::UnknownNode(5)));
    }

    #[test]
    fn unassigned_input_is_named() {
        let mut t = Tape::<f64>::new();
        let x = t.input("x");
        let _y = t.input("y");
        assert_eq!(t.forward(&[(x, 1.0)]).unwrap_err(), AdError::UnassignedInput("y".into()));
    }

    #[test]
    fn backward_before_forward() {
        let mut t = Tape::<f64>::new();
        let x = t.input("x");
        let y = t.mul(x, x);
        assert_eq!(t.backward(y), Err(AdError::NotEvaluated));
        t.forward(&[(x, 3.0)]).unwrap();
        assert_eq!(t.backward(y).unwrap().get(x), 6.0);
        // Appending invalidates the cache.
        let _z = t.add(y, x);
        assert_eq!(t.backward(y), Err(AdError::NotEvaluated));
    }

    #[test]
    fn output_adjoint_is_one_and_linear_weights_exact() {
        let mut t = Tape::<f64>::new();
        let xs: Vec<NodeId> = (0..4).map(|i| t.input(format!("x{i}"))).collect();
        let cs = [3.0, -1.5, 0.25, 7.0];
        let terms: Vec<NodeId> = xs
            .iter()
            .zip(cs)
            .map(|(&x, c)| {
                let k = t.constant(c);
                t.mul(k, x)
            })
            .collect();
        let y = t.sum(&terms);
        let point: Vec<(NodeId, f64)> = xs.iter().map(|&x| (x, 0.3)).collect();
        t.forward(&point).unwrap();
        let g = t.backward(y).unwrap();
        assert_eq!(g.get(y), 1.0);
        for (&x, c) in xs.iter().zip(cs) {
            assert_eq!(g.get(x), c);
        }
    }

    #[test]
    fn each_rule_matches_calculus() {
        let x0 = 0.7f64;
        let cases: Vec<(OpKind<f64>, f64)> = vec![
            (OpKind::Neg, -1.0),
            (OpKind::Exp, x0.exp()),
            (OpKind::Ln, 1.0 / x0),
            (OpKind::PowInt(3), 3.0 * x0 * x0),
            (OpKind::PowInt(-2), -2.0 * x0.powi(-3)),
            (OpKind::PowInt(0), 0.0),
            (OpKind::Sin, x0.cos()),
            (OpKind::Cos, -x0.sin()),
            (OpKind::Sigmoid, sigmoid(x0) * (1.0 - sigmoid(x0))),
            (OpKind::Tanh, 1.0 - x0.tanh().powi(2)),
        ];
        for (kind, expected) in cases {
            let mut t = Tape::<f64>::new();
            let x = t.input("x");
            let y = t.build(kind, &[x]).unwrap();
            t.forward(&[(x, x0)]).unwrap();
            let g = t.backward(y).unwrap().get(x);
            assert!((g - expected).abs() < 1e-14, "{}: {g} vs {expected}", kind.name());
        }
    }

    #[test]
    fn quotient_rule() {
        let mut t = Tape::<f64>::new();
        let a = t.input("a");
        let b = t.input("b");
        let q = t.div(a, b);
        t.forward(&[(a, 3.0), (b, 2.0)]).unwrap();
        let g = t.backward(q).unwrap();
        assert_eq!(g.get(a), 0.5);
        assert_eq!(g.get(b), -0.75);
    }

    #[test]
    fn sigmoid_is_stable_for_large_magnitudes() {
        assert_eq!(sigmoid(-800.0f64), 0.0);
        assert_eq!(sigmoid(800.0f64), 1.0);
        assert!(sigmoid(-30.0f64) > 0.0);
    }

    #[test]
    fn tape_is_send_and_sync() {
        fn assert_send_sync<X: Send + Sync>() {}
        assert_send_sync::<Tape<f64>>();
        assert_send_sync::<GradientRecord<f32>>();
    }
}
