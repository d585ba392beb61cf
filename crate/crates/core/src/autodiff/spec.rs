//! Named tape descriptions and the forward/backward trace table.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{AdError, NodeId, OpKind, Result, Tape};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSpec {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub name: String,
    pub op: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub args: Vec<String>,
    /// Constant value for `const` nodes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    /// Exponent for `pow_int` nodes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent: Option<i32>,
}

/// JSON description of a tape: named inputs with values, then operations in
/// order, each referring to earlier names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TapeSpec {
    pub inputs: Vec<InputSpec>,
    pub nodes: Vec<NodeSpec>,
    pub output: String,
}

/// A tape built from a [`TapeSpec`], with one name per node.
#[derive(Debug, Clone)]
pub struct NamedTape<T> {
    pub tape: Tape<T>,
    pub names: Vec<String>,
    pub output: NodeId,
    pub point: Vec<T>,
}

fn parse_kind<T: Scalar>(node: &NodeSpec) -> Result<OpKind<T>> {
    let missing = |what: &str| AdError::Spec(format!("node `{}` needs `{what}`", node.name));
    Ok(match node.op.to_ascii_lowercase().as_str() {
        "const" | "constant" => OpKind::Constant(T::lit(node.value.ok_or_else(|| missing("value"))?)),
        "add" => OpKind::Add,
        "sub" => OpKind::Sub,
        "mul" => OpKind::Mul,
        "div" => OpKind::Div,
        "neg" => OpKind::Neg,
        "exp" => OpKind::Exp,
        "ln" => OpKind::Ln,
        "pow_int" | "powi" => OpKind::PowInt(node.exponent.ok_or_else(|| missing("exponent"))?),
        "sin" => OpKind::Sin,
        "cos" => OpKind::Cos,
        "sigmoid" => OpKind::Sigmoid,
        "tanh" => OpKind::Tanh,
        other => return Err(AdError::Spec(format!("node `{}`: unknown op `{other}`", node.name))),
    })
}

fn kind_spec<T: Scalar>(kind: OpKind<T>) -> (String, Option<f64>, Option<i32>) {
    match kind {
        OpKind::Constant(c) => ("const".into(), Some(c.to_f64_lossy()), None),
        OpKind::PowInt(n) => ("pow_int".into(), None, Some(n)),
        other => (other.name().into(), None, None),
    }
}

impl TapeSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| AdError::Spec(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tape spec serializes")
    }

    pub fn build<T: Scalar>(&self) -> Result<NamedTape<T>> {
        let mut tape = Tape::new();
        let mut names = Vec::new();
        let mut ids: HashMap<&str, NodeId> = HashMap::new();
        let mut point = Vec::new();
        let claim = |name: &str, ids: &HashMap<&str, NodeId>| {
            if ids.contains_key(name) {
                Err(AdError::Spec(format!("duplicate node name `{name}`")))
            } else {
                Ok(())
            }
        };
        for input in &self.inputs {
            claim(&input.name, &ids)?;
            let id = tape.input(input.name.clone());
            ids.insert(&input.name, id);
            names.push(input.name.clone());
            point.push(T::lit(input.value));
        }
        for node in &self.nodes {
            claim(&node.name, &ids)?;
            let kind = parse_kind::<T>(node)?;
            let operands = node
                .args
                .iter()
                .map(|a| ids.get(a.as_str()).copied().ok_or_else(|| AdError::Spec(format!("node `{}`: unknown operand `{a}`", node.name))))
                .collect::<Result<Vec<_>>>()?;
            let id = tape.build(kind, &operands)?;
            ids.insert(&node.name, id);
            names.push(node.name.clone());
        }
        let output = *ids
            .get(self.output.as_str())
            .ok_or_else(|| AdError::Spec(format!("unknown output `{}`", self.output)))?;
        Ok(NamedTape { tape, names, output, point })
    }

    /// Spec of the two-input, two-hidden-unit toy network graph.
    pub fn toy(weights: [f64; 6], x: f64, t: f64) -> Self {
        let toy = toy_graph::<f64>();
        let mut inputs = Vec::new();
        let mut nodes = Vec::new();
        let mut values = weights.to_vec();
        values.extend([x, t]);
        for (i, op) in toy.named.tape.ops().iter().enumerate() {
            let name = toy.named.names[i].clone();
            if let Some(k) = toy.named.tape.input_ordinal(NodeId(i)) {
                inputs.push(InputSpec { name, value: values[k] });
                continue;
            }
            let (op_name, value, exponent) = kind_spec(op.kind());
            let args = op.operands().map(|o| toy.named.names[o.index()].clone()).collect();
            nodes.push(NodeSpec { name, op: op_name, args, value, exponent });
        }
        TapeSpec { inputs, nodes, output: "yhat".into() }
    }
}

/// The toy network graph with handles to its named nodes.
#[derive(Debug, Clone)]
pub struct ToyGraph<T> {
    pub named: NamedTape<T>,
    pub w: [NodeId; 6],
    pub x: NodeId,
    pub t: NodeId,
    /// `v[0]` is v₁ and so on up to v₁₀.
    pub v: [NodeId; 10],
    pub y_hat: NodeId,
}

/// Graph of `ŷ = w₅·σ(w₁x + w₃t) + w₆·σ(w₂x + w₄t)` with all weights 0.5
/// and `x = t = 0.1` as the stored point.
pub fn toy_graph<T: Scalar>() -> ToyGraph<T> {
    let mut tape = Tape::new();
    let w: [NodeId; 6] = std::array::from_fn(|i| tape.input(format!("w{}", i + 1)));
    let x = tape.input("x");
    let t = tape.input("t");
    let v1 = tape.mul(w[0], x);
    let v2 = tape.mul(w[1], x);
    let v3 = tape.mul(w[2], t);
    let v4 = tape.mul(w[3], t);
    let v5 = tape.add(v1, v3);
    let v6 = tape.add(v2, v4);
    let v7 = tape.sigmoid(v5);
    let v8 = tape.sigmoid(v6);
    let v9 = tape.mul(v7, w[4]);
    let v10 = tape.mul(v8, w[5]);
    let y_hat = tape.add(v9, v10);
    let mut names: Vec<String> = (1..=6).map(|i| format!("w{i}")).collect();
    names.extend(["x".into(), "t".into()]);
    names.extend((1..=10).map(|i| format!("v{i}")));
    names.push("yhat".into());
    let mut point = vec![T::lit(0.5); 6];
    point.extend([T::lit(0.1), T::lit(0.1)]);
    ToyGraph {
        named: NamedTape { tape, names, output: y_hat, point },
        w,
        x,
        t,
        v: [v1, v2, v3, v4, v5, v6, v7, v8, v9, v10],
        y_hat,
    }
}

/// CSV of every node with its forward value and adjoint w.r.t. the output.
pub fn trace_csv<T: Scalar>(named: &NamedTape<T>) -> Result<String> {
    let values = named.tape.evaluate(&named.point)?;
    let grads = named.tape.backward_with(&values, named.output)?;
    let mut out = String::from("node,op,forward,adjoint\r\n");
    for (i, op) in named.tape.ops().iter().enumerate() {
        let id = NodeId(i);
        let _ = write!(
            out,
            "{},{},{:.6},{:.6}\r\n",
            crate::metrics::csv_field(&named.names[i]),
            op.kind().name(),
            values[i].to_f64_lossy(),
            grads.get(id).to_f64_lossy()
        );
    }
    Ok(out)
}
