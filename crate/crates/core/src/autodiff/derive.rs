use super::{AdError, NodeId, Op, Result, Tape};
use crate::Scalar;

impl<T: Scalar> Tape<T> {
    fn is_const(&self, id: NodeId, c: T) -> bool {
        matches!(self.nodes[id.0], Op::Constant(v) if v == c)
    }

    fn mul_fold(&mut self, a: NodeId, b: NodeId) -> NodeId {
        if self.is_const(a, T::one()) {
            b
        } else if self.is_const(b, T::one()) {
            a
        } else {
            self.mul(a, b)
        }
    }

    fn accumulate(&mut self, adj: &mut [Option<NodeId>], target: NodeId, term: NodeId) {
        adj[target.0] = Some(match adj[target.0] {
            None => term,
            Some(prev) => self.add(prev, term),
        });
    }

    /// Appends nodes computing `∂output/∂wrt` and returns the result node.
    ///
    /// Only nodes that lie between `wrt` and `output` take part, so the
    /// appended subgraph stays small. The result is an ordinary node and can
    /// be passed to `derive` again.
    pub fn derive(&mut self, output: NodeId, wrt: NodeId) -> Result<NodeId> {
        Ok(self.derive_many(output, &[wrt])?[0])
    }

    /// One symbolic reverse sweep for several inputs at once.
    pub fn derive_many(&mut self, output: NodeId, wrt: &[NodeId]) -> Result<Vec<NodeId>> {
        if output.0 >= self.nodes.len() {
            return Err(AdError::UnknownNode(output.0));
        }
        for &w in wrt {
            if w.0 >= self.nodes.len() {
                return Err(AdError::UnknownNode(w.0));
            }
            if self.input_ordinal(w).is_none() {
                return Err(AdError::NotAnInput(w.0));
            }
        }
        let n = output.0 + 1;
        // Nodes whose value depends on any wrt input.
        let mut depends = vec![false; n];
        for &w in wrt {
            if w.0 < n {
                depends[w.0] = true;
            }
        }
        for i in 0..n {
            if !depends[i] && self.nodes[i].operands().any(|o| depends[o.0]) {
                depends[i] = true;
            }
        }
        // Ancestors of the output.
        let mut reach = vec![false; n];
        reach[output.0] = true;
        for i in (0..n).rev() {
            if reach[i] {
                for o in self.nodes[i].operands() {
                    reach[o.0] = true;
                }
            }
        }

        let mut adj: Vec<Option<NodeId>> = vec![None; n];
        if depends[output.0] {
            adj[output.0] = Some(self.constant(T::one()));
        }
        for i in (0..n).rev() {
            if !(reach[i] && depends[i]) {
                continue;
            }
            let Some(g) = adj[i] else { continue };
            let node = NodeId(i);
            match self.nodes[i] {
                Op::Input(_) | Op::Constant(_) => {}
                Op::Add(a, b) => {
                    if depends[a.0] {
                        self.accumulate(&mut adj, a, g);
                    }
                    if depends[b.0] {
                        self.accumulate(&mut adj, b, g);
                    }
                }
                Op::Sub(a, b) => {
                    if depends[a.0] {
                        self.accumulate(&mut adj, a, g);
                    }
                    if depends[b.0] {
                        let t = self.neg(g);
                        self.accumulate(&mut adj, b, t);
                    }
                }
                Op::Mul(a, b) => {
                    if depends[a.0] {
                        let t = self.mul_fold(g, b);
                        self.accumulate(&mut adj, a, t);
                    }
                    if depends[b.0] {
                        let t = self.mul_fold(g, a);
                        self.accumulate(&mut adj, b, t);
                    }
                }
                Op::Div(a, b) => {
                    if depends[a.0] {
                        let t = self.div(g, b);
                        self.accumulate(&mut adj, a, t);
                    }
                    if depends[b.0] {
                        let q = self.div(node, b);
                        let gq = self.mul_fold(g, q);
                        let t = self.neg(gq);
                        self.accumulate(&mut adj, b, t);
                    }
                }
                Op::Neg(a) => {
                    let t = self.neg(g);
                    self.accumulate(&mut adj, a, t);
                }
                Op::Exp(a) => {
                    let t = self.mul_fold(g, node);
                    self.accumulate(&mut adj, a, t);
                }
                Op::Ln(a) => {
                    let t = self.div(g, a);
                    self.accumulate(&mut adj, a, t);
                }
                Op::PowInt(a, k) => {
                    if k == 0 {
                        continue;
                    }
                    let t = if k == 1 {
                        g
                    } else {
                        let p = if k == 2 { a } else { self.powi(a, k - 1) };
                        let c = self.constant(T::from_i32(k).unwrap());
                        let d = self.mul(c, p);
                        self.mul_fold(g, d)
                    };
                    self.accumulate(&mut adj, a, t);
                }
                Op::Sin(a) => {
                    let c = self.cos(a);
                    let t = self.mul_fold(g, c);
                    self.accumulate(&mut adj, a, t);
                }
                Op::Cos(a) => {
                    let sn = self.sin(a);
                    let gs = self.mul_fold(g, sn);
                    let t = self.neg(gs);
                    self.accumulate(&mut adj, a, t);
                }
                Op::Sigmoid(a) => {
                    let one = self.constant(T::one());
                    let c = self.sub(one, node);
                    let d = self.mul(node, c);
                    let t = self.mul_fold(g, d);
                    self.accumulate(&mut adj, a, t);
                }
                Op::Tanh(a) => {
                    let one = self.constant(T::one());
                    let sq = self.mul(node, node);
                    let d = self.sub(one, sq);
                    let t = self.mul_fold(g, d);
                    self.accumulate(&mut adj, a, t);
                }
            }
        }
        let mut out = Vec::with_capacity(wrt.len());
        for &w in wrt {
            let d = match adj.get(w.0).copied().flatten() {
                Some(d) => d,
                None => self.constant(T::zero()),
            };
            out.push(d);
        }
        Ok(out)
    }
}
