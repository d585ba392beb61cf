//! Dense feed-forward networks evaluated on the autodiff tape.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{sigmoid, AdError, NodeId, Tape};
use crate::rng::{shuffle, SplitMix64};
use crate::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("architecture needs at least 2 layers, got {0}")]
    TooFewLayers(usize),
    #[error("layer sizes must be positive")]
    EmptyLayer,
    #[error("expected {expected} activations, got {got}")]
    ActivationCount { expected: usize, got: usize },
    #[error("uniform init needs lo < hi, got [{lo}, {hi})")]
    InitRange { lo: f64, hi: f64 },
    #[error("input has length {got}, network expects {expected}")]
    InputLength { expected: usize, got: usize },
    #[error("target has length {got}, network outputs {expected}")]
    TargetLength { expected: usize, got: usize },
    #[error("weight shapes do not match the architecture")]
    Shape,
    #[error("expected {expected} parameters, got {got}")]
    ParamCount { expected: usize, got: usize },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFinite { epoch: usize, batch: usize },
    #[error("network json: {0}")]
    Json(String),
    #[error(transparent)]
    Ad(#[from] AdError),
}

pub type Result<T> = std::result::Result<T, NetworkError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    Tanh,
    Linear,
}

impl Activation {
    pub fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
            Activation::Linear => x,
        }
    }

    fn on_tape<T: Scalar>(self, tape: &mut Tape<T>, x: NodeId) -> NodeId {
        match self {
            Activation::Sigmoid => tape.sigmoid(x),
            Activation::Tanh => tape.tanh(x),
            Activation::Linear => x,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ArchitectureDoc")]
pub struct Architecture {
    layer_sizes: Vec<usize>,
    activations: Vec<Activation>,
}

#[derive(Deserialize)]
struct ArchitectureDoc {
    layer_sizes: Vec<usize>,
    activations: Vec<Activation>,
}

impl TryFrom<ArchitectureDoc> for Architecture {
    type Error = NetworkError;
    fn try_from(doc: ArchitectureDoc) -> Result<Self> {
        Architecture::new(doc.layer_sizes, doc.activations)
    }
}

impl Architecture {
    pub fn new(layer_sizes: Vec<usize>, activations: Vec<Activation>) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(NetworkError::TooFewLayers(layer_sizes.len()));
        }
        if layer_sizes.contains(&0) {
            return Err(NetworkError::EmptyLayer);
        }
        if activations.len() != layer_sizes.len() - 1 {
            return Err(NetworkError::ActivationCount { expected: layer_sizes.len() - 1, got: activations.len() });
        }
        Ok(Self { layer_sizes, activations })
    }

    /// Hidden layers share one activation; the output layer gets its own.
    pub fn uniform(layer_sizes: Vec<usize>, hidden: Activation, output: Activation) -> Result<Self> {
        let n = layer_sizes.len().saturating_sub(1);
        let mut acts = vec![hidden; n.saturating_sub(1)];
        if n > 0 {
            acts.push(output);
        }
        Self::new(layer_sizes, acts)
    }

    /// 2 inputs, 2 sigmoid hidden units, 1 linear output.
    pub fn toy() -> Self {
        Self::new(vec![2, 2, 1], vec![Activation::Sigmoid, Activation::Linear]).unwrap()
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn inputs(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn outputs(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "lowercase")]
pub enum InitScheme {
    Constant { value: f64 },
    Uniform { lo: f64, hi: f64 },
    /// Uniform in `±sqrt(6 / (fan_in + fan_out))` per layer.
    Glorot,
}

/// Layer `l` maps `layer_sizes[l]` inputs to `layer_sizes[l+1]` outputs
/// through `weights[l][out][in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    arch: Architecture,
    weights: Vec<Vec<Vec<T>>>,
    biases: Option<Vec<Vec<T>>>,
    seed: Option<u64>,
}

/// Deterministic initialization; biases are off and can be enabled with
/// [`Network::with_biases`].
pub fn init_network<T: Scalar>(arch: &Architecture, scheme: InitScheme, seed: u64) -> Result<Network<T>> {
    if let InitScheme::Uniform { lo, hi } = scheme {
        if !(lo < hi) {
            return Err(NetworkError::InitRange { lo, hi });
        }
    }
    let mut rng = SplitMix64::new(seed);
    let mut draw = |fan_in: usize, fan_out: usize| match scheme {
        InitScheme::Constant { value } => T::lit(value),
        InitScheme::Uniform { lo, hi } => T::lit(rng.uniform(lo, hi)),
        InitScheme::Glorot => {
            let r = (6.0 / (fan_in + fan_out) as f64).sqrt();
            T::lit(rng.uniform(-r, r))
        }
    };
    let weights = arch
        .layer_sizes
        .windows(2)
        .map(|w| (0..w[1]).map(|_| (0..w[0]).map(|_| draw(w[0], w[1])).collect()).collect())
        .collect();
    Ok(Network { arch: arch.clone(), weights, biases: None, seed: Some(seed) })
}

impl<T: Scalar> Network<T> {
    pub fn from_parts(arch: Architecture, weights: Vec<Vec<Vec<T>>>, biases: Option<Vec<Vec<T>>>) -> Result<Self> {
        let shape_ok = weights.len() == arch.layer_sizes.len() - 1
            && weights.iter().enumerate().all(|(l, m)| {
                m.len() == arch.layer_sizes[l + 1] && m.iter().all(|row| row.len() == arch.layer_sizes[l])
            });
        let bias_ok = biases.as_ref().is_none_or(|bs| {
            bs.len() == weights.len() && bs.iter().enumerate().all(|(l, b)| b.len() == arch.layer_sizes[l + 1])
        });
        if !(shape_ok && bias_ok) {
            return Err(NetworkError::Shape);
        }
        Ok(Self { arch, weights, biases, seed: None })
    }

    /// Enables zero-initialized biases, or removes them.
    pub fn with_biases(mut self, on: bool) -> Self {
        self.biases = on.then(|| self.arch.layer_sizes[1..].iter().map(|&n| vec![T::zero(); n]).collect());
        self
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn weights(&self) -> &[Vec<Vec<T>>] {
        &self.weights
    }

    pub fn biases(&self) -> Option<&[Vec<T>]> {
        self.biases.as_deref()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn param_count(&self) -> usize {
        let w: usize = self.arch.layer_sizes.windows(2).map(|w| w[0] * w[1]).sum();
        let b: usize = if self.biases.is_some() { self.arch.layer_sizes[1..].iter().sum() } else { 0 };
        w + b
    }

    /// Parameters flattened layer by layer: weights row-major, then that
    /// layer's biases.
    pub fn params(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in 0..self.weights.len() {
            for row in &self.weights[l] {
                out.extend_from_slice(row);
            }
            if let Some(bs) = &self.biases {
                out.extend_from_slice(&bs[l]);
            }
        }
        out
    }

    pub fn set_params(&mut self, flat: &[T]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(NetworkError::ParamCount { expected: self.param_count(), got: flat.len() });
        }
        let mut it = flat.iter().copied();
        for l in 0..self.weights.len() {
            for row in &mut self.weights[l] {
                for w in row.iter_mut() {
                    *w = it.next().unwrap();
                }
            }
            if let Some(bs) = &mut self.biases {
                for b in bs[l].iter_mut() {
                    *b = it.next().unwrap();
                }
            }
        }
        Ok(())
    }

    /// Direct numeric forward pass.
    pub fn predict(&self, input: &[T]) -> Result<Vec<T>> {
        if input.len() != self.arch.inputs() {
            return Err(NetworkError::InputLength { expected: self.arch.inputs(), got: input.len() });
        }
        let mut a = input.to_vec();
        for (l, m) in self.weights.iter().enumerate() {
            let act = self.arch.activations[l];
            a = m
                .iter()
                .enumerate()
                .map(|(j, row)| {
                    let mut z = row.iter().zip(&a).fold(T::zero(), |s, (&w, &x)| s + w * x);
                    if let Some(bs) = &self.biases {
                        z = z + bs[l][j];
                    }
                    act.apply(z)
                })
                .collect();
        }
        Ok(a)
    }

    /// Appends the parameters to `tape` as inputs, in [`Network::params`]
    /// order, and returns their ids.
    pub fn bind_params(&self, tape: &mut Tape<T>) -> Vec<NodeId> {
        let mut ids = Vec::with_capacity(self.param_count());
        for l in 0..self.weights.len() {
            for (j, row) in self.weights[l].iter().enumerate() {
                for i in 0..row.len() {
                    ids.push(tape.input(format!("w{l}_{j}_{i}")));
                }
            }
            if let Some(bs) = &self.biases {
                for j in 0..bs[l].len() {
                    ids.push(tape.input(format!("b{l}_{j}")));
                }
            }
        }
        ids
    }

    /// Builds the forward pass on `tape` from input nodes and parameter nodes
    /// laid out as by [`Network::bind_params`].
    pub fn forward_on(&self, tape: &mut Tape<T>, inputs: &[NodeId], params: &[NodeId]) -> Result<Vec<NodeId>> {
        if inputs.len() != self.arch.inputs() {
            return Err(NetworkError::InputLength { expected: self.arch.inputs(), got: inputs.len() });
        }
        if params.len() != self.param_count() {
            return Err(NetworkError::ParamCount { expected: self.param_count(), got: params.len() });
        }
        let mut p = params.iter().copied();
        let mut a = inputs.to_vec();
        for l in 0..self.weights.len() {
            let (n_in, n_out) = (self.arch.layer_sizes[l], self.arch.layer_sizes[l + 1]);
            let w: Vec<NodeId> = p.by_ref().take(n_in * n_out).collect();
            let b: Option<Vec<NodeId>> = self.biases.as_ref().map(|_| p.by_ref().take(n_out).collect());
            let act = self.arch.activations[l];
            a = (0..n_out)
                .map(|j| {
                    let terms: Vec<NodeId> = (0..n_in).map(|i| tape.mul(w[j * n_in + i], a[i])).collect();
                    let mut z = tape.sum(&terms);
                    if let Some(b) = &b {
                        z = tape.add(z, b[j]);
                    }
                    act.on_tape(tape, z)
                })
                .collect();
        }
        Ok(a)
    }

    /// Forward pass plus the tangents `∂output/∂input[axis]` for each axis,
    /// propagated layer by layer.
    ///
    /// `slope` receives the tape, the activation and its output node and
    /// returns the activation's derivative node; linear layers skip it.
    /// Returns `(outputs, tangents)` with `tangents[k][j] = ∂output_j/∂input_axes[k]`.
    pub fn forward_tangent_on(
        &self,
        tape: &mut Tape<T>,
        inputs: &[NodeId],
        params: &[NodeId],
        axes: &[usize],
        mut slope: impl FnMut(&mut Tape<T>, Activation, NodeId) -> NodeId,
    ) -> Result<(Vec<NodeId>, Vec<Vec<NodeId>>)> {
        if inputs.len() != self.arch.inputs() || axes.iter().any(|&k| k >= inputs.len()) {
            return Err(NetworkError::InputLength { expected: self.arch.inputs(), got: inputs.len() });
        }
        if params.len() != self.param_count() {
            return Err(NetworkError::ParamCount { expected: self.param_count(), got: params.len() });
        }
        let one = tape.constant(T::one());
        // None is an exact zero tangent.
        let mut tan: Vec<Vec<Option<NodeId>>> = axes
            .iter()
            .map(|&k| (0..inputs.len()).map(|i| (i == k).then_some(one)).collect())
            .collect();
        let mut p = params.iter().copied();
        let mut a = inputs.to_vec();
        for l in 0..self.weights.len() {
            let (n_in, n_out) = (self.arch.layer_sizes[l], self.arch.layer_sizes[l + 1]);
            let w: Vec<NodeId> = p.by_ref().take(n_in * n_out).collect();
            let b: Option<Vec<NodeId>> = self.biases.as_ref().map(|_| p.by_ref().take(n_out).collect());
            let act = self.arch.activations[l];
            let mut next_a = Vec::with_capacity(n_out);
            let mut next_tan = vec![Vec::with_capacity(n_out); axes.len()];
            for j in 0..n_out {
                let terms: Vec<NodeId> = (0..n_in).map(|i| tape.mul(w[j * n_in + i], a[i])).collect();
                let mut z = tape.sum(&terms);
                if let Some(b) = &b {
                    z = tape.add(z, b[j]);
                }
                let out = act.on_tape(tape, z);
                let d = (act != Activation::Linear).then(|| slope(tape, act, out));
                for (k, t) in tan.iter().enumerate() {
                    let parts: Vec<NodeId> = (0..n_in)
                        .filter_map(|i| t[i].map(|ti| if ti == one { w[j * n_in + i] } else { tape.mul(w[j * n_in + i], ti) }))
                        .collect();
                    let dz = (!parts.is_empty()).then(|| tape.sum(&parts));
                    next_tan[k].push(match (dz, d) {
                        (Some(dz), Some(d)) => Some(tape.mul(d, dz)),
                        (dz, None) => dz,
                        (None, _) => None,
                    });
                }
                next_a.push(out);
            }
            a = next_a;
            tan = next_tan;
        }
        let tangents = tan
            .into_iter()
            .map(|t| t.into_iter().map(|x| x.unwrap_or_else(|| tape.constant(T::zero()))).collect())
            .collect();
        Ok((a, tangents))
    }

    pub fn to_json(&self) -> String {
        let doc = NetworkDoc {
            arch: self.arch.layer_sizes.clone(),
            activations: self.arch.activations.clone(),
            weights: self.weights.iter().map(|m| m.iter().map(|r| r.iter().map(|w| w.to_f64_lossy()).collect()).collect()).collect(),
            biases: self.biases.as_ref().map(|bs| bs.iter().map(|b| b.iter().map(|w| w.to_f64_lossy()).collect()).collect()),
            seed: self.seed,
        };
        serde_json::to_string_pretty(&doc).expect("network serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: NetworkDoc = serde_json::from_str(text).map_err(|e| NetworkError::Json(e.to_string()))?;
        let arch = Architecture::new(doc.arch, doc.activations)?;
        let cast = |v: Vec<f64>| v.into_iter().map(T::lit).collect::<Vec<T>>();
        let weights = doc.weights.into_iter().map(|m| m.into_iter().map(cast).collect()).collect();
        let biases = doc.biases.map(|bs| bs.into_iter().map(cast).collect());
        let mut net = Self::from_parts(arch, weights, biases)?;
        net.seed = doc.seed;
        Ok(net)
    }
}

#[derive(Serialize, Deserialize)]
struct NetworkDoc {
    arch: Vec<usize>,
    activations: Vec<Activation>,
    weights: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    biases: Option<Vec<Vec<f64>>>,
    seed: Option<u64>,
}

/// The network forward pass recorded on a fresh tape.
#[derive(Debug, Clone)]
pub struct Forward<T> {
    pub tape: Tape<T>,
    pub params: Vec<NodeId>,
    pub inputs: Vec<NodeId>,
    pub outputs: Vec<NodeId>,
    pub values: Vec<T>,
}

impl<T: Scalar> Forward<T> {
    pub fn output_values(&self) -> Vec<T> {
        self.outputs.iter().map(|o| self.values[o.index()]).collect()
    }
}

/// Records the forward pass for one input vector, with parameters and
/// inputs as tape inputs so gradients are available for both.
pub fn forward_network<T: Scalar>(net: &Network<T>, input: &[T]) -> Result<Forward<T>> {
    if input.len() != net.arch.inputs() {
        return Err(NetworkError::InputLength { expected: net.arch.inputs(), got: input.len() });
    }
    let mut tape = Tape::new();
    let params = net.bind_params(&mut tape);
    let inputs: Vec<NodeId> = (0..input.len()).map(|i| tape.input(format!("in{i}"))).collect();
    let outputs = net.forward_on(&mut tape, &inputs, &params)?;
    let mut point = net.params();
    point.extend_from_slice(input);
    let values = tape.evaluate(&point)?;
    Ok(Forward { tape, params, inputs, outputs, values })
}

/// Appends a per-sample loss given output and target nodes.
pub type CustomLoss<T> = Arc<dyn Fn(&mut Tape<T>, &[NodeId], &[NodeId]) -> NodeId + Send + Sync>;

#[derive(Clone, Default)]
pub enum Loss<T> {
    #[default]
    Mse,
    /// `−(y ln(p + ε) + (1 − y) ln(1 − p + ε))` with ε = 1e-7, averaged over outputs.
    BinaryCrossEntropy,
    Custom(CustomLoss<T>),
}

impl<T> fmt::Debug for Loss<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Loss::Mse => f.write_str("Mse"),
            Loss::BinaryCrossEntropy => f.write_str("BinaryCrossEntropy"),
            Loss::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

pub const BCE_EPSILON: f64 = 1e-7;

impl<T: Scalar> Loss<T> {
    fn build(&self, tape: &mut Tape<T>, outputs: &[NodeId], targets: &[NodeId]) -> NodeId {
        let n = T::from_usize(outputs.len()).unwrap();
        match self {
            Loss::Mse => {
                let sq: Vec<NodeId> = outputs
                    .iter()
                    .zip(targets)
                    .map(|(&o, &t)| {
                        let d = tape.sub(o, t);
                        tape.mul(d, d)
                    })
                    .collect();
                let s = tape.sum(&sq);
                let k = tape.constant(T::one() / n);
                tape.mul(k, s)
            }
            Loss::BinaryCrossEntropy => {
                let eps = tape.constant(T::lit(BCE_EPSILON));
                let one = tape.constant(T::one());
                let terms: Vec<NodeId> = outputs
                    .iter()
                    .zip(targets)
                    .map(|(&p, &y)| {
                        let pe = tape.add(p, eps);
                        let lp = tape.ln(pe);
                        let q = tape.sub(one, p);
                        let qe = tape.add(q, eps);
                        let lq = tape.ln(qe);
                        let ny = tape.sub(one, y);
                        let a = tape.mul(y, lp);
                        let b = tape.mul(ny, lq);
                        tape.add(a, b)
                    })
                    .collect();
                let s = tape.sum(&terms);
                let k = tape.constant(-T::one() / n);
                tape.mul(k, s)
            }
            Loss::Custom(f) => f(tape, outputs, targets),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Optimizer {
    #[default]
    Sgd,
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam { beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

#[derive(Debug, Clone)]
pub struct TrainConfig<T> {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Zero means full batch.
    pub batch_size: usize,
    pub loss: Loss<T>,
    pub optimizer: Optimizer,
    pub seed: u64,
}

impl<T: Scalar> Default for TrainConfig<T> {
    fn default() -> Self {
        Self { learning_rate: 0.1, epochs: 100, batch_size: 0, loss: Loss::Mse, optimizer: Optimizer::Sgd, seed: 0 }
    }
}

impl<T: Scalar> TrainConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(NetworkError::Config(format!("learning rate {} must be finite and non-negative", self.learning_rate)));
        }
        if self.epochs == 0 {
            return Err(NetworkError::Config("epochs must be at least 1".into()));
        }
        Ok(())
    }
}

/// Feature and target rows of equal count.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset<T> {
    pub features: Vec<Vec<T>>,
    pub targets: Vec<Vec<T>>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(features: Vec<Vec<T>>, targets: Vec<Vec<T>>) -> Self {
        assert_eq!(features.len(), targets.len(), "feature and target counts differ");
        Self { features, targets }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    fn check(&self, arch: &Architecture) -> Result<()> {
        if self.is_empty() {
            return Err(NetworkError::EmptyDataset);
        }
        for (x, y) in self.features.iter().zip(&self.targets) {
            if x.len() != arch.inputs() {
                return Err(NetworkError::InputLength { expected: arch.inputs(), got: x.len() });
            }
            if y.len() != arch.outputs() {
                return Err(NetworkError::TargetLength { expected: arch.outputs(), got: y.len() });
            }
        }
        Ok(())
    }
}

/// One sample's loss graph, reused for every sample and parameter value.
///
/// Tape inputs are laid out as parameters, then features, then targets.
pub struct SampleTape<T> {
    tape: Tape<T>,
    loss: NodeId,
    n_params: usize,
    point: Vec<T>,
    values: Vec<T>,
    adjoints: Vec<T>,
}

impl<T: Scalar> SampleTape<T> {
    pub fn new(net: &Network<T>, loss: &Loss<T>) -> Result<Self> {
        let mut tape = Tape::new();
        let params = net.bind_params(&mut tape);
        let inputs: Vec<NodeId> = (0..net.arch.inputs()).map(|i| tape.input(format!("x{i}"))).collect();
        let targets: Vec<NodeId> = (0..net.arch.outputs()).map(|i| tape.input(format!("y{i}"))).collect();
        let outputs = net.forward_on(&mut tape, &inputs, &params)?;
        let loss = loss.build(&mut tape, &outputs, &targets);
        Ok(Self { tape, loss, n_params: params.len(), point: Vec::new(), values: Vec::new(), adjoints: Vec::new() })
    }

    pub fn tape(&self) -> &Tape<T> {
        &self.tape
    }

    /// Loss at one sample; adds its parameter gradient into `grad`.
    pub fn accumulate(&mut self, params: &[T], x: &[T], y: &[T], grad: &mut [T]) -> Result<T> {
        self.point.clear();
        self.point.extend_from_slice(params);
        self.point.extend_from_slice(x);
        self.point.extend_from_slice(y);
        self.tape.evaluate_into(&self.point, &mut self.values)?;
        self.tape.adjoints_into(&self.values, self.loss, &mut self.adjoints);
        for (k, g) in grad.iter_mut().enumerate().take(self.n_params) {
            let id = self.tape.inputs()[k];
            *g = *g + self.adjoints.get(id.index()).copied().unwrap_or_else(T::zero);
        }
        Ok(self.values[self.loss.index()])
    }
}

/// Mean loss over the chosen rows and its gradient w.r.t. [`Network::params`].
pub fn loss_and_gradient<T: Scalar>(net: &Network<T>, data: &Dataset<T>, rows: &[usize], loss: &Loss<T>) -> Result<(T, Vec<T>)> {
    data.check(&net.arch)?;
    let mut sample = SampleTape::new(net, loss)?;
    let params = net.params();
    let mut grad = vec![T::zero(); params.len()];
    let mut total = T::zero();
    for &r in rows {
        total = total + sample.accumulate(&params, &data.features[r], &data.targets[r], &mut grad)?;
    }
    let n = T::from_usize(rows.len().max(1)).unwrap();
    grad.iter_mut().for_each(|g| *g = *g / n);
    Ok((total / n, grad))
}

/// Gradient descent over shuffled mini-batches.
///
/// The returned history holds the mean sample loss of each epoch, measured
/// while the epoch's updates are applied.
pub fn train<T: Scalar>(net: &Network<T>, data: &Dataset<T>, config: &TrainConfig<T>) -> Result<(Network<T>, Vec<T>)> {
    config.validate()?;
    data.check(&net.arch)?;
    let mut net = net.clone();
    let mut sample = SampleTape::new(&net, &config.loss)?;
    let mut params = net.params();
    let mut grad = vec![T::zero(); params.len()];
    let mut m = vec![T::zero(); params.len()];
    let mut v = vec![T::zero(); params.len()];
    let mut step = 0i32;
    let lr = T::lit(config.learning_rate);
    let batch = if config.batch_size == 0 { data.len() } else { config.batch_size.min(data.len()) };
    let mut rng = SplitMix64::new(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        if batch < data.len() {
            shuffle(&mut rng, &mut order);
        }
        let mut epoch_loss = T::zero();
        for (b, rows) in order.chunks(batch).enumerate() {
            grad.iter_mut().for_each(|g| *g = T::zero());
            let mut batch_loss = T::zero();
            for &r in rows {
                batch_loss = batch_loss + sample.accumulate(&params, &data.features[r], &data.targets[r], &mut grad)?;
            }
            if !batch_loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                log::error!("training diverged at epoch {epoch}, batch {b}");
                return Err(NetworkError::NonFinite { epoch, batch: b });
            }
            epoch_loss = epoch_loss + batch_loss;
            let n = T::from_usize(rows.len()).unwrap();
            grad.iter_mut().for_each(|g| *g = *g / n);
            step += 1;
            apply_update(config.optimizer, lr, step, &mut params, &grad, &mut m, &mut v);
        }
        history.push(epoch_loss / T::from_usize(data.len()).unwrap());
    }
    net.set_params(&params)?;
    Ok((net, history))
}

/// One optimizer step; `step` counts from 1.
pub fn apply_update<T: Scalar>(
    optimizer: Optimizer,
    lr: T,
    step: i32,
    params: &mut [T],
    grad: &[T],
    m: &mut [T],
    v: &mut [T],
) {
    match optimizer {
        Optimizer::Sgd => {
            for (p, &g) in params.iter_mut().zip(grad) {
                *p = *p - lr * g;
            }
        }
        Optimizer::Adam { beta1, beta2, epsilon } => {
            let (b1, b2, eps) = (T::lit(beta1), T::lit(beta2), T::lit(epsilon));
            let c1 = T::one() - b1.powi(step);
            let c2 = T::one() - b2.powi(step);
            for k in 0..params.len() {
                let g = grad[k];
                m[k] = b1 * m[k] + (T::one() - b1) * g;
                v[k] = b2 * v[k] + (T::one() - b2) * g * g;
                let mh = m[k] / c1;
                let vh = v[k] / c2;
                params[k] = params[k] - lr * mh / (vh.sqrt() + eps);
            }
        }
    }
}
