//! Physics-informed losses and solvers built on [`Network`] and the tape.
//!
//! A [`PdeProblem`] pairs a residual builder with collocation points and
//! condition samples. [`build_pinn_loss`] turns it into a [`PinnLoss`]: one
//! tape holding the network at every point, the requested partials and the
//! scalar loss, re-evaluated for each parameter vector during training.

mod hetero;
mod trace;
mod transport;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::autodiff::{AdError, NodeId, Tape};
use crate::network::{apply_update, Activation, Network, NetworkError, Optimizer};
use crate::Scalar;

pub use hetero::{bvp_exact, heterogeneity_experiment, HeteroCell, HeteroConfig, HeteroReport, ZoneBvp};
pub use trace::{exact_transport, run_paper_trace, Convention, TraceRow, TRACE_CSV_HEADER};
pub use transport::{paper_sample_problem, solve_transport, transport_problem, TransportConfig, TransportReport};

#[derive(Debug, Error, PartialEq)]
pub enum PinnError {
    #[error("partial derivatives of order {0} are not available (maximum 2)")]
    DerivativeOrder(usize),
    #[error("axis {axis} out of range for a {dim}-dimensional problem")]
    Axis { axis: usize, dim: usize },
    #[error("second-order partials need the calculus sigmoid rule")]
    RuleOrder,
    #[error("network takes {net} inputs but the problem has {dim} coordinates")]
    Arity { net: usize, dim: usize },
    #[error("problem needs at least one condition sample")]
    NoConditions,
    #[error("point {index} lies outside the domain bounds")]
    OutOfBounds { index: usize },
    #[error("point {index} has {got} coordinates, expected {dim}")]
    PointDimension { index: usize, got: usize, dim: usize },
    #[error("non-finite loss at epoch {0}")]
    Diverged(usize),
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Ad(#[from] AdError),
}

pub type Result<T> = std::result::Result<T, PinnError>;

/// Derivative used for sigmoid activations when forming partials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SigmoidRule {
    /// σ(1 − σ).
    #[default]
    Calculus,
    /// σ(1 + σ), the convention of the hand-derived toy trace.
    PaperOnePlus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossMode {
    /// Mean squared residual plus mean squared condition error.
    #[default]
    Squared,
    /// Plain sum of residuals plus plain sum of condition errors.
    PaperLinear(SigmoidRule),
}

/// Access to the network output and its partials at one collocation point.
pub struct ResidualContext<'a, T> {
    tape: &'a mut Tape<T>,
    coords: &'a [NodeId],
    point: &'a [f64],
    index: usize,
    u: NodeId,
    first: Vec<Option<NodeId>>,
    second: Vec<Option<NodeId>>,
    rule: SigmoidRule,
}

impl<T: Scalar> ResidualContext<'_, T> {
    pub fn tape(&mut self) -> &mut Tape<T> {
        self.tape
    }

    pub fn u(&self) -> NodeId {
        self.u
    }

    /// Collocation point index within the problem.
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn point(&self) -> &[f64] {
        self.point
    }

    pub fn coord(&self, axis: usize) -> NodeId {
        self.coords[axis]
    }

    pub fn constant(&mut self, value: f64) -> NodeId {
        self.tape.constant(T::lit(value))
    }

    fn check_axis(&self, axis: usize) -> Result<()> {
        if axis < self.coords.len() {
            Ok(())
        } else {
            Err(PinnError::Axis { axis, dim: self.coords.len() })
        }
    }

    /// `∂u/∂x_{axes[0]}…`, for orders 1 and 2; cached per point.
    pub fn partial(&mut self, axes: &[usize]) -> Result<NodeId> {
        for &a in axes {
            self.check_axis(a)?;
        }
        let dim = self.coords.len();
        match *axes {
            [a] => {
                if let Some(id) = self.first[a] {
                    return Ok(id);
                }
                let id = self.tape.derive(self.u, self.coords[a])?;
                self.first[a] = Some(id);
                Ok(id)
            }
            [a, b] => {
                if self.rule != SigmoidRule::Calculus {
                    return Err(PinnError::RuleOrder);
                }
                let (a, b) = (a.min(b), a.max(b));
                if let Some(id) = self.second[a * dim + b] {
                    return Ok(id);
                }
                let da = self.partial(&[a])?;
                let id = self.tape.derive(da, self.coords[b])?;
                self.second[a * dim + b] = Some(id);
                Ok(id)
            }
            _ => Err(PinnError::DerivativeOrder(axes.len())),
        }
    }
}

pub type ResidualFn<T> = Arc<dyn Fn(&mut ResidualContext<'_, T>) -> Result<NodeId> + Send + Sync>;

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionSample {
    pub coords: Vec<f64>,
    pub target: f64,
}

#[derive(Clone)]
pub struct PdeProblem<T> {
    pub bounds: Vec<(f64, f64)>,
    pub collocation: Vec<Vec<f64>>,
    pub conditions: Vec<ConditionSample>,
    pub residual: ResidualFn<T>,
}

impl<T> fmt::Debug for PdeProblem<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PdeProblem")
            .field("bounds", &self.bounds)
            .field("collocation", &self.collocation.len())
            .field("conditions", &self.conditions.len())
            .finish_non_exhaustive()
    }
}

impl<T: Scalar> PdeProblem<T> {
    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.conditions.is_empty() {
            return Err(PinnError::NoConditions);
        }
        let dim = self.dim();
        let pts = self.collocation.iter().chain(self.conditions.iter().map(|c| &c.coords));
        for (index, p) in pts.enumerate() {
            if p.len() != dim {
                return Err(PinnError::PointDimension { index, got: p.len(), dim });
            }
            let inside = p.iter().zip(&self.bounds).all(|(&v, &(lo, hi))| v >= lo - 1e-12 && v <= hi + 1e-12);
            if !inside {
                return Err(PinnError::OutOfBounds { index });
            }
        }
        Ok(())
    }
}

/// A loss tape over network parameters.
///
/// Tape inputs are the parameters in [`Network::params`] order followed by
/// the coordinates of every collocation and condition point.
#[derive(Debug, Clone)]
pub struct PinnLoss<T> {
    tape: Tape<T>,
    n_params: usize,
    coords: Vec<T>,
    loss: NodeId,
    residual_term: NodeId,
    condition_term: NodeId,
    values: Vec<T>,
    adjoints: Vec<T>,
    point: Vec<T>,
}

/// Loss components at one parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LossEval<T> {
    pub loss: T,
    pub residual_term: T,
    pub condition_term: T,
}

impl<T: Scalar> PinnLoss<T> {
    pub fn tape(&self) -> &Tape<T> {
        &self.tape
    }

    pub fn loss_node(&self) -> NodeId {
        self.loss
    }

    fn load(&mut self, params: &[T]) -> Result<()> {
        if params.len() != self.n_params {
            return Err(NetworkError::ParamCount { expected: self.n_params, got: params.len() }.into());
        }
        self.point.clear();
        self.point.extend_from_slice(params);
        self.point.extend_from_slice(&self.coords);
        self.tape.evaluate_into(&self.point, &mut self.values)?;
        Ok(())
    }

    fn components(&self) -> LossEval<T> {
        LossEval {
            loss: self.values[self.loss.index()],
            residual_term: self.values[self.residual_term.index()],
            condition_term: self.values[self.condition_term.index()],
        }
    }

    pub fn evaluate(&mut self, params: &[T]) -> Result<LossEval<T>> {
        self.load(params)?;
        Ok(self.components())
    }

    /// Loss components and the gradient w.r.t. the parameters.
    pub fn evaluate_with_gradient(&mut self, params: &[T], grad: &mut Vec<T>) -> Result<LossEval<T>> {
        self.load(params)?;
        self.tape.adjoints_into(&self.values, self.loss, &mut self.adjoints);
        grad.clear();
        grad.extend(self.tape.inputs()[..self.n_params].iter().map(|id| self.adjoints[id.index()]));
        Ok(self.components())
    }
}

fn sigmoid_slope<T: Scalar>(rule: SigmoidRule) -> impl FnMut(&mut Tape<T>, Activation, NodeId) -> NodeId {
    move |tape, act, out| {
        let one = tape.constant(T::one());
        match act {
            Activation::Sigmoid => {
                let f = match rule {
                    SigmoidRule::Calculus => tape.sub(one, out),
                    SigmoidRule::PaperOnePlus => tape.add(one, out),
                };
                tape.mul(out, f)
            }
            Activation::Tanh => {
                let sq = tape.mul(out, out);
                tape.sub(one, sq)
            }
            Activation::Linear => one,
        }
    }
}

/// Builds the loss tape for `problem` on `net`'s architecture.
pub fn build_pinn_loss<T: Scalar>(problem: &PdeProblem<T>, net: &Network<T>, mode: LossMode) -> Result<PinnLoss<T>> {
    problem.validate()?;
    let dim = problem.dim();
    let arch = net.architecture();
    if arch.inputs() != dim || arch.outputs() != 1 {
        return Err(PinnError::Arity { net: arch.inputs(), dim });
    }
    let mut tape = Tape::new();
    let params = net.bind_params(&mut tape);
    let mut coords_values = Vec::new();
    let mut residuals = Vec::with_capacity(problem.collocation.len());
    for (index, point) in problem.collocation.iter().enumerate() {
        let coords: Vec<NodeId> = (0..dim).map(|k| tape.input(format!("c{index}_{k}"))).collect();
        coords_values.extend(point.iter().map(|&v| T::lit(v)));
        let (u, first) = match mode {
            LossMode::PaperLinear(rule @ SigmoidRule::PaperOnePlus) => {
                let axes: Vec<usize> = (0..dim).collect();
                let (out, tan) = net.forward_tangent_on(&mut tape, &coords, &params, &axes, sigmoid_slope(rule))?;
                (out[0], tan.into_iter().map(|t| Some(t[0])).collect())
            }
            _ => (net.forward_on(&mut tape, &coords, &params)?[0], vec![None; dim]),
        };
        let rule = match mode {
            LossMode::PaperLinear(rule) => rule,
            LossMode::Squared => SigmoidRule::Calculus,
        };
        let mut ctx = ResidualContext {
            tape: &mut tape,
            coords: &coords,
            point,
            index,
            u,
            first,
            second: vec![None; dim * dim],
            rule,
        };
        residuals.push((problem.residual)(&mut ctx)?);
    }
    let mut errors = Vec::with_capacity(problem.conditions.len());
    for (index, c) in problem.conditions.iter().enumerate() {
        let coords: Vec<NodeId> = (0..dim).map(|k| tape.input(format!("b{index}_{k}"))).collect();
        coords_values.extend(c.coords.iter().map(|&v| T::lit(v)));
        let u = net.forward_on(&mut tape, &coords, &params)?[0];
        let target = tape.constant(T::lit(c.target));
        errors.push(tape.sub(u, target));
    }
    let (residual_term, condition_term) = match mode {
        LossMode::Squared => (mean_square(&mut tape, &residuals), mean_square(&mut tape, &errors)),
        LossMode::PaperLinear(_) => (tape.sum(&residuals), tape.sum(&errors)),
    };
    let loss = tape.add(residual_term, condition_term);
    Ok(PinnLoss {
        tape,
        n_params: params.len(),
        coords: coords_values,
        loss,
        residual_term,
        condition_term,
        values: Vec::new(),
        adjoints: Vec::new(),
        point: Vec::new(),
    })
}

fn mean_square<T: Scalar>(tape: &mut Tape<T>, terms: &[NodeId]) -> NodeId {
    if terms.is_empty() {
        return tape.constant(T::zero());
    }
    let sq: Vec<NodeId> = terms.iter().map(|&r| tape.mul(r, r)).collect();
    let s = tape.sum(&sq);
    let k = tape.constant(T::one() / T::from_usize(terms.len()).unwrap());
    tape.mul(k, s)
}

/// Optimizer settings for [`fit`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
}

/// Full-batch training on a loss tape. Returns the trained network and the
/// loss recorded before each update.
pub fn fit<T: Scalar>(net: &Network<T>, loss: &mut PinnLoss<T>, config: FitConfig) -> Result<(Network<T>, Vec<T>)> {
    if !(config.learning_rate >= 0.0 && config.learning_rate.is_finite()) {
        return Err(PinnError::Config(format!("learning rate {} must be finite and non-negative", config.learning_rate)));
    }
    let mut params = net.params();
    let mut grad = Vec::with_capacity(params.len());
    let mut m = vec![T::zero(); params.len()];
    let mut v = vec![T::zero(); params.len()];
    let lr = T::lit(config.learning_rate);
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let e = loss.evaluate_with_gradient(&params, &mut grad)?;
        if !e.loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            log::error!("PINN training diverged at epoch {epoch}");
            return Err(PinnError::Diverged(epoch));
        }
        history.push(e.loss);
        apply_update(config.optimizer, lr, epoch as i32 + 1, &mut params, &grad, &mut m, &mut v);
    }
    let mut out = net.clone();
    out.set_params(&params)?;
    Ok((out, history))
}
