use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{build_pinn_loss, exact_transport, fit, ConditionSample, Convention, FitConfig, LossMode, PdeProblem, PinnError, ResidualContext, ResidualFn, Result};
use crate::network::{init_network, Activation, Architecture, InitScheme, Network, Optimizer};
use crate::Scalar;

/// Transport demo settings on `[0, x_max] × [0, t_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransportConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub velocity: f64,
    pub x_max: f64,
    pub t_max: f64,
    /// Collocation grid size along x and t, endpoints included.
    pub collocation: (usize, usize),
    /// Initial-condition samples on `t = 0`.
    pub initial_points: usize,
    /// Inflow samples on `x = 0`.
    pub boundary_points: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub seed: u64,
    pub eval_grid: (usize, usize),
}

impl Default for TransportConfig {
    fn default() -> Self {
        Self {
            hidden: vec![10, 10],
            activation: Activation::Tanh,
            velocity: 3.0,
            x_max: 1.0,
            t_max: 0.5,
            collocation: (16, 9),
            initial_points: 21,
            boundary_points: 11,
            epochs: 2000,
            learning_rate: 0.01,
            optimizer: Optimizer::adam(),
            seed: 0,
            eval_grid: (50, 25),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransportReport {
    pub rmse: f64,
    pub max_abs_error: f64,
    pub final_loss: f64,
    pub residual_term: f64,
    pub condition_term: f64,
    /// Mean `|u_t + v·u_x|` at the collocation points, with partials taken
    /// by central differences on the trained network.
    pub mean_abs_residual: f64,
    pub loss_history: Vec<f64>,
}

impl TransportReport {
    pub fn to_csv(&self) -> String {
        format!(
            "metric,value\r\nrmse,{:.6}\r\nmax_abs_error,{:.6}\r\nfinal_loss,{:.6e}\r\nresidual_term,{:.6e}\r\ncondition_term,{:.6e}\r\nmean_abs_residual,{:.6e}\r\nepochs,{}\r\n",
            self.rmse,
            self.max_abs_error,
            self.final_loss,
            self.residual_term,
            self.condition_term,
            self.mean_abs_residual,
            self.loss_history.len()
        )
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

fn transport_residual<T: Scalar>(velocity: f64) -> ResidualFn<T> {
    Arc::new(move |ctx: &mut ResidualContext<'_, T>| {
        let ux = ctx.partial(&[0])?;
        let ut = ctx.partial(&[1])?;
        let v = ctx.constant(velocity);
        let vux = ctx.tape().mul(v, ux);
        Ok(ctx.tape().add(ut, vux))
    })
}

/// `u_t + v·u_x = 0` with exact initial and inflow data from the decaying
/// closed form.
pub fn transport_problem<T: Scalar>(config: &TransportConfig) -> PdeProblem<T> {
    let (nx, nt) = config.collocation;
    let mut collocation = Vec::with_capacity(nx * nt);
    for &x in &linspace(0.0, config.x_max, nx) {
        for &t in &linspace(0.0, config.t_max, nt) {
            collocation.push(vec![x, t]);
        }
    }
    let exact = |x: f64, t: f64| exact_transport(x, t, config.velocity, Convention::Decaying);
    let mut conditions: Vec<ConditionSample> = linspace(0.0, config.x_max, config.initial_points)
        .into_iter()
        .map(|x| ConditionSample { coords: vec![x, 0.0], target: exact(x, 0.0) })
        .collect();
    conditions.extend(
        linspace(0.0, config.t_max, config.boundary_points)
            .into_iter()
            .map(|t| ConditionSample { coords: vec![0.0, t], target: exact(0.0, t) }),
    );
    PdeProblem {
        bounds: vec![(0.0, config.x_max), (0.0, config.t_max)],
        collocation,
        conditions,
        residual: transport_residual(config.velocity),
    }
}

/// The single-sample problem of the toy trace: residual at `(0.1, 0.1)` and
/// the initial condition at `x = 0.1`.
pub fn paper_sample_problem<T: Scalar>() -> PdeProblem<T> {
    PdeProblem {
        bounds: vec![(0.0, 1.0), (0.0, 1.0)],
        collocation: vec![vec![0.1, 0.1]],
        conditions: vec![ConditionSample { coords: vec![0.1, 0.0], target: 0.1 * (-0.01f64).exp() }],
        residual: transport_residual(3.0),
    }
}

fn mean_abs_fd_residual<T: Scalar>(net: &Network<T>, problem: &PdeProblem<T>, velocity: f64) -> Result<f64> {
    let h = 1e-4;
    let u = |x: f64, t: f64| -> Result<f64> { Ok(net.predict(&[T::lit(x), T::lit(t)])?[0].to_f64_lossy()) };
    let mut total = 0.0;
    for p in &problem.collocation {
        let (x, t) = (p[0], p[1]);
        let ux = (u(x + h, t)? - u(x - h, t)?) / (2.0 * h);
        let ut = (u(x, t + h)? - u(x, t - h)?) / (2.0 * h);
        total += (ut + velocity * ux).abs();
    }
    Ok(total / problem.collocation.len().max(1) as f64)
}

/// Trains a squared-loss PINN for the transport equation and scores it on
/// the evaluation grid against the decaying closed form.
pub fn solve_transport<T: Scalar>(config: &TransportConfig) -> Result<(Network<T>, TransportReport)> {
    let (nx, nt) = config.collocation;
    if nx < 2 || nt < 2 || config.eval_grid.0 < 2 || config.eval_grid.1 < 2 {
        return Err(PinnError::Config("grids need at least 2 points per axis".into()));
    }
    let mut sizes = vec![2];
    sizes.extend(&config.hidden);
    sizes.push(1);
    let arch = Architecture::uniform(sizes, config.activation, Activation::Linear)?;
    let net = init_network::<T>(&arch, InitScheme::Glorot, config.seed)?.with_biases(true);
    let problem = transport_problem::<T>(config);
    let mut loss = build_pinn_loss(&problem, &net, LossMode::Squared)?;
    log::info!("transport loss tape: {} nodes", loss.tape().len());
    let fit_config = FitConfig { epochs: config.epochs, learning_rate: config.learning_rate, optimizer: config.optimizer };
    let (trained, history) = fit(&net, &mut loss, fit_config)?;
    let last = loss.evaluate(&trained.params())?;

    let (ex, et) = config.eval_grid;
    let mut sq = 0.0;
    let mut max_abs = 0.0f64;
    for &x in &linspace(0.0, config.x_max, ex) {
        for &t in &linspace(0.0, config.t_max, et) {
            let pred = trained.predict(&[T::lit(x), T::lit(t)])?[0].to_f64_lossy();
            let err = pred - exact_transport(x, t, config.velocity, Convention::Decaying);
            sq += err * err;
            max_abs = max_abs.max(err.abs());
        }
    }
    let report = TransportReport {
        rmse: (sq / (ex * et) as f64).sqrt(),
        max_abs_error: max_abs,
        final_loss: last.loss.to_f64_lossy(),
        residual_term: last.residual_term.to_f64_lossy(),
        condition_term: last.condition_term.to_f64_lossy(),
        mean_abs_residual: mean_abs_fd_residual(&trained, &problem, config.velocity)?,
        loss_history: history.iter().map(|v| v.to_f64_lossy()).collect(),
    };
    Ok((trained, report))
}
