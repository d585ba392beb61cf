use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{build_pinn_loss, fit, ConditionSample, FitConfig, LossMode, PdeProblem, ResidualContext, Result};
use crate::network::{init_network, Activation, Architecture, InitScheme, Network, Optimizer};
use crate::Scalar;

/// `Q'' + Q' − b = 0` on `[0, 1]` with `Q(0) = q0` and `Q(1) = q1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneBvp {
    pub name: String,
    pub b: f64,
    pub q0: f64,
    pub q1: f64,
}

impl ZoneBvp {
    pub fn flat() -> Self {
        Self { name: "flat".into(), b: 1.0, q0: 0.0, q1: 0.2 }
    }

    pub fn stepped() -> Self {
        Self { name: "stepped".into(), b: -2.0, q0: 1.0, q1: 0.0 }
    }
}

/// Closed form `Q = b·x + C₁ + C₂·e^{−x}`.
pub fn bvp_exact(zone: &ZoneBvp, x: f64) -> f64 {
    let c2 = (zone.q1 - zone.b - zone.q0) / ((-1.0f64).exp() - 1.0);
    let c1 = zone.q0 - c2;
    zone.b * x + c1 + c2 * (-x).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeteroConfig {
    pub zones: [ZoneBvp; 2],
    pub hidden: Vec<usize>,
    pub collocation_points: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub seeds: Vec<u64>,
    pub eval_points: usize,
}

impl Default for HeteroConfig {
    fn default() -> Self {
        Self {
            zones: [ZoneBvp::flat(), ZoneBvp::stepped()],
            hidden: vec![8, 8],
            collocation_points: 21,
            epochs: 1500,
            learning_rate: 0.01,
            optimizer: Optimizer::adam(),
            seeds: (0..10).collect(),
            eval_points: 101,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeteroCell {
    pub seed: u64,
    /// `M1`, `M2` or `M3`.
    pub model: String,
    pub zone: String,
    pub error_avg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeteroReport {
    pub zones: [String; 2],
    pub cells: Vec<HeteroCell>,
}

impl HeteroReport {
    pub fn error(&self, seed: u64, model: &str, zone: &str) -> Option<f64> {
        self.cells.iter().find(|c| c.seed == seed && c.model == model && c.zone == zone).map(|c| c.error_avg)
    }

    /// Whether the unified model is worse than zone `k`'s own model on zone `k`.
    pub fn postulate_holds(&self, seed: u64, zone_index: usize) -> bool {
        let zone = &self.zones[zone_index];
        let own = format!("M{}", zone_index + 1);
        match (self.error(seed, "M3", zone), self.error(seed, &own, zone)) {
            (Some(unified), Some(local)) => unified > local,
            _ => false,
        }
    }

    pub fn seeds(&self) -> Vec<u64> {
        let mut s: Vec<u64> = self.cells.iter().map(|c| c.seed).collect();
        s.dedup();
        s
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("seed,model,zone,error_avg\r\n");
        for c in &self.cells {
            out.push_str(&format!("{},{},{},{:.6}\r\n", c.seed, c.model, crate::metrics::csv_field(&c.zone), c.error_avg));
        }
        out
    }
}

fn linspace01(n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![0.0; n];
    }
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}

/// One problem over the listed zones on a shared local coordinate; each
/// collocation point carries its zone's forcing.
fn pooled_problem<T: Scalar>(zones: &[&ZoneBvp], n: usize) -> PdeProblem<T> {
    let xs = linspace01(n);
    let mut collocation = Vec::new();
    let mut forcing = Vec::new();
    let mut conditions = Vec::new();
    for z in zones {
        for &x in &xs {
            collocation.push(vec![x]);
            forcing.push(z.b);
        }
        conditions.push(ConditionSample { coords: vec![0.0], target: z.q0 });
        conditions.push(ConditionSample { coords: vec![1.0], target: z.q1 });
    }
    let forcing = Arc::new(forcing);
    PdeProblem {
        bounds: vec![(0.0, 1.0)],
        collocation,
        conditions,
        residual: Arc::new(move |ctx: &mut ResidualContext<'_, T>| {
            let qxx = ctx.partial(&[0, 0])?;
            let qx = ctx.partial(&[0])?;
            let b = ctx.constant(forcing[ctx.index()]);
            let s = ctx.tape().add(qxx, qx);
            Ok(ctx.tape().sub(s, b))
        }),
    }
}

fn error_avg<T: Scalar>(net: &Network<T>, zone: &ZoneBvp, n: usize) -> Result<f64> {
    let xs = linspace01(n);
    let mut total = 0.0;
    for &x in &xs {
        let q = net.predict(&[T::lit(x)])?[0].to_f64_lossy();
        total += (q - bvp_exact(zone, x)).abs();
    }
    Ok(total / xs.len().max(1) as f64)
}

/// Trains the two zone models and the pooled model for every seed and
/// reports the mean absolute error of each model on each zone.
///
/// All three models share architecture, initialization and epoch budget.
pub fn heterogeneity_experiment<T: Scalar>(config: &HeteroConfig) -> Result<HeteroReport> {
    let mut sizes = vec![1];
    sizes.extend(&config.hidden);
    sizes.push(1);
    let arch = Architecture::uniform(sizes, Activation::Tanh, Activation::Linear)?;
    let [z1, z2] = &config.zones;
    let problems: [PdeProblem<T>; 3] = [
        pooled_problem(&[z1], config.collocation_points),
        pooled_problem(&[z2], config.collocation_points),
        pooled_problem(&[z1, z2], config.collocation_points),
    ];
    let fit_config = FitConfig { epochs: config.epochs, learning_rate: config.learning_rate, optimizer: config.optimizer };
    let mut cells = Vec::with_capacity(config.seeds.len() * 6);
    for &seed in &config.seeds {
        let init = init_network::<T>(&arch, InitScheme::Glorot, seed)?.with_biases(true);
        let trained: Vec<Result<Network<T>>> = std::thread::scope(|s| {
            let handles: Vec<_> = problems
                .iter()
                .map(|p| {
                    let init = &init;
                    s.spawn(move || -> Result<Network<T>> {
                        let mut loss = build_pinn_loss(p, init, LossMode::Squared)?;
                        Ok(fit(init, &mut loss, fit_config)?.0)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("training thread panicked")).collect()
        });
        for (m, net) in trained.into_iter().enumerate() {
            let net = net?;
            for zone in [z1, z2] {
                cells.push(HeteroCell {
                    seed,
                    model: format!("M{}", m + 1),
                    zone: zone.name.clone(),
                    error_avg: error_avg(&net, zone, config.eval_points)?,
                });
            }
        }
    }
    Ok(HeteroReport { zones: [z1.name.clone(), z2.name.clone()], cells })
}
