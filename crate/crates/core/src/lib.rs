//! Spatially zoned wetland models and the machinery used to interpret them.
//!
//! The crate is organised bottom-up:
//!
//! - [`raster`]: the SVR1 raster container, cropping, bilinear upsampling,
//!   tiling, polygon rasterization, dataset splits and a synthetic scene
//!   generator.
//! - [`indices`] and [`rules`]: normalized-difference indices and the
//!   interval rule classifiers built on them.
//! - [`metrics`]: confusion matrices and precision / recall / F1 / accuracy.
//! - [`autodiff`]: a scalar reverse-mode tape with symbolic derivative
//!   extension for higher-order terms.
//! - [`network`]: dense feed-forward networks on the tape plus a trainer.
//! - [`pinn`]: physics-informed losses, the transport demo and the
//!   two-zone heterogeneity experiment.
//! - [`svann`]: zonal registries, model selection and comparative reports.
//!
//! Numeric code in [`autodiff`], [`network`], [`pinn`] and [`metrics`] is
//! generic over [`Scalar`]; the aliases below fix the common choices.

// Negated comparisons are how parameter checks reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod indices;
pub mod io;
pub mod metrics;
pub mod network;
pub mod pinn;
pub mod raster;
pub mod rng;
pub mod rules;
pub mod scalar;
pub mod svann;

pub use scalar::Scalar;

/// Double-precision tape.
pub type Tape64 = autodiff::Tape<f64>;
/// Single-precision tape.
pub type Tape32 = autodiff::Tape<f32>;
/// Double-precision dense network.
pub type Network64 = network::Network<f64>;
/// Single-precision dense network.
pub type Network32 = network::Network<f32>;
/// Double-precision metric summary.
pub type Summary64 = metrics::Summary<f64>;
/// Double-precision paper-trace row.
pub type TraceRow64 = pinn::TraceRow<f64>;
