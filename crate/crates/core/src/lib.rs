//! Spatio-temporal crime hotspot forecasting with a block-weighted adaptive
//! kernel density, Gibbs-sampled parameters and optional analyst intel.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix it to `f64`.

pub mod data;
pub mod density;
pub mod error;
pub mod evaluation;
pub mod expert;
pub mod forecast;
pub mod inference;
pub mod kernels;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type ModelParams = density::ModelParams<f64>;
pub type LocalScales = density::LocalScales<f64>;
pub type Bandwidths = density::Bandwidths<f64>;
pub type KernelData = density::KernelData<f64>;
pub type MixtureDensity = density::MixtureDensity<f64>;
pub type PosteriorSamples = inference::PosteriorSamples<f64>;
pub type FittedModel = inference::FittedModel<f64>;
pub type ForecastInput = forecast::ForecastInput<f64>;
