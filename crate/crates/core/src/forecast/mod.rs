//! Predictive densities for the upcoming week, the model zoo, grid
//! evaluation and hotspot classes.

mod hotspot;
mod predictive;
pub mod srot;
mod zoo;

pub use hotspot::{evaluate_grid, ClassThresholds, HotspotClass, HotspotGrid};
pub use predictive::{interval_spatial_density, predictive_density_point, ForecastInput};
pub use srot::{srot_bandwidths, SrotBandwidths};
pub use zoo::{abramson_adaptive, run_model, srot_of, BandwidthMode, ExpertInput, ModelFit, ModelSpec, WeightMode, ZooContext};
