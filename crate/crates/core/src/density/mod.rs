//! The block-weighted adaptive spatio-temporal mixture density: preliminary
//! fixed-bandwidth density, local scale factors, adaptive bandwidths and
//! point evaluation.

mod mixture;
mod params;
mod points;
mod scales;

pub use mixture::{mixture_density_at, preliminary_fixed_kde, EvalOptions, MixtureDensity, WindowFactors, PRUNE_BANDWIDTHS};
pub use params::{ModelParams, TimeParams};
pub use points::{Frame, KernelData, TrainingPoints};
pub use scales::{adaptive_bandwidths, compute_local_scales, Bandwidths, LocalScales};
