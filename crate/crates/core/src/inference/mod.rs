//! Gibbs sampling with data augmentation for the mixture parameters, chain
//! management, posterior summaries and the two-stage fit.

mod chain;
mod fit;
mod prior;
mod problem;
pub mod rng;
mod steps;

pub use chain::{
    param_values, posterior_mean, posterior_summary, run_chain, run_chains, write_trace_csv, GibbsConfig,
    GibbsSampler, ParamSummary, PosteriorSamples,
};
pub use fit::{data_digest, fit, FitConfig, FittedModel, StageResult, ARTIFACT_VERSION};
pub use prior::{GibbsSchedule, PriorSpec};
pub use problem::{concentration, cos_gap, log_time_factor, AugmentationState, GibbsData, GibbsState};
pub use steps::{
    alpha3_log_conditional, beta_log_conditional, draw_log_categorical, sample_alpha3_grid, sample_alpha_spatial,
    sample_assignments, sample_beta_grid, sample_weights, scale_sum, AlphaDraw, Axis, StreamKey, RATE_FLOOR,
};
