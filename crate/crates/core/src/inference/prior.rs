use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Discrete supports used for the non-conjugate Gibbs steps. The continuous
/// priors are flat on `alpha` over `(0, inf)`, flat on `beta` over `[0, 1]`
/// and Dirichlet(1, ..., 1) on the block weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub beta_grid: Vec<f64>,
    pub alpha3_grid: Vec<f64>,
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self {
            beta_grid: (0..100).map(|i| f64::from(i) / 100.0).collect(),
            alpha3_grid: (0..=1000).map(|i| f64::from(i) / 100.0).collect(),
        }
    }
}

impl PriorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.beta_grid.is_empty() || self.alpha3_grid.is_empty() {
            return Err(Error::arg("prior grids must be non-empty"));
        }
        if self.beta_grid.iter().any(|&b| !(0.0..1.0).contains(&b)) {
            return Err(Error::arg("beta grid must lie in [0, 1)"));
        }
        if self.alpha3_grid.iter().any(|&a| !(a >= 0.0 && a.is_finite())) {
            return Err(Error::arg("alpha3 grid must be non-negative"));
        }
        Ok(())
    }

    /// Grid atom nearest to `v`.
    pub fn snap(grid: &[f64], v: f64) -> f64 {
        grid.iter()
            .copied()
            .min_by(|a, b| (a - v).abs().total_cmp(&(b - v).abs()))
            .unwrap_or(v)
    }
}

/// Warm-up and retained sweep counts per chain, and number of chains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GibbsSchedule {
    pub warmup: usize,
    pub samples: usize,
    pub chains: usize,
}

impl Default for GibbsSchedule {
    fn default() -> Self {
        Self {
            warmup: 100,
            samples: 100,
            chains: 1,
        }
    }
}

impl GibbsSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 || self.chains == 0 {
            return Err(Error::arg("schedule needs at least one retained sample and one chain"));
        }
        Ok(())
    }
}
