use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Time-of-day bandwidth parameters; absent for purely spatial models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TimeParams<T> {
    /// Inverse time bandwidth scale, hours^-1.
    pub alpha3: T,
    pub beta3: T,
}

/// One parameter vector: bandwidth scales and exponents plus block weights.
///
/// `alpha1`/`alpha2` are inverse bandwidths in degrees^-1 along longitude and
/// latitude. `weights` run over the historical blocks oldest first, followed
/// by the expert block when one is present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ModelParams<T> {
    pub alpha1: T,
    pub beta1: T,
    pub alpha2: T,
    pub beta2: T,
    pub time: Option<TimeParams<T>>,
    pub weights: Vec<T>,
}

impl<T: Scalar> ModelParams<T> {
    /// Fixed-bandwidth parameters: `h1 = 1/alpha1`, `h2 = 1/alpha2`, `tau = alpha3^2`.
    pub fn fixed(alpha1: T, alpha2: T, alpha3: Option<T>, weights: Vec<T>) -> Self {
        Self {
            alpha1,
            beta1: T::zero(),
            alpha2,
            beta2: T::zero(),
            time: alpha3.map(|alpha3| TimeParams { alpha3, beta3: T::zero() }),
            weights,
        }
    }

    pub fn uniform_weights(k: usize) -> Vec<T> {
        vec![T::one() / T::from_usize_lossy(k.max(1)); k]
    }

    pub fn is_spatial_only(&self) -> bool {
        self.time.is_none()
    }

    fn weight_tolerance(&self) -> T {
        let n = T::from_usize_lossy(self.weights.len().max(1));
        T::of(1e-12).max(T::epsilon() * T::of(16.0) * n)
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: T| v.is_finite() && v > T::zero();
        let unit = |v: T| v.is_finite() && v >= T::zero() && v < T::one();
        if !pos(self.alpha1) || !pos(self.alpha2) {
            return Err(Error::arg(format!(
                "alpha1/alpha2 must be positive, got {}/{}",
                self.alpha1, self.alpha2
            )));
        }
        if !unit(self.beta1) || !unit(self.beta2) {
            return Err(Error::arg("beta1/beta2 must lie in [0, 1)"));
        }
        if let Some(tp) = self.time {
            if !(tp.alpha3.is_finite() && tp.alpha3 >= T::zero()) || !unit(tp.beta3) {
                return Err(Error::arg("alpha3 must be >= 0 and beta3 in [0, 1)"));
            }
        }
        if self.weights.is_empty() || self.weights.iter().any(|&w| !(w >= T::zero()) || !w.is_finite()) {
            return Err(Error::arg("weights must be non-negative and non-empty"));
        }
        let total: T = self.weights.iter().copied().sum();
        if (total - T::one()).abs() > self.weight_tolerance() {
            return Err(Error::arg(format!("weights sum to {total}, not 1")));
        }
        Ok(())
    }

    /// Rescale the weights onto the simplex.
    pub fn normalize_weights(&mut self) {
        let total: T = self.weights.iter().copied().sum();
        if total > T::zero() {
            for w in &mut self.weights {
                *w = *w / total;
            }
        }
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        let c = |v: T| U::of(v.as_f64());
        ModelParams {
            alpha1: c(self.alpha1),
            beta1: c(self.beta1),
            alpha2: c(self.alpha2),
            beta2: c(self.beta2),
            time: self.time.map(|tp| TimeParams { alpha3: c(tp.alpha3), beta3: c(tp.beta3) }),
            weights: self.weights.iter().map(|&w| c(w)).collect(),
        }
    }
}
