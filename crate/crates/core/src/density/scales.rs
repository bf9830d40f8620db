use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mixture::MixtureDensity;
use super::params::ModelParams;
use super::points::KernelData;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Local density factors `A = f_p(point) / G`, one per kernel centre, where
/// `G` is the geometric mean of the preliminary density over all centres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LocalScales<T> {
    pub a: Vec<T>,
    pub log_g: T,
}

impl<T: Scalar> LocalScales<T> {
    /// All factors equal to one (fixed bandwidths).
    pub fn ones(n: usize) -> Self {
        Self {
            a: vec![T::one(); n],
            log_g: T::zero(),
        }
    }

    pub fn g(&self) -> T {
        self.log_g.exp()
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// Factors from raw log preliminary densities.
    pub fn from_log_densities(log_f: &[T], ids: &[String]) -> Result<Self> {
        if log_f.is_empty() {
            return Err(Error::Fit("no points to compute local scales for".into()));
        }
        if let Some(i) = log_f.iter().position(|v| !v.is_finite()) {
            return Err(Error::Fit(format!(
                "preliminary density is zero or non-finite at point {}",
                ids.get(i).map(String::as_str).unwrap_or("?")
            )));
        }
        let n = T::from_usize_lossy(log_f.len());
        let log_g = log_f.iter().copied().sum::<T>() / n;
        Ok(Self {
            a: log_f.iter().map(|&l| (l - log_g).exp()).collect(),
            log_g,
        })
    }
}

/// Evaluate `prelim` at every centre in `data` and normalise by the geometric mean.
pub fn compute_local_scales<T: Scalar>(data: &KernelData<T>, prelim: &MixtureDensity<T>) -> Result<LocalScales<T>> {
    let log_f: Vec<T> = (0..data.n_points())
        .into_par_iter()
        .map(|i| prelim.log_density_local(data.xs[i], data.ys[i], data.ts[i]))
        .collect();
    LocalScales::from_log_densities(&log_f, &data.ids)
}

/// Per-centre bandwidths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Bandwidths<T> {
    /// Longitude bandwidths, degrees.
    pub h1: Vec<T>,
    /// Latitude bandwidths, degrees.
    pub h2: Vec<T>,
    /// Von Mises concentrations; `None` for spatial-only models.
    pub tau: Option<Vec<T>>,
}

/// `h1 = 1/(alpha1 A^beta1)`, `h2 = 1/(alpha2 A^beta2)`, `tau = (alpha3 A^beta3)^2`.
pub fn adaptive_bandwidths<T: Scalar>(params: &ModelParams<T>, scales: &LocalScales<T>) -> Bandwidths<T> {
    let inv = |alpha: T, beta: T, a: T| T::one() / (alpha * a.powf(beta));
    Bandwidths {
        h1: scales.a.iter().map(|&a| inv(params.alpha1, params.beta1, a)).collect(),
        h2: scales.a.iter().map(|&a| inv(params.alpha2, params.beta2, a)).collect(),
        tau: params.time.map(|tp| {
            scales
                .a
                .iter()
                .map(|&a| {
                    let s = tp.alpha3 * a.powf(tp.beta3);
                    s * s
                })
                .collect()
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::TimeParams;
    use approx::assert_relative_eq;

    fn params(beta: f64) -> ModelParams<f64> {
        ModelParams {
            alpha1: 100.0,
            beta1: beta,
            alpha2: 50.0,
            beta2: beta,
            time: Some(TimeParams { alpha3: 2.0, beta3: beta }),
            weights: vec![1.0],
        }
    }

    #[test]
    fn two_point_geometric_mean() {
        let ids = vec!["a".to_string(), "b".to_string()];
        let s = LocalScales::from_log_densities(&[2.0_f64.ln(), 8.0_f64.ln()], &ids).unwrap();
        assert_relative_eq!(s.g(), 4.0, epsilon = 1e-12);
        assert_relative_eq!(s.a[0], 0.5, epsilon = 1e-12);
        assert_relative_eq!(s.a[1], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_density_gives_unit_scales() {
        let ids = vec![String::new(); 3];
        let s = LocalScales::from_log_densities(&[-3.0_f64; 3], &ids).unwrap();
        assert!(s.a.iter().all(|&a| (a - 1.0).abs() < 1e-15));
    }

    #[test]
    fn zero_density_names_the_point() {
        let ids = vec!["ok".to_string(), "bad".to_string()];
        let err = LocalScales::from_log_densities(&[0.0, f64::NEG_INFINITY], &ids).unwrap_err();
        assert!(err.to_string().contains("bad"));
    }

    #[test]
    fn unit_scales_give_fixed_bandwidths() {
        let bw = adaptive_bandwidths(&params(0.7), &LocalScales::ones(2));
        assert_eq!(bw.h1, vec![0.01, 0.01]);
        assert_eq!(bw.h2, vec![0.02, 0.02]);
        assert_eq!(bw.tau, Some(vec![4.0, 4.0]));
    }

    #[test]
    fn sqrt_rule() {
        let s = LocalScales { a: vec![4.0], log_g: 0.0 };
        let bw = adaptive_bandwidths(&params(0.5), &s);
        assert_relative_eq!(bw.h1[0], 1.0 / 200.0, epsilon = 1e-15);
        assert_relative_eq!(bw.tau.unwrap()[0], 16.0, epsilon = 1e-12);
    }

    #[test]
    fn time_bandwidth_in_minutes() {
        // h3 = 1/alpha3 hours.
        for (alpha3, minutes) in [(1.09_f64, 55.0), (0.916, 65.5), (1.27, 47.2)] {
            assert!((60.0 / alpha3 - minutes).abs() < 0.1, "{alpha3}");
        }
    }
}
