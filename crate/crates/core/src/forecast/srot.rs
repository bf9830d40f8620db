use serde::{Deserialize, Serialize};

use crate::data::EventRecord;
use crate::error::{Error, Result};

/// Rule-of-thumb fixed bandwidths: degrees for `h1`/`h2`, hours for `h3`,
/// and the matching concentration `tau = 1 / h3^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SrotBandwidths {
    pub h1: f64,
    pub h2: f64,
    pub h3: f64,
    pub tau: f64,
}

/// Sample standard deviation (n - 1 denominator).
pub fn sample_sd(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Linear-interpolation quantile on sorted data (Hyndman-Fan type 7).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn iqr(xs: &[f64]) -> f64 {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    quantile_sorted(&s, 0.75) - quantile_sorted(&s, 0.25)
}

/// Circular standard deviation `sqrt(-2 ln R)` of angles in radians.
pub fn circular_sd(angles: &[f64]) -> f64 {
    let n = angles.len() as f64;
    let c = angles.iter().map(|a| a.cos()).sum::<f64>() / n;
    let s = angles.iter().map(|a| a.sin()).sum::<f64>() / n;
    let r = (c * c + s * s).sqrt().min(1.0);
    (-2.0 * r.ln()).max(0.0).sqrt()
}

/// `0.9 * min(sd, IQR / 1.34) * n^(-1/5)`.
pub fn silverman(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    0.9 * sample_sd(xs).min(iqr(xs) / 1.34) * n.powf(-0.2)
}

/// Silverman's rule over the pooled longitudes, latitudes and times of day.
pub fn srot_bandwidths<'a>(events: impl IntoIterator<Item = &'a EventRecord>) -> Result<SrotBandwidths> {
    let (mut lon, mut lat, mut ang) = (Vec::new(), Vec::new(), Vec::new());
    for e in events {
        lon.push(e.lon);
        lat.push(e.lat);
        ang.push(std::f64::consts::TAU * e.time_of_day / 24.0);
    }
    srot_from_columns(&lon, &lat, &ang)
}

pub(crate) fn srot_from_columns(lon: &[f64], lat: &[f64], angles: &[f64]) -> Result<SrotBandwidths> {
    let n = lon.len();
    if n < 2 {
        return Err(Error::arg(format!("rule-of-thumb bandwidths need at least 2 points, got {n}")));
    }
    let h1 = silverman(lon);
    let h2 = silverman(lat);
    let h3 = 0.9 * 24.0 / std::f64::consts::TAU * circular_sd(angles) * (n as f64).powf(-0.2);
    for (name, h) in [("longitude", h1), ("latitude", h2), ("time", h3)] {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::arg(format!("degenerate {name} spread: rule-of-thumb bandwidth is {h}")));
        }
    }
    Ok(SrotBandwidths { h1, h2, h3, tau: 1.0 / (h3 * h3) })
}
