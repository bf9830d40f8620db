use chrono::{Duration, NaiveDate};
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::data::{lonlat_scale, BoundingBox, EventRecord, TimeWindow};
use crate::error::{Error, Result};
use crate::inference::rng;
use crate::kernels::{von_mises_interval_mass, Concentration};

/// Gaussian spatial cluster with a von Mises time-of-day profile, moving by
/// a fixed offset each week.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCluster {
    pub lon: f64,
    pub lat: f64,
    pub sd_km: f64,
    pub weight: f64,
    pub peak_hour: f64,
    pub kappa: f64,
    pub drift_km_per_week: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub clusters: Vec<SyntheticCluster>,
    /// Share of events uniform over the bbox and the day.
    pub background: f64,
    pub bbox: BoundingBox,
    pub start: NaiveDate,
    pub weeks: usize,
    /// Mean events per week (Poisson).
    pub rate: f64,
    pub seed: u64,
    #[serde(default)]
    pub flares: Option<FlareSpec>,
}

/// Short-lived clusters appearing at random places: structure that history
/// cannot predict but intel about the coming week can.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlareSpec {
    /// Mean number of new flares per week (Poisson).
    pub per_week: f64,
    /// Weeks a flare stays active, including its first.
    pub lifetime_weeks: usize,
    /// Share of events drawn from active flares when any are active.
    pub share: f64,
    pub sd_km: f64,
    pub kappa: f64,
}

/// One Gaussian-by-von-Mises mixture component in degrees.
#[derive(Debug, Clone, Copy)]
struct Component {
    weight: f64,
    lon: f64,
    lat: f64,
    sd_lon: f64,
    sd_lat: f64,
    peak_hour: f64,
    kappa: f64,
}

impl SyntheticSpec {
    /// Several clusters with distinct daily peaks around a city centre.
    pub fn city(start: NaiveDate, weeks: usize, rate: f64, seed: u64) -> Self {
        let (lon0, lat0) = (77.2, 28.6);
        let c = |dx: f64, dy: f64, sd: f64, w: f64, peak: f64, kappa: f64| SyntheticCluster {
            lon: lon0 + dx,
            lat: lat0 + dy,
            sd_km: sd,
            weight: w,
            peak_hour: peak,
            kappa,
            drift_km_per_week: (0.0, 0.0),
        };
        Self {
            clusters: vec![
                c(-0.030, 0.020, 0.35, 0.25, 21.0, 0.75),
                c(0.025, 0.018, 0.45, 0.2, 9.0, 0.75),
                c(0.010, -0.025, 0.30, 0.2, 14.0, 0.625),
                c(-0.020, -0.015, 0.55, 0.15, 2.0, 0.5),
                c(0.035, -0.005, 0.25, 0.2, 18.0, 1.0),
            ],
            background: 0.2,
            bbox: BoundingBox::around(lon0, lat0, 10.0, 10.0),
            start,
            weeks,
            rate,
            seed,
            flares: None,
        }
    }

    /// [`SyntheticSpec::city`] plus flares that last two weeks.
    pub fn city_with_flares(start: NaiveDate, weeks: usize, rate: f64, seed: u64) -> Self {
        Self {
            flares: Some(FlareSpec {
                per_week: 3.0,
                lifetime_weeks: 2,
                share: 0.15,
                sd_km: 0.3,
                kappa: 2.0,
            }),
            ..Self::city(start, weeks, rate, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.bbox.validate()?;
        if !(self.rate > 0.0) {
            return Err(Error::arg("synthetic rate must be positive"));
        }
        if !(0.0..=1.0).contains(&self.background) {
            return Err(Error::arg("background share must be in [0, 1]"));
        }
        if self.clusters.is_empty() && self.background < 1.0 {
            return Err(Error::arg("need clusters unless the background share is 1"));
        }
        if self.clusters.iter().any(|c| !(c.sd_km > 0.0 && c.weight >= 0.0 && c.kappa >= 0.0)) {
            return Err(Error::arg("cluster sd must be > 0, weight and kappa >= 0"));
        }
        if let Some(f) = &self.flares {
            if !(f.per_week >= 0.0 && f.lifetime_weeks > 0 && (0.0..1.0).contains(&f.share) && f.sd_km > 0.0 && f.kappa >= 0.0) {
                return Err(Error::arg("flares need per_week >= 0, lifetime >= 1, share in [0, 1), sd > 0, kappa >= 0"));
            }
            if self.clusters.is_empty() && self.background + f.share < 1.0 {
                return Err(Error::arg("need clusters unless background and flares cover every event"));
            }
        }
        Ok(())
    }

    /// Flares born in week `birth` (may precede week 0).
    fn flares_born(&self, f: &FlareSpec, birth: i64) -> Vec<(f64, f64, f64)> {
        let mut r = rng::stream(self.seed, 0xF1A2E, birth as u64, 0);
        let count = Poisson::new(f.per_week).map_or(0, |p| p.sample(&mut r) as usize);
        let b = &self.bbox;
        let (mx, my) = (0.1 * (b.east - b.west), 0.1 * (b.north - b.south));
        (0..count)
            .map(|_| {
                (
                    r.random_range(b.west + mx..b.east - mx),
                    r.random_range(b.south + my..b.north - my),
                    r.random_range(0.0..24.0),
                )
            })
            .collect()
    }

    /// Mixture components of `week`, weights summing to `1 - background`.
    fn components(&self, week: usize) -> Vec<Component> {
        let mut flares = Vec::new();
        if let Some(f) = self.flares.as_ref().filter(|f| f.per_week > 0.0) {
            for birth in week as i64 + 1 - f.lifetime_weeks as i64..=week as i64 {
                for (lon, lat, peak) in self.flares_born(f, birth) {
                    let (kx, ky) = lonlat_scale(lat);
                    flares.push(Component {
                        weight: 0.0,
                        lon,
                        lat,
                        sd_lon: f.sd_km / kx,
                        sd_lat: f.sd_km / ky,
                        peak_hour: peak,
                        kappa: f.kappa,
                    });
                }
            }
        }
        let flare_share = match (&self.flares, flares.is_empty()) {
            (Some(f), false) => f.share,
            _ => 0.0,
        };
        let total: f64 = self.clusters.iter().map(|c| c.weight).sum();
        let cluster_share = if total > 0.0 { 1.0 - self.background - flare_share } else { 0.0 };
        let mut out: Vec<Component> = self
            .clusters
            .iter()
            .map(|c| {
                let (cx, cy) = self.centre(c, week);
                let (kx, ky) = lonlat_scale(c.lat);
                Component {
                    weight: c.weight / total * cluster_share,
                    lon: cx,
                    lat: cy,
                    sd_lon: c.sd_km / kx,
                    sd_lat: c.sd_km / ky,
                    peak_hour: c.peak_hour,
                    kappa: c.kappa,
                }
            })
            .collect();
        let nf = flares.len() as f64;
        let left = 1.0 - self.background - out.iter().map(|c| c.weight).sum::<f64>();
        out.extend(flares.into_iter().map(|c| Component { weight: left / nf, ..c }));
        out
    }

    fn centre(&self, c: &SyntheticCluster, week: usize) -> (f64, f64) {
        let (kx, ky) = lonlat_scale(c.lat);
        (
            c.lon + c.drift_km_per_week.0 * week as f64 / kx,
            c.lat + c.drift_km_per_week.1 * week as f64 / ky,
        )
    }

    pub fn week_of(&self, date: NaiveDate) -> usize {
        ((date - self.start).num_days().max(0) / 7) as usize
    }

    pub fn week_start(&self, week: usize) -> NaiveDate {
        self.start + Duration::days(7 * week as i64)
    }

    /// True spatial density (per square degree) of events in `window` during
    /// `week`, normalised over the plane.
    pub fn interval_density(&self, lon: f64, lat: f64, window: TimeWindow, week: usize) -> f64 {
        let len = (window.end() - window.start()) / 24.0;
        let b = &self.bbox;
        let area = (b.east - b.west) * (b.north - b.south);
        let inside = if b.contains(lon, lat) { 1.0 / area } else { 0.0 };
        let mut num = self.background * len * inside;
        let mut den = self.background * len;
        for c in self.components(week) {
            let mass = Concentration::new(c.kappa)
                .map(|k| von_mises_interval_mass(c.peak_hour, window.start(), window.end(), k))
                .unwrap_or(len);
            let g = (-((lon - c.lon) / c.sd_lon).powi(2) / 2.0 - ((lat - c.lat) / c.sd_lat).powi(2) / 2.0).exp()
                / (std::f64::consts::TAU * c.sd_lon * c.sd_lat);
            num += c.weight * mass * g;
            den += c.weight * mass;
        }
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    }
}

/// Best-Fisher rejection sampler for the von Mises angle on `(-pi, pi]`.
fn von_mises_angle<R: Rng + ?Sized>(kappa: f64, rng: &mut R) -> f64 {
    use std::f64::consts::PI;
    if kappa < 1e-8 {
        return rng.random_range(-PI..PI);
    }
    let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
    let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
    let r = (1.0 + rho * rho) / (2.0 * rho);
    loop {
        let u1: f64 = rng.random();
        let z = (PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let c = kappa * (r - f);
        let u2: f64 = rng.random();
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            let u3: f64 = rng.random();
            let s = if u3 > 0.5 { 1.0 } else { -1.0 };
            return s * f.acos();
        }
    }
}

/// Events from the spec's known mixture, Poisson many per week.
pub fn generate_synthetic_events(spec: &SyntheticSpec) -> Result<Vec<EventRecord>> {
    spec.validate()?;
    let mut out = Vec::new();
    let b = &spec.bbox;
    let normal = Normal::new(0.0, 1.0).map_err(|e| Error::arg(e.to_string()))?;
    let poisson = Poisson::new(spec.rate).map_err(|e| Error::arg(e.to_string()))?;
    for week in 0..spec.weeks {
        let comps = spec.components(week);
        let mut r = rng::stream(spec.seed, 0x5E7, week as u64, 0);
        let n = poisson.sample(&mut r) as usize;
        for _ in 0..n {
            let day = spec.week_start(week) + Duration::days(r.random_range(0..7));
            let u: f64 = r.random();
            let (lon, lat, hours) = if u < spec.background || comps.is_empty() {
                (
                    r.random_range(b.west..b.east),
                    r.random_range(b.south..b.north),
                    r.random_range(0.0..24.0),
                )
            } else {
                let mut acc = spec.background;
                let k = comps
                    .iter()
                    .position(|c| {
                        acc += c.weight;
                        u < acc
                    })
                    .unwrap_or(comps.len() - 1);
                let c = comps[k];
                let lon = c.lon + normal.sample(&mut r) * c.sd_lon;
                let lat = c.lat + normal.sample(&mut r) * c.sd_lat;
                let a = von_mises_angle(c.kappa, &mut r);
                let h = (c.peak_hour + a * 12.0 / std::f64::consts::PI).rem_euclid(24.0);
                (lon, lat, if h >= 24.0 { 0.0 } else { h })
            };
            out.push(EventRecord::new(format!("S{}", out.len() + 1), lon, lat, day, hours));
        }
    }
    Ok(out)
}
