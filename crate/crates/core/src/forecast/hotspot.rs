use std::io::Write;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::data::{CellId, SpatialGrid, TimeWindow};
use crate::density::MixtureDensity;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HotspotClass {
    Red,
    Yellow,
    Other,
}

impl HotspotClass {
    pub const ALL: [HotspotClass; 3] = [Self::Red, Self::Yellow, Self::Other];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Red => "red",
            Self::Yellow => "yellow",
            Self::Other => "other",
        }
    }

    pub fn index(&self) -> usize {
        *self as usize
    }

    pub fn is_hot(&self) -> bool {
        !matches!(self, Self::Other)
    }
}

/// Percent of cells marked red, then yellow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassThresholds {
    pub red_pct: f64,
    pub yellow_pct: f64,
}

impl Default for ClassThresholds {
    fn default() -> Self {
        Self {
            red_pct: 20.0,
            yellow_pct: 20.0,
        }
    }
}

/// Forecast map for one week and daily window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HotspotGrid {
    pub week: Option<NaiveDate>,
    pub window: TimeWindow,
    pub model: String,
    pub grid_fingerprint: String,
    /// Per cell id.
    pub log_density: Vec<f64>,
    pub density: Vec<f64>,
    /// 1-based rank, 1 = highest density.
    pub rank: Vec<u32>,
    pub class: Vec<HotspotClass>,
    /// Cell ids by descending density, ties by ascending id.
    pub order: Vec<CellId>,
}

impl HotspotGrid {
    /// Rank and classify per-cell log densities.
    pub fn from_log_density(
        log_density: Vec<f64>,
        grid: &SpatialGrid,
        week: Option<NaiveDate>,
        window: TimeWindow,
        model: impl Into<String>,
        thresholds: ClassThresholds,
    ) -> Result<Self> {
        let n = log_density.len();
        if n != grid.len() {
            return Err(Error::GridMismatch(format!("{n} values for {} cells", grid.len())));
        }
        let key = |v: f64| if v.is_nan() { f64::NEG_INFINITY } else { v };
        let mut order: Vec<CellId> = (0..n as CellId).collect();
        order.sort_by(|&a, &b| {
            key(log_density[b as usize])
                .total_cmp(&key(log_density[a as usize]))
                .then(a.cmp(&b))
        });
        let n_red = (n as f64 * thresholds.red_pct / 100.0).ceil() as usize;
        let n_yellow = (n as f64 * thresholds.yellow_pct / 100.0).ceil() as usize;
        let mut rank = vec![0; n];
        let mut class = vec![HotspotClass::Other; n];
        for (r, &id) in order.iter().enumerate() {
            rank[id as usize] = r as u32 + 1;
            class[id as usize] = if r < n_red {
                HotspotClass::Red
            } else if r < n_red + n_yellow {
                HotspotClass::Yellow
            } else {
                HotspotClass::Other
            };
        }
        Ok(Self {
            week,
            window,
            model: model.into(),
            grid_fingerprint: grid.fingerprint(),
            density: log_density.iter().map(|l| l.exp()).collect(),
            log_density,
            rank,
            class,
            order,
        })
    }

    pub fn len(&self) -> usize {
        self.rank.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rank.is_empty()
    }

    /// Rank percentile in `(0, 100]`.
    pub fn rank_pct(&self, id: CellId) -> f64 {
        100.0 * self.rank[id as usize] as f64 / self.len() as f64
    }

    pub fn class_count(&self, c: HotspotClass) -> usize {
        self.class.iter().filter(|&&x| x == c).count()
    }

    pub fn check_same_grid(&self, other: &HotspotGrid) -> Result<()> {
        if self.grid_fingerprint != other.grid_fingerprint || self.len() != other.len() {
            return Err(Error::GridMismatch(format!(
                "maps are on different grids ({} vs {})",
                self.grid_fingerprint, other.grid_fingerprint
            )));
        }
        Ok(())
    }

    /// GeoJSON FeatureCollection of cell polygons with
    /// `{cell_id, density, rank_pct, class}`.
    pub fn to_geojson(&self, grid: &SpatialGrid) -> Result<Value> {
        if grid.fingerprint() != self.grid_fingerprint {
            return Err(Error::GridMismatch("map was not computed on this grid".into()));
        }
        let features: Vec<Value> = (0..self.len() as CellId)
            .map(|id| {
                json!({
                    "type": "Feature",
                    "geometry": {"type": "Polygon", "coordinates": [grid.polygon(id)]},
                    "properties": {
                        "cell_id": id,
                        "density": self.density[id as usize],
                        "rank_pct": self.rank_pct(id),
                        "class": self.class[id as usize].as_str(),
                    },
                })
            })
            .collect();
        Ok(json!({
            "type": "FeatureCollection",
            "properties": {
                "week": self.week.map(|d| d.to_string()),
                "window": self.window.to_string(),
                "model": self.model,
            },
            "features": features,
        }))
    }

    /// CSV with `cell_id,density,rank_pct,class`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["cell_id", "density", "rank_pct", "class"])?;
        for id in 0..self.len() as CellId {
            w.write_record([
                id.to_string(),
                self.density[id as usize].to_string(),
                self.rank_pct(id).to_string(),
                self.class[id as usize].as_str().to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("forecast csv", e))?;
        Ok(())
    }
}

/// Windowed spatial predictive density at every cell centre, ranked and
/// classified.
pub fn evaluate_grid<T: Scalar>(
    mixture: &MixtureDensity<T>,
    grid: &SpatialGrid,
    window: TimeWindow,
    week: Option<NaiveDate>,
    model: &str,
    thresholds: ClassThresholds,
) -> Result<HotspotGrid> {
    let factors = mixture.window_factors(window);
    if !(factors.denominator() > T::zero()) {
        return Err(Error::Forecast(format!("window {window} has zero total kernel mass")));
    }
    let log_density: Vec<f64> = (0..grid.len() as CellId)
        .into_par_iter()
        .with_min_len(64)
        .map(|id| {
            let (lon, lat) = grid.center(id);
            mixture.log_interval_density(lon, lat, &factors).as_f64()
        })
        .collect();
    HotspotGrid::from_log_density(log_density, grid, week, window, model, thresholds)
}
