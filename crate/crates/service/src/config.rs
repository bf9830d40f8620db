use std::path::{Path, PathBuf};

use chrono::Weekday;
use hotspot_core::data::{BoundingBox, CsvSchema, WeekCalendar};
use hotspot_core::evaluation::{config_hash, IntelSetting};
use hotspot_core::inference::{FitConfig, GibbsSchedule};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};

/// Everything a run needs, read from TOML. Relative paths are resolved
/// against the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    #[serde(default)]
    pub grid: GridConfig,
    /// First day of the weekly blocks.
    #[serde(default = "default_anchor")]
    pub week_anchor: Weekday,
    /// Number of historical weekly blocks (B).
    #[serde(default = "default_history")]
    pub history_weeks: usize,
    #[serde(default)]
    pub gibbs: ScheduleConfig,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Model used by `fit`, the service and intel runs (1-5).
    #[serde(default = "default_model")]
    pub model: u8,
    #[serde(default)]
    pub fast_eval: bool,
    /// Simulated intel used to calibrate the expert weight at fit time.
    #[serde(default)]
    pub intel: Option<IntelConfig>,
    /// Store root when neither `--store` nor the environment sets one.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Background fits the service runs at once.
    #[serde(default = "default_workers")]
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Event CSV; alternatively `dataset` names a stored dataset.
    #[serde(default)]
    pub events: Option<PathBuf>,
    #[serde(default)]
    pub dataset: Option<String>,
    #[serde(default)]
    pub columns: Option<CsvSchema>,
    /// Boundary polygon (GeoJSON) masking the grid.
    #[serde(default)]
    pub boundary: Option<PathBuf>,
    /// `[west, south, east, north]`; defaults to the events' extent.
    #[serde(default)]
    pub bbox: Option<[f64; 4]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub cell_meters: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { cell_meters: 250.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub warmup: usize,
    pub samples: usize,
    pub chains: usize,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        let s = GibbsSchedule::default();
        Self {
            warmup: s.warmup,
            samples: s.samples,
            chains: s.chains,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntelConfig {
    pub p: f64,
    pub d_meters: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_anchor() -> Weekday {
    Weekday::Sun
}
fn default_history() -> usize {
    52
}
fn default_seed() -> u64 {
    1
}
fn default_model() -> u8 {
    5
}
fn default_workers() -> usize {
    1
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ServiceError::usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut c: Self =
            toml::from_str(&text).map_err(|e| ServiceError::usage(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        c.resolve_paths(base);
        c.validate()?;
        Ok(c)
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut c: Self = toml::from_str(text).map_err(|e| ServiceError::usage(format!("config: {e}")))?;
        c.resolve_paths(base);
        c.validate()?;
        Ok(c)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(v) = p.as_mut() {
                if v.is_relative() {
                    *v = base.join(&*v);
                }
            }
        };
        fix(&mut self.data.events);
        fix(&mut self.data.boundary);
        fix(&mut self.output_dir);
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.data.events, &self.data.dataset) {
            (None, None) => return Err(ServiceError::usage("config needs data.events or data.dataset")),
            (Some(_), Some(_)) => return Err(ServiceError::usage("set only one of data.events and data.dataset")),
            _ => {}
        }
        for p in [&self.data.events, &self.data.boundary].into_iter().flatten() {
            if !p.is_file() {
                return Err(ServiceError::usage(format!("file {} does not exist", p.display())));
            }
        }
        if let Some(b) = self.bbox() {
            b.validate()?;
        }
        if !(self.grid.cell_meters > 0.0) {
            return Err(ServiceError::usage("grid.cell_meters must be positive"));
        }
        let g = &self.gibbs;
        if g.samples == 0 || g.chains == 0 {
            return Err(ServiceError::usage("gibbs.samples and gibbs.chains must be positive"));
        }
        if self.history_weeks == 0 {
            return Err(ServiceError::usage("history_weeks must be positive"));
        }
        if !(1..=5).contains(&self.model) {
            return Err(ServiceError::usage(format!("model must be 1-5, got {}", self.model)));
        }
        if let Some(i) = &self.intel {
            if !(0.0..=1.0).contains(&i.p) || !(i.d_meters >= 0.0) {
                return Err(ServiceError::usage("intel.p must be in [0, 1] and intel.d_meters >= 0"));
            }
        }
        if self.workers == 0 {
            return Err(ServiceError::usage("workers must be positive"));
        }
        Ok(())
    }

    pub fn bbox(&self) -> Option<BoundingBox> {
        self.data.bbox.map(|[w, s, e, n]| BoundingBox::new(w, s, e, n))
    }

    pub fn calendar(&self) -> WeekCalendar {
        WeekCalendar {
            week_start: self.week_anchor,
            block_days: 7,
        }
    }

    pub fn schema(&self) -> CsvSchema {
        self.data.columns.clone().unwrap_or_default()
    }

    pub fn intel_setting(&self) -> Option<(IntelSetting, u64)> {
        self.intel.as_ref().map(|i| {
            (
                IntelSetting {
                    p: i.p,
                    d_meters: i.d_meters,
                },
                i.seed,
            )
        })
    }

    pub fn fit_config(&self) -> FitConfig {
        let mut f = FitConfig::default();
        f.gibbs.schedule = GibbsSchedule {
            warmup: self.gibbs.warmup,
            samples: self.gibbs.samples,
            chains: self.gibbs.chains,
        };
        f.eval.fast_eval = self.fast_eval;
        f.gibbs.prune_candidates = self.fast_eval;
        f.seed = self.seed;
        f
    }

    /// Hash of the settings that change results (not paths or worker counts).
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.data.events = None;
        c.data.boundary = None;
        c.output_dir = None;
        c.workers = 1;
        config_hash(&c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_validation() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path();
        std::fs::write(dir.join("e.csv"), "event_id,date,time,lat,lon\n").unwrap();
        let c = RunConfig::parse("[data]\nevents = \"e.csv\"\n", dir).unwrap();
        assert_eq!(c.history_weeks, 52);
        assert_eq!(c.model, 5);
        assert_eq!(c.week_anchor, Weekday::Sun);
        assert!(c.data.events.unwrap().is_absolute());

        let err = RunConfig::parse("[data]\nevents = \"missing.csv\"\n", dir).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let err = RunConfig::parse("[data]\nevents = \"e.csv\"\n[gibbs]\nwarmup = 1\nsamples = 0\nchains = 1\n", dir).unwrap_err();
        assert!(err.to_string().contains("positive"));
        assert!(RunConfig::parse("bogus = 1\n[data]\nevents = \"e.csv\"\n", dir).is_err());
    }

    #[test]
    fn hash_ignores_paths() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path();
        std::fs::write(dir.join("a.csv"), "").unwrap();
        std::fs::write(dir.join("b.csv"), "").unwrap();
        let a = RunConfig::parse("[data]\nevents = \"a.csv\"\n", dir).unwrap();
        let b = RunConfig::parse("[data]\nevents = \"b.csv\"\n", dir).unwrap();
        let c = RunConfig::parse("seed = 2\n[data]\nevents = \"a.csv\"\n", dir).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }
}
