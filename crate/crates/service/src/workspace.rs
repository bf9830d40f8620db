//! Operations shared by the command line and the HTTP service: one loaded
//! dataset and grid, with every result written to the store.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use hotspot_core::data::{
    build_grid, clean_events, events_in_block, parse_boundary_geojson, parse_events_csv, parse_events_reader,
    write_events_csv, BoundingBox, CsvSchema, EventRecord, SpatialGrid, TimeWindow, WeekCalendar,
};
use hotspot_core::evaluation::{
    auc, diff_maps, event_area_curve, run_backtest, simulated_expert, staleness_analysis, write_metrics_csv,
    write_summary_csv, BacktestConfig, BacktestReport, IntelSetting, MapDiff, StalenessReport,
};
use hotspot_core::expert::{build_expert_block, read_intel_csv, simulate_expert_intel, IntelPoint};
use hotspot_core::forecast::{ClassThresholds, ExpertInput, HotspotGrid, ModelFit, ModelSpec, ZooContext};
use hotspot_core::inference::{posterior_summary, FittedModel, ParamSummary};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::{Result, ServiceError};
use crate::store::{Entry, Kind, Store};

/// Stored form of a fitted model for one forecast week.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub spec: ModelSpec,
    pub training_week: NaiveDate,
    pub forecast_week: NaiveDate,
    pub dataset: String,
    pub config_hash: String,
    /// Simulated intel the expert weight was calibrated on, if any.
    pub calibration: Option<IntelSetting>,
    pub fits: Vec<(TimeWindow, FittedModel<f64>)>,
}

impl ModelBundle {
    pub fn has_expert(&self) -> bool {
        self.fits.iter().any(|(_, f)| f.has_expert())
    }

    fn model_fit(&self) -> ModelFit<f64> {
        ModelFit {
            spec: self.spec,
            forecast_week: self.forecast_week,
            fits: self.fits.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSummary {
    pub window: TimeWindow,
    pub params: Vec<ParamSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub forecast_id: String,
    pub week: Option<NaiveDate>,
    pub window: TimeWindow,
    pub has_actuals: bool,
    pub n_events: usize,
    pub auc: Option<f64>,
    /// Keyed by `k` in percent.
    pub capture: BTreeMap<String, f64>,
    pub pai: BTreeMap<String, f64>,
    pub curve: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeekInfo {
    pub week: NaiveDate,
    pub n_events: usize,
}

pub struct Workspace {
    pub config: RunConfig,
    pub config_hash: String,
    pub store: Store,
    pub dataset_id: String,
    pub events: Vec<EventRecord>,
    pub grid: SpatialGrid,
    pub coverage_start: NaiveDate,
}

fn events_bytes(events: &[EventRecord]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    write_events_csv(&mut out, events)?;
    Ok(out)
}

fn extent(events: &[EventRecord]) -> Result<BoundingBox> {
    let mut b = BoundingBox::new(f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for e in events {
        b.west = b.west.min(e.lon);
        b.east = b.east.max(e.lon);
        b.south = b.south.min(e.lat);
        b.north = b.north.max(e.lat);
    }
    if !b.west.is_finite() {
        return Err(ServiceError::usage("dataset has no events"));
    }
    let pad = 1e-6;
    Ok(BoundingBox::new(b.west - pad, b.south - pad, b.east + pad, b.north + pad))
}

/// Store events in canonical CSV form; returns the entry and the events as
/// read back, so every later step sees exactly the stored values.
pub fn store_dataset(store: &Store, events: &[EventRecord], config_hash: &str, meta: Value) -> Result<(Entry, Vec<EventRecord>)> {
    let bytes = events_bytes(events)?;
    let entry = store.put(Kind::Dataset, "csv", &bytes, config_hash, meta)?;
    let back = parse_events_reader(bytes.as_slice(), &CsvSchema::default())?.events;
    Ok((entry, back))
}

pub fn ingest(config: &RunConfig, store: &Store) -> Result<(Entry, Vec<EventRecord>)> {
    let path = config
        .data
        .events
        .as_ref()
        .ok_or_else(|| ServiceError::usage("ingest needs data.events"))?;
    let parsed = parse_events_csv(path, &config.schema())?;
    let (events, clean) = match config.bbox() {
        Some(b) => {
            let (e, r) = clean_events(&parsed.events, &b, None)?;
            (e, Some(r))
        }
        None => (parsed.events, None),
    };
    let meta = json!({
        "source": path.display().to_string(),
        "n_events": events.len(),
        "rejected_rows": parsed.rejected.len(),
        "clean": clean,
    });
    store_dataset(store, &events, &config.hash(), meta)
}

impl Workspace {
    pub fn open(config: RunConfig, store: Store) -> Result<Self> {
        let (dataset_id, events) = match &config.data.dataset {
            Some(id) => {
                let (e, bytes) = store.read_kind(id, Kind::Dataset)?;
                (e.id, parse_events_reader(bytes.as_slice(), &CsvSchema::default())?.events)
            }
            None => {
                let (e, events) = ingest(&config, &store)?;
                (e.id, events)
            }
        };
        let bbox = match config.bbox() {
            Some(b) => b,
            None => extent(&events)?,
        };
        let mask = match &config.data.boundary {
            Some(p) => Some(parse_boundary_geojson(&std::fs::read_to_string(p)?)?),
            None => None,
        };
        let grid = build_grid(&bbox, config.grid.cell_meters, mask.as_ref())?;
        let first = events
            .iter()
            .map(|e| e.date)
            .min()
            .ok_or_else(|| ServiceError::usage("dataset has no events"))?;
        let coverage_start = config.calendar().block_start(first);
        Ok(Self {
            config_hash: config.hash(),
            config,
            store,
            dataset_id,
            events,
            grid,
            coverage_start,
        })
    }

    pub fn calendar(&self) -> WeekCalendar {
        self.config.calendar()
    }

    pub fn zoo(&self) -> ZooContext<'_> {
        ZooContext {
            events: &self.events,
            calendar: self.calendar(),
            coverage_start: self.coverage_start,
            grid: &self.grid,
            fit: self.config.fit_config(),
            thresholds: ClassThresholds::default(),
        }
    }

    pub fn model_spec(&self, id: u8) -> Result<ModelSpec> {
        Ok(ModelSpec::paper(id)?.with_history(self.config.history_weeks))
    }

    pub fn check_week(&self, week: NaiveDate) -> Result<()> {
        if !self.calendar().is_aligned(week) {
            return Err(ServiceError::usage(format!(
                "{week} is not a week start ({:?})",
                self.config.week_anchor
            )));
        }
        Ok(())
    }

    /// Weeks with at least one event, oldest first.
    pub fn weeks(&self) -> Vec<WeekInfo> {
        let cal = self.calendar();
        let mut counts: BTreeMap<NaiveDate, usize> = BTreeMap::new();
        for e in &self.events {
            *counts.entry(cal.block_start(e.date)).or_default() += 1;
        }
        counts.into_iter().map(|(week, n_events)| WeekInfo { week, n_events }).collect()
    }

    /// The last `n` weeks of data as forecast weeks.
    pub fn last_weeks(&self, n: usize) -> Vec<NaiveDate> {
        let weeks = self.weeks();
        let Some(last) = weeks.last() else { return Vec::new() };
        let cal = self.calendar();
        (0..n)
            .rev()
            .map(|k| cal.shift(last.week, -(k as i64)))
            .filter(|&w| w > self.coverage_start)
            .collect()
    }

    fn meta_matches(&self, e: &Entry) -> bool {
        e.config_hash == self.config_hash && e.meta["dataset"] == json!(self.dataset_id)
    }

    pub fn find_model(&self, forecast_week: NaiveDate, model: u8) -> Result<Option<Entry>> {
        Ok(self.store.list(Kind::Model)?.into_iter().find(|e| {
            self.meta_matches(e) && e.meta["forecast_week"] == json!(forecast_week) && e.meta["model"] == json!(model)
        }))
    }

    /// Fit `model` for `forecast_week` on the week before it. Returns the
    /// model entry and its posterior summary entry.
    pub fn fit(&self, forecast_week: NaiveDate, model: u8) -> Result<(Entry, Entry)> {
        self.check_week(forecast_week)?;
        let spec = self.model_spec(model)?;
        let calibration = self.config.intel_setting().filter(|_| spec.accepts_intel());
        let expert = match calibration {
            Some((setting, seed)) => {
                let e = simulated_expert(&self.events, self.calendar(), forecast_week, setting, seed)?;
                Some(ExpertInput {
                    fit: e.fit,
                    forecast: None,
                })
            }
            None => None,
        };
        let mf = self
            .zoo()
            .fit_model::<f64>(&spec, forecast_week, &TimeWindow::canonical(), expert.as_ref())?;
        let training_week = self.calendar().shift(forecast_week, -1);
        let bundle = ModelBundle {
            spec,
            training_week,
            forecast_week,
            dataset: self.dataset_id.clone(),
            config_hash: self.config_hash.clone(),
            calibration: calibration.map(|c| c.0),
            fits: mf.fits,
        };
        let meta = json!({
            "model": model,
            "forecast_week": forecast_week,
            "training_week": training_week,
            "dataset": self.dataset_id,
            "expert": bundle.has_expert(),
        });
        let entry = self
            .store
            .put(Kind::Model, "json", &serde_json::to_vec(&bundle)?, &self.config_hash, meta)?;
        let summary = self.store.put(
            Kind::Report,
            "csv",
            &summary_csv(&bundle_summaries(&bundle)?)?,
            &self.config_hash,
            json!({"model_id": entry.id, "content": "posterior summary"}),
        )?;
        Ok((entry, summary))
    }

    pub fn load_model(&self, id: &str) -> Result<(Entry, ModelBundle)> {
        let (e, bytes) = self.store.read_kind(id, Kind::Model)?;
        Ok((e, serde_json::from_slice(&bytes)?))
    }

    pub fn params(&self, model_id: &str) -> Result<Vec<WindowSummary>> {
        bundle_summaries(&self.load_model(model_id)?.1)
    }

    /// Forecast map for `week` from a stored model, with optional intel for
    /// that week. An empty intel list gives the no-intel forecast.
    pub fn forecast(
        &self,
        model_id: &str,
        week: NaiveDate,
        window: TimeWindow,
        intel: &[IntelPoint],
        intel_id: Option<&str>,
    ) -> Result<(Entry, HotspotGrid)> {
        self.check_week(week)?;
        let (_, bundle) = self.load_model(model_id)?;
        if week <= bundle.training_week {
            return Err(ServiceError::usage(format!(
                "model {model_id} was trained on {}; forecast a later week",
                bundle.training_week
            )));
        }
        if !intel.is_empty() && !bundle.has_expert() {
            return Err(ServiceError::usage(format!(
                "model {model_id} was fitted without an expert block; add [intel] to the config and refit"
            )));
        }
        let expert = ExpertInput {
            fit: None,
            forecast: build_expert_block(intel),
        };
        let mut maps = self.zoo().forecast(&bundle.model_fit(), week, &[window], Some(&expert))?;
        let map = maps.pop().ok_or_else(|| ServiceError::runtime("forecast produced no map"))?;
        let meta = json!({
            "model_id": model_id,
            "model": bundle.spec.id,
            "week": week,
            "window": window.to_string(),
            "dataset": self.dataset_id,
            "intel_id": intel_id,
            "n_intel": intel.len(),
        });
        let entry = self
            .store
            .put(Kind::Forecast, "json", &serde_json::to_vec(&map)?, &self.config_hash, meta)?;
        Ok((entry, map))
    }

    pub fn load_forecast(&self, id: &str) -> Result<(Entry, HotspotGrid)> {
        let (e, bytes) = self.store.read_kind(id, Kind::Forecast)?;
        Ok((e, serde_json::from_slice(&bytes)?))
    }

    pub fn forecast_geojson(&self, id: &str, map: &HotspotGrid) -> Result<Value> {
        let mut g = map.to_geojson(&self.grid)?;
        g["forecast_id"] = json!(id);
        g["config_hash"] = json!(self.config_hash);
        Ok(g)
    }

    pub fn put_intel(&self, points: &[IntelPoint]) -> Result<Entry> {
        self.store.put(
            Kind::Intel,
            "json",
            &serde_json::to_vec(points)?,
            &self.config_hash,
            json!({"count": points.len()}),
        )
    }

    pub fn load_intel(&self, id: &str) -> Result<Vec<IntelPoint>> {
        let (e, bytes) = self.store.read_kind(id, Kind::Intel)?;
        if e.file.ends_with(".csv") {
            return Ok(read_intel_csv(bytes.as_slice())?);
        }
        Ok(serde_json::from_slice(&bytes)?)
    }

    pub fn simulate_intel(&self, week: NaiveDate, p: f64, d_meters: f64, seed: u64) -> Result<(Entry, usize)> {
        self.check_week(week)?;
        let actual = events_in_block(&self.events, self.calendar(), week);
        let pts = simulate_expert_intel(&actual, p, d_meters, &TimeWindow::canonical(), seed)?;
        Ok((self.put_intel(&pts)?, pts.len()))
    }

    pub fn evaluate(&self, forecast_id: &str, k_pcts: &[f64]) -> Result<EvalReport> {
        let (_, map) = self.load_forecast(forecast_id)?;
        let week = map.week.ok_or_else(|| ServiceError::usage("forecast has no week to evaluate against"))?;
        let actual = events_in_block(&self.events, self.calendar(), week);
        let curve = event_area_curve(&map, &self.grid, &actual, map.window)?;
        let a = auc(&curve);
        let mut capture = BTreeMap::new();
        let mut pai = BTreeMap::new();
        for &k in k_pcts {
            if let Some(c) = hotspot_core::evaluation::capture_from_curve(&curve, k) {
                capture.insert(k.to_string(), c);
                pai.insert(k.to_string(), c / (k / 100.0));
            }
        }
        Ok(EvalReport {
            forecast_id: forecast_id.to_string(),
            week: map.week,
            window: map.window,
            has_actuals: a.is_some(),
            n_events: curve.n_events,
            auc: a,
            capture,
            pai,
            curve: if a.is_some() { curve.points } else { Vec::new() },
        })
    }

    pub fn diff(&self, a: &str, b: &str) -> Result<(MapDiff, Value)> {
        let (_, ma) = self.load_forecast(a)?;
        let (_, mb) = self.load_forecast(b)?;
        let d = diff_maps(&ma, &mb).map_err(|e| ServiceError::usage(e.to_string()))?;
        let features: Vec<Value> = d
            .labels
            .iter()
            .enumerate()
            .map(|(id, l)| {
                json!({
                    "type": "Feature",
                    "geometry": {"type": "Polygon", "coordinates": [self.grid.polygon(id as u32)]},
                    "properties": {"cell_id": id, "label": l},
                })
            })
            .collect();
        let geo = json!({"type": "FeatureCollection", "features": features});
        Ok((d, geo))
    }

    pub fn backtest(&self, config: &BacktestConfig) -> Result<BacktestReport> {
        Ok(run_backtest::<f64>(&self.zoo(), config)?)
    }

    /// Metric and summary CSVs for a backtest, each with manifest lines.
    pub fn store_backtest(&self, config: &BacktestConfig, report: &BacktestReport) -> Result<(Entry, Entry)> {
        let manifest = self.manifest_lines(config);
        let mut rows = Vec::new();
        write_metrics_csv(&mut rows, report, &manifest)?;
        let mut summary = Vec::new();
        write_summary_csv(&mut summary, report, &manifest)?;
        let meta = json!({"dataset": self.dataset_id, "backtest": hotspot_core::evaluation::config_hash(config)});
        let a = self.store.put(Kind::Metrics, "csv", &rows, &self.config_hash, meta.clone())?;
        let b = self.store.put(Kind::Metrics, "csv", &summary, &self.config_hash, meta)?;
        Ok((a, b))
    }

    pub fn staleness(&self, model: u8, weeks: &[NaiveDate], lags: &[usize]) -> Result<(Entry, StalenessReport)> {
        let spec = self.model_spec(model)?;
        let cfg = BacktestConfig {
            models: vec![spec],
            weeks: weeks.to_vec(),
            keep_maps: true,
            ..Default::default()
        };
        let report = self.backtest(&cfg)?;
        let s = staleness_analysis(&report.maps, &self.grid, &self.events, self.calendar(), lags)?;
        let mut out = String::new();
        for (k, v) in self.manifest_lines(&cfg) {
            out.push_str(&format!("# {k}: {v}\n"));
        }
        for n in &s.notices {
            out.push_str(&format!("# notice: {n}\n"));
        }
        out.push_str("lag,n,mean_auc,p10,p90\n");
        for r in &s.rows {
            out.push_str(&format!("{},{},{},{},{}\n", r.lag, r.n, r.mean_auc, r.p10, r.p90));
        }
        let e = self.store.put(
            Kind::Metrics,
            "csv",
            out.as_bytes(),
            &self.config_hash,
            json!({"dataset": self.dataset_id, "content": "staleness"}),
        )?;
        Ok((e, s))
    }

    fn manifest_lines(&self, cfg: &BacktestConfig) -> Vec<(String, String)> {
        let join = |v: Vec<String>| v.join(" ");
        vec![
            ("model".into(), join(cfg.models.iter().map(|m| m.name()).collect())),
            ("week".into(), join(cfg.weeks.iter().map(|w| w.to_string()).collect())),
            ("window".into(), join(cfg.windows.iter().map(|w| w.to_string()).collect())),
            ("seed".into(), self.config.seed.to_string()),
            ("config hash".into(), self.config_hash.clone()),
            ("dataset".into(), self.dataset_id.clone()),
        ]
    }
}

fn bundle_summaries(bundle: &ModelBundle) -> Result<Vec<WindowSummary>> {
    bundle
        .fits
        .iter()
        .map(|(w, f)| {
            Ok(WindowSummary {
                window: *w,
                params: posterior_summary(&f.main.samples)?,
            })
        })
        .collect()
}

fn summary_csv(rows: &[WindowSummary]) -> Result<Vec<u8>> {
    let mut out = String::from("window,param,mean,lower,upper\n");
    for s in rows {
        for p in &s.params {
            out.push_str(&format!("{},{},{},{},{}\n", s.window, p.name, p.mean, p.lower, p.upper));
        }
    }
    Ok(out.into_bytes())
}
