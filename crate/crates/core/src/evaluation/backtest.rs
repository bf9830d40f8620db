use std::collections::BTreeMap;
use std::io::Write;

use chrono::{Datelike, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::metrics::{auc, capture_from_curve, event_area_curve, EventAreaCurve};
use crate::data::{events_in_block, EventRecord, SpatialGrid, TimeWindow, WeekCalendar};
use crate::error::{Error, Result};
use crate::expert::{build_expert_block, simulate_expert_intel};
use crate::forecast::{ExpertInput, HotspotGrid, ModelSpec, ZooContext};
use crate::inference::rng::mix;
use crate::scalar::Scalar;

/// One point of the intel sweep: share of next-week events revealed and
/// displacement radius in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntelSetting {
    pub p: f64,
    pub d_meters: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestConfig {
    pub models: Vec<ModelSpec>,
    /// Start dates of the forecast weeks.
    pub weeks: Vec<NaiveDate>,
    pub windows: Vec<TimeWindow>,
    pub k_pcts: Vec<f64>,
    /// Intel settings run on `intel_model` in addition to the no-intel runs.
    pub intel: Vec<IntelSetting>,
    pub intel_seeds: Vec<u64>,
    pub intel_model: Option<ModelSpec>,
    /// Keep every forecast map in the report.
    pub keep_maps: bool,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            models: Vec::new(),
            weeks: Vec::new(),
            windows: TimeWindow::canonical().to_vec(),
            k_pcts: vec![20.0, 40.0],
            intel: Vec::new(),
            intel_seeds: (1..=10).collect(),
            intel_model: None,
            keep_maps: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub model: String,
    pub week: NaiveDate,
    pub window: TimeWindow,
    pub intel: Option<IntelSetting>,
    pub intel_seed: Option<u64>,
    pub n_events: usize,
    pub auc: Option<f64>,
    /// Capture fraction and PAI per configured `k`.
    pub capture: Vec<Option<f64>>,
    pub pai: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub model: String,
    /// `None` aggregates over all windows.
    pub window: Option<TimeWindow>,
    pub intel: Option<IntelSetting>,
    pub n: usize,
    pub mean_auc: f64,
    pub sd_auc: f64,
    pub mean_capture: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub k_pcts: Vec<f64>,
    pub rows: Vec<MetricRow>,
    pub summary: Vec<SummaryRow>,
    /// (model, week, window) triples with no actual events, left out of averages.
    pub empty_windows: usize,
    pub maps: Vec<HotspotGrid>,
}

/// Short content hash of any serialisable config.
pub fn config_hash<S: Serialize>(config: &S) -> String {
    let bytes = serde_json::to_vec(config).unwrap_or_default();
    Sha256::digest(&bytes).iter().take(8).map(|b| format!("{b:02x}")).collect()
}

fn score(h: &HotspotGrid, grid: &SpatialGrid, actual: &[EventRecord], k_pcts: &[f64]) -> Result<(EventAreaCurve, MetricRow)> {
    let curve = event_area_curve(h, grid, actual, h.window)?;
    let capture: Vec<Option<f64>> = k_pcts.iter().map(|&k| capture_from_curve(&curve, k)).collect();
    let pai = capture
        .iter()
        .zip(k_pcts)
        .map(|(c, &k)| c.map(|c| c / (k / 100.0)))
        .collect();
    let row = MetricRow {
        model: h.model.clone(),
        week: h.week.unwrap_or_default(),
        window: h.window,
        intel: None,
        intel_seed: None,
        n_events: curve.n_events,
        auc: auc(&curve),
        capture,
        pai,
    };
    Ok((curve, row))
}

/// Simulated intel for the training week (fit) and the forecast week.
pub fn simulated_expert(
    events: &[EventRecord],
    calendar: WeekCalendar,
    forecast_week: NaiveDate,
    setting: IntelSetting,
    seed: u64,
) -> Result<ExpertInput> {
    let windows = TimeWindow::canonical();
    let training = calendar.shift(forecast_week, -1);
    let day = forecast_week.num_days_from_ce() as u64;
    let fit_pts = simulate_expert_intel(&events_in_block(events, calendar, training), setting.p, setting.d_meters, &windows, mix(&[seed, day, 0]))?;
    let fc_pts = simulate_expert_intel(&events_in_block(events, calendar, forecast_week), setting.p, setting.d_meters, &windows, mix(&[seed, day, 1]))?;
    Ok(ExpertInput {
        fit: build_expert_block(&fit_pts),
        forecast: build_expert_block(&fc_pts),
    })
}

struct Job {
    spec: ModelSpec,
    week: NaiveDate,
    intel: Option<(IntelSetting, u64)>,
}

/// Rolling-origin evaluation: each model is fitted on the week before each
/// forecast week and scored on that week's events, per window.
pub fn run_backtest<T: Scalar>(ctx: &ZooContext<'_>, config: &BacktestConfig) -> Result<BacktestReport> {
    if config.weeks.is_empty() || config.windows.is_empty() {
        return Err(Error::arg("backtest needs at least one week and one window"));
    }
    let mut jobs = Vec::new();
    for spec in &config.models {
        for &week in &config.weeks {
            jobs.push(Job { spec: *spec, week, intel: None });
        }
    }
    if let Some(spec) = config.intel_model {
        for &s in &config.intel {
            for &seed in &config.intel_seeds {
                for &week in &config.weeks {
                    jobs.push(Job { spec, week, intel: Some((s, seed)) });
                }
            }
        }
    }
    let results: Vec<Result<(Vec<MetricRow>, Vec<HotspotGrid>)>> = jobs
        .par_iter()
        .map(|job| {
            let expert = match job.intel {
                Some((s, seed)) => Some(simulated_expert(ctx.events, ctx.calendar, job.week, s, seed)?),
                None => None,
            };
            let maps = ctx.run_model::<T>(&job.spec, job.week, &config.windows, expert.as_ref())?;
            let actual = events_in_block(ctx.events, ctx.calendar, job.week);
            let mut rows = Vec::with_capacity(maps.len());
            for h in &maps {
                let (_, mut row) = score(h, ctx.grid, &actual, &config.k_pcts)?;
                if let Some((s, seed)) = job.intel {
                    row.intel = Some(s);
                    row.intel_seed = Some(seed);
                }
                rows.push(row);
            }
            Ok((rows, if config.keep_maps && job.intel.is_none() { maps } else { Vec::new() }))
        })
        .collect();
    let mut rows = Vec::new();
    let mut maps = Vec::new();
    for r in results {
        let (r, m) = r?;
        rows.extend(r);
        maps.extend(m);
    }
    let empty_windows = rows.iter().filter(|r| r.auc.is_none()).count();
    let summary = summarise(&rows, config.k_pcts.len());
    Ok(BacktestReport {
        k_pcts: config.k_pcts.clone(),
        rows,
        summary,
        empty_windows,
        maps,
    })
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let sd = if v.len() > 1 {
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (m, sd)
}

type GroupKey = (String, Option<String>, Option<(u64, u64)>);

/// Mean and sd of AUC, and mean capture, per (model, window, intel) and per
/// (model, intel) over all windows. Empty windows are skipped.
pub fn summarise(rows: &[MetricRow], n_k: usize) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<GroupKey, (Option<TimeWindow>, Option<IntelSetting>, Vec<&MetricRow>)> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.auc.is_some()) {
        let ik = r.intel.map(|s| (s.p.to_bits(), s.d_meters.to_bits()));
        for w in [Some(r.window), None] {
            groups
                .entry((r.model.clone(), w.map(|w| format!("{:09.4}", w.start())), ik))
                .or_insert((w, r.intel, Vec::new()))
                .2
                .push(r);
        }
    }
    groups
        .into_iter()
        .map(|((model, _, _), (window, intel, rs))| {
            let aucs: Vec<f64> = rs.iter().filter_map(|r| r.auc).collect();
            let (mean_auc, sd_auc) = mean_sd(&aucs);
            let mean_capture = (0..n_k)
                .map(|k| {
                    let v: Vec<f64> = rs.iter().filter_map(|r| r.capture[k]).collect();
                    mean_sd(&v).0
                })
                .collect();
            SummaryRow {
                model,
                window,
                intel,
                n: aucs.len(),
                mean_auc,
                sd_auc,
                mean_capture,
            }
        })
        .collect()
}

impl BacktestReport {
    /// Mean AUC of one model, optionally for one window and intel setting.
    pub fn mean_auc(&self, model: &str, window: Option<TimeWindow>, intel: Option<IntelSetting>) -> Option<f64> {
        self.summary
            .iter()
            .find(|s| s.model == model && s.window == window && s.intel == intel)
            .map(|s| s.mean_auc)
    }
}

fn manifest_lines<W: Write>(w: &mut W, manifest: &[(String, String)]) -> Result<()> {
    for (k, v) in manifest {
        writeln!(w, "# {k}: {v}").map_err(|e| Error::io("csv manifest", e))?;
    }
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

/// Per-row metrics CSV, preceded by `#` manifest lines.
pub fn write_metrics_csv<W: Write>(mut writer: W, report: &BacktestReport, manifest: &[(String, String)]) -> Result<()> {
    manifest_lines(&mut writer, manifest)?;
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["model", "week", "window", "intel_p", "intel_d_m", "intel_seed", "n_events", "auc"]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
    for k in &report.k_pcts {
        header.push(format!("capture_{k}"));
    }
    for k in &report.k_pcts {
        header.push(format!("pai_{k}"));
    }
    w.write_record(&header)?;
    for r in &report.rows {
        let mut rec = vec![
            r.model.clone(),
            r.week.to_string(),
            r.window.to_string(),
            opt(r.intel.map(|s| s.p)),
            opt(r.intel.map(|s| s.d_meters)),
            r.intel_seed.map_or(String::new(), |s| s.to_string()),
            r.n_events.to_string(),
            opt(r.auc),
        ];
        rec.extend(r.capture.iter().map(|c| opt(*c)));
        rec.extend(r.pai.iter().map(|c| opt(*c)));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("metrics csv", e))?;
    Ok(())
}

/// Aggregated CSV (one row per model, window, intel setting).
pub fn write_summary_csv<W: Write>(mut writer: W, report: &BacktestReport, manifest: &[(String, String)]) -> Result<()> {
    manifest_lines(&mut writer, manifest)?;
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = ["model", "window", "intel_p", "intel_d_m", "n", "mean_auc", "sd_auc"]
        .into_iter()
        .map(String::from)
        .collect();
    for k in &report.k_pcts {
        header.push(format!("mean_capture_{k}"));
    }
    w.write_record(&header)?;
    for s in &report.summary {
        let mut rec = vec![
            s.model.clone(),
            s.window.map_or("all".to_string(), |w| w.to_string()),
            opt(s.intel.map(|i| i.p)),
            opt(s.intel.map(|i| i.d_meters)),
            s.n.to_string(),
            s.mean_auc.to_string(),
            s.sd_auc.to_string(),
        ];
        rec.extend(s.mean_capture.iter().map(|c| c.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("summary csv", e))?;
    Ok(())
}

/// `area_fraction,capture_fraction` CSV.
pub fn write_curve_csv<W: Write>(mut writer: W, curve: &EventAreaCurve, manifest: &[(String, String)]) -> Result<()> {
    manifest_lines(&mut writer, manifest)?;
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["area_fraction", "capture_fraction"])?;
    for (a, c) in &curve.points {
        w.write_record([a.to_string(), c.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("curve csv", e))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StalenessRow {
    pub lag: usize,
    pub n: usize,
    pub mean_auc: f64,
    pub p10: f64,
    pub p90: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StalenessReport {
    pub rows: Vec<StalenessRow>,
    pub notices: Vec<String>,
}

/// AUC when the map for week `w` is the one made for week `w - L`, i.e. not
/// refreshed for `L` weeks. `maps` are one model's forecasts; targets are
/// the weeks among them.
pub fn staleness_analysis(
    maps: &[HotspotGrid],
    grid: &SpatialGrid,
    events: &[EventRecord],
    calendar: WeekCalendar,
    lags: &[usize],
) -> Result<StalenessReport> {
    let weeks: std::collections::BTreeSet<NaiveDate> = maps.iter().filter_map(|m| m.week).collect();
    let mut rows = Vec::new();
    let mut notices = Vec::new();
    for &lag in lags {
        let mut aucs = Vec::new();
        for m in maps {
            let Some(w0) = m.week else { continue };
            let target = calendar.shift(w0, lag as i64);
            if !weeks.contains(&target) {
                continue;
            }
            let actual = events_in_block(events, calendar, target);
            if let Some(a) = auc(&event_area_curve(m, grid, &actual, m.window)?) {
                aucs.push(a);
            }
        }
        if aucs.is_empty() {
            notices.push(format!("lag {lag}: no week has a map {lag} weeks older inside the horizon"));
            continue;
        }
        aucs.sort_by(f64::total_cmp);
        rows.push(StalenessRow {
            lag,
            n: aucs.len(),
            mean_auc: aucs.iter().sum::<f64>() / aucs.len() as f64,
            p10: crate::forecast::srot::quantile_sorted(&aucs, 0.1),
            p90: crate::forecast::srot::quantile_sorted(&aucs, 0.9),
        });
    }
    Ok(StalenessReport { rows, notices })
}
