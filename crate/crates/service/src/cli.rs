use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Parser, Subcommand, ValueEnum};
use hotspot_core::data::TimeWindow;
use hotspot_core::evaluation::{generate_synthetic_events, BacktestConfig, IntelSetting, SyntheticSpec};
use serde_json::json;

use crate::config::RunConfig;
use crate::error::{Result, ServiceError};
use crate::store::{resolve_root, Entry, Store};
use crate::workspace::{ingest, store_dataset, Workspace};

#[derive(Debug, Parser)]
#[command(name = "hotspot", version, about = "Crime hotspot forecasting with block-weighted adaptive kernel densities")]
pub struct Cli {
    /// Artifact store root (overrides HOTSPOT_STORE and the config).
    #[arg(long, global = true)]
    pub store: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MapFormat {
    Geojson,
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and clean an event CSV into a stored dataset.
    Ingest {
        #[arg(long)]
        config: PathBuf,
    },
    /// Generate a synthetic dataset with a known density.
    Synth {
        #[arg(long, default_value_t = 30)]
        weeks: usize,
        #[arg(long, default_value_t = 100.0)]
        rate: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// First day; should be a week start.
        #[arg(long, default_value = "2021-01-03")]
        start: NaiveDate,
        /// Add short-lived clusters.
        #[arg(long)]
        flares: bool,
        /// Also write the events CSV here.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Fit a model on the events of one week (and its history).
    Fit {
        #[arg(long)]
        config: PathBuf,
        /// Training week start; the model forecasts the week after.
        #[arg(long)]
        week: NaiveDate,
        /// Model 1-5; defaults to the config's.
        #[arg(long)]
        model: Option<u8>,
    },
    /// Hotspot map for one week and window from a stored model.
    Forecast {
        #[arg(long)]
        config: PathBuf,
        /// Model artifact id.
        #[arg(long)]
        model: String,
        #[arg(long)]
        week: NaiveDate,
        #[arg(long, default_value = "0-24")]
        window: TimeWindow,
        #[arg(long, value_enum, default_value_t = MapFormat::Geojson)]
        out: MapFormat,
        /// Intel artifact id for the forecast week.
        #[arg(long)]
        intel: Option<String>,
        /// Also write the map here.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Score a stored forecast against that week's events.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        forecast: String,
        #[arg(long, value_delimiter = ',', default_value = "20,40")]
        k: Vec<f64>,
    },
    /// Rolling-origin backtest over the last weeks of the data.
    Backtest {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
        models: Vec<u8>,
        /// Number of forecast weeks.
        #[arg(long, default_value_t = 25)]
        weeks: usize,
        /// First forecast week; defaults to the last `weeks` weeks of data.
        #[arg(long)]
        first: Option<NaiveDate>,
        #[arg(long, value_delimiter = ',')]
        windows: Option<Vec<TimeWindow>>,
        /// Intel settings as p:metres, e.g. 0.5:100,0.1:1000 (run on the config's model).
        #[arg(long, value_delimiter = ',')]
        intel: Vec<String>,
        #[arg(long, default_value_t = 10)]
        intel_seeds: u64,
    },
    /// Simulated expert intel for one week.
    SimulateIntel {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        week: NaiveDate,
        #[arg(long)]
        p: f64,
        /// Displacement radius in metres.
        #[arg(long)]
        d: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Cells entering (blue) and leaving (green) the hot classes between two forecasts.
    Diff {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
    },
    /// AUC of maps left unrefreshed for several weeks.
    Staleness {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        model: Option<u8>,
        #[arg(long, default_value_t = 12)]
        weeks: usize,
        #[arg(long)]
        first: Option<NaiveDate>,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,4,8")]
        lags: Vec<usize>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
    },
}

/// One JSON line per stored artifact.
fn announce(out: &mut dyn Write, command: &str, e: &Entry, store: &Store) -> Result<()> {
    let line = json!({
        "command": command,
        "id": e.id,
        "kind": e.kind,
        "sha256": e.sha256,
        "config_hash": e.config_hash,
        "path": store.path_of(e).display().to_string(),
    });
    writeln!(out, "{line}")?;
    Ok(())
}

fn load(config: &Path, flag: Option<&Path>) -> Result<Workspace> {
    let c = RunConfig::load(config)?;
    let store = Store::open(resolve_root(flag, c.output_dir.as_deref()))?;
    Workspace::open(c, store)
}

fn parse_intel(spec: &str) -> Result<IntelSetting> {
    let bad = || ServiceError::usage(format!("intel setting `{spec}` must look like 0.5:100"));
    let (p, d) = spec.split_once(':').ok_or_else(bad)?;
    Ok(IntelSetting {
        p: p.trim().parse().map_err(|_| bad())?,
        d_meters: d.trim().parse().map_err(|_| bad())?,
    })
}

fn forecast_weeks(ws: &Workspace, n: usize, first: Option<NaiveDate>) -> Result<Vec<NaiveDate>> {
    let weeks = match first {
        Some(f) => {
            ws.check_week(f)?;
            (0..n).map(|k| ws.calendar().shift(f, k as i64)).collect()
        }
        None => ws.last_weeks(n),
    };
    if weeks.is_empty() {
        return Err(ServiceError::usage("no forecast weeks"));
    }
    Ok(weeks)
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let flag = cli.store.as_deref();
    match cli.command {
        Command::Ingest { config } => {
            let c = RunConfig::load(&config)?;
            let store = Store::open(resolve_root(flag, c.output_dir.as_deref()))?;
            let (e, _) = ingest(&c, &store)?;
            announce(out, "ingest", &e, &store)
        }
        Command::Synth {
            weeks,
            rate,
            seed,
            start,
            flares,
            output,
        } => {
            if !(rate > 0.0) || weeks == 0 {
                return Err(ServiceError::usage("synth needs --rate > 0 and --weeks > 0"));
            }
            let spec = if flares {
                SyntheticSpec::city_with_flares(start, weeks, rate, seed)
            } else {
                SyntheticSpec::city(start, weeks, rate, seed)
            };
            let events = generate_synthetic_events(&spec)?;
            let store = Store::open(resolve_root(flag, None))?;
            let hash = hotspot_core::evaluation::config_hash(&spec);
            let meta = json!({"synthetic": spec, "n_events": events.len()});
            let (e, _) = store_dataset(&store, &events, &hash, meta)?;
            if let Some(p) = output {
                std::fs::copy(store.path_of(&e), p)?;
            }
            announce(out, "synth", &e, &store)
        }
        Command::Fit { config, week, model } => {
            let ws = load(&config, flag)?;
            ws.check_week(week)?;
            let id = model.unwrap_or(ws.config.model);
            let (m, s) = ws.fit(ws.calendar().shift(week, 1), id)?;
            announce(out, "fit", &m, &ws.store)?;
            announce(out, "fit", &s, &ws.store)
        }
        Command::Forecast {
            config,
            model,
            week,
            window,
            out: format,
            intel,
            output,
        } => {
            let ws = load(&config, flag)?;
            let points = match &intel {
                Some(id) => ws.load_intel(id)?,
                None => Vec::new(),
            };
            let (e, map) = ws.forecast(&model, week, window, &points, intel.as_deref())?;
            announce(out, "forecast", &e, &ws.store)?;
            let (bytes, ext) = match format {
                MapFormat::Json => (std::fs::read(ws.store.path_of(&e))?, "json"),
                MapFormat::Geojson => (serde_json::to_vec(&ws.forecast_geojson(&e.id, &map)?)?, "geojson"),
                MapFormat::Csv => {
                    let mut v = Vec::new();
                    map.write_csv(&mut v)?;
                    (v, "csv")
                }
            };
            let rendered = if format == MapFormat::Json {
                e.clone()
            } else {
                let r = ws
                    .store
                    .put(crate::store::Kind::Report, ext, &bytes, &ws.config_hash, json!({"forecast_id": e.id}))?;
                announce(out, "forecast", &r, &ws.store)?;
                r
            };
            if let Some(p) = output {
                std::fs::copy(ws.store.path_of(&rendered), p)?;
            }
            Ok(())
        }
        Command::Evaluate { config, forecast, k } => {
            let ws = load(&config, flag)?;
            let r = ws.evaluate(&forecast, &k)?;
            let e = ws.store.put(
                crate::store::Kind::Metrics,
                "json",
                &serde_json::to_vec_pretty(&r)?,
                &ws.config_hash,
                json!({"forecast_id": forecast}),
            )?;
            announce(out, "evaluate", &e, &ws.store)
        }
        Command::Backtest {
            config,
            models,
            weeks,
            first,
            windows,
            intel,
            intel_seeds,
        } => {
            let ws = load(&config, flag)?;
            let specs = models.iter().map(|&m| ws.model_spec(m)).collect::<Result<Vec<_>>>()?;
            let intel = intel.iter().map(|s| parse_intel(s)).collect::<Result<Vec<_>>>()?;
            let mut cfg = BacktestConfig {
                models: specs,
                weeks: forecast_weeks(&ws, weeks, first)?,
                intel_seeds: (1..=intel_seeds).collect(),
                intel_model: (!intel.is_empty()).then(|| ws.model_spec(ws.config.model)).transpose()?,
                intel,
                ..Default::default()
            };
            if let Some(w) = windows {
                cfg.windows = w;
            }
            let report = ws.backtest(&cfg)?;
            let (rows, summary) = ws.store_backtest(&cfg, &report)?;
            announce(out, "backtest", &rows, &ws.store)?;
            announce(out, "backtest", &summary, &ws.store)
        }
        Command::SimulateIntel { config, week, p, d, seed } => {
            let ws = load(&config, flag)?;
            let (e, _) = ws.simulate_intel(week, p, d, seed)?;
            announce(out, "simulate-intel", &e, &ws.store)
        }
        Command::Diff { config, a, b } => {
            let ws = load(&config, flag)?;
            let (d, geo) = ws.diff(&a, &b)?;
            let body = json!({"a": a, "b": b, "n_blue": d.n_blue, "n_green": d.n_green, "geojson": geo});
            let e = ws.store.put(
                crate::store::Kind::Report,
                "json",
                &serde_json::to_vec(&body)?,
                &ws.config_hash,
                json!({"a": a, "b": b}),
            )?;
            announce(out, "diff", &e, &ws.store)
        }
        Command::Staleness {
            config,
            model,
            weeks,
            first,
            lags,
        } => {
            let ws = load(&config, flag)?;
            let weeks = forecast_weeks(&ws, weeks, first)?;
            let (e, _) = ws.staleness(model.unwrap_or(ws.config.model), &weeks, &lags)?;
            announce(out, "staleness", &e, &ws.store)
        }
        Command::Serve { config, addr } => {
            let ws = load(&config, flag)?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(crate::api::serve(ws, &addr))
        }
    }
}
