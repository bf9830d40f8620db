//! JSON-over-HTTP service for the analyst map.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, Request, State};
use axum::http::{HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::NaiveDate;
use hotspot_core::data::TimeWindow;
use hotspot_core::expert::IntelPoint;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::Semaphore;

use crate::error::{Result, ServiceError};
use crate::workspace::Workspace;

pub const CONFIG_HASH_HEADER: &str = "x-config-hash";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitJob {
    pub job_id: String,
    pub week: NaiveDate,
    pub model: u8,
    pub state: JobState,
    pub model_id: Option<String>,
    pub error: Option<String>,
}

pub struct App {
    pub ws: Workspace,
    jobs: Mutex<BTreeMap<String, FitJob>>,
    /// Weeks with a fit in progress.
    fitting: Mutex<HashSet<NaiveDate>>,
    workers: Semaphore,
    next_job: AtomicU64,
}

impl App {
    pub fn new(ws: Workspace) -> Arc<Self> {
        let workers = Semaphore::new(ws.config.workers);
        Arc::new(Self {
            ws,
            jobs: Mutex::new(BTreeMap::new()),
            fitting: Mutex::new(HashSet::new()),
            workers,
            next_job: AtomicU64::new(1),
        })
    }

    fn set_job(&self, id: &str, f: impl FnOnce(&mut FitJob)) {
        if let Some(j) = self.jobs.lock().unwrap_or_else(|p| p.into_inner()).get_mut(id) {
            f(j);
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match &self {
            ServiceError::Usage(_) => StatusCode::BAD_REQUEST,
            ServiceError::NotFound { .. } => StatusCode::NOT_FOUND,
            ServiceError::Conflict(_) => StatusCode::CONFLICT,
            ServiceError::Locked(_) => StatusCode::SERVICE_UNAVAILABLE,
            ServiceError::Runtime(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let mut body = json!({"error": self.to_string()});
        if let ServiceError::NotFound { hint: Some(h), .. } = &self {
            body["hint"] = json!(h);
        }
        (status, Json(body)).into_response()
    }
}

type Shared = State<Arc<App>>;
type Params = Query<HashMap<String, String>>;

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T> + Send + 'static) -> Result<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::runtime(format!("worker failed: {e}")))?
}

fn param<'a>(q: &'a HashMap<String, String>, key: &str) -> Result<&'a str> {
    q.get(key)
        .map(String::as_str)
        .ok_or_else(|| ServiceError::usage(format!("missing query parameter `{key}`")))
}

fn parse_week(s: &str) -> Result<NaiveDate> {
    s.parse()
        .map_err(|_| ServiceError::usage(format!("week `{s}` must be YYYY-MM-DD")))
}

fn parse_window(s: &str) -> Result<TimeWindow> {
    Ok(s.parse::<TimeWindow>()?)
}

fn body<T>(b: std::result::Result<Json<T>, JsonRejection>) -> Result<T> {
    b.map(|Json(v)| v)
        .map_err(|e| ServiceError::usage(format!("malformed request body: {}", e.body_text())))
}

fn fit_hint(week: NaiveDate, model: u8) -> String {
    format!("POST /api/fit with {{\"week\": \"{week}\", \"model\": {model}}} and poll GET /api/fit/{{job_id}}")
}

/// Model id fitted for `week`, or 404 with a hint.
fn fitted_model(app: &App, week: NaiveDate, model: u8) -> Result<String> {
    match app.ws.find_model(week, model)? {
        Some(e) => Ok(e.id),
        None => Err(ServiceError::NotFound {
            message: format!("week {week} has no fitted model {model}"),
            hint: Some(fit_hint(week, model)),
        }),
    }
}

fn model_of(app: &App, q: Option<u8>) -> Result<u8> {
    let m = q.unwrap_or(app.ws.config.model);
    app.ws.model_spec(m)?;
    Ok(m)
}

async fn status(State(app): Shared) -> Result<Json<Value>> {
    let jobs: Vec<FitJob> = app.jobs.lock().unwrap_or_else(|p| p.into_inner()).values().cloned().collect();
    Ok(Json(json!({
        "config_hash": app.ws.config_hash,
        "dataset": app.ws.dataset_id,
        "n_events": app.ws.events.len(),
        "n_cells": app.ws.grid.len(),
        "default_model": app.ws.config.model,
        "jobs": jobs,
    })))
}

async fn weeks(State(app): Shared) -> Result<Json<Value>> {
    let mut fitted: BTreeMap<String, Vec<Value>> = BTreeMap::new();
    for e in app.ws.store.list(crate::store::Kind::Model)? {
        if e.config_hash == app.ws.config_hash && e.meta["dataset"] == json!(app.ws.dataset_id) {
            let week = e.meta["forecast_week"].as_str().unwrap_or_default().to_string();
            fitted
                .entry(week)
                .or_default()
                .push(json!({"model": e.meta["model"], "model_id": e.id}));
        }
    }
    let mut rows: BTreeMap<String, Value> = app
        .ws
        .weeks()
        .into_iter()
        .map(|w| (w.week.to_string(), json!({"week": w.week, "n_events": w.n_events})))
        .collect();
    if let Some(last) = app.ws.weeks().last() {
        let next = app.ws.calendar().shift(last.week, 1);
        rows.entry(next.to_string()).or_insert(json!({"week": next, "n_events": 0}));
    }
    for (week, models) in &fitted {
        rows.entry(week.clone()).or_insert(json!({"week": week, "n_events": 0}));
        rows.get_mut(week).map(|r| r["models"] = json!(models));
    }
    let list: Vec<Value> = rows
        .into_values()
        .map(|mut r| {
            if r.get("models").is_none() {
                r["models"] = json!([]);
            }
            r
        })
        .collect();
    Ok(Json(json!({
        "config_hash": app.ws.config_hash,
        "windows": TimeWindow::canonical().map(|w| w.to_string()),
        "weeks": list,
    })))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FitRequest {
    /// Forecast week; the model is trained on the week before it.
    week: NaiveDate,
    model: Option<u8>,
}

async fn start_fit(State(app): Shared, req: std::result::Result<Json<FitRequest>, JsonRejection>) -> Result<Response> {
    let req = body(req)?;
    let model = model_of(&app, req.model)?;
    app.ws.check_week(req.week)?;
    if let Some(e) = app.ws.find_model(req.week, model)? {
        let body = json!({"state": JobState::Done, "model_id": e.id, "config_hash": app.ws.config_hash});
        return Ok((StatusCode::OK, Json(body)).into_response());
    }
    if !app.fitting.lock().unwrap_or_else(|p| p.into_inner()).insert(req.week) {
        return Err(ServiceError::Conflict(format!("a fit for week {} is already running", req.week)));
    }
    let job_id = format!("fit-{}-m{model}-{}", req.week, app.next_job.fetch_add(1, Ordering::Relaxed));
    let job = FitJob {
        job_id: job_id.clone(),
        week: req.week,
        model,
        state: JobState::Queued,
        model_id: None,
        error: None,
    };
    app.jobs.lock().unwrap_or_else(|p| p.into_inner()).insert(job_id.clone(), job.clone());
    let worker = app.clone();
    let id = job_id.clone();
    tokio::spawn(async move {
        let _permit = worker.workers.acquire().await;
        worker.set_job(&id, |j| j.state = JobState::Running);
        let a = worker.clone();
        let week = req.week;
        let result = blocking(move || a.ws.fit(week, model)).await;
        worker.set_job(&id, |j| match result {
            Ok((e, _)) => {
                j.state = JobState::Done;
                j.model_id = Some(e.id);
            }
            Err(e) => {
                j.state = JobState::Failed;
                j.error = Some(e.to_string());
            }
        });
        worker.fitting.lock().unwrap_or_else(|p| p.into_inner()).remove(&week);
    });
    let body = json!({
        "job_id": job_id,
        "state": JobState::Queued,
        "status_url": format!("/api/fit/{job_id}"),
        "config_hash": app.ws.config_hash,
    });
    Ok((StatusCode::ACCEPTED, Json(body)).into_response())
}

async fn fit_status(State(app): Shared, Path(job_id): Path<String>) -> Result<Json<FitJob>> {
    app.jobs
        .lock()
        .unwrap_or_else(|p| p.into_inner())
        .get(&job_id)
        .cloned()
        .map(Json)
        .ok_or_else(|| ServiceError::not_found(format!("no fit job `{job_id}`")))
}

async fn forecast(State(app): Shared, Query(q): Params) -> Result<Json<Value>> {
    let week = parse_week(param(&q, "week")?)?;
    let window = parse_window(q.get("window").map_or("0-24", String::as_str))?;
    let model = model_of(&app, q.get("model").map(|m| m.parse()).transpose().map_err(|_| ServiceError::usage("model must be 1-5"))?)?;
    app.ws.check_week(week)?;
    let model_id = fitted_model(&app, week, model)?;
    let a = app.clone();
    let geo = blocking(move || {
        let (e, map) = a.ws.forecast(&model_id, week, window, &[], None)?;
        a.ws.forecast_geojson(&e.id, &map)
    })
    .await?;
    Ok(Json(geo))
}

async fn stored_forecast(State(app): Shared, Path(id): Path<String>) -> Result<Json<Value>> {
    let (e, map) = app.ws.load_forecast(&id)?;
    Ok(Json(app.ws.forecast_geojson(&e.id, &map)?))
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum IntelBody {
    List(Vec<IntelPoint>),
    Wrapped { points: Vec<IntelPoint> },
}

fn check_points(points: &[IntelPoint]) -> Result<()> {
    for (i, p) in points.iter().enumerate() {
        if !(p.lon.is_finite() && p.lat.is_finite()) || p.lat.abs() > 90.0 || p.lon.abs() > 180.0 {
            return Err(ServiceError::usage(format!("intel point {i} has invalid coordinates")));
        }
    }
    Ok(())
}

async fn post_intel(State(app): Shared, req: std::result::Result<Json<IntelBody>, JsonRejection>) -> Result<Json<Value>> {
    let points = match body(req)? {
        IntelBody::List(p) | IntelBody::Wrapped { points: p } => p,
    };
    check_points(&points)?;
    let e = app.ws.put_intel(&points)?;
    Ok(Json(json!({"intel_id": e.id, "count": points.len(), "config_hash": app.ws.config_hash})))
}

async fn get_intel(State(app): Shared, Path(id): Path<String>) -> Result<Json<Value>> {
    let points = app.ws.load_intel(&id)?;
    Ok(Json(json!({"intel_id": id, "count": points.len(), "points": points, "config_hash": app.ws.config_hash})))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WhatIf {
    week: NaiveDate,
    window: String,
    #[serde(default)]
    intel_id: Option<String>,
    #[serde(default)]
    points: Option<Vec<IntelPoint>>,
    include_intel: bool,
    #[serde(default)]
    model: Option<u8>,
}

async fn what_if(State(app): Shared, req: std::result::Result<Json<WhatIf>, JsonRejection>) -> Result<Json<Value>> {
    let req = body(req)?;
    let window = parse_window(&req.window)?;
    let model = model_of(&app, req.model)?;
    app.ws.check_week(req.week)?;
    let (points, intel_id) = match (req.include_intel, &req.intel_id, req.points) {
        (false, _, _) => (Vec::new(), None),
        (true, Some(_), Some(_)) => return Err(ServiceError::usage("give either intel_id or points, not both")),
        (true, Some(id), None) => (app.ws.load_intel(id)?, Some(id.clone())),
        (true, None, Some(p)) => {
            check_points(&p)?;
            let id = if p.is_empty() { None } else { Some(app.ws.put_intel(&p)?.id) };
            (p, id)
        }
        (true, None, None) => return Err(ServiceError::usage("include_intel needs intel_id or points")),
    };
    let model_id = fitted_model(&app, req.week, model)?;
    let a = app.clone();
    let week = req.week;
    let n = points.len();
    let iid = intel_id.clone();
    let (e, _) = blocking(move || a.ws.forecast(&model_id, week, window, &points, iid.as_deref())).await?;
    Ok(Json(json!({
        "forecast_id": e.id,
        "week": week,
        "window": window.to_string(),
        "include_intel": req.include_intel,
        "intel_id": intel_id,
        "n_intel": n,
        "config_hash": app.ws.config_hash,
    })))
}

async fn eval(State(app): Shared, Query(q): Params) -> Result<Json<Value>> {
    let id = param(&q, "forecast_id")?.to_string();
    let a = app.clone();
    let r = blocking(move || a.ws.evaluate(&id, &[20.0, 40.0])).await?;
    let mut v = serde_json::to_value(r)?;
    v["config_hash"] = json!(app.ws.config_hash);
    Ok(Json(v))
}

async fn diff(State(app): Shared, Query(q): Params) -> Result<Json<Value>> {
    let (a, b) = (param(&q, "a")?, param(&q, "b")?);
    let (d, geo) = app.ws.diff(a, b)?;
    Ok(Json(json!({
        "a": a,
        "b": b,
        "n_blue": d.n_blue,
        "n_green": d.n_green,
        "blue_fraction": d.blue_fraction,
        "green_fraction": d.green_fraction,
        "geojson": geo,
        "config_hash": app.ws.config_hash,
    })))
}

async fn params(State(app): Shared, Query(q): Params) -> Result<Json<Value>> {
    let id = param(&q, "model_id")?;
    let windows = app.ws.params(id)?;
    Ok(Json(json!({"model_id": id, "windows": windows, "config_hash": app.ws.config_hash})))
}

async fn config_header(State(app): Shared, req: Request, next: Next) -> Response {
    let mut r = next.run(req).await;
    if let Ok(v) = HeaderValue::from_str(&app.ws.config_hash) {
        r.headers_mut().insert(CONFIG_HASH_HEADER, v);
    }
    r
}

pub fn router(app: Arc<App>) -> Router {
    Router::new()
        .route("/api/status", get(status))
        .route("/api/weeks", get(weeks))
        .route("/api/fit", post(start_fit))
        .route("/api/fit/{job_id}", get(fit_status))
        .route("/api/forecast", get(forecast))
        .route("/api/forecast/what-if", post(what_if))
        .route("/api/forecasts/{id}", get(stored_forecast))
        .route("/api/intel", post(post_intel))
        .route("/api/intel/{id}", get(get_intel))
        .route("/api/eval", get(eval))
        .route("/api/diff", get(diff))
        .route("/api/params", get(params))
        .layer(middleware::from_fn_with_state(app.clone(), config_header))
        .with_state(app)
}

pub async fn serve(ws: Workspace, addr: &str) -> Result<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| ServiceError::usage(format!("cannot bind {addr}: {e}")))?;
    log::info!("serving {} cells, config {} on http://{addr}", ws.grid.len(), ws.config_hash);
    axum::serve(listener, router(App::new(ws)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
