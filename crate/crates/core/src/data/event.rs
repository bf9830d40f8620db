use std::collections::{HashMap, HashSet};
use std::io::Read;
use std::path::Path;

use chrono::{NaiveDate, NaiveTime, Timelike};
use serde::{Deserialize, Serialize};

use super::grid::BoundingBox;
use crate::error::{Error, Result};

const EARTH_RADIUS_KM: f64 = 6371.0088;

/// One street-crime event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub event_id: String,
    pub lon: f64,
    pub lat: f64,
    pub date: NaiveDate,
    /// Hours since midnight, `[0, 24)`.
    pub time_of_day: f64,
}

impl EventRecord {
    pub fn new(event_id: impl Into<String>, lon: f64, lat: f64, date: NaiveDate, time_of_day: f64) -> Self {
        Self {
            event_id: event_id.into(),
            lon,
            lat,
            date,
            time_of_day,
        }
    }
}

/// Column names of the event CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub event_id: String,
    pub date: String,
    pub time: String,
    pub lat: String,
    pub lon: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            event_id: "event_id".into(),
            date: "date".into(),
            time: "time".into(),
            lat: "lat".into(),
            lon: "lon".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RowRejection {
    /// 1-based data row number (header excluded).
    pub row: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ParseReport {
    pub events: Vec<EventRecord>,
    pub rejected: Vec<RowRejection>,
}

impl ParseReport {
    pub fn rows(&self) -> usize {
        self.events.len() + self.rejected.len()
    }
}

pub fn parse_events_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<ParseReport> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_events_reader(file, schema)
}

pub fn parse_events_reader<R: Read>(reader: R, schema: &CsvSchema) -> Result<ParseReport> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(name.to_string()))
    };
    let (c_id, c_date, c_time, c_lat, c_lon) = (
        col(&schema.event_id)?,
        col(&schema.date)?,
        col(&schema.time)?,
        col(&schema.lat)?,
        col(&schema.lon)?,
    );

    let mut report = ParseReport::default();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                report.rejected.push(RowRejection { row, reason: format!("malformed row: {e}") });
                continue;
            }
        };
        let field = |c: usize| rec.get(c).unwrap_or("");
        match parse_row(field(c_id), field(c_date), field(c_time), field(c_lat), field(c_lon)) {
            Ok(ev) => report.events.push(ev),
            Err(reason) => report.rejected.push(RowRejection { row, reason }),
        }
    }
    Ok(report)
}

fn parse_row(id: &str, date: &str, time: &str, lat: &str, lon: &str) -> std::result::Result<EventRecord, String> {
    let date = NaiveDate::parse_from_str(date, "%Y-%m-%d").map_err(|_| "bad date".to_string())?;
    let time = NaiveTime::parse_from_str(time, "%H:%M:%S")
        .or_else(|_| NaiveTime::parse_from_str(time, "%H:%M"))
        .map_err(|_| "bad time".to_string())?;
    let coord = |s: &str| s.parse::<f64>().ok().filter(|v| v.is_finite());
    let (Some(lat), Some(lon)) = (coord(lat), coord(lon)) else {
        return Err("bad coordinate".into());
    };
    Ok(EventRecord {
        event_id: id.to_string(),
        lon,
        lat,
        date,
        time_of_day: hours_of(time),
    })
}

pub fn hours_of(t: NaiveTime) -> f64 {
    f64::from(t.num_seconds_from_midnight()) / 3600.0
}

pub fn write_events_csv<W: std::io::Write>(writer: W, events: &[EventRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["event_id", "date", "time", "lat", "lon"])?;
    for e in events {
        let secs = (e.time_of_day * 3600.0).round().clamp(0.0, 86_399.0) as u32;
        let t = NaiveTime::from_num_seconds_from_midnight_opt(secs, 0).unwrap_or_default();
        w.write_record([
            e.event_id.clone(),
            e.date.format("%Y-%m-%d").to_string(),
            t.format("%H:%M:%S").to_string(),
            format!("{:.7}", e.lat),
            format!("{:.7}", e.lon),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<events csv>", e))?;
    Ok(())
}

/// Great-circle distance in kilometres on a spherical earth.
pub fn haversine_km(lon1: f64, lat1: f64, lon2: f64, lat2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * a.sqrt().asin()
}

/// Sanity filter against the location of the unit each event was assigned to
/// (a police station in the original data).
#[derive(Debug, Clone, Default)]
pub struct AnchorFilter {
    /// Anchor id to (lon, lat).
    pub anchors: HashMap<String, (f64, f64)>,
    /// Event id to anchor id. Events without an entry are not distance-checked.
    pub assignment: HashMap<String, String>,
    pub radius_km: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CleanReport {
    pub input: usize,
    pub kept: usize,
    pub non_finite: usize,
    pub outside_bbox: usize,
    pub too_far_from_anchor: usize,
    pub unknown_anchor: usize,
    pub duplicates: usize,
}

/// Drops events outside `bbox`, events farther than the anchor radius from
/// their assigned anchor (boundary kept), and exact duplicates on
/// (date, time, lon, lat).
pub fn clean_events(
    events: &[EventRecord],
    bbox: &BoundingBox,
    anchor_filter: Option<&AnchorFilter>,
) -> Result<(Vec<EventRecord>, CleanReport)> {
    bbox.validate()?;
    if let Some(f) = anchor_filter {
        if !(f.radius_km >= 0.0) {
            return Err(Error::arg(format!("anchor radius must be >= 0, got {}", f.radius_km)));
        }
    }
    let mut report = CleanReport { input: events.len(), ..Default::default() };
    let mut seen = HashSet::new();
    let mut kept = Vec::with_capacity(events.len());
    for e in events {
        if !(e.lon.is_finite() && e.lat.is_finite() && e.time_of_day.is_finite()) {
            report.non_finite += 1;
            continue;
        }
        if !bbox.contains(e.lon, e.lat) {
            report.outside_bbox += 1;
            continue;
        }
        if let Some(f) = anchor_filter {
            if let Some(anchor_id) = f.assignment.get(&e.event_id) {
                match f.anchors.get(anchor_id) {
                    Some(&(alon, alat)) => {
                        if haversine_km(e.lon, e.lat, alon, alat) > f.radius_km {
                            report.too_far_from_anchor += 1;
                            continue;
                        }
                    }
                    None => {
                        report.unknown_anchor += 1;
                        continue;
                    }
                }
            }
        }
        let key = (e.date, e.time_of_day.to_bits(), e.lon.to_bits(), e.lat.to_bits());
        if !seen.insert(key) {
            report.duplicates += 1;
            continue;
        }
        kept.push(e.clone());
    }
    report.kept = kept.len();
    Ok((kept, report))
}
