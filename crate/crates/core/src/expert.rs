//! Analyst intel as an extra mixture block: construction from points, the
//! simulated expert used in backtests, and the key-location expert.

use std::io::{Read, Write};

use chrono::NaiveDate;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{lonlat_scale, BlockRole, EventRecord, TemporalBlock, TimeWindow};
use crate::error::{Error, Result};
use crate::inference::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntelSource {
    Analyst,
    Simulated,
    KeyLocation,
}

impl IntelSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Analyst => "analyst",
            Self::Simulated => "simulated",
            Self::KeyLocation => "key-location",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "analyst" => Ok(Self::Analyst),
            "simulated" => Ok(Self::Simulated),
            "key-location" => Ok(Self::KeyLocation),
            other => Err(Error::arg(format!("unknown intel source `{other}`"))),
        }
    }
}

/// A location an analyst expects crime at, within a daily window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntelPoint {
    pub lon: f64,
    pub lat: f64,
    pub window: TimeWindow,
    pub source: IntelSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Pseudo-events for the expert block, one per point, timed at the window
/// mid-point. `None` for no points.
pub fn build_expert_block(points: &[IntelPoint]) -> Option<TemporalBlock> {
    if points.is_empty() {
        return None;
    }
    let events = points
        .iter()
        .enumerate()
        .map(|(k, p)| EventRecord::new(format!("E{}", k + 1), p.lon, p.lat, NaiveDate::default(), p.window.midpoint()))
        .collect();
    Some(TemporalBlock {
        role: BlockRole::Expert,
        start_date: None,
        events,
    })
}

/// Simulated expert: per window, `floor(n p)` of that window's actual events
/// drawn without replacement, each moved to a uniform point of the disc of
/// radius `d_meters` around it.
pub fn simulate_expert_intel(
    actual: &[EventRecord],
    p: f64,
    d_meters: f64,
    windows: &[TimeWindow],
    seed: u64,
) -> Result<Vec<IntelPoint>> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::arg(format!("intel proportion must be in [0, 1], got {p}")));
    }
    if !(d_meters >= 0.0 && d_meters.is_finite()) {
        return Err(Error::arg(format!("intel radius must be >= 0, got {d_meters}")));
    }
    let mut out = Vec::new();
    for (wi, &w) in windows.iter().enumerate() {
        let in_window: Vec<&EventRecord> = actual.iter().filter(|e| w.contains(e.time_of_day)).collect();
        let m = (in_window.len() as f64 * p).floor() as usize;
        if m == 0 {
            continue;
        }
        let mut r = rng::stream(seed, 0x1E7E1, wi as u64, 0);
        let picks = sample(&mut r, in_window.len(), m);
        for i in picks.iter() {
            let e = in_window[i];
            let dist_km = d_meters / 1000.0 * r.random::<f64>().sqrt();
            let theta = r.random::<f64>() * std::f64::consts::TAU;
            let (kx, ky) = lonlat_scale(e.lat);
            out.push(IntelPoint {
                lon: e.lon + dist_km * theta.cos() / kx,
                lat: e.lat + dist_km * theta.sin() / ky,
                window: w,
                source: IntelSource::Simulated,
                note: None,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyLocation {
    pub lon: f64,
    pub lat: f64,
    #[serde(rename = "type")]
    pub kind: String,
}

/// One intel point per key location and window.
pub fn key_location_intel(locations: &[KeyLocation], windows: &[TimeWindow]) -> Vec<IntelPoint> {
    locations
        .iter()
        .flat_map(|loc| {
            windows.iter().map(move |&w| IntelPoint {
                lon: loc.lon,
                lat: loc.lat,
                window: w,
                source: IntelSource::KeyLocation,
                note: Some(loc.kind.clone()),
            })
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct IntelRow {
    lon: f64,
    lat: f64,
    window_start: f64,
    window_end: f64,
    source: String,
    note: Option<String>,
}

/// Intel CSV: `lon,lat,window_start,window_end,source,note`.
pub fn write_intel_csv<W: Write>(writer: W, points: &[IntelPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for p in points {
        w.serialize(IntelRow {
            lon: p.lon,
            lat: p.lat,
            window_start: p.window.start(),
            window_end: p.window.end(),
            source: p.source.as_str().into(),
            note: p.note.clone(),
        })?;
    }
    w.flush().map_err(|e| Error::io("intel csv", e))?;
    Ok(())
}

pub fn read_intel_csv<R: Read>(reader: R) -> Result<Vec<IntelPoint>> {
    let mut out = Vec::new();
    for row in csv::Reader::from_reader(reader).deserialize::<IntelRow>() {
        let row = row?;
        out.push(IntelPoint {
            lon: row.lon,
            lat: row.lat,
            window: TimeWindow::new(row.window_start, row.window_end)?,
            source: IntelSource::parse(&row.source)?,
            note: row.note.filter(|n| !n.is_empty()),
        });
    }
    Ok(out)
}

/// Key-locations CSV: `lon,lat,type`.
pub fn read_key_locations_csv<R: Read>(reader: R) -> Result<Vec<KeyLocation>> {
    csv::Reader::from_reader(reader)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}
