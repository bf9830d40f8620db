use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{EventRecord, SpatialGrid, TimeWindow};
use crate::error::{Error, Result};
use crate::expert::KeyLocation;
use crate::forecast::{HotspotClass, HotspotGrid};

/// Fraction of events captured against fraction of cells monitored, cells
/// taken in forecast rank order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventAreaCurve {
    /// `(area_fraction, capture_fraction)`, from `(0, 0)` to `(1, 1)`.
    pub points: Vec<(f64, f64)>,
    pub n_events: usize,
    /// Window events that fall outside every masked-in cell.
    pub n_outside: usize,
}

impl EventAreaCurve {
    /// No events to score: the curve and its metrics are undefined.
    pub fn is_empty(&self) -> bool {
        self.n_events == 0
    }
}

/// Events per cell id for the window events; returns counts and the number
/// of events outside the grid.
pub fn cell_counts(grid: &SpatialGrid, events: &[EventRecord], window: TimeWindow) -> (Vec<usize>, usize, usize) {
    let mut counts = vec![0usize; grid.len()];
    let (mut inside, mut outside) = (0, 0);
    for e in events.iter().filter(|e| window.contains(e.time_of_day)) {
        match grid.cell_of(e.lon, e.lat) {
            Some(id) => {
                counts[id as usize] += 1;
                inside += 1;
            }
            None => outside += 1,
        }
    }
    (counts, inside, outside)
}

fn check_grid(h: &HotspotGrid, grid: &SpatialGrid) -> Result<()> {
    if h.len() != grid.len() || h.grid_fingerprint != grid.fingerprint() {
        return Err(Error::GridMismatch("forecast map and grid differ".into()));
    }
    Ok(())
}

pub fn event_area_curve(h: &HotspotGrid, grid: &SpatialGrid, events: &[EventRecord], window: TimeWindow) -> Result<EventAreaCurve> {
    check_grid(h, grid)?;
    let (counts, n_events, n_outside) = cell_counts(grid, events, window);
    Ok(curve_from_counts(&h.order, &counts, n_events, n_outside))
}

/// Curve for an arbitrary ranking (cell ids, best first) of per-cell counts.
pub fn curve_from_counts(order: &[u32], counts: &[usize], n_events: usize, n_outside: usize) -> EventAreaCurve {
    let n = order.len();
    let mut points = Vec::with_capacity(n + 1);
    points.push((0.0, 0.0));
    if n_events > 0 {
        let mut captured = 0usize;
        for (k, &id) in order.iter().enumerate() {
            captured += counts[id as usize];
            points.push(((k + 1) as f64 / n as f64, captured as f64 / n_events as f64));
        }
    }
    EventAreaCurve {
        points,
        n_events,
        n_outside,
    }
}

/// Trapezoidal area under the curve; `None` for an empty curve.
pub fn auc(curve: &EventAreaCurve) -> Option<f64> {
    if curve.is_empty() {
        return None;
    }
    Some(
        curve
            .points
            .windows(2)
            .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
            .sum(),
    )
}

/// Number of top-ranked cells making up `k_pct` percent of the grid.
pub fn top_cells(n_cells: usize, k_pct: f64) -> usize {
    ((n_cells as f64 * k_pct / 100.0).ceil() as usize).min(n_cells)
}

/// Fraction of window events inside the top `k_pct` percent of cells.
pub fn capture_at_topk(h: &HotspotGrid, grid: &SpatialGrid, events: &[EventRecord], window: TimeWindow, k_pct: f64) -> Result<Option<f64>> {
    if !(k_pct > 0.0 && k_pct <= 100.0) {
        return Err(Error::arg(format!("k must be in (0, 100], got {k_pct}")));
    }
    let curve = event_area_curve(h, grid, events, window)?;
    Ok(capture_from_curve(&curve, k_pct))
}

pub fn capture_from_curve(curve: &EventAreaCurve, k_pct: f64) -> Option<f64> {
    if curve.is_empty() {
        return None;
    }
    let n = curve.points.len() - 1;
    Some(curve.points[top_cells(n, k_pct)].1)
}

/// Capture fraction over monitored-area fraction.
pub fn pai(h: &HotspotGrid, grid: &SpatialGrid, events: &[EventRecord], window: TimeWindow, k_pct: f64) -> Result<Option<f64>> {
    Ok(capture_at_topk(h, grid, events, window, k_pct)?.map(|c| c / (k_pct / 100.0)))
}

/// Row-stochastic 3x3 matrix of class changes (red, yellow, other).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    pub probs: [[f64; 3]; 3],
    pub counts: [[usize; 3]; 3],
}

/// Fraction of cells of each class in `a` that have each class in `b`. A
/// class absent from `a` gets an identity row.
pub fn transition_matrix(a: &HotspotGrid, b: &HotspotGrid) -> Result<TransitionMatrix> {
    a.check_same_grid(b)?;
    let mut counts = [[0usize; 3]; 3];
    for (ca, cb) in a.class.iter().zip(&b.class) {
        counts[ca.index()][cb.index()] += 1;
    }
    let mut probs = [[0.0; 3]; 3];
    for i in 0..3 {
        let row: usize = counts[i].iter().sum();
        for j in 0..3 {
            probs[i][j] = if row == 0 {
                if i == j { 1.0 } else { 0.0 }
            } else {
                counts[i][j] as f64 / row as f64
            };
        }
    }
    Ok(TransitionMatrix { probs, counts })
}

/// Element-wise mean of several transition matrices.
pub fn mean_transition(ms: &[TransitionMatrix]) -> Option<[[f64; 3]; 3]> {
    if ms.is_empty() {
        return None;
    }
    let mut out = [[0.0; 3]; 3];
    for m in ms {
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] += m.probs[i][j] / ms.len() as f64;
            }
        }
    }
    Some(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiffLabel {
    /// Not hot in the first map, hot in the second.
    Blue,
    /// Hot in the first map, not in the second.
    Green,
    Unchanged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapDiff {
    pub labels: Vec<DiffLabel>,
    pub n_blue: usize,
    pub n_green: usize,
    pub blue_fraction: f64,
    pub green_fraction: f64,
}

pub fn diff_maps(a: &HotspotGrid, b: &HotspotGrid) -> Result<MapDiff> {
    a.check_same_grid(b)?;
    let labels: Vec<DiffLabel> = a
        .class
        .iter()
        .zip(&b.class)
        .map(|(ca, cb)| match (ca.is_hot(), cb.is_hot()) {
            (false, true) => DiffLabel::Blue,
            (true, false) => DiffLabel::Green,
            _ => DiffLabel::Unchanged,
        })
        .collect();
    let n_blue = labels.iter().filter(|&&l| l == DiffLabel::Blue).count();
    let n_green = labels.iter().filter(|&&l| l == DiffLabel::Green).count();
    let n = labels.len().max(1) as f64;
    Ok(MapDiff {
        labels,
        n_blue,
        n_green,
        blue_fraction: n_blue as f64 / n,
        green_fraction: n_green as f64 / n,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub red: usize,
    pub yellow: usize,
    pub other: usize,
    pub outside: usize,
}

impl ClassCounts {
    pub fn total(&self) -> usize {
        self.red + self.yellow + self.other + self.outside
    }
}

/// Per location type, how many key locations fall in red, yellow and other
/// cells (or outside the grid).
pub fn key_location_report(h: &HotspotGrid, grid: &SpatialGrid, locations: &[KeyLocation]) -> Result<BTreeMap<String, ClassCounts>> {
    check_grid(h, grid)?;
    let mut out: BTreeMap<String, ClassCounts> = BTreeMap::new();
    for loc in locations {
        let c = out.entry(loc.kind.clone()).or_default();
        match grid.cell_of(loc.lon, loc.lat).map(|id| h.class[id as usize]) {
            Some(HotspotClass::Red) => c.red += 1,
            Some(HotspotClass::Yellow) => c.yellow += 1,
            Some(HotspotClass::Other) => c.other += 1,
            None => c.outside += 1,
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::ClassThresholds;
    use chrono::NaiveDate;

    fn grid(n: usize) -> SpatialGrid {
        SpatialGrid::from_parts(0.0, 0.0, 1.0, 1.0, n, 1, vec![true; n]).unwrap()
    }

    fn map(g: &SpatialGrid, logd: Vec<f64>) -> HotspotGrid {
        HotspotGrid::from_log_density(logd, g, None, TimeWindow::FULL_DAY, "m", ClassThresholds::default()).unwrap()
    }

    fn ev(lon: f64) -> EventRecord {
        EventRecord::new("e", lon, 0.5, NaiveDate::from_ymd_opt(2021, 1, 1).unwrap(), 12.0)
    }

    #[test]
    fn all_events_in_top_cell() {
        let g = grid(10);
        let h = map(&g, (0..10).map(|i| -(i as f64)).collect());
        let evs = vec![ev(0.5); 4];
        let c = event_area_curve(&h, &g, &evs, TimeWindow::FULL_DAY).unwrap();
        assert_eq!(c.points[1], (0.1, 1.0));
        assert!((auc(&c).unwrap() - 0.95).abs() < 1e-12);
        assert_eq!(capture_at_topk(&h, &g, &evs, TimeWindow::FULL_DAY, 100.0).unwrap(), Some(1.0));
        assert_eq!(pai(&h, &g, &evs, TimeWindow::FULL_DAY, 100.0).unwrap(), Some(1.0));
    }

    #[test]
    fn diagonal_curve_auc_half() {
        let g = grid(8);
        let h = map(&g, vec![0.0; 8]);
        let evs: Vec<_> = (0..8).map(|i| ev(i as f64 + 0.5)).collect();
        let c = event_area_curve(&h, &g, &evs, TimeWindow::FULL_DAY).unwrap();
        assert!((auc(&c).unwrap() - 0.5).abs() < 1e-12);
        let flat = EventAreaCurve {
            points: vec![(0.0, 0.0), (1.0, 1.0)],
            n_events: 1,
            n_outside: 0,
        };
        assert_eq!(auc(&flat), Some(0.5));
    }

    #[test]
    fn empty_and_outside() {
        let g = grid(4);
        let h = map(&g, vec![0.0; 4]);
        let c = event_area_curve(&h, &g, &[ev(10.0)], TimeWindow::FULL_DAY).unwrap();
        assert!(c.is_empty());
        assert_eq!(c.n_outside, 1);
        assert_eq!(auc(&c), None);
    }

    #[test]
    fn transitions_and_diff() {
        let g = grid(10);
        let a = map(&g, (0..10).map(|i| -(i as f64)).collect());
        let t = transition_matrix(&a, &a).unwrap();
        for i in 0..3 {
            assert_eq!(t.probs[i][i], 1.0);
        }
        let b = map(&g, (0..10).map(|i| i as f64).collect());
        let d = diff_maps(&a, &b).unwrap();
        assert_eq!(d.n_blue, d.n_green);
        assert_eq!(d.n_blue, 4);
        let t = transition_matrix(&a, &b).unwrap();
        for row in t.probs {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(transition_matrix(&a, &map(&grid(5), vec![0.0; 5])).is_err());
    }

    #[test]
    fn key_locations_by_class() {
        let g = grid(5);
        let h = map(&g, vec![4.0, 3.0, 2.0, 1.0, 0.0]);
        let locs = vec![
            KeyLocation { lon: 0.5, lat: 0.5, kind: "metro".into() },
            KeyLocation { lon: 1.5, lat: 0.5, kind: "metro".into() },
            KeyLocation { lon: 4.5, lat: 0.5, kind: "temple".into() },
            KeyLocation { lon: 40.0, lat: 0.5, kind: "temple".into() },
        ];
        let r = key_location_report(&h, &g, &locs).unwrap();
        assert_eq!(r["metro"], ClassCounts { red: 1, yellow: 1, other: 0, outside: 0 });
        assert_eq!(r["temple"], ClassCounts { red: 0, yellow: 0, other: 1, outside: 1 });
        assert!(key_location_report(&h, &g, &[]).unwrap().is_empty());
    }
}
