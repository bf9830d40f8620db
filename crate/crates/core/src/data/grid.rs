use geo::{Contains, Coord, MultiPolygon, Point};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};

/// Kilometres per degree on the spherical-earth approximation.
pub const KM_PER_DEGREE: f64 = 111.32;

/// (km per degree of longitude, km per degree of latitude) at latitude `lat`.
pub fn lonlat_scale(lat: f64) -> (f64, f64) {
    (KM_PER_DEGREE * lat.to_radians().cos(), KM_PER_DEGREE)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub west: f64,
    pub south: f64,
    pub east: f64,
    pub north: f64,
}

impl BoundingBox {
    pub const fn new(west: f64, south: f64, east: f64, north: f64) -> Self {
        Self { west, south, east, north }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.west, self.south, self.east, self.north].iter().all(|v| v.is_finite());
        if !finite || self.west >= self.east || self.south >= self.north || self.south.abs() >= 90.0 || self.north.abs() >= 90.0 {
            return Err(Error::arg(format!("degenerate bounding box {self:?}")));
        }
        Ok(())
    }

    pub fn contains(&self, lon: f64, lat: f64) -> bool {
        lon >= self.west && lon <= self.east && lat >= self.south && lat <= self.north
    }

    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.west + self.east), 0.5 * (self.south + self.north))
    }

    /// Box of `width_km` by `height_km` centred on (lon, lat).
    pub fn around(lon: f64, lat: f64, width_km: f64, height_km: f64) -> Self {
        let (kx, ky) = lonlat_scale(lat);
        let (hw, hh) = (0.5 * width_km / kx, 0.5 * height_km / ky);
        Self::new(lon - hw, lat - hh, lon + hw, lat + hh)
    }
}

pub type CellId = u32;

#[derive(Serialize, Deserialize)]
struct GridRepr {
    origin_lon: f64,
    origin_lat: f64,
    cell_lon: f64,
    cell_lat: f64,
    n_cols: usize,
    n_rows: usize,
    mask: Vec<bool>,
}

impl From<GridRepr> for SpatialGrid {
    fn from(r: GridRepr) -> Self {
        let mut g = SpatialGrid {
            origin_lon: r.origin_lon,
            origin_lat: r.origin_lat,
            cell_lon: r.cell_lon,
            cell_lat: r.cell_lat,
            n_cols: r.n_cols,
            n_rows: r.n_rows,
            mask: r.mask,
            ids: Vec::new(),
            cells: Vec::new(),
        };
        g.index();
        g
    }
}

impl From<SpatialGrid> for GridRepr {
    fn from(g: SpatialGrid) -> Self {
        GridRepr {
            origin_lon: g.origin_lon,
            origin_lat: g.origin_lat,
            cell_lon: g.cell_lon,
            cell_lat: g.cell_lat,
            n_cols: g.n_cols,
            n_rows: g.n_rows,
            mask: g.mask,
        }
    }
}

/// Regular lon/lat grid over the city. Cells outside the mask have no id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "GridRepr", into = "GridRepr")]
pub struct SpatialGrid {
    pub origin_lon: f64,
    pub origin_lat: f64,
    pub cell_lon: f64,
    pub cell_lat: f64,
    pub n_cols: usize,
    pub n_rows: usize,
    /// Row-major, row 0 at the south edge.
    pub mask: Vec<bool>,
    ids: Vec<Option<CellId>>,
    cells: Vec<usize>,
}

impl SpatialGrid {
    pub fn from_parts(
        origin_lon: f64,
        origin_lat: f64,
        cell_lon: f64,
        cell_lat: f64,
        n_cols: usize,
        n_rows: usize,
        mask: Vec<bool>,
    ) -> Result<Self> {
        if mask.len() != n_cols * n_rows {
            return Err(Error::arg("grid mask size does not match n_cols * n_rows"));
        }
        if !(cell_lon > 0.0 && cell_lat > 0.0) {
            return Err(Error::arg("grid cell sizes must be positive"));
        }
        let mut g = Self {
            origin_lon,
            origin_lat,
            cell_lon,
            cell_lat,
            n_cols,
            n_rows,
            mask,
            ids: Vec::new(),
            cells: Vec::new(),
        };
        g.index();
        Ok(g)
    }

    fn index(&mut self) {
        self.ids = vec![None; self.mask.len()];
        self.cells.clear();
        for (i, &inside) in self.mask.iter().enumerate() {
            if inside {
                self.ids[i] = Some(self.cells.len() as CellId);
                self.cells.push(i);
            }
        }
    }

    /// Number of masked-in cells.
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Masked-in cell containing (lon, lat). West and south edges are inclusive.
    pub fn cell_of(&self, lon: f64, lat: f64) -> Option<CellId> {
        let fx = ((lon - self.origin_lon) / self.cell_lon).floor();
        let fy = ((lat - self.origin_lat) / self.cell_lat).floor();
        if !(fx >= 0.0 && fy >= 0.0) || fx >= self.n_cols as f64 || fy >= self.n_rows as f64 {
            return None;
        }
        let idx = fy as usize * self.n_cols + fx as usize;
        self.ids.get(idx).copied().flatten()
    }

    fn row_col(&self, id: CellId) -> (usize, usize) {
        let flat = self.cells[id as usize];
        (flat / self.n_cols, flat % self.n_cols)
    }

    pub fn center(&self, id: CellId) -> (f64, f64) {
        let (r, c) = self.row_col(id);
        (
            self.origin_lon + (c as f64 + 0.5) * self.cell_lon,
            self.origin_lat + (r as f64 + 0.5) * self.cell_lat,
        )
    }

    pub fn centers(&self) -> Vec<(f64, f64)> {
        (0..self.len() as CellId).map(|id| self.center(id)).collect()
    }

    /// Closed ring of the cell outline, counter-clockwise from the south-west corner.
    pub fn polygon(&self, id: CellId) -> [[f64; 2]; 5] {
        let (r, c) = self.row_col(id);
        let x0 = self.origin_lon + c as f64 * self.cell_lon;
        let y0 = self.origin_lat + r as f64 * self.cell_lat;
        let (x1, y1) = (x0 + self.cell_lon, y0 + self.cell_lat);
        [[x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]]
    }

    pub fn same_layout(&self, other: &SpatialGrid) -> bool {
        self.n_cols == other.n_cols
            && self.n_rows == other.n_rows
            && self.origin_lon == other.origin_lon
            && self.origin_lat == other.origin_lat
            && self.cell_lon == other.cell_lon
            && self.cell_lat == other.cell_lat
            && self.mask == other.mask
    }

    /// Short hash of the layout, for checking that two maps share a grid.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let repr = GridRepr::from(self.clone());
        let bytes = serde_json::to_vec(&repr).unwrap_or_default();
        Sha256::digest(&bytes).iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// GeoJSON FeatureCollection with one polygon per cell and properties
    /// `{cell_id, lon, lat}` (the cell centre).
    pub fn to_geojson(&self) -> Value {
        let features: Vec<Value> = (0..self.len() as CellId)
            .map(|id| {
                let (lon, lat) = self.center(id);
                json!({
                    "type": "Feature",
                    "geometry": {"type": "Polygon", "coordinates": [self.polygon(id)]},
                    "properties": {"cell_id": id, "lon": lon, "lat": lat},
                })
            })
            .collect();
        json!({"type": "FeatureCollection", "features": features})
    }
}

/// Grid of roughly `target_cell_meters` square cells over `bbox`, sized at
/// the bbox centre latitude. With a mask polygon only cells whose centre lies
/// inside it are kept.
pub fn build_grid(bbox: &BoundingBox, target_cell_meters: f64, mask_polygon: Option<&MultiPolygon<f64>>) -> Result<SpatialGrid> {
    bbox.validate()?;
    if !(target_cell_meters > 0.0 && target_cell_meters.is_finite()) {
        return Err(Error::arg(format!("cell size must be > 0, got {target_cell_meters}")));
    }
    let (_, lat_c) = bbox.center();
    let (kx, ky) = lonlat_scale(lat_c);
    let cell_km = target_cell_meters / 1000.0;
    let cell_lon = cell_km / kx;
    let cell_lat = cell_km / ky;
    let n_cols = (((bbox.east - bbox.west) / cell_lon) - 1e-9).ceil().max(1.0) as usize;
    let n_rows = (((bbox.north - bbox.south) / cell_lat) - 1e-9).ceil().max(1.0) as usize;
    let mut mask = vec![true; n_cols * n_rows];
    if let Some(poly) = mask_polygon {
        for r in 0..n_rows {
            for c in 0..n_cols {
                let p = Point(Coord {
                    x: bbox.west + (c as f64 + 0.5) * cell_lon,
                    y: bbox.south + (r as f64 + 0.5) * cell_lat,
                });
                mask[r * n_cols + c] = poly.contains(&p);
            }
        }
    }
    SpatialGrid::from_parts(bbox.west, bbox.south, cell_lon, cell_lat, n_cols, n_rows, mask)
}

/// Polygons and multipolygons found anywhere in a GeoJSON document.
pub fn parse_boundary_geojson(text: &str) -> Result<MultiPolygon<f64>> {
    let gj: geojson::GeoJson = text.parse().map_err(|e: geojson::Error| Error::GeoJson(e.to_string()))?;
    let coll = geo::GeometryCollection::<f64>::try_from(&gj).map_err(|e| Error::GeoJson(e.to_string()))?;
    let mut polys = Vec::new();
    for g in coll {
        match g {
            geo::Geometry::Polygon(p) => polys.push(p),
            geo::Geometry::MultiPolygon(mp) => polys.extend(mp),
            _ => {}
        }
    }
    if polys.is_empty() {
        return Err(Error::GeoJson("no Polygon or MultiPolygon in boundary".into()));
    }
    Ok(MultiPolygon::new(polys))
}
