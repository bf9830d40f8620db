//! Domain types, ingestion and cleaning, weekly blocking and the spatial grid.

mod blocking;
mod event;
mod grid;
mod window;

pub use blocking::{block_by_week, events_in_block, BlockRole, BlockedDataset, TemporalBlock, WeekCalendar};
pub use event::{
    clean_events, haversine_km, hours_of, parse_events_csv, parse_events_reader, write_events_csv, AnchorFilter,
    CleanReport, CsvSchema, EventRecord, ParseReport, RowRejection,
};
pub use grid::{build_grid, lonlat_scale, parse_boundary_geojson, BoundingBox, CellId, SpatialGrid, KM_PER_DEGREE};
pub use window::{filter_time_window, TimeWindow};
