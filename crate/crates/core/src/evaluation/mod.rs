//! Event-area curves and derived metrics, map comparisons, backtests and
//! synthetic data with a known density.

mod backtest;
mod metrics;
mod synthetic;

pub use backtest::{
    config_hash, run_backtest, simulated_expert, staleness_analysis, summarise, write_curve_csv, write_metrics_csv,
    write_summary_csv, BacktestConfig, BacktestReport, IntelSetting, MetricRow, StalenessReport, StalenessRow,
    SummaryRow,
};
pub use metrics::{
    auc, capture_at_topk, capture_from_curve, cell_counts, curve_from_counts, diff_maps, event_area_curve,
    key_location_report, mean_transition, pai, top_cells, transition_matrix, ClassCounts, DiffLabel, EventAreaCurve,
    MapDiff, TransitionMatrix,
};
pub use synthetic::{generate_synthetic_events, FlareSpec, SyntheticCluster, SyntheticSpec};
