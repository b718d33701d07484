//! Point-forecast metrics and quantile calibration.

mod calibration;
mod metrics;

pub use calibration::{default_levels, empirical_coverage, ReliabilityTable, MIN_SAMPLES};
pub use metrics::{mae, metrics_report, mse, MetricsReport};
