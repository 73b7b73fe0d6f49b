//! Monte Carlo experiment driver.

pub mod link;
pub mod report;
pub mod seed;
pub mod sim;

pub use report::{emit_report, parse_report, sensitivity_from_snr, CurvePoint, Experiment, ReportFormat, SimReport};
pub use sim::{run_miss_detection_sweep, run_per_sweep, SimConfig};
