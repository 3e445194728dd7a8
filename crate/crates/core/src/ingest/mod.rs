//! Getting traffic into multi-resolution datasets.

mod csv_io;
mod dataset;
mod logdomain;
mod mrtg;

pub use csv_io::{parse_csv, read_csv, write_csv, write_csv_to, CsvOptions, GapPolicy, STEP_TOLERANCE};
pub use dataset::{build_dataset, MultiScaleDataset, ValueScale, DEFAULT_HOLDOUT_STEPS};
pub use logdomain::{log_domain_wrap, unwrap_forecast, LogWrapped, PointKind};
pub use mrtg::{parse_mrtg_log, parse_mrtg_str, Direction, MrtgBand, MrtgLog, MRTG_BAND_STEPS, SPACING_TOLERANCE};
