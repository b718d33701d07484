//! Datasets, synthetic signals, windowing and preprocessing.

mod csvio;
mod dataset;
mod pipeline;
mod revin;
mod scaler;
mod synthetic;
mod windows;

pub use csvio::{load_csv, read_csv, write_csv, write_csv_to};
pub use dataset::{known_split, Split, SplitRanges, TimeSeriesDataset};
pub use pipeline::{revin_batch, PreprocessConfig, Preprocessor};
pub use revin::{revin_denormalize, revin_normalize, RevinState, REVIN_EPS};
pub use scaler::{fit_scaler, Scaler, ScalerKind};
pub use synthetic::{generate_synthetic, generate_synthetic_with, SyntheticConfig, SyntheticMode};
pub use windows::{make_windows, temporal_folds, window_count, WindowBatch};
