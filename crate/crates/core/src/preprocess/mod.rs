//! Turns masked raw series into gap-free, scaled, windowed weekly series.
//!
//! The fixed order is: scene-class mask, additive decomposition on the raw
//! grid, Tukey fences on the remainder, weekly aggregation, Savitzky-Golay
//! smoothing, exponentially weighted gap filling, min-max scaling, windowing.

mod aggregate;
mod decompose;
mod impute;
mod io;
mod outlier;
mod pipeline;
mod scaling;
mod sgf;
mod window;

pub use aggregate::aggregate_weekly;
pub use decompose::{decompose, DecompositionResult, MAX_GAP_FRACTION};
pub use impute::ewma_impute;
pub use io::{read_series_csv, write_series_csv, SERIES_HEADER};
pub use outlier::{hazen_quantile, tukey_outlier_mask};
pub use pipeline::{preprocess_pixel, preprocess_scene, remove_outliers, PreprocessConfig};
pub use scaling::{apply_scaling, fit_scaling, unscale, ScalingParams};
pub use sgf::{savitzky_golay, SgfConfig};
pub use window::{make_windows, make_windows_from, training_windows, SequenceBatch};
