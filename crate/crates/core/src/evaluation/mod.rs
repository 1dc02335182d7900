//! Vegetation-index labelling, detection scoring, metrics, the harmonic
//! break-detection baseline and map rendering.

mod baseline;
mod indices;
mod map;
mod report;
mod score;

pub use baseline::{
    baseline_break_detect, fit_harmonic, harmonic_break, BaselineConfig, HarmonicFit, VegetationIndex,
};
pub use indices::{label_defoliation, ndvi, ndvi_row, tcw, tcw_row, Combinator, DefoliationRule};
pub use map::{
    grid_csv, grid_from_records, render_ppm, score_color, sequential_color, MapLayer, RasterGrid, NO_DATA,
};
pub use report::{aggregate, read_records_csv, report_json, write_records_csv, EvaluationReport, RECORDS_HEADER};
pub use score::{classify, pd_score, Class, DetectionRecord, ScoreConfig};
