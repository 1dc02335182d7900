//! The encoder-decoder model: construction, training, thresholds, online
//! detection and persistence.

mod architecture;
mod autoencoder;
mod io;
mod train;
mod variant;

pub use architecture::Architecture;
pub use autoencoder::{
    build_model, build_model_with, flag, threshold_from_errors, AutoencoderModel, Detection,
    SeriesResiduals, MIN_CALIBRATION_SAMPLES, THRESHOLD_QUANTILE,
};
pub use io::{decode_model, encode_model, load_model, save_model, FORMAT_VERSION, MAGIC};
pub use train::{train, TrainConfig, TrainHistory};
pub use variant::{abs_residuals, linear_quantile, reconstruction_error, ErrorVariant};
