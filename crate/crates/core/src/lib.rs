//! Early-warning detection of forest-health anomalies in multispectral pixel
//! time series with a recurrent (LSTM) autoencoder.

pub mod config;
pub mod domain;
pub mod error;
pub mod evaluation;
pub mod ingest;
pub mod model;
pub mod neuralnet;
pub mod preprocess;
pub mod seed;
pub mod synthgen;

pub use error::{Error, Result};
