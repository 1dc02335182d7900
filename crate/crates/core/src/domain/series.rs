use serde::{Deserialize, Serialize};

use super::{BandId, TimeAxis, BAND_COUNT};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PixelId {
    pub x: i64,
    pub y: i64,
}

impl PixelId {
    pub const fn new(x: i64, y: i64) -> Self {
        PixelId { x, y }
    }
}

/// One pixel's multivariate reflectance series. Rows are meaningful only
/// where `valid` is set.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelSeries {
    pub pixel: PixelId,
    pub axis: TimeAxis,
    pub values: Vec<[f64; BAND_COUNT]>,
    pub valid: Vec<bool>,
}

impl PixelSeries {
    pub fn new(
        pixel: PixelId,
        axis: TimeAxis,
        values: Vec<[f64; BAND_COUNT]>,
        valid: Vec<bool>,
    ) -> Result<Self> {
        if values.len() != axis.len || valid.len() != axis.len {
            return Err(Error::Shape(format!(
                "series for {pixel:?}: axis length {}, {} value rows, {} mask entries",
                axis.len,
                values.len(),
                valid.len()
            )));
        }
        Ok(PixelSeries {
            pixel,
            axis,
            values,
            valid,
        })
    }

    /// Fully valid series.
    pub fn dense(pixel: PixelId, axis: TimeAxis, values: Vec<[f64; BAND_COUNT]>) -> Result<Self> {
        let valid = vec![true; values.len()];
        Self::new(pixel, axis, values, valid)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    pub fn is_gap_free(&self) -> bool {
        self.valid.iter().all(|&v| v) && self.values.iter().flatten().all(|v| v.is_finite())
    }

    pub fn band(&self, band: BandId) -> Vec<f64> {
        self.values.iter().map(|row| row[band.index()]).collect()
    }

    pub fn set_band(&mut self, band: BandId, values: &[f64]) {
        debug_assert_eq!(values.len(), self.values.len());
        for (row, &v) in self.values.iter_mut().zip(values) {
            row[band.index()] = v;
        }
    }
}

/// Window sizes the autoencoder is defined for.
pub const SUPPORTED_WINDOWS: [usize; 4] = [4, 12, 26, 52];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub window_size: usize,
    pub stride: usize,
}

impl WindowSpec {
    pub fn new(window_size: usize, stride: usize) -> Result<Self> {
        if window_size == 0 || stride == 0 {
            return Err(Error::Config(format!(
                "window size and stride must be positive (got {window_size}, {stride})"
            )));
        }
        Ok(WindowSpec {
            window_size,
            stride,
        })
    }

    /// Non-overlapping windows, used for training.
    pub fn training(window_size: usize) -> Self {
        WindowSpec {
            window_size,
            stride: window_size,
        }
    }

    /// Every step scored, used for online inference.
    pub fn sliding(window_size: usize) -> Self {
        WindowSpec {
            window_size,
            stride: 1,
        }
    }

    pub fn is_supported(&self) -> bool {
        SUPPORTED_WINDOWS.contains(&self.window_size)
    }
}
