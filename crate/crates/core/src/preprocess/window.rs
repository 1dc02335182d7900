use crate::domain::{PixelId, PixelSeries, WindowSpec, BAND_COUNT};
use crate::seed;

/// One model input of shape `window_size x 9`, tagged with its origin.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceBatch {
    pub pixel: PixelId,
    pub start: usize,
    pub rows: Vec<[f64; BAND_COUNT]>,
}

impl SequenceBatch {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Index of the last step covered by this window.
    pub fn end(&self) -> usize {
        self.start + self.rows.len() - 1
    }
}

/// Windows taken every `stride` steps from the start of the series. A series
/// shorter than the window yields nothing.
pub fn make_windows(series: &PixelSeries, spec: WindowSpec) -> Vec<SequenceBatch> {
    make_windows_from(series, spec, 0)
}

/// Like [`make_windows`], with the first window starting at `offset`.
pub fn make_windows_from(series: &PixelSeries, spec: WindowSpec, offset: usize) -> Vec<SequenceBatch> {
    let n = series.len();
    if n < offset + spec.window_size {
        return Vec::new();
    }
    (offset..=n - spec.window_size)
        .step_by(spec.stride)
        .map(|start| SequenceBatch {
            pixel: series.pixel,
            start,
            rows: series.values[start..start + spec.window_size].to_vec(),
        })
        .collect()
}

/// Non-overlapping training windows. Each pixel starts at its own seeded
/// offset below the stride, so windows of a long stride do not all begin at
/// the same phase of the seasonal cycle.
pub fn training_windows(series: &PixelSeries, spec: WindowSpec, seed: u64) -> Vec<SequenceBatch> {
    let offset = seed::mix(&[seed, series.pixel.x as u64, series.pixel.y as u64]) % spec.stride as u64;
    make_windows_from(series, spec, offset as usize)
}
