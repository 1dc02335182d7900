use std::collections::BTreeMap;

use log::warn;
use rayon::prelude::*;

use super::architecture::{check_window, Architecture};
use super::variant::{abs_residuals, linear_quantile, ErrorVariant};
use crate::domain::{PixelSeries, BAND_COUNT};
use crate::error::{Error, Result};
use crate::neuralnet::{Matrix, Network};
use crate::preprocess::{apply_scaling, ScalingParams, SequenceBatch};

/// Quantile of healthy reconstruction errors used as the detection threshold.
pub const THRESHOLD_QUANTILE: f64 = 0.998;

/// Fewer calibration errors than this make the extreme quantile unreliable.
pub const MIN_CALIBRATION_SAMPLES: usize = 500;

/// A recurrent autoencoder bound to one window length, with the scaling it
/// was trained under and per-variant detection thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderModel {
    pub architecture: Architecture,
    pub window_size: usize,
    pub scaling: Option<ScalingParams>,
    pub thresholds: BTreeMap<ErrorVariant, f64>,
    pub seed: u64,
    pub network: Network,
}

/// Builds an untrained model with seeded weights.
pub fn build_model(window_size: usize, architecture: Architecture, seed: u64) -> Result<AutoencoderModel> {
    build_model_with(window_size, architecture, seed, false)
}

/// Like [`build_model`]; `allow_unsupported` lifts the window-size whitelist.
pub fn build_model_with(
    window_size: usize,
    architecture: Architecture,
    seed: u64,
    allow_unsupported: bool,
) -> Result<AutoencoderModel> {
    check_window(window_size, allow_unsupported)?;
    let mut network = architecture.network()?;
    network.init(seed);
    Ok(AutoencoderModel {
        architecture,
        window_size,
        scaling: None,
        thresholds: BTreeMap::new(),
        seed,
        network,
    })
}

pub(crate) fn rows_to_matrix(rows: &[[f64; BAND_COUNT]]) -> Matrix {
    Matrix::from_vec(rows.len(), BAND_COUNT, rows.concat()).expect("rows are 9 wide")
}

fn matrix_to_rows(m: &Matrix) -> Vec<[f64; BAND_COUNT]> {
    m.iter_rows()
        .map(|r| r.try_into().expect("output is 9 wide"))
        .collect()
}

/// Per-week absolute band residuals, each taken from the window that scores
/// that week. Weeks without a scoring window are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesResiduals {
    pub residuals: Vec<Option<[f64; BAND_COUNT]>>,
}

impl SeriesResiduals {
    pub fn errors(&self, variant: ErrorVariant) -> Vec<Option<f64>> {
        self.residuals
            .iter()
            .map(|r| r.as_ref().map(|r| variant.reduce(r)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub errors: Vec<Option<f64>>,
    pub flags: Vec<bool>,
}

pub fn flag(errors: &[Option<f64>], tau: f64) -> Detection {
    Detection {
        errors: errors.to_vec(),
        flags: errors.iter().map(|e| e.is_some_and(|e| e > tau)).collect(),
    }
}

impl AutoencoderModel {
    pub fn param_count(&self) -> usize {
        self.network.param_len()
    }

    /// Applies the stored training scaling, if any, to a physical series.
    pub fn scale(&self, series: &PixelSeries) -> PixelSeries {
        match &self.scaling {
            Some(p) => apply_scaling(series, p),
            None => series.clone(),
        }
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.window_size {
            return Err(Error::WindowMismatch {
                model: self.window_size,
                requested: len,
            });
        }
        Ok(())
    }

    /// Inference-mode reconstruction of one scaled window.
    pub fn reconstruct(&self, window: &SequenceBatch) -> Result<Vec<[f64; BAND_COUNT]>> {
        self.check_len(window.len())?;
        let out = self.network.predict(&rows_to_matrix(&window.rows))?;
        Ok(matrix_to_rows(&out))
    }

    pub fn threshold(&self, variant: ErrorVariant) -> Option<f64> {
        self.thresholds.get(&variant).copied()
    }

    /// Sets the threshold of every variant from healthy held-out windows and
    /// returns them.
    pub fn calibrate(&mut self, healthy: &[SequenceBatch]) -> Result<BTreeMap<ErrorVariant, f64>> {
        let residuals = self.window_residuals(healthy)?;
        let mut out = BTreeMap::new();
        for variant in ErrorVariant::ALL {
            let errors: Vec<f64> = residuals.iter().map(|r| variant.reduce(r)).collect();
            out.insert(variant, threshold_from_errors(errors)?);
        }
        self.thresholds.clone_from(&out);
        Ok(out)
    }

    fn window_residuals(&self, windows: &[SequenceBatch]) -> Result<Vec<[f64; BAND_COUNT]>> {
        if windows.is_empty() {
            return Err(Error::EmptyInput("calibration windows"));
        }
        let per_window = windows
            .par_iter()
            .map(|w| abs_residuals(&w.rows, &self.reconstruct(w)?))
            .collect::<Result<Vec<_>>>()?;
        Ok(per_window.into_iter().flatten().collect())
    }

    /// Scores a scaled, gap-free series online: week `t` takes its residual
    /// from the earliest window that ends at or after `t` and covers it. With
    /// stride 1 that is the window ending at `t`, so a flag never depends on
    /// later weeks; the first `window_size - 1` weeks stay unscored.
    pub fn score_series(&self, series: &PixelSeries, stride: usize) -> Result<SeriesResiduals> {
        let ws = self.window_size;
        let n = series.len();
        if stride == 0 {
            return Err(Error::Config("stride must be positive".into()));
        }
        if n < ws {
            return Err(Error::InsufficientData(format!(
                "series of {n} weeks is shorter than the {ws}-week window"
            )));
        }
        let mut starts: Vec<usize> = (0..=n - ws).step_by(stride).collect();
        if starts.last() != Some(&(n - ws)) {
            starts.push(n - ws);
        }
        let mut residuals = vec![None; n];
        let mut scored_until = ws - 1;
        for start in starts {
            let rows = &series.values[start..start + ws];
            let recon = matrix_to_rows(&self.network.predict(&rows_to_matrix(rows))?);
            let res = abs_residuals(rows, &recon)?;
            for (t, r) in residuals
                .iter_mut()
                .enumerate()
                .take(start + ws)
                .skip(scored_until)
            {
                *r = Some(res[t - start]);
            }
            scored_until = start + ws;
        }
        Ok(SeriesResiduals { residuals })
    }

    pub fn detect(
        &self,
        series: &PixelSeries,
        variant: ErrorVariant,
        tau: f64,
        stride: usize,
    ) -> Result<Detection> {
        Ok(flag(&self.score_series(series, stride)?.errors(variant), tau))
    }
}

/// The calibration quantile of a sample of healthy errors.
pub fn threshold_from_errors(mut errors: Vec<f64>) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::EmptyInput("calibration errors"));
    }
    if errors.len() < MIN_CALIBRATION_SAMPLES {
        warn!(
            "only {} calibration errors; the {THRESHOLD_QUANTILE} quantile is unreliable",
            errors.len()
        );
    }
    errors.sort_by(f64::total_cmp);
    Ok(linear_quantile(&errors, THRESHOLD_QUANTILE).expect("non-empty"))
}
