use serde::{Deserialize, Serialize};

use super::{aggregate_weekly, decompose, ewma_impute, savitzky_golay, tukey_outlier_mask, SgfConfig};
use rayon::prelude::*;

use crate::domain::{BandId, PixelSeries};
use crate::error::{Error, Result};
use crate::ingest::{apply_scl_filter_on, group_by_pixel, raw_axis_for, RawObservation, SclPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub tukey_k: f64,
    /// Seasonal period on the raw 5-day grid.
    pub raw_period: usize,
    pub sgf: SgfConfig,
    pub ewma_horizon: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            tukey_k: 1.5,
            raw_period: 73,
            sgf: SgfConfig::default(),
            ewma_horizon: 4,
        }
    }
}

/// Masks raw samples whose decomposition remainder falls outside the Tukey
/// fences in any band. Series that are too short or too gappy to decompose
/// are returned unchanged.
pub fn remove_outliers(raw: &PixelSeries, cfg: &PreprocessConfig) -> Result<PixelSeries> {
    let mut flagged = vec![false; raw.len()];
    for band in BandId::ALL {
        let values = raw.band(band);
        let parts = match decompose(&values, &raw.valid, cfg.raw_period) {
            Ok(p) => p,
            Err(Error::InsufficientData(why)) => {
                log::warn!(
                    "pixel ({}, {}): skipping outlier removal: {why}",
                    raw.pixel.x,
                    raw.pixel.y
                );
                return Ok(raw.clone());
            }
            Err(e) => return Err(e),
        };
        let mask = tukey_outlier_mask(&parts.remainder, &raw.valid, cfg.tukey_k)?;
        flagged.iter_mut().zip(mask).for_each(|(f, m)| *f |= m);
    }
    let mut out = raw.clone();
    out.valid.iter_mut().zip(flagged).for_each(|(v, f)| *v &= !f);
    Ok(out)
}

/// Masked raw 5-day series to a gap-free weekly series in reflectance units.
pub fn preprocess_pixel(raw: &PixelSeries, cfg: &PreprocessConfig) -> Result<PixelSeries> {
    let cleaned = remove_outliers(raw, cfg)?;
    let mut weekly = aggregate_weekly(&cleaned);
    for band in BandId::ALL {
        let smoothed = savitzky_golay(&weekly.band(band), &weekly.valid, &cfg.sgf)?;
        let filled = ewma_impute(&smoothed, &weekly.valid, cfg.ewma_horizon)?;
        weekly.set_band(band, &filled);
    }
    weekly.valid.fill(true);
    Ok(weekly)
}

/// Masks, cleans and aggregates every pixel of a scene on one shared raw
/// axis, so all output series share the same weekly axis. Output is ordered
/// by pixel.
pub fn preprocess_scene(
    observations: Vec<RawObservation>,
    policy: &SclPolicy,
    cfg: &PreprocessConfig,
) -> Result<Vec<PixelSeries>> {
    let axis = raw_axis_for(&observations)?;
    let groups: Vec<Vec<RawObservation>> = group_by_pixel(observations).into_values().collect();
    groups
        .par_iter()
        .map(|obs| preprocess_pixel(&apply_scl_filter_on(obs, policy, axis)?, cfg))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{PixelId, TimeAxis, BAND_COUNT};
    use chrono::NaiveDate;

    fn raw_series(n: usize, valid: impl Fn(usize) -> bool, f: impl Fn(usize) -> f64) -> PixelSeries {
        let axis = TimeAxis::new(NaiveDate::from_ymd_opt(2018, 1, 1).unwrap(), 5, n).unwrap();
        let values = (0..n).map(|t| [f(t); BAND_COUNT]).collect();
        let mask = (0..n).map(valid).collect();
        PixelSeries::new(PixelId::new(0, 0), axis, values, mask).unwrap()
    }

    #[test]
    fn spike_is_removed_before_aggregation() {
        let n = 73 * 3;
        let s = raw_series(n, |_| true, |t| {
            let base = 0.3 + 0.05 * (2.0 * std::f64::consts::PI * t as f64 / 73.0).sin();
            if t == 100 { base + 0.5 } else { base + 0.002 * ((t * 7919) % 13) as f64 / 13.0 }
        });
        let cleaned = remove_outliers(&s, &PreprocessConfig::default()).unwrap();
        assert!(!cleaned.valid[100]);
        assert!(cleaned.valid_count() > n - 10);
    }

    #[test]
    fn output_is_weekly_and_gap_free() {
        let n = 73 * 3;
        let s = raw_series(n, |t| t % 9 != 4, |t| 0.3 + 0.05 * (t as f64 * 0.086).sin());
        let out = preprocess_pixel(&s, &PreprocessConfig::default()).unwrap();
        assert_eq!(out.axis.step_days, 7);
        assert!(out.is_gap_free());
        assert_eq!(out.len(), (n - 1) * 5 / 7 + 1);
    }

    #[test]
    fn deterministic() {
        let s = raw_series(200, |t| t % 5 != 1, |t| ((t * 37) % 17) as f64 / 40.0 + 0.2);
        let a = preprocess_pixel(&s, &PreprocessConfig::default()).unwrap();
        let b = preprocess_pixel(&s, &PreprocessConfig::default()).unwrap();
        assert_eq!(a, b);
    }
}
