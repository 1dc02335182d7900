use serde::{Deserialize, Serialize};

use crate::domain::{BandId, PixelSeries, BAND_COUNT};

/// Normalized difference vegetation index of one observation; `None` where
/// NIR + red is zero.
pub fn ndvi_row(row: &[f64; BAND_COUNT]) -> Option<f64> {
    let nir = row[BandId::B8.index()];
    let red = row[BandId::B4.index()];
    let sum = nir + red;
    (sum != 0.0).then(|| (nir - red) / sum)
}

/// Tasseled cap wetness of one observation.
pub fn tcw_row(row: &[f64; BAND_COUNT]) -> f64 {
    use BandId::*;
    let b = |id: BandId| row[id.index()];
    0.1509 * b(B2) + 0.1973 * b(B3) + 0.3279 * b(B4) + 0.3406 * b(B8)
        - 0.7112 * b(B11)
        - 0.4572 * b(B12)
}

pub fn ndvi(series: &PixelSeries) -> Vec<Option<f64>> {
    series.values.iter().map(ndvi_row).collect()
}

pub fn tcw(series: &PixelSeries) -> Vec<f64> {
    series.values.iter().map(tcw_row).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Combinator {
    #[default]
    Or,
    And,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DefoliationRule {
    pub ndvi_threshold: f64,
    pub tcw_threshold: f64,
    pub run: usize,
    pub combinator: Combinator,
}

impl Default for DefoliationRule {
    fn default() -> Self {
        DefoliationRule {
            ndvi_threshold: 0.53,
            tcw_threshold: -0.03,
            run: 3,
            combinator: Combinator::Or,
        }
    }
}

impl DefoliationRule {
    /// Whether one observation counts as below threshold. An undefined NDVI
    /// never counts as low.
    pub fn is_low(&self, row: &[f64; BAND_COUNT]) -> bool {
        let low_ndvi = ndvi_row(row).is_some_and(|v| v < self.ndvi_threshold);
        let low_tcw = tcw_row(row) < self.tcw_threshold;
        match self.combinator {
            Combinator::Or => low_ndvi || low_tcw,
            Combinator::And => low_ndvi && low_tcw,
        }
    }

    /// First index starting a run of `run` consecutive low observations.
    pub fn first_run(&self, rows: &[[f64; BAND_COUNT]]) -> Option<usize> {
        let need = self.run.max(1);
        let mut streak = 0;
        for (t, row) in rows.iter().enumerate() {
            if self.is_low(row) {
                streak += 1;
                if streak == need {
                    return Some(t + 1 - need);
                }
            } else {
                streak = 0;
            }
        }
        None
    }
}

/// Week of the first defoliation event in a weekly, gap-free series.
pub fn label_defoliation(series: &PixelSeries, rule: &DefoliationRule) -> Option<usize> {
    rule.first_run(&series.values)
}
