use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::indices::{ndvi_row, tcw_row};
use crate::domain::PixelSeries;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VegetationIndex {
    #[default]
    Ndvi,
    Tcw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    /// Residual threshold in units of the training residual deviation.
    pub sigma_multiplier: f64,
    /// Consecutive exceedances required for a break.
    pub run: usize,
    pub period_weeks: f64,
    pub min_train_weeks: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            sigma_multiplier: 3.0,
            run: 3,
            period_weeks: 365.25 / 7.0,
            min_train_weeks: 104,
        }
    }
}

/// Least-squares fit of `a + b t + c cos(wt) + d sin(wt)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicFit {
    pub coefficients: [f64; 4],
    pub omega: f64,
    pub sigma: f64,
}

impl HarmonicFit {
    fn basis(omega: f64, t: f64) -> [f64; 4] {
        [1.0, t, (omega * t).cos(), (omega * t).sin()]
    }

    pub fn predict(&self, t: f64) -> f64 {
        let b = Self::basis(self.omega, t);
        (0..4).map(|k| self.coefficients[k] * b[k]).sum()
    }
}

/// Fits the harmonic model to the finite values among the first `train_len`.
pub fn fit_harmonic(vi: &[f64], train_len: usize, period_weeks: f64) -> Result<HarmonicFit> {
    let omega = std::f64::consts::TAU / period_weeks;
    let points: Vec<(f64, f64)> = vi[..train_len.min(vi.len())]
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .map(|(t, &v)| (t as f64, v))
        .collect();
    if points.len() < 5 {
        return Err(Error::InsufficientData("too few training values for the harmonic fit".into()));
    }
    let mut ata = [[0.0; 4]; 4];
    let mut atb = [0.0; 4];
    for &(t, v) in &points {
        let b = HarmonicFit::basis(omega, t);
        for i in 0..4 {
            atb[i] += b[i] * v;
            for j in 0..4 {
                ata[i][j] += b[i] * b[j];
            }
        }
    }
    let coefficients = solve4(ata, atb)
        .ok_or_else(|| Error::InsufficientData("singular harmonic design".into()))?;
    let mut fit = HarmonicFit {
        coefficients,
        omega,
        sigma: 0.0,
    };
    let rss: f64 = points.iter().map(|&(t, v)| (v - fit.predict(t)).powi(2)).sum();
    fit.sigma = (rss / (points.len() - 4) as f64).sqrt();
    Ok(fit)
}

/// Gaussian elimination with partial pivoting.
fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let pivot = (col..4).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..4 {
            let f = a[row][col] / a[col][col];
            for k in col..4 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 4];
    for row in (0..4).rev() {
        let s: f64 = (row + 1..4).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

const SIGMA_FLOOR: f64 = 1e-9;

/// First monitoring week starting a run of `run` weeks whose absolute
/// residual exceeds `sigma_multiplier` times the training deviation.
pub fn harmonic_break(vi: &[f64], train_len: usize, cfg: &BaselineConfig) -> Result<Option<usize>> {
    if train_len < cfg.min_train_weeks {
        return Err(Error::InsufficientData(format!(
            "baseline needs {} training weeks, got {train_len}",
            cfg.min_train_weeks
        )));
    }
    let fit = fit_harmonic(vi, train_len, cfg.period_weeks)?;
    // The floor keeps round-off residuals of a perfect fit from counting.
    let limit = cfg.sigma_multiplier * fit.sigma.max(SIGMA_FLOOR);
    let need = cfg.run.max(1);
    let mut streak = 0;
    for (t, &v) in vi.iter().enumerate().skip(train_len) {
        if v.is_finite() && (v - fit.predict(t as f64)).abs() > limit {
            streak += 1;
            if streak == need {
                return Ok(Some(t + 1 - need));
            }
        } else {
            streak = 0;
        }
    }
    Ok(None)
}

/// Break detection on a weekly series, training on weeks before `train_end`.
pub fn baseline_break_detect(
    series: &PixelSeries,
    train_end: NaiveDate,
    index: VegetationIndex,
    cfg: &BaselineConfig,
) -> Result<Option<usize>> {
    let vi: Vec<f64> = series
        .values
        .iter()
        .map(|r| match index {
            VegetationIndex::Ndvi => ndvi_row(r).unwrap_or(f64::NAN),
            VegetationIndex::Tcw => tcw_row(r),
        })
        .collect();
    let train_len = (0..series.len())
        .take_while(|&t| series.axis.index_to_date(t) < train_end)
        .count();
    harmonic_break(&vi, train_len, cfg)
}
