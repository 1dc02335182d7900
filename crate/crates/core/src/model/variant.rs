use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domain::{BandId, BAND_COUNT};
use crate::error::{Error, Result};

/// Band subset over which the absolute reconstruction error is averaged.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
pub enum ErrorVariant {
    #[serde(rename = "rec_err")]
    RecErr,
    #[serde(rename = "rec_err_adj1")]
    Adj1,
    #[serde(rename = "rec_err_adj2")]
    Adj2,
    #[serde(rename = "rec_err_adj3")]
    Adj3,
    /// NIR, red and both SWIR bands.
    #[serde(rename = "rec_err_adj4")]
    #[default]
    Adj4,
}

impl ErrorVariant {
    pub const ALL: [ErrorVariant; 5] = [
        ErrorVariant::RecErr,
        ErrorVariant::Adj1,
        ErrorVariant::Adj2,
        ErrorVariant::Adj3,
        ErrorVariant::Adj4,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ErrorVariant::RecErr => "rec_err",
            ErrorVariant::Adj1 => "rec_err_adj1",
            ErrorVariant::Adj2 => "rec_err_adj2",
            ErrorVariant::Adj3 => "rec_err_adj3",
            ErrorVariant::Adj4 => "rec_err_adj4",
        }
    }

    pub fn bands(self) -> &'static [BandId] {
        use BandId::*;
        match self {
            ErrorVariant::RecErr => &BandId::ALL,
            ErrorVariant::Adj1 => &[B8, B4, B5, B6, B7, B11, B12],
            ErrorVariant::Adj2 => &[B5, B6, B7, B12],
            ErrorVariant::Adj3 => &[B8, B5, B6, B7, B11, B12],
            ErrorVariant::Adj4 => &[B8, B4, B11, B12],
        }
    }

    /// Mean of the per-band absolute residuals over this variant's bands.
    pub fn reduce(self, abs_residual: &[f64; BAND_COUNT]) -> f64 {
        let bands = self.bands();
        bands.iter().map(|b| abs_residual[b.index()]).sum::<f64>() / bands.len() as f64
    }
}

impl fmt::Display for ErrorVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ErrorVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ErrorVariant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown error variant {s:?}")))
    }
}

/// Per-step absolute residuals `|x - x_hat|` for every band.
pub fn abs_residuals(
    x: &[[f64; BAND_COUNT]],
    x_hat: &[[f64; BAND_COUNT]],
) -> Result<Vec<[f64; BAND_COUNT]>> {
    if x.len() != x_hat.len() {
        return Err(Error::Shape(format!(
            "{} input steps vs {} reconstructed",
            x.len(),
            x_hat.len()
        )));
    }
    Ok(x.iter()
        .zip(x_hat)
        .map(|(a, b)| std::array::from_fn(|k| (a[k] - b[k]).abs()))
        .collect())
}

pub fn reconstruction_error(
    x: &[[f64; BAND_COUNT]],
    x_hat: &[[f64; BAND_COUNT]],
    variant: ErrorVariant,
) -> Result<Vec<f64>> {
    Ok(abs_residuals(x, x_hat)?
        .iter()
        .map(|r| variant.reduce(r))
        .collect())
}

/// Quantile with linear interpolation between order statistics, position
/// `(n - 1) p` on the sorted sample.
pub fn linear_quantile(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() || !(0.0..=1.0).contains(&p) {
        return None;
    }
    let pos = (sorted.len() - 1) as f64 * p;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}
