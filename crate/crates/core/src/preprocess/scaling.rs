use serde::{Deserialize, Serialize};

use crate::domain::{BandId, PixelSeries, BAND_COUNT};
use crate::error::{Error, Result};

/// Per-band min-max scaling fitted on the healthy training corpus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub min: [f64; BAND_COUNT],
    pub max: [f64; BAND_COUNT],
}

impl ScalingParams {
    pub fn scale_row(&self, row: &[f64; BAND_COUNT]) -> [f64; BAND_COUNT] {
        std::array::from_fn(|b| (row[b] - self.min[b]) / (self.max[b] - self.min[b]))
    }

    pub fn unscale_row(&self, row: &[f64; BAND_COUNT]) -> [f64; BAND_COUNT] {
        std::array::from_fn(|b| row[b] * (self.max[b] - self.min[b]) + self.min[b])
    }
}

pub fn fit_scaling(corpus: &[PixelSeries]) -> Result<ScalingParams> {
    if corpus.is_empty() {
        return Err(Error::EmptyInput("scaling corpus"));
    }
    let mut min = [f64::INFINITY; BAND_COUNT];
    let mut max = [f64::NEG_INFINITY; BAND_COUNT];
    for series in corpus {
        if !series.is_gap_free() {
            return Err(Error::InsufficientData(format!(
                "pixel ({}, {}) still has gaps; scaling needs preprocessed series",
                series.pixel.x, series.pixel.y
            )));
        }
        for row in &series.values {
            for b in 0..BAND_COUNT {
                min[b] = min[b].min(row[b]);
                max[b] = max[b].max(row[b]);
            }
        }
    }
    if min[0].is_infinite() {
        return Err(Error::EmptyInput("scaling corpus has no samples"));
    }
    for band in BandId::ALL {
        let b = band.index();
        if max[b] <= min[b] {
            return Err(Error::DegenerateScale {
                band: band.name(),
                value: min[b],
            });
        }
    }
    Ok(ScalingParams { min, max })
}

/// `(x - min) / (max - min)` per band; values outside the training range
/// map outside `[0, 1]`.
pub fn apply_scaling(series: &PixelSeries, params: &ScalingParams) -> PixelSeries {
    PixelSeries {
        values: series.values.iter().map(|r| params.scale_row(r)).collect(),
        ..series.clone()
    }
}

pub fn unscale(series: &PixelSeries, params: &ScalingParams) -> PixelSeries {
    PixelSeries {
        values: series.values.iter().map(|r| params.unscale_row(r)).collect(),
        ..series.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{PixelId, TimeAxis};
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn series(rows: Vec<[f64; BAND_COUNT]>) -> PixelSeries {
        let axis = TimeAxis::new(NaiveDate::from_ymd_opt(2018, 1, 1).unwrap(), 7, rows.len()).unwrap();
        PixelSeries::dense(PixelId::new(0, 0), axis, rows).unwrap()
    }

    fn ramp(lo: f64, hi: f64, n: usize) -> PixelSeries {
        series(
            (0..n)
                .map(|i| [lo + (hi - lo) * i as f64 / (n - 1) as f64; BAND_COUNT])
                .collect(),
        )
    }

    #[test]
    fn range_is_the_definition() {
        let p = fit_scaling(&[ramp(0.1, 0.5, 11)]).unwrap();
        assert!(p.min.iter().all(|&m| m == 0.1));
        assert!(p.max.iter().all(|&m| m == 0.5));
        let s = apply_scaling(&series(vec![[0.1; 9], [0.5; 9], [0.3; 9]]), &p);
        assert!(s.values[0].iter().all(|&v| v == 0.0));
        assert!(s.values[1].iter().all(|&v| v == 1.0));
        assert!(s.values[2].iter().all(|&v| (v - 0.5).abs() < 1e-15));
    }

    #[test]
    fn constant_band_is_degenerate() {
        let mut rows = ramp(0.1, 0.5, 5).values;
        rows.iter_mut().for_each(|r| r[3] = 0.2);
        assert!(matches!(
            fit_scaling(&[series(rows)]),
            Err(Error::DegenerateScale { band: "B5", .. })
        ));
        assert!(matches!(fit_scaling(&[]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn two_series_match_a_linear_scan() {
        let a = series((0..20).map(|i| std::array::from_fn(|b| ((i * 7 + b * 3) % 11) as f64 / 10.0)).collect());
        let b = series((0..15).map(|i| std::array::from_fn(|b| ((i * 5 + b) % 13) as f64 / 9.0 - 0.2)).collect());
        let p = fit_scaling(&[a.clone(), b.clone()]).unwrap();
        for band in 0..BAND_COUNT {
            let all: Vec<f64> = a.values.iter().chain(&b.values).map(|r| r[band]).collect();
            let lo = all.iter().cloned().fold(f64::MAX, f64::min);
            let hi = all.iter().cloned().fold(f64::MIN, f64::max);
            assert_eq!((p.min[band], p.max[band]), (lo, hi));
        }
    }

    proptest! {
        #[test]
        fn unscale_inverts_scale(
            lo in -1.0f64..1.0, width in 0.01f64..2.0, x in -3.0f64..3.0
        ) {
            let p = ScalingParams { min: [lo; BAND_COUNT], max: [lo + width; BAND_COUNT] };
            let row = [x; BAND_COUNT];
            let back = p.unscale_row(&p.scale_row(&row));
            for b in 0..BAND_COUNT {
                prop_assert!((back[b] - x).abs() <= 1e-12 * x.abs().max(1.0));
            }
        }
    }
}
