use crate::domain::{PixelSeries, TimeAxis, BAND_COUNT};

/// Means of the valid raw samples falling in each ISO week. Weeks without a
/// valid sample are marked invalid.
pub fn aggregate_weekly(series: &PixelSeries) -> PixelSeries {
    let raw = series.axis;
    let weekly = TimeAxis::weekly_covering(raw.epoch, raw.last_date());

    let mut sums = vec![[0.0; BAND_COUNT]; weekly.len];
    let mut counts = vec![0usize; weekly.len];
    for (i, (row, &ok)) in series.values.iter().zip(&series.valid).enumerate() {
        if !ok {
            continue;
        }
        let days = (raw.index_to_date(i) - weekly.epoch).num_days() as usize;
        let week = days / weekly.step_days as usize;
        for (s, v) in sums[week].iter_mut().zip(row) {
            *s += v;
        }
        counts[week] += 1;
    }

    let values = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| {
            if c == 0 {
                [0.0; BAND_COUNT]
            } else {
                s.map(|v| v / c as f64)
            }
        })
        .collect();
    let valid = counts.iter().map(|&c| c > 0).collect();
    PixelSeries {
        pixel: series.pixel,
        axis: weekly,
        values,
        valid,
    }
}
