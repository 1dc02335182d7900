use crate::error::{Error, Result};

/// Largest fraction of masked samples a series may carry into decomposition.
pub const MAX_GAP_FRACTION: f64 = 0.2;

/// Additive split `x = trend + seasonal + remainder`, aligned to the input.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionResult {
    pub trend: Vec<f64>,
    pub seasonal: Vec<f64>,
    pub remainder: Vec<f64>,
}

/// Classical additive decomposition of one band.
///
/// Masked samples are linearly interpolated (held constant past the ends)
/// before trend and seasonal estimation. The trend is a centered moving
/// average over one period (2xP average for even periods); near the ends,
/// where the window does not fit, it is extended by a least-squares line
/// through the nearest `period` full-window values. The seasonal component is the
/// mean-centered per-phase average of the detrended series, and the remainder
/// is whatever is left, so `trend + seasonal + remainder` reproduces the
/// interpolated input exactly at every index.
pub fn decompose(values: &[f64], valid: &[bool], period: usize) -> Result<DecompositionResult> {
    let n = values.len();
    if valid.len() != n {
        return Err(Error::Shape(format!(
            "{n} values but {} mask entries",
            valid.len()
        )));
    }
    if period < 2 {
        return Err(Error::Config(format!("decomposition period {period} < 2")));
    }
    if n < 2 * period {
        return Err(Error::InsufficientData(format!(
            "decomposition needs at least {} samples, got {n}",
            2 * period
        )));
    }
    let valid_count = valid.iter().filter(|&&v| v).count();
    let gap_fraction = 1.0 - valid_count as f64 / n as f64;
    if gap_fraction > MAX_GAP_FRACTION {
        return Err(Error::InsufficientData(format!(
            "{:.1}% of samples masked, decomposition allows at most {:.0}%",
            gap_fraction * 100.0,
            MAX_GAP_FRACTION * 100.0
        )));
    }

    let filled = interpolate_gaps(values, valid)?;
    let trend = centered_moving_average(&filled, period);

    let mut phase_sum = vec![0.0; period];
    let mut phase_count = vec![0usize; period];
    for (t, (&x, &tr)) in filled.iter().zip(&trend).enumerate() {
        phase_sum[t % period] += x - tr;
        phase_count[t % period] += 1;
    }
    let mut phase_mean: Vec<f64> = phase_sum
        .iter()
        .zip(&phase_count)
        .map(|(s, &c)| s / c as f64)
        .collect();
    let center = phase_mean.iter().sum::<f64>() / period as f64;
    phase_mean.iter_mut().for_each(|m| *m -= center);

    let seasonal: Vec<f64> = (0..n).map(|t| phase_mean[t % period]).collect();
    let remainder = filled
        .iter()
        .zip(&trend)
        .zip(&seasonal)
        .map(|((x, t), s)| x - t - s)
        .collect();

    Ok(DecompositionResult {
        trend,
        seasonal,
        remainder,
    })
}

fn interpolate_gaps(values: &[f64], valid: &[bool]) -> Result<Vec<f64>> {
    let anchors: Vec<usize> = (0..values.len()).filter(|&i| valid[i]).collect();
    let (&first, &last) = match (anchors.first(), anchors.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(Error::EmptyInput("series has no valid samples")),
    };
    let mut out = values.to_vec();
    out[..first].fill(values[first]);
    out[last + 1..].fill(values[last]);
    for pair in anchors.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let span = (b - a) as f64;
        for i in a + 1..b {
            let w = (i - a) as f64 / span;
            out[i] = values[a] * (1.0 - w) + values[b] * w;
        }
    }
    Ok(out)
}

fn centered_moving_average(x: &[f64], period: usize) -> Vec<f64> {
    let n = x.len();
    let half = period / 2;
    let mut trend = vec![0.0; n];
    for t in half..n - half {
        trend[t] = if period % 2 == 1 {
            x[t - half..=t + half].iter().sum::<f64>() / period as f64
        } else {
            let inner: f64 = x[t - half + 1..t + half].iter().sum();
            (inner + 0.5 * (x[t - half] + x[t + half])) / period as f64
        };
    }
    // n >= 2 * period leaves at least `period` full-window values
    let (a, b) = line_fit(&trend, half, half + period);
    for (t, v) in trend[..half].iter_mut().enumerate() {
        *v = a + b * t as f64;
    }
    let (a, b) = line_fit(&trend, n - half - period, n - half);
    for (t, v) in trend.iter_mut().enumerate().skip(n - half) {
        *v = a + b * t as f64;
    }
    trend
}

/// Intercept and slope of the least-squares line through `(t, y[t])` for
/// `t` in `lo..hi`.
fn line_fit(y: &[f64], lo: usize, hi: usize) -> (f64, f64) {
    let m = (hi - lo) as f64;
    let t_mean = (lo + hi - 1) as f64 / 2.0;
    let y_mean = y[lo..hi].iter().sum::<f64>() / m;
    let (mut sty, mut stt) = (0.0, 0.0);
    for (t, v) in y.iter().enumerate().take(hi).skip(lo) {
        let dt = t as f64 - t_mean;
        sty += dt * (v - y_mean);
        stt += dt * dt;
    }
    let slope = if stt > 0.0 { sty / stt } else { 0.0 };
    (y_mean - slope * t_mean, slope)
}
