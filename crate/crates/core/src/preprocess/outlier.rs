use crate::error::{Error, Result};

/// Hazen quantile of sorted data: knots at (i - 0.5)/n, linear in between,
/// clamped to the extremes.
pub fn hazen_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    debug_assert!(n > 0);
    let pos = (n as f64 * p + 0.5).clamp(1.0, n as f64);
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo >= n {
        return sorted[n - 1];
    }
    sorted[lo - 1] + frac * (sorted[lo] - sorted[lo - 1])
}

/// Flags valid entries outside the Tukey fences `[Q1 - k*IQR, Q3 + k*IQR]`
/// of the valid remainder values. A zero IQR flags nothing.
pub fn tukey_outlier_mask(remainder: &[f64], valid: &[bool], fence_k: f64) -> Result<Vec<bool>> {
    if valid.len() != remainder.len() {
        return Err(Error::Shape(format!(
            "{} remainder values but {} mask entries",
            remainder.len(),
            valid.len()
        )));
    }
    let mut sorted: Vec<f64> = remainder
        .iter()
        .zip(valid)
        .filter(|(_, &v)| v)
        .map(|(&r, _)| r)
        .collect();
    if sorted.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "Tukey fences need at least 4 valid values, got {}",
            sorted.len()
        )));
    }
    sorted.sort_by(f64::total_cmp);
    let q1 = hazen_quantile(&sorted, 0.25);
    let q3 = hazen_quantile(&sorted, 0.75);
    let iqr = q3 - q1;
    if iqr <= 0.0 {
        return Ok(vec![false; remainder.len()]);
    }
    let (lo, hi) = (q1 - fence_k * iqr, q3 + fence_k * iqr);
    Ok(remainder
        .iter()
        .zip(valid)
        .map(|(&r, &v)| v && (r < lo || r > hi))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isolated_spike_is_flagged() {
        let r = [0.0, 0.0, 0.0, 0.0, 100.0];
        let mask = tukey_outlier_mask(&r, &[true; 5], 1.5).unwrap();
        assert_eq!(mask, vec![false, false, false, false, true]);
    }

    #[test]
    fn all_equal_flags_nothing() {
        let mask = tukey_outlier_mask(&[0.7; 10], &[true; 10], 1.5).unwrap();
        assert!(mask.iter().all(|&m| !m));
    }

    #[test]
    fn small_symmetric_noise_stays_inside() {
        let r: Vec<f64> = (0..40).map(|i| ((i % 5) as f64 - 2.0) * 0.01).collect();
        let mask = tukey_outlier_mask(&r, &vec![true; r.len()], 1.5).unwrap();
        assert!(mask.iter().all(|&m| !m));
    }

    #[test]
    fn masked_entries_are_ignored_and_never_flagged() {
        let r = [0.0, 1.0, 2.0, 3.0, 1000.0, 4.0];
        let valid = [true, true, true, true, false, true];
        let mask = tukey_outlier_mask(&r, &valid, 1.5).unwrap();
        assert!(mask.iter().all(|&m| !m));
        assert!(tukey_outlier_mask(&r, &[true, true, true, false, false, false], 1.5).is_err());
    }

    #[test]
    fn hazen_quartiles() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(hazen_quantile(&s, 0.25), 1.5);
        assert_eq!(hazen_quantile(&s, 0.75), 3.5);
        assert_eq!(hazen_quantile(&s, 0.0), 1.0);
        assert_eq!(hazen_quantile(&s, 1.0), 4.0);
    }
}
