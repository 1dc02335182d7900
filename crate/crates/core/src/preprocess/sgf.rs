use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SgfConfig {
    /// Points on each side of the center; the window holds `2 * half_width + 1`.
    pub half_width: usize,
    /// Polynomial order.
    pub order: usize,
}

impl SgfConfig {
    pub fn new(half_width: usize, order: usize) -> Result<Self> {
        if 2 * half_width + 1 <= order {
            return Err(Error::Config(format!(
                "Savitzky-Golay window of {} points cannot fit order {order}",
                2 * half_width + 1
            )));
        }
        Ok(SgfConfig { half_width, order })
    }

    pub fn window_len(&self) -> usize {
        2 * self.half_width + 1
    }
}

impl Default for SgfConfig {
    fn default() -> Self {
        SgfConfig {
            half_width: 3,
            order: 2,
        }
    }
}

/// Indices of the fit window for valid index `i`: up to `half_width` valid
/// neighbors on each side, borrowing from the other side near the edges so
/// the window always holds `2 * half_width + 1` points.
pub(crate) fn window_indices(valid_idx: &[usize], pos: usize, half_width: usize) -> &[usize] {
    let len = 2 * half_width + 1;
    let n = valid_idx.len();
    let start = pos.saturating_sub(half_width).min(n - len);
    &valid_idx[start..start + len]
}

/// Local least-squares polynomial smoothing over the valid samples. Offsets
/// inside a window are actual step distances, so gaps are handled without
/// resampling. Masked entries are returned untouched.
pub fn savitzky_golay(values: &[f64], valid: &[bool], cfg: &SgfConfig) -> Result<Vec<f64>> {
    if valid.len() != values.len() {
        return Err(Error::Shape(format!(
            "{} values but {} mask entries",
            values.len(),
            valid.len()
        )));
    }
    let valid_idx: Vec<usize> = (0..values.len()).filter(|&i| valid[i]).collect();
    if valid_idx.len() < cfg.window_len() {
        return Err(Error::InsufficientData(format!(
            "Savitzky-Golay needs {} valid points, got {}",
            cfg.window_len(),
            valid_idx.len()
        )));
    }

    let mut out = values.to_vec();
    let mut design = Vec::new();
    let mut rhs = Vec::new();
    for (pos, &i) in valid_idx.iter().enumerate() {
        let window = window_indices(&valid_idx, pos, cfg.half_width);
        let scale = window
            .iter()
            .map(|&j| (j as f64 - i as f64).abs())
            .fold(1.0f64, f64::max);
        design.clear();
        rhs.clear();
        for &j in window {
            let k = (j as f64 - i as f64) / scale;
            let mut p = 1.0;
            for _ in 0..=cfg.order {
                design.push(p);
                p *= k;
            }
            rhs.push(values[j]);
        }
        out[i] = least_squares_intercept(&mut design, &mut rhs, cfg.order + 1);
    }
    Ok(out)
}

/// Solves `min |A b - y|` by Householder QR and returns `b[0]`, the fitted
/// value at offset zero. `a` is row-major `m x cols` and is overwritten.
fn least_squares_intercept(a: &mut [f64], y: &mut [f64], cols: usize) -> f64 {
    let m = y.len();
    for c in 0..cols {
        let norm = (c..m).map(|r| a[r * cols + c].powi(2)).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if a[c * cols + c] > 0.0 { -norm } else { norm };
        // v = x - alpha e1, stored in column c below the diagonal
        a[c * cols + c] -= alpha;
        let vnorm2: f64 = (c..m).map(|r| a[r * cols + c].powi(2)).sum();
        for k in c + 1..cols {
            let dot: f64 = (c..m).map(|r| a[r * cols + c] * a[r * cols + k]).sum();
            let f = 2.0 * dot / vnorm2;
            for r in c..m {
                a[r * cols + k] -= f * a[r * cols + c];
            }
        }
        let dot: f64 = (c..m).map(|r| a[r * cols + c] * y[r]).sum();
        let f = 2.0 * dot / vnorm2;
        for r in c..m {
            y[r] -= f * a[r * cols + c];
        }
        a[c * cols + c] = alpha;
    }
    // back substitution on the upper triangle
    let mut coef = vec![0.0; cols];
    for c in (0..cols).rev() {
        let tail: f64 = (c + 1..cols).map(|k| a[c * cols + k] * coef[k]).sum();
        coef[c] = (y[c] - tail) / a[c * cols + c];
    }
    coef[0]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_is_unchanged() {
        let x = vec![0.42; 30];
        let out = savitzky_golay(&x, &vec![true; 30], &SgfConfig::default()).unwrap();
        assert!(out.iter().all(|v| (v - 0.42).abs() < 1e-14));
    }

    #[test]
    fn linear_is_reproduced_even_with_gaps() {
        let x: Vec<f64> = (0..40).map(|t| 0.1 + 0.013 * t as f64).collect();
        let valid: Vec<bool> = (0..40).map(|t| t % 6 != 2 && t != 17 && t != 18).collect();
        for order in 1..=3 {
            let cfg = SgfConfig::new(3, order).unwrap();
            let out = savitzky_golay(&x, &valid, &cfg).unwrap();
            for t in 0..40 {
                assert!((out[t] - x[t]).abs() < 1e-10, "order {order} t {t}");
            }
        }
    }

    #[test]
    fn masked_entries_untouched() {
        let mut x: Vec<f64> = (0..20).map(|t| (t as f64).sin()).collect();
        x[5] = f64::NAN;
        let valid: Vec<bool> = (0..20).map(|t| t != 5).collect();
        let out = savitzky_golay(&x, &valid, &SgfConfig::default()).unwrap();
        assert!(out[5].is_nan());
        assert!(out.iter().enumerate().all(|(t, v)| t == 5 || v.is_finite()));
    }

    #[test]
    fn window_selection_near_edges() {
        let idx: Vec<usize> = (0..10).collect();
        assert_eq!(window_indices(&idx, 0, 3), &[0, 1, 2, 3, 4, 5, 6]);
        assert_eq!(window_indices(&idx, 5, 3), &[2, 3, 4, 5, 6, 7, 8]);
        assert_eq!(window_indices(&idx, 9, 3), &[3, 4, 5, 6, 7, 8, 9]);
    }

    #[test]
    fn too_few_points_and_bad_config() {
        assert!(matches!(
            savitzky_golay(&[1.0; 6], &[true; 6], &SgfConfig::default()),
            Err(Error::InsufficientData(_))
        ));
        assert!(SgfConfig::new(1, 3).is_err());
    }
}
