use crate::error::{Error, Result};

/// Fills masked entries with the exponentially weighted mean of up to
/// `horizon` valid neighbors on each side, weight `2^-d` for a neighbor `d`
/// steps away. Boundary gaps use the one side available. Valid entries pass
/// through unchanged.
pub fn ewma_impute(values: &[f64], valid: &[bool], horizon: usize) -> Result<Vec<f64>> {
    if valid.len() != values.len() {
        return Err(Error::Shape(format!(
            "{} values but {} mask entries",
            values.len(),
            valid.len()
        )));
    }
    if horizon == 0 {
        return Err(Error::Config("imputation horizon must be at least 1".into()));
    }
    if !valid.iter().any(|&v| v) {
        return Err(Error::EmptyInput("series has no valid samples to impute from"));
    }

    let mut out = values.to_vec();
    for i in (0..values.len()).filter(|&i| !valid[i]) {
        let left = (0..i).rev().filter(|&j| valid[j]).take(horizon);
        let right = (i + 1..values.len()).filter(|&j| valid[j]).take(horizon);
        let (mut num, mut den) = (0.0, 0.0);
        for j in left.chain(right) {
            let w = 0.5f64.powi(j.abs_diff(i) as i32);
            num += w * values[j];
            den += w;
        }
        out[i] = num / den;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_neighbors() {
        let out = ewma_impute(&[0.3, 0.0, 0.0, 0.3], &[true, false, false, true], 4).unwrap();
        assert!((out[1] - 0.3).abs() < 1e-15 && (out[2] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn symmetric_single_neighbors() {
        let out = ewma_impute(&[5.0, 0.0, 9.0, 1.0, 7.0], &[false, true, false, true, false], 1).unwrap();
        assert_eq!(out[2], 0.5);
        assert_eq!(out[0], 0.0);
        assert_eq!(out[4], 1.0);
    }

    #[test]
    fn closer_neighbors_weigh_more() {
        // index 1: left at distance 1 (w=1/2), right at distance 2 (w=1/4)
        let out = ewma_impute(&[1.0, 0.0, 0.0, 0.0], &[true, false, false, true], 1).unwrap();
        assert!((out[1] - 0.5 / 0.75).abs() < 1e-15);
        assert_eq!(out[0], 1.0);
    }

    #[test]
    fn empty_series_is_an_error() {
        assert!(matches!(
            ewma_impute(&[0.0; 3], &[false; 3], 4),
            Err(Error::EmptyInput(_))
        ));
    }
}
