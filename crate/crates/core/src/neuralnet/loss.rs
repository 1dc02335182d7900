use super::matrix::Matrix;
use crate::error::{Error, Result};

fn check(x: &Matrix, x_hat: &Matrix) -> Result<()> {
    if x.shape() != x_hat.shape() {
        return Err(Error::Shape(format!(
            "loss between {:?} and {:?}",
            x.shape(),
            x_hat.shape()
        )));
    }
    Ok(())
}

/// Mean of squared differences over all elements.
pub fn mse_loss(x: &Matrix, x_hat: &Matrix) -> Result<f64> {
    check(x, x_hat)?;
    let n = x.as_slice().len() as f64;
    Ok(x.as_slice()
        .iter()
        .zip(x_hat.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n)
}

/// Gradient of [`mse_loss`] with respect to `x_hat`.
pub fn mse_grad(x: &Matrix, x_hat: &Matrix) -> Result<Matrix> {
    check(x, x_hat)?;
    let scale = 2.0 / x.as_slice().len() as f64;
    let data = x
        .as_slice()
        .iter()
        .zip(x_hat.as_slice())
        .map(|(a, b)| scale * (b - a))
        .collect();
    Matrix::from_vec(x.rows(), x.cols(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn trivial_cases() {
        let a = Matrix::from_rows(&[[0.3, 0.4], [0.1, 0.9]]).unwrap();
        assert_eq!(mse_loss(&a, &a).unwrap(), 0.0);
        assert_eq!(mse_loss(&Matrix::zeros(3, 2), &Matrix::from_vec(3, 2, vec![1.0; 6]).unwrap()).unwrap(), 1.0);
        assert!(mse_loss(&a, &Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (t, d) = (7, 4);
        let mut xs = vec![vec![0.0; d]; t];
        let mut ys = vec![vec![0.0; d]; t];
        for r in 0..t {
            for c in 0..d {
                xs[r][c] = rng.random_range(-1.0..1.0);
                ys[r][c] = rng.random_range(-1.0..1.0);
            }
        }
        let mut total = 0.0;
        for r in 0..t {
            for c in 0..d {
                total += (xs[r][c] - ys[r][c]) * (xs[r][c] - ys[r][c]);
            }
        }
        let loss = mse_loss(&Matrix::from_rows(&xs).unwrap(), &Matrix::from_rows(&ys).unwrap()).unwrap();
        assert!((loss - total / (t * d) as f64).abs() < 1e-14);
    }
}
