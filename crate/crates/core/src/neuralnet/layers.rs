use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::{dot, Matrix};
use crate::error::{Error, Result};

/// `n x len(z)` matrix whose rows all equal `z`.
pub fn repeat_vector(z: &[f64], n: usize) -> Matrix {
    let mut out = Matrix::zeros(n, z.len());
    for t in 0..n {
        out.row_mut(t).copy_from_slice(z);
    }
    out
}

/// Applies `W x + b` (W is `o x h`, row-major) to every row of `seq`.
pub fn time_distributed_affine(weights: &[f64], bias: &[f64], seq: &Matrix) -> Result<Matrix> {
    let (o, h) = (bias.len(), seq.cols());
    if weights.len() != o * h {
        return Err(Error::Shape(format!(
            "affine weights of {} values do not map {h} features to {o}",
            weights.len()
        )));
    }
    let mut out = Matrix::zeros(seq.rows(), o);
    for (t, x) in seq.iter_rows().enumerate() {
        for (r, y) in out.row_mut(t).iter_mut().enumerate() {
            *y = bias[r] + dot(&weights[r * h..(r + 1) * h], x);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DropoutSpec {
    pub rate: f64,
    pub training: bool,
}

/// Inverted dropout keep-mask: 0 for dropped units, `1/(1-rate)` for survivors.
pub(crate) fn dropout_mask<R: Rng + ?Sized>(len: usize, rate: f64, rng: &mut R) -> Vec<f64> {
    let keep = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
        .collect()
}

/// Inverted dropout in training mode; identity at inference or with rate 0.
pub fn dropout_forward<R: Rng + ?Sized>(seq: &Matrix, spec: DropoutSpec, rng: &mut R) -> Matrix {
    if !spec.training || spec.rate == 0.0 {
        return seq.clone();
    }
    let mask = dropout_mask(seq.as_slice().len(), spec.rate, rng);
    let mut out = seq.clone();
    out.as_mut_slice()
        .iter_mut()
        .zip(&mask)
        .for_each(|(v, m)| *v *= m);
    out
}
