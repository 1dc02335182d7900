use log::{debug, info};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::autoencoder::{rows_to_matrix, AutoencoderModel};
use crate::error::{Error, Result};
use crate::neuralnet::{adam_step, clip_global_norm, mse_grad, mse_loss, AdamConfig, AdamState, Mode};
use crate::preprocess::SequenceBatch;
use crate::seed;

/// Samples per gradient chunk; chunk sums are combined in a fixed order so
/// results do not depend on the number of worker threads.
const GRAD_CHUNK: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub validation_split: f64,
    pub seed: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub clip_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        TrainConfig {
            batch_size: 128,
            epochs: 200,
            validation_split: 0.28,
            seed: 0,
            learning_rate: adam.learning_rate,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
            clip_norm: 5.0,
        }
    }
}

impl TrainConfig {
    /// Short schedule matching the reduced architecture.
    pub fn desk() -> Self {
        TrainConfig {
            batch_size: 16,
            epochs: 30,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.validation_split > 0.0 && self.validation_split < 1.0) {
            return Err(Error::Config(format!(
                "validation split {} must lie strictly between 0 and 1",
                self.validation_split
            )));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config("batch size and epochs must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.clip_norm > 0.0) {
            return Err(Error::Config("learning rate and clip norm must be positive".into()));
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub validation_loss: Vec<f64>,
    /// Zero-based epoch whose weights were kept.
    pub best_epoch: usize,
}

impl TrainHistory {
    pub fn best_validation_loss(&self) -> f64 {
        self.validation_loss[self.best_epoch]
    }
}

/// Fits the model to reconstruct healthy windows. After a seeded shuffle the
/// trailing `validation_split` share is held out; the weights of the epoch
/// with the lowest validation loss are kept.
pub fn train(model: &mut AutoencoderModel, corpus: &[SequenceBatch], cfg: &TrainConfig) -> Result<TrainHistory> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(Error::EmptyInput("training corpus"));
    }
    if let Some(w) = corpus.iter().find(|w| w.len() != model.window_size) {
        return Err(Error::WindowMismatch {
            model: model.window_size,
            requested: w.len(),
        });
    }
    if corpus.len() < 2 {
        return Err(Error::InsufficientData(
            "need at least two windows to hold out validation data".into(),
        ));
    }

    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.shuffle(&mut seed::rng_for(&[cfg.seed, u64::MAX]));
    let n_val = ((corpus.len() as f64 * cfg.validation_split).round() as usize).clamp(1, corpus.len() - 1);
    let (train_idx, val_idx) = order.split_at(corpus.len() - n_val);
    let mut train_idx = train_idx.to_vec();
    info!(
        "training on {} windows, validating on {} ({} parameters)",
        train_idx.len(),
        val_idx.len(),
        model.param_count()
    );

    let mut state = AdamState::new(model.param_count(), cfg.adam());
    let mut best = (f64::INFINITY, 0usize, model.network.params().to_vec());
    let mut history = TrainHistory {
        train_loss: Vec::with_capacity(cfg.epochs),
        validation_loss: Vec::with_capacity(cfg.epochs),
        best_epoch: 0,
    };

    for epoch in 0..cfg.epochs {
        train_idx.shuffle(&mut seed::rng_for(&[cfg.seed, epoch as u64]));
        let mut loss_sum = 0.0;
        for batch in train_idx.chunks(cfg.batch_size) {
            let (mut grads, loss) = batch_gradient(model, corpus, batch, cfg.seed, epoch)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            loss_sum += loss;
            let scale = 1.0 / batch.len() as f64;
            grads.iter_mut().for_each(|g| *g *= scale);
            clip_global_norm(&mut grads, cfg.clip_norm);
            adam_step(model.network.params_mut(), &grads, &mut state)?;
        }
        let train_loss = loss_sum / train_idx.len() as f64;
        let val_loss = validation_loss(model, corpus, val_idx)?;
        if !(train_loss.is_finite() && val_loss.is_finite()) {
            return Err(Error::Divergence { epoch });
        }
        debug!("epoch {epoch}: train {train_loss:.6e} validation {val_loss:.6e}");
        if val_loss < best.0 {
            best = (val_loss, epoch, model.network.params().to_vec());
        }
        history.train_loss.push(train_loss);
        history.validation_loss.push(val_loss);
    }
    history.best_epoch = best.1;
    model.network.set_params(best.2)?;
    info!(
        "best validation loss {:.6e} at epoch {}",
        best.0,
        best.1 + 1
    );
    Ok(history)
}

/// Summed gradient and summed loss over one batch.
fn batch_gradient(
    model: &AutoencoderModel,
    corpus: &[SequenceBatch],
    batch: &[usize],
    master_seed: u64,
    epoch: usize,
) -> Result<(Vec<f64>, f64)> {
    let net = &model.network;
    let partials = batch
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut grads = vec![0.0; net.param_len()];
            let mut loss = 0.0;
            for &idx in chunk {
                let x = rows_to_matrix(&corpus[idx].rows);
                let mode = Mode::Training {
                    seed: seed::mix(&[master_seed, epoch as u64, idx as u64]),
                };
                let cache = net.forward(&x, mode)?;
                loss += mse_loss(&x, cache.output())?;
                net.backward(&cache, &mse_grad(&x, cache.output())?, &mut grads)?;
            }
            Ok((grads, loss))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut iter = partials.into_iter();
    let (mut grads, mut loss) = iter.next().expect("batch is non-empty");
    for (g, l) in iter {
        grads.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
        loss += l;
    }
    Ok((grads, loss))
}

fn validation_loss(model: &AutoencoderModel, corpus: &[SequenceBatch], idx: &[usize]) -> Result<f64> {
    let losses = idx
        .par_iter()
        .map(|&i| {
            let x = rows_to_matrix(&corpus[i].rows);
            mse_loss(&x, &model.network.predict(&x)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(losses.iter().sum::<f64>() / idx.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::PixelId;
    use crate::model::{build_model, Architecture};

    fn constant_corpus(c: f64, n: usize, ws: usize) -> Vec<SequenceBatch> {
        (0..n)
            .map(|k| SequenceBatch {
                pixel: PixelId::new(k as i64, 0),
                start: 0,
                rows: vec![[c; 9]; ws],
            })
            .collect()
    }

    fn small() -> AutoencoderModel {
        let arch = Architecture {
            units: [8, 6, 4],
            dropout: 0.2,
        };
        build_model(4, arch, 3).unwrap()
    }

    #[test]
    fn learns_constant_sequences() {
        let mut m = small();
        let corpus = constant_corpus(0.6, 40, 4);
        let cfg = TrainConfig {
            batch_size: 8,
            epochs: 50,
            learning_rate: 1e-2,
            ..TrainConfig::desk()
        };
        let h = train(&mut m, &corpus, &cfg).unwrap();
        assert_eq!(h.train_loss.len(), 50);
        assert!(h.best_validation_loss() < 1e-4, "{}", h.best_validation_loss());
        let r = m.reconstruct(&corpus[0]).unwrap();
        assert!(r.iter().flatten().all(|v| (v - 0.6).abs() < 0.01));
    }

    #[test]
    fn deterministic_under_seed() {
        let corpus = constant_corpus(0.3, 20, 4);
        let cfg = TrainConfig {
            batch_size: 5,
            epochs: 3,
            ..TrainConfig::desk()
        };
        let mut a = small();
        let mut b = small();
        let ha = train(&mut a, &corpus, &cfg).unwrap();
        let hb = train(&mut b, &corpus, &cfg).unwrap();
        assert_eq!(ha, hb);
        assert_eq!(a.network.params(), b.network.params());
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut m = small();
        assert!(matches!(
            train(&mut m, &[], &TrainConfig::desk()),
            Err(Error::EmptyInput(_))
        ));
        let cfg = TrainConfig {
            validation_split: 1.0,
            ..TrainConfig::desk()
        };
        assert!(train(&mut m, &constant_corpus(0.1, 4, 4), &cfg).is_err());
        assert!(matches!(
            train(&mut m, &constant_corpus(0.1, 4, 5), &TrainConfig::desk()),
            Err(Error::WindowMismatch { .. })
        ));
    }

    #[test]
    fn divergence_reported() {
        let mut m = small();
        let mut corpus = constant_corpus(0.1, 4, 4);
        corpus[1].rows[0][0] = f64::NAN;
        corpus[2].rows[0][0] = f64::NAN;
        corpus[3].rows[0][0] = f64::NAN;
        let cfg = TrainConfig {
            batch_size: 4,
            epochs: 2,
            ..TrainConfig::desk()
        };
        assert!(matches!(train(&mut m, &corpus, &cfg), Err(Error::Divergence { epoch: 0 })));
    }
}
