use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{MlpModel, Normalization};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub lr_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub dropout_prob: f64,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: vec![300, 300, 300],
            learning_rate: 0.01,
            lr_decay: 0.5,
            epochs: 50,
            batch_size: 64,
            dropout_prob: 0.2,
            validation_fraction: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument(
                "learning rate must be positive, epochs and batch size at least 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_prob) {
            return Err(Error::InvalidArgument(format!(
                "dropout must be in [0, 1), got {}",
                self.dropout_prob
            )));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) || !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::InvalidArgument(
                "validation fraction must be in [0, 1), decay in (0, 1]".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    /// Mean mini-batch loss per epoch (with dropout active).
    pub train_loss: Vec<f64>,
    pub validation_loss: Vec<f64>,
    pub learning_rate: Vec<f64>,
    pub best_epoch: usize,
}

fn columns(rows: &[Vec<f64>], idx: &[usize], f: impl Fn(&[f64]) -> Vec<f64>) -> DMatrix<f64> {
    let d = rows[idx[0]].len();
    let mut data = Vec::with_capacity(d * idx.len());
    for &i in idx {
        data.extend(f(&rows[i]));
    }
    DMatrix::from_vec(d, idx.len(), data)
}

/// Mini-batch SGD on the mean squared normalised error. The returned model
/// holds the parameters of the epoch with the lowest validation loss.
pub fn train(inputs: &[Vec<f64>], targets: &[Vec<f64>], cfg: &TrainConfig) -> Result<(MlpModel, TrainReport)> {
    cfg.validate()?;
    if inputs.is_empty() || inputs.len() != targets.len() {
        return Err(Error::InvalidArgument(format!(
            "need matching non-empty inputs and targets, got {} and {}",
            inputs.len(),
            targets.len()
        )));
    }
    let n_in = inputs[0].len();
    let n_out = targets[0].len();
    if inputs.iter().any(|x| x.len() != n_in) || targets.iter().any(|y| y.len() != n_out) {
        return Err(Error::InvalidArgument("ragged training data".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    order.shuffle(&mut rng);
    let n_val = (inputs.len() as f64 * cfg.validation_fraction).floor() as usize;
    let (train_idx, val_idx) = if n_val >= 1 && n_val < inputs.len() {
        let (t, v) = order.split_at(inputs.len() - n_val);
        (t.to_vec(), v.to_vec())
    } else {
        (order.clone(), order.clone())
    };

    let train_x: Vec<Vec<f64>> = train_idx.iter().map(|&i| inputs[i].clone()).collect();
    let train_y: Vec<Vec<f64>> = train_idx.iter().map(|&i| targets[i].clone()).collect();
    let norm = Normalization::fit(&train_x, &train_y);

    let mut dims = vec![n_in];
    dims.extend(&cfg.hidden);
    dims.push(n_out);
    let mut model = MlpModel::glorot(&dims, &mut rng)?;
    model.norm = norm;

    let val_x = columns(inputs, &val_idx, |x| model.norm.normalize_input(x));
    let val_y = columns(targets, &val_idx, |y| model.norm.normalize_output(y));

    let keep = 1.0 - cfg.dropout_prob;
    let mut lr = cfg.learning_rate;
    let mut best = (f64::INFINITY, model.clone(), 0);
    let mut report = TrainReport::default();
    let mut idx = train_idx.clone();
    for epoch in 0..cfg.epochs {
        idx.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for batch in idx.chunks(cfg.batch_size) {
            let x = columns(inputs, batch, |v| model.norm.normalize_input(v));
            let y = columns(targets, batch, |v| model.norm.normalize_output(v));
            let masks: Option<Vec<DMatrix<f64>>> = (cfg.dropout_prob > 0.0).then(|| {
                cfg.hidden
                    .iter()
                    .map(|&h| {
                        DMatrix::from_fn(
                            h,
                            batch.len(),
                            |_, _| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 },
                        )
                    })
                    .collect()
            });
            let (loss, grad) = model.loss_and_gradient(&x, &y, masks.as_deref());
            for (layer, g) in model.layers.iter_mut().zip(&grad) {
                layer.weights -= &g.weights * lr;
                layer.biases -= &g.biases * lr;
            }
            total += loss;
            batches += 1;
        }
        if !model.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite parameters after epoch {}",
                epoch + 1
            )));
        }
        let val = (&model.forward_normalized(&val_x) - &val_y).norm_squared() / val_y.len() as f64;
        report.train_loss.push(total / batches as f64);
        report.validation_loss.push(val);
        report.learning_rate.push(lr);
        log::debug!(
            "epoch {} train {:.5} val {:.5} lr {}",
            epoch + 1,
            total / batches as f64,
            val,
            lr
        );
        if val < best.0 {
            best = (val, model.clone(), epoch);
        } else {
            lr *= cfg.lr_decay;
        }
    }
    report.best_epoch = best.2;
    Ok((best.1, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn linear_dataset(seed: u64, n: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let map: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let xs: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let ys = xs
            .iter()
            .map(|x| {
                map.iter()
                    .map(|row| {
                        let e: f64 = StandardNormal.sample(&mut rng);
                        1000.0 + 300.0 * row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + 5.0 * e
                    })
                    .collect()
            })
            .collect();
        (xs, ys)
    }

    fn small(seed: u64, dropout: f64) -> TrainConfig {
        TrainConfig {
            hidden: vec![16, 16],
            epochs: 15,
            batch_size: 16,
            dropout_prob: dropout,
            seed,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn loss_decreases() {
        for seed in 0..5 {
            let (x, y) = linear_dataset(seed, 400);
            let (model, report) = train(&x, &y, &small(seed, 0.2)).unwrap();
            assert!(
                report.train_loss.last().unwrap() < &report.train_loss[0],
                "{:?}",
                report.train_loss
            );
            assert!(model.is_finite());
        }
    }

    #[test]
    fn same_seed_same_model() {
        let (x, y) = linear_dataset(3, 200);
        let a = train(&x, &y, &small(7, 0.0)).unwrap();
        let b = train(&x, &y, &small(7, 0.0)).unwrap();
        assert_eq!(a, b);
        let c = train(&x, &y, &small(8, 0.0)).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn constant_target_gets_unit_std() {
        let x = vec![vec![0.0], vec![1.0], vec![2.0]];
        let y = vec![vec![5.0], vec![5.0], vec![5.0]];
        let (model, _) = train(
            &x,
            &y,
            &TrainConfig {
                hidden: vec![2],
                epochs: 1,
                ..TrainConfig::default()
            },
        )
        .unwrap();
        assert_eq!(model.norm.output_std, vec![1.0]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(train(&[], &[], &TrainConfig::default()).is_err());
        let x = vec![vec![0.0]];
        let y = vec![vec![1.0]];
        assert!(train(
            &x,
            &y,
            &TrainConfig {
                dropout_prob: 1.0,
                ..TrainConfig::default()
            }
        )
        .is_err());
        assert!(train(
            &x,
            &y,
            &TrainConfig {
                epochs: 0,
                ..TrainConfig::default()
            }
        )
        .is_err());
    }
}
