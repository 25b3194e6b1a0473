use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::model::{first_non_finite, Network, NoiseChannel};
use super::{NnError, NoiseMode};
use crate::rng;

/// Mean absolute error.
pub fn mae_loss(pred: &[f64], target: &[f64]) -> f64 {
    assert_eq!(pred.len(), target.len(), "loss operands differ in length");
    pred.iter().zip(target).map(|(p, t)| (p - t).abs()).sum::<f64>() / pred.len() as f64
}

/// Subgradient of [`mae_loss`], 0 at ties, scaled by `weight`. A NaN
/// difference stays NaN so the step gets rejected.
fn mae_grad(pred: &[f64], target: &[f64], weight: f64) -> Vec<f64> {
    pred.iter()
        .zip(target)
        .map(|(p, t)| {
            let d = p - t;
            if d > 0.0 {
                weight
            } else if d < 0.0 {
                -weight
            } else if d == 0.0 {
                0.0
            } else {
                f64::NAN
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub inputs: &'a [f64],
    pub target: &'a [f64],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Adam {
    pub fn new(num_params: usize, learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
        }
    }

    pub fn update(&mut self, params: &mut [f64], grad: &[f64]) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for ((p, g), (m, v)) in params.iter_mut().zip(grad).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= self.learning_rate * (*m / c1) / ((*v / c2).sqrt() + self.epsilon);
        }
    }
}

/// One Adam step on the mean batch MAE. `stream` seeds the per-sample noise
/// and dropout draws; it should be unique per step. Returns the loss before
/// the update.
pub fn train_step(net: &mut Network, opt: &mut Adam, batch: &[Sample], stream: &[u64]) -> Result<f64, NnError> {
    if batch.is_empty() {
        return Err(NnError::EmptyBatch);
    }
    let mut grad = vec![0.0; net.num_params()];
    let mut loss = 0.0;
    let width = net.config.noise_width;
    let weight = 1.0 / (batch.len() * net.config.output_len) as f64;
    for (i, s) in batch.iter().enumerate() {
        net.check_input(s.inputs)?;
        let mut path = stream.to_vec();
        path.push(i as u64);
        let mut noise = NoiseChannel::from_rng(width, rng::stream(net.config.seed, &path), NoiseMode::Sampled)
            .with_sampling(net.config.noise_sampling);
        let cache = net.forward_stochastic(s.inputs, &mut noise, true);
        loss += mae_loss(&cache.out, s.target);
        let dout = mae_grad(&cache.out, s.target, weight);
        net.backward(&cache, &dout, &mut grad);
    }
    if let Some(t) = first_non_finite(&net.layout, &grad) {
        return Err(NnError::NonFiniteGradient {
            tensor: t.to_string(),
            step: opt.step + 1,
        });
    }
    opt.update(&mut net.params, &grad);
    if let Some(t) = net.non_finite_tensor() {
        return Err(NnError::Diverged {
            tensor: t.to_string(),
            step: opt.step,
        });
    }
    Ok(loss / batch.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 256,
            max_epochs: 100,
            patience: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean batch loss in the training target's units.
    pub train_mae: f64,
    pub val_mae: f64,
    /// Wall-clock seconds since training started; not serialized so that
    /// stored logs stay reproducible.
    #[serde(skip)]
    pub wall_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub epochs: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_val_mae: f64,
    pub stopped_early: bool,
    /// Steps skipped because of a non-finite gradient.
    pub rejected_steps: Vec<String>,
}

impl FitReport {
    /// Tab-separated epoch log with a header row. Wall time is left out.
    pub fn log_tsv(&self) -> String {
        let mut s = String::from("epoch\ttrain_mae\tval_mae\n");
        for e in &self.epochs {
            s.push_str(&format!("{}\t{}\t{}\n", e.epoch, e.train_mae, e.val_mae));
        }
        s
    }
}

/// Minibatch training with early stopping on `validate`, which returns the
/// validation error of the current parameters. The best parameters seen are
/// restored before returning.
pub fn fit(
    net: &mut Network,
    train: &[Sample],
    cfg: &TrainConfig,
    mut validate: impl FnMut(&Network) -> f64,
) -> Result<FitReport, NnError> {
    if train.is_empty() {
        return Err(NnError::EmptyBatch);
    }
    let mut opt = Adam::new(net.num_params(), cfg.learning_rate);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best = (f64::INFINITY, 0usize, net.params.clone());
    let mut report = FitReport {
        epochs: Vec::new(),
        best_epoch: 0,
        best_val_mae: f64::INFINITY,
        stopped_early: false,
        rejected_steps: Vec::new(),
    };
    let started = Instant::now();
    let batch_size = cfg.batch_size.max(1);
    for epoch in 1..=cfg.max_epochs {
        order.sort_unstable();
        order.shuffle(&mut rng::stream(net.config.seed, &[0x5eed, epoch as u64]));
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for (b, chunk) in order.chunks(batch_size).enumerate() {
            let batch: Vec<Sample> = chunk.iter().map(|&i| train[i]).collect();
            match train_step(net, &mut opt, &batch, &[epoch as u64, b as u64]) {
                Ok(l) => {
                    loss_sum += l;
                    batches += 1;
                }
                Err(e @ NnError::NonFiniteGradient { .. }) => report.rejected_steps.push(e.to_string()),
                Err(e) => return Err(e),
            }
        }
        let val = validate(net);
        report.epochs.push(EpochLog {
            epoch,
            train_mae: if batches > 0 { loss_sum / batches as f64 } else { f64::NAN },
            val_mae: val,
            wall_s: started.elapsed().as_secs_f64(),
        });
        if val < best.0 {
            best = (val, epoch, net.params.clone());
        } else if epoch - best.1 >= cfg.patience {
            report.stopped_early = true;
            break;
        }
    }
    net.params = best.2;
    report.best_epoch = best.1;
    report.best_val_mae = best.0;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::NetworkConfig;

    fn small(noise: usize, dropout: f64) -> NetworkConfig {
        NetworkConfig {
            input_features: 3,
            seq_len: 2,
            noise_width: noise,
            dropout,
            conv_filters: 4,
            conv_kernel: 1,
            lstm_hidden: 4,
            dense_hidden: 8,
            output_len: 12,
            seed: 3,
            ..Default::default()
        }
    }

    #[test]
    fn loss_values() {
        assert_eq!(mae_loss(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        let p = [1.0, 2.0, 3.0];
        let t: Vec<f64> = p.iter().map(|v| v + 0.25).collect();
        assert_eq!(mae_loss(&p, &t), 0.25);
        assert_eq!(mae_grad(&[1.0, 2.0, 0.0], &[1.0, 1.0, 1.0], 0.5), vec![0.0, 0.5, -0.5]);
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let mut net = Network::init(small(2, 0.2), 1).unwrap();
        let before = net.params.clone();
        let mut opt = Adam::new(net.num_params(), 0.0);
        let x = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
        let y = [1.0; 12];
        train_step(&mut net, &mut opt, &[Sample { inputs: &x, target: &y }], &[0]).unwrap();
        assert_eq!(net.params, before);
        assert_eq!(opt.step, 1);
    }

    #[test]
    fn single_sample_overfits() {
        let mut net = Network::init(small(0, 0.0), 5).unwrap();
        let mut opt = Adam::new(net.num_params(), 1e-2);
        let x = [0.3, -0.7, 1.1, 0.2, 0.9, -0.4];
        let y: Vec<f64> = (0..12).map(|i| 0.5 + 0.1 * i as f64).collect();
        let s = [Sample { inputs: &x, target: &y }];
        let initial = mae_loss(&net.predict(&x).unwrap(), &y);
        for step in 0..500 {
            train_step(&mut net, &mut opt, &s, &[step]).unwrap();
        }
        let end = mae_loss(&net.predict(&x).unwrap(), &y);
        assert!(end < 0.01 * initial, "{end} vs {initial}");
    }

    #[test]
    fn empty_batch_rejected() {
        let mut net = Network::init(small(0, 0.0), 5).unwrap();
        let mut opt = Adam::new(net.num_params(), 1e-2);
        assert!(matches!(train_step(&mut net, &mut opt, &[], &[0]), Err(NnError::EmptyBatch)));
    }

    #[test]
    fn non_finite_gradient_rejects_step() {
        let mut net = Network::init(small(0, 0.0), 5).unwrap();
        let w = net.layout.get("dense2.bias").unwrap().offset;
        net.params[w] = f64::NAN;
        let bits = |p: &[f64]| p.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        let before = bits(&net.params);
        let mut opt = Adam::new(net.num_params(), 1e-2);
        let x = [0.1; 6];
        let err = train_step(&mut net, &mut opt, &[Sample { inputs: &x, target: &[0.0; 12] }], &[0]);
        assert!(matches!(err, Err(NnError::NonFiniteGradient { .. })), "{err:?}");
        assert_eq!(bits(&net.params), before);
        assert_eq!(opt.step, 0);
    }

    #[test]
    fn fit_restores_best_and_logs() {
        let mut net = Network::init(small(2, 0.1), 9).unwrap();
        let xs: Vec<Vec<f64>> = (0..40).map(|i| (0..6).map(|j| ((i * 7 + j) as f64).sin()).collect()).collect();
        let ys: Vec<Vec<f64>> = xs.iter().map(|x| vec![x[0] + x[3]; 12]).collect();
        let samples: Vec<Sample> = xs.iter().zip(&ys).map(|(x, y)| Sample { inputs: x, target: y }).collect();
        let cfg = TrainConfig {
            learning_rate: 1e-2,
            batch_size: 8,
            max_epochs: 15,
            patience: 3,
        };
        let eval = |n: &Network| samples.iter().map(|s| mae_loss(&n.predict(s.inputs).unwrap(), s.target)).sum::<f64>();
        let report = fit(&mut net, &samples, &cfg, eval).unwrap();
        assert!(!report.epochs.is_empty());
        assert_eq!(eval(&net), report.best_val_mae);
        assert_eq!(report.log_tsv().lines().count(), report.epochs.len() + 1);
    }
}
