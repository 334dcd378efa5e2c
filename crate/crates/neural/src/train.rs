use std::io::Write;

use rand::seq::SliceRandom;
use rfaffect_core::seed;
use serde::{Deserialize, Serialize};

use crate::model::Model;
use crate::tensor::Tensor;
use crate::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    Adam,
}

/// Mini-batch training settings. Adam uses beta1 0.9, beta2 0.999, eps 1e-8.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: Optimizer::Adam,
            learning_rate: 1e-3,
            batch_size: 8,
            epochs: 30,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(NnError::Config(format!(
                "learning_rate must be finite and >= 0, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(NnError::Config("epochs and batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetSample {
    pub inputs: Vec<Tensor>,
    pub label: usize,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = Self::B1 * *m + (1.0 - Self::B1) * g;
            *v = Self::B2 * *v + (1.0 - Self::B2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
        }
    }
}

/// Trains in place and returns the mean training loss of each epoch.
///
/// Each epoch visits the samples in an order drawn from
/// `derive(cfg.seed, epoch)`; batch gradients are averaged. The epoch loss
/// is the per-sample losses summed in dataset order, so it does not depend
/// on the shuffle.
pub fn train(model: &mut Model, data: &[NetSample], cfg: &TrainConfig) -> Result<Vec<f64>, NnError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(NnError::Config("training set is empty".into()));
    }
    let n_params = model.n_params();
    let mut adam = Adam::new(n_params);
    let mut grads = vec![0.0; n_params];
    let mut losses = vec![0.0; data.len()];
    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..cfg.epochs {
        let mut rng = seed::rng(seed::derive(cfg.seed, epoch as u64));
        order.sort_unstable();
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            grads.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                let s = &data[i];
                let loss = model.loss_and_grad(&s.inputs, s.label, &mut grads)?;
                if !loss.is_finite() {
                    return Err(NnError::NonFinite(format!(
                        "loss became {loss} in epoch {epoch}; lower the learning rate (currently {})",
                        cfg.learning_rate
                    )));
                }
                losses[i] = loss;
            }
            let scale = 1.0 / batch.len() as f64;
            grads.iter_mut().for_each(|g| *g *= scale);
            if cfg.learning_rate > 0.0 {
                match cfg.optimizer {
                    Optimizer::Adam => adam.step(&mut model.params, &grads, cfg.learning_rate),
                    Optimizer::Sgd => {
                        for (p, g) in model.params.iter_mut().zip(&grads) {
                            *p -= cfg.learning_rate * g;
                        }
                    }
                }
            }
            if model.params.iter().any(|p| !p.is_finite()) {
                return Err(NnError::NonFinite(format!(
                    "parameters diverged in epoch {epoch}; lower the learning rate (currently {})",
                    cfg.learning_rate
                )));
            }
        }
        trace.push(losses.iter().sum::<f64>() / data.len() as f64);
    }
    Ok(trace)
}

/// `epoch,loss` with epochs counted from 1.
pub fn write_loss_csv<W: Write>(mut w: W, trace: &[f64]) -> std::io::Result<()> {
    writeln!(w, "epoch,loss")?;
    for (e, l) in trace.iter().enumerate() {
        writeln!(w, "{},{}", e + 1, l)?;
    }
    Ok(())
}
