//! Adam training loop over the flat parameter vector.
//!
//! Deliberately plain: sequential mini-batches in input order, mean-of-batch
//! gradients, constant learning rate (no warmup or decay), bias-corrected
//! Adam moments. Given the same instances, config, and initial parameters,
//! the result is bit-identical on every run.

use log::info;

use crate::error::{Error, Result};
use crate::instance::TrainingInstance;
use crate::scorer::model::grad;
use crate::scorer::params::ModelParams;

/// Optimizer and loop settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Seeds parameter initialization when the caller starts from scratch.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 3e-5,
            batch_size: 8,
            epochs: 1,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 || self.learning_rate.is_nan() {
            return Err(Error::Config("learning_rate must be positive".to_string()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".to_string()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("betas must lie in [0, 1)".to_string()));
        }
        if self.epsilon <= 0.0 || self.epsilon.is_nan() {
            return Err(Error::Config("epsilon must be positive".to_string()));
        }
        Ok(())
    }
}

/// Adam state over a flat parameter vector.
struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    fn new(len: usize) -> Adam {
        Adam {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], config: &TrainConfig) {
        self.t += 1;
        let bc1 = 1.0 - config.beta1.powi(self.t as i32);
        let bc2 = 1.0 - config.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = config.beta1 * self.m[i] + (1.0 - config.beta1) * grad[i];
            self.v[i] = config.beta2 * self.v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
        }
    }
}

/// Train from the given initial parameters; returns the final parameters and
/// the mean loss of each epoch.
///
/// Batches are consecutive slices of the instance list (the last may be
/// short); the batch gradient is the mean over its members. A non-finite
/// loss aborts with a training error naming the optimizer step.
pub fn train(
    instances: &[TrainingInstance],
    init: ModelParams,
    config: &TrainConfig,
) -> Result<(ModelParams, Vec<f64>)> {
    config.validate()?;
    if instances.is_empty() {
        return Err(Error::Input("training needs at least one instance".to_string()));
    }

    let mut params = init;
    let mut adam = Adam::new(params.len());
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut grad_sum = vec![0.0; params.len()];

    for epoch in 0..config.epochs {
        let mut loss_sum = 0.0;
        for batch in instances.chunks(config.batch_size) {
            grad_sum.iter_mut().for_each(|g| *g = 0.0);
            let mut batch_loss = 0.0;
            for inst in batch {
                let target = (inst.target_start, inst.target_end, inst.answer_type);
                let (loss, g) = grad(&params, &inst.input_ids, target)?;
                if !loss.is_finite() {
                    return Err(Error::Training {
                        step: adam.t as usize,
                        message: format!("loss diverged on example {}", inst.example_id),
                    });
                }
                batch_loss += loss;
                for (acc, gi) in grad_sum.iter_mut().zip(&g) {
                    *acc += gi;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            grad_sum.iter_mut().for_each(|g| *g *= scale);
            adam.step(&mut params.data, &grad_sum, config);
            loss_sum += batch_loss;
        }
        let mean = loss_sum / instances.len() as f64;
        if !mean.is_finite() {
            return Err(Error::Training {
                step: adam.t as usize,
                message: format!("mean loss diverged in epoch {epoch}"),
            });
        }
        epoch_losses.push(mean);
        info!("epoch {epoch}: mean loss {mean:.6}");
    }

    Ok((params, epoch_losses))
}
