//! RMSProp parameter updates.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::{ModelParams, ParamId};

/// Keeps a running mean of squared gradients per parameter:
///
/// ```text
/// acc <- decay * acc + (1 - decay) * g^2
/// p   <- p - learning_rate * g / (sqrt(acc) + epsilon)
/// ```
///
/// Only parameters that appear in the gradient list are touched; a parameter
/// the batch never reached keeps its bits and its accumulator.
pub struct RmsProp {
    learning_rate: f64,
    decay: f64,
    epsilon: f64,
    accumulators: HashMap<ParamId, Vec<f64>>,
}

impl RmsProp {
    pub fn new(learning_rate: f64, decay: f64, epsilon: f64) -> Self {
        RmsProp {
            learning_rate,
            decay,
            epsilon,
            accumulators: HashMap::new(),
        }
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    /// Apply one update. Gradients must align with the named parameters'
    /// shapes; a non-finite gradient aborts, naming the parameter.
    pub fn step(&mut self, params: &mut ModelParams, grads: &[(ParamId, Vec<f64>)]) -> Result<()> {
        for (id, grad) in grads {
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Training(format!(
                    "non-finite gradient for parameter {}",
                    id.name()
                )));
            }
            let tensor = params.tensor_mut(id).ok_or_else(|| {
                Error::Training(format!("gradient for unknown parameter {}", id.name()))
            })?;
            if tensor.numel() != grad.len() {
                return Err(Error::Training(format!(
                    "gradient for {} has {} entries, parameter has {}",
                    id.name(),
                    grad.len(),
                    tensor.numel()
                )));
            }
            let acc = self
                .accumulators
                .entry(*id)
                .or_insert_with(|| vec![0.0; grad.len()]);
            let data = tensor.data_mut();
            for i in 0..grad.len() {
                let g = grad[i];
                acc[i] = self.decay * acc[i] + (1.0 - self.decay) * g * g;
                data[i] -= self.learning_rate * g / (acc[i].sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}
