use super::params::ParamVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.0002,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Whether a step climbs or descends the objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Ascend,
    Descend,
}

/// Adam moment estimates for one parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    config: AdamConfig,
}

impl AdamState {
    pub fn new(n_params: usize, config: AdamConfig) -> Self {
        AdamState {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
            config,
        }
    }

    pub fn for_params(params: &ParamVector, config: AdamConfig) -> Self {
        Self::new(params.len(), config)
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }

    /// Zeroes both moments and the step counter.
    pub fn reset(&mut self) {
        self.m.iter_mut().for_each(|x| *x = 0.0);
        self.v.iter_mut().for_each(|x| *x = 0.0);
        self.t = 0;
    }

    /// One bias-corrected Adam update. Nothing is mutated when the gradient
    /// holds a non-finite entry.
    pub fn step(
        &mut self,
        params: &mut ParamVector,
        grads: &ParamVector,
        direction: Direction,
    ) -> Result<()> {
        if params.manifest() != grads.manifest() || params.len() != self.m.len() {
            return Err(Error::Contract(format!(
                "adam shapes disagree: params {}, grads {}, state {}",
                params.len(),
                grads.len(),
                self.m.len()
            )));
        }
        if let Some(i) = grads.values().iter().position(|g| !g.is_finite()) {
            return Err(Error::Numeric(format!("non-finite gradient at index {i}")));
        }

        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let t = self.t + 1;
        let bc1 = 1.0 - beta1.powi(t as i32);
        let bc2 = 1.0 - beta2.powi(t as i32);
        let sign = match direction {
            Direction::Ascend => 1.0,
            Direction::Descend => -1.0,
        };
        for (((p, &g), m), v) in params
            .values_mut()
            .iter_mut()
            .zip(grads.values())
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p += sign * lr * m_hat / (v_hat.sqrt() + eps);
        }
        self.t = t;
        Ok(())
    }
}
