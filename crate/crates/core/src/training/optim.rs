//! Optimizers for the gate parameters. Each parameter tensor is addressed
//! by a stable slot number so stateful optimizers can keep per-tensor
//! accumulators.

use crate::error::{check_len, RadfError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerSettings {
    pub eta: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl OptimizerSettings {
    pub fn new(eta: f64) -> Self {
        Self {
            eta,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

pub trait Optimizer: Send {
    fn name(&self) -> &'static str;

    /// Marks the start of a new batch update.
    fn begin_step(&mut self) {}

    /// Applies one update to the tensor in `slot` given its batch-mean gradient.
    fn update(&mut self, slot: usize, params: &mut [f64], grads: &[f64]) -> Result<()>;
}

/// Plain gradient descent: `θ ← θ − η·g`.
#[derive(Debug, Clone)]
pub struct Sgd {
    eta: f64,
}

impl Sgd {
    pub fn new(eta: f64) -> Self {
        Self { eta }
    }

    pub fn boxed(settings: &OptimizerSettings) -> Box<dyn Optimizer> {
        Box::new(Self::new(settings.eta))
    }
}

impl Optimizer for Sgd {
    fn name(&self) -> &'static str {
        "sgd"
    }

    fn update(&mut self, _slot: usize, params: &mut [f64], grads: &[f64]) -> Result<()> {
        check_len("sgd gradient", params.len(), grads.len())?;
        for (p, g) in params.iter_mut().zip(grads) {
            *p -= self.eta * g;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Moments {
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone)]
pub struct Adam {
    settings: OptimizerSettings,
    step: u64,
    moments: Vec<Moments>,
}

impl Adam {
    pub fn new(settings: OptimizerSettings) -> Self {
        Self {
            settings,
            step: 0,
            moments: Vec::new(),
        }
    }

    pub fn boxed(settings: &OptimizerSettings) -> Box<dyn Optimizer> {
        Box::new(Self::new(*settings))
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn moments(&self, slot: usize) -> Option<&Moments> {
        self.moments.get(slot)
    }
}

impl Optimizer for Adam {
    fn name(&self) -> &'static str {
        "adam"
    }

    fn begin_step(&mut self) {
        self.step += 1;
    }

    fn update(&mut self, slot: usize, params: &mut [f64], grads: &[f64]) -> Result<()> {
        check_len("adam gradient", params.len(), grads.len())?;
        if self.step == 0 {
            return Err(RadfError::invalid("adam update before begin_step"));
        }
        if self.moments.len() <= slot {
            self.moments.resize_with(slot + 1, Moments::default);
        }
        let state = &mut self.moments[slot];
        if state.first.is_empty() {
            state.first = vec![0.0; params.len()];
            state.second = vec![0.0; params.len()];
        }
        check_len("adam moments", state.first.len(), params.len())?;

        let OptimizerSettings { eta, beta1, beta2, eps } = self.settings;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut state.first)
            .zip(&mut state.second)
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= eta * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}
