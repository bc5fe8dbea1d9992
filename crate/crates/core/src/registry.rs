//! Name-keyed lookup tables for the interchangeable strategies: loss
//! functions and optimizers. The CLI and configuration refer to strategies
//! by these names.

use std::sync::OnceLock;

use crate::error::{RadfError, Result};
use crate::numerics::loss::{CrossEntropy, Loss, MeanAbsoluteError, MeanSquaredError};
use crate::training::optim::{Adam, Optimizer, OptimizerSettings, Sgd};

/// An ordered table of named entries.
#[derive(Debug, Clone)]
pub struct Registry<V> {
    kind: &'static str,
    entries: Vec<(&'static str, V)>,
}

impl<V: Copy> Registry<V> {
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            entries: Vec::new(),
        }
    }

    /// Adds `value` under `name`. Names must be unique.
    pub fn register(&mut self, name: &'static str, value: V) -> Result<&mut Self> {
        if self.entries.iter().any(|(n, _)| *n == name) {
            return Err(RadfError::invalid(format!(
                "{} `{name}` is already registered",
                self.kind
            )));
        }
        self.entries.push((name, value));
        Ok(self)
    }

    pub fn get(&self, name: &str) -> Result<V> {
        self.entries
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, v)| *v)
            .ok_or_else(|| {
                RadfError::invalid(format!(
                    "unknown {} `{name}` (available: {})",
                    self.kind,
                    self.names().join(", ")
                ))
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|(n, _)| *n).collect()
    }
}

pub type LossRegistry = Registry<&'static dyn Loss>;

/// Builds a fresh optimizer from shared hyperparameters.
pub type OptimizerCtor = fn(&OptimizerSettings) -> Box<dyn Optimizer>;

pub type OptimizerRegistry = Registry<OptimizerCtor>;

/// The built-in losses, keyed by their CLI names.
pub fn losses() -> &'static LossRegistry {
    static LOSSES: OnceLock<LossRegistry> = OnceLock::new();
    LOSSES.get_or_init(|| {
        let mut reg = Registry::new("loss");
        for loss in [
            &MeanSquaredError as &'static dyn Loss,
            &MeanAbsoluteError,
            &CrossEntropy,
        ] {
            reg.register(loss.name(), loss).expect("built-in loss names are unique");
        }
        reg
    })
}

/// The built-in optimizers, keyed by their CLI names.
pub fn optimizers() -> &'static OptimizerRegistry {
    static OPTIMIZERS: OnceLock<OptimizerRegistry> = OnceLock::new();
    OPTIMIZERS.get_or_init(|| {
        let mut reg = Registry::new("optimizer");
        reg.register("sgd", Sgd::boxed as OptimizerCtor)
            .and_then(|r| r.register("adam", Adam::boxed as OptimizerCtor))
            .expect("built-in optimizer names are unique");
        reg
    })
}
