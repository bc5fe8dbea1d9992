//! Loss strategies. Each maps a prediction vector and a target to a scalar
//! loss and its gradient with respect to the prediction.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, RadfError, Result};
use crate::registry;

/// Borrowed view of a single sample's target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetRef<'a> {
    /// Class index in `[0, F)`; only valid for cross-entropy.
    Class(usize),
    /// Real-valued target of width `F`.
    Values(&'a [f64]),
}

pub trait Loss: Send + Sync {
    fn name(&self) -> &'static str;

    fn kind(&self) -> LossKind;

    /// Returns the loss and `dL/dpred`.
    fn loss_and_grad(&self, pred: &[f64], target: TargetRef<'_>) -> Result<(f64, Vec<f64>)>;

    fn loss(&self, pred: &[f64], target: TargetRef<'_>) -> Result<f64> {
        self.loss_and_grad(pred, target).map(|(l, _)| l)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Mse,
    Mae,
    CrossEntropy,
}

impl LossKind {
    pub fn strategy(self) -> &'static dyn Loss {
        match self {
            LossKind::Mse => &MeanSquaredError,
            LossKind::Mae => &MeanAbsoluteError,
            LossKind::CrossEntropy => &CrossEntropy,
        }
    }

    pub fn name(self) -> &'static str {
        self.strategy().name()
    }

    pub fn is_classification(self) -> bool {
        matches!(self, LossKind::CrossEntropy)
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = RadfError;

    fn from_str(s: &str) -> Result<Self> {
        registry::losses().get(s).map(|l| l.kind())
    }
}

/// Evaluates `kind` on one sample.
pub fn loss_and_grad(pred: &[f64], target: TargetRef<'_>, kind: LossKind) -> Result<(f64, Vec<f64>)> {
    kind.strategy().loss_and_grad(pred, target)
}

fn values<'a>(name: &str, pred: &[f64], target: TargetRef<'a>) -> Result<&'a [f64]> {
    match target {
        TargetRef::Values(y) => {
            check_len("loss target width", pred.len(), y.len())?;
            if pred.is_empty() {
                return Err(RadfError::invalid("empty prediction vector"));
            }
            Ok(y)
        }
        TargetRef::Class(_) => Err(RadfError::invalid(format!(
            "{name} needs a real-valued target, got a class index"
        ))),
    }
}

/// `(1/F) Σ (pred − y)²`.
#[derive(Debug, Clone, Copy, Default)]
pub struct MeanSquaredError;

impl Loss for MeanSquaredError {
    fn name(&self) -> &'static str {
        "mse"
    }

    fn kind(&self) -> LossKind {
        LossKind::Mse
    }

    fn loss_and_grad(&self, pred: &[f64], target: TargetRef<'_>) -> Result<(f64, Vec<f64>)> {
        let y = values(self.name(), pred, target)?;
        let scale = 1.0 / pred.len() as f64;
        let mut loss = 0.0;
        let grad = pred
            .iter()
            .zip(y)
            .map(|(p, t)| {
                let r = p - t;
                loss += r * r;
                2.0 * r * scale
            })
            .collect();
        Ok((loss * scale, grad))
    }
}

/// `(1/F) Σ |pred − y|`, with subgradient 0 at a zero residual.
#[derive(Debug, Clone, Copy, Default)]
pub struct MeanAbsoluteError;

impl Loss for MeanAbsoluteError {
    fn name(&self) -> &'static str {
        "mae"
    }

    fn kind(&self) -> LossKind {
        LossKind::Mae
    }

    fn loss_and_grad(&self, pred: &[f64], target: TargetRef<'_>) -> Result<(f64, Vec<f64>)> {
        let y = values(self.name(), pred, target)?;
        let scale = 1.0 / pred.len() as f64;
        let mut loss = 0.0;
        let grad = pred
            .iter()
            .zip(y)
            .map(|(p, t)| {
                let r = p - t;
                loss += r.abs();
                if r > 0.0 {
                    scale
                } else if r < 0.0 {
                    -scale
                } else {
                    0.0
                }
            })
            .collect();
        Ok((loss * scale, grad))
    }
}

/// Softmax cross-entropy over logits.
#[derive(Debug, Clone, Copy, Default)]
pub struct CrossEntropy;

impl Loss for CrossEntropy {
    fn name(&self) -> &'static str {
        "cross_entropy"
    }

    fn kind(&self) -> LossKind {
        LossKind::CrossEntropy
    }

    fn loss_and_grad(&self, pred: &[f64], target: TargetRef<'_>) -> Result<(f64, Vec<f64>)> {
        let class = match target {
            TargetRef::Class(c) => c,
            TargetRef::Values(_) => return Err(RadfError::invalid("cross_entropy needs a class-index target")),
        };
        if class >= pred.len() {
            return Err(RadfError::invalid(format!(
                "class index {class} out of range for {} logits",
                pred.len()
            )));
        }
        let max = pred.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut grad: Vec<f64> = pred.iter().map(|z| (z - max).exp()).collect();
        let sum: f64 = grad.iter().sum();
        // log-sum-exp form never takes log(0)
        let loss = sum.ln() - (pred[class] - max);
        for v in &mut grad {
            *v /= sum;
        }
        grad[class] -= 1.0;
        Ok((loss, grad))
    }
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for v in &mut out {
        *v /= sum;
    }
    out
}
