//! Scalar helpers shared by the forest, memory and training code, plus the
//! central-difference gradient oracle used to validate backpropagation.

pub mod loss;

pub use loss::{Loss, LossKind, TargetRef};

use crate::error::{RadfError, Result};

/// Sigmoid arguments are clamped to this range before exponentiation.
pub const SIGMOID_CLAMP: f64 = 40.0;

/// Logistic function with the argument clamped to `[-40, 40]`.
pub fn sigmoid(z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(RadfError::invalid(format!("sigmoid of non-finite value {z}")));
    }
    Ok(logistic(z))
}

/// Unchecked variant for callers that already validated their inputs.
#[inline]
pub(crate) fn logistic(z: f64) -> f64 {
    let z = z.clamp(-SIGMOID_CLAMP, SIGMOID_CLAMP);
    1.0 / (1.0 + (-z).exp())
}

/// Central finite-difference gradient of `f` at `theta`.
///
/// Each coordinate is perturbed by `±h` independently; `theta` is restored
/// before returning. Non-finite evaluations are reported as oracle failures.
pub fn finite_diff_grad<F>(mut f: F, theta: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(RadfError::invalid(format!(
            "finite-difference step must be positive, got {h}"
        )));
    }
    let mut point = theta.to_vec();
    let mut grad = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        let orig = point[i];
        point[i] = orig + h;
        let plus = f(&point);
        point[i] = orig - h;
        let minus = f(&point);
        point[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(RadfError::OracleFailure(format!(
                "objective is non-finite around coordinate {i} ({plus}, {minus})"
            )));
        }
        grad.push((plus - minus) / (2.0 * h));
    }
    Ok(grad)
}
