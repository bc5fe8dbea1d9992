//! Compares the analytic backward pass against central finite differences
//! of the forward-only batch loss on random small forests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, Targets};
use crate::error::{RadfError, Result};
use crate::forest::{ForestParams, GateParams, Gradients, Tree, TreeTopology};
use crate::memory::ResponseBank;
use crate::numerics::{finite_diff_grad, LossKind};
use crate::training::Model;

pub const STEP: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-5;
pub const ABS_TOL: f64 = 1e-8;

/// `|a − n| / max(|a|, |n|, ABS_TOL/REL_TOL)`. Below `REL_TOL` exactly
/// when the relative error is within `REL_TOL` or, for values smaller than
/// `1e-3`, the absolute error is within `ABS_TOL`.
pub fn gradient_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(ABS_TOL / REL_TOL);
    (analytic - numeric).abs() / scale
}

/// All trainable values: per tree the weight rows then the thresholds,
/// followed by the bank cells.
pub fn flatten_params(model: &Model) -> Vec<f64> {
    let mut out = Vec::new();
    for tree in model.forest.trees() {
        out.extend_from_slice(tree.gates.weights());
        out.extend_from_slice(tree.gates.thresholds());
    }
    out.extend_from_slice(model.bank.as_flat());
    out
}

/// Inverse of [`flatten_params`] onto a copy of `model`.
pub fn unflatten_params(model: &Model, theta: &[f64]) -> Model {
    let mut out = model.clone();
    let mut rest = theta;
    for tree in out.forest.trees_mut() {
        let (w, tail) = rest.split_at(tree.gates.weights().len());
        tree.gates.weights_mut().copy_from_slice(w);
        let (b, tail) = tail.split_at(tree.gates.thresholds().len());
        tree.gates.thresholds_mut().copy_from_slice(b);
        rest = tail;
    }
    out.bank.as_flat_mut().copy_from_slice(rest);
    out
}

/// Gradient in the [`flatten_params`] layout.
pub fn flatten_gradients(grads: &Gradients) -> Vec<f64> {
    let mut out = Vec::new();
    for (w, b) in grads.weights.iter().zip(&grads.thresholds) {
        out.extend_from_slice(w);
        out.extend_from_slice(b);
    }
    out.extend_from_slice(&grads.bank);
    out
}

/// A randomly drawn forest, bank and batch.
#[derive(Debug, Clone)]
pub struct GradcheckCase {
    pub seed: u64,
    pub model: Model,
    pub batch: Dataset,
    pub loss: LossKind,
}

impl GradcheckCase {
    /// Shapes: K ≤ 3, d ≤ 4, M ≤ 8, F ≤ 3, batch ≤ 8. MAE targets keep
    /// every residual at least 0.05 away from the kink.
    pub fn random(seed: u64, loss: LossKind) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.gen_range(1..=3);
        let topology = TreeTopology::new(rng.gen_range(1..=4))?;
        let m = rng.gen_range(1..=8);
        let width = if loss.is_classification() {
            rng.gen_range(2..=3)
        } else {
            rng.gen_range(1..=3)
        };
        let n = rng.gen_range(1..=8);
        let temperature = rng.gen_range(0.5..2.0);

        let nodes = topology.n_internal();
        let trees = (0..k)
            .map(|_| {
                let weights = (0..nodes * m).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let thresholds = (0..nodes).map(|_| rng.gen_range(-0.5..0.5)).collect();
                Tree::new(topology, GateParams::new(m, weights, thresholds, temperature)?)
            })
            .collect::<Result<Vec<_>>>()?;
        let forest = ForestParams::new(trees, width)?;
        let cells = (0..forest.n_cells() * width)
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let model = Model::new(forest, ResponseBank::from_flat(width, cells)?)?;

        let xs: Vec<f64> = (0..n * m).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let targets = if loss.is_classification() {
            Targets::Classes {
                indices: (0..n).map(|_| rng.gen_range(0..width)).collect(),
                labels: (0..width).map(|c| c.to_string()).collect(),
            }
        } else {
            let mut values = Vec::with_capacity(n * width);
            for row in xs.chunks_exact(m) {
                for p in model.predict(row)? {
                    let offset = rng.gen_range(0.05..1.0);
                    values.push(if rng.gen_bool(0.5) { p + offset } else { p - offset });
                }
            }
            Targets::Values { values, width }
        };
        let names = (0..m).map(|i| format!("x{i}")).collect();
        let batch = Dataset::new(xs, names, "y".into(), targets)?;
        Ok(Self {
            seed,
            model,
            batch,
            loss,
        })
    }

    /// Largest [`gradient_error`] over all coordinates. `corrupt` flips the
    /// analytic gradient's sign, which must make the check fail.
    pub fn max_error(&self, corrupt: bool) -> Result<f64> {
        let samples = self.batch.samples();
        let grads = self.model.forest.backward(&self.model.bank, &samples, self.loss)?;
        let mut analytic = flatten_gradients(&grads);
        if corrupt {
            analytic.iter_mut().for_each(|g| *g = -*g);
        }
        let theta = flatten_params(&self.model);
        let numeric = finite_diff_grad(
            |t| {
                let m = unflatten_params(&self.model, t);
                m.forest.batch_loss(&m.bank, &samples, self.loss).unwrap_or(f64::NAN)
            },
            &theta,
            STEP,
        )?;
        Ok(analytic
            .iter()
            .zip(&numeric)
            .map(|(a, n)| gradient_error(*a, *n))
            .fold(0.0, f64::max))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub cases: usize,
    pub max_rel_err: f64,
    /// Seed of the case with the largest error.
    pub worst_seed: u64,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_err <= REL_TOL
    }
}

/// Runs `cases` random configurations, cycling MSE, MAE and cross-entropy.
/// Case `i` uses seed `seed + i`.
pub fn run(seed: u64, cases: usize, corrupt: bool) -> Result<GradcheckReport> {
    if cases == 0 {
        return Err(RadfError::invalid("gradient check needs at least one case"));
    }
    let kinds = [LossKind::Mse, LossKind::Mae, LossKind::CrossEntropy];
    let mut report = GradcheckReport {
        cases,
        max_rel_err: 0.0,
        worst_seed: seed,
    };
    for i in 0..cases {
        let case_seed = seed.wrapping_add(i as u64);
        let case = GradcheckCase::random(case_seed, kinds[i % kinds.len()])?;
        let err = case.max_error(corrupt)?;
        if err > report.max_rel_err || i == 0 {
            report.max_rel_err = err;
            report.worst_seed = case_seed;
        }
    }
    Ok(report)
}
