//! Mini-batch training: one step reads the bank through the routing
//! probabilities, backpropagates, writes the bank with an erase/add plan
//! derived from the gradient and moves the gate parameters with the
//! configured optimizer.

pub mod optim;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::data::{batches, Dataset, Targets};
use crate::error::{RadfError, Result};
use crate::forest::{ForestParams, Gradients, Sample};
use crate::memory::{ResponseBank, WritePlan};
use crate::numerics::LossKind;
use crate::registry;
pub use optim::{Adam, Optimizer, OptimizerSettings, Sgd};

/// A forest together with the response bank its leaves address.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub forest: ForestParams,
    pub bank: ResponseBank,
}

impl Model {
    pub fn new(forest: ForestParams, bank: ResponseBank) -> Result<Self> {
        forest.check_bank(&bank)?;
        Ok(Self { forest, bank })
    }

    /// Seeded initialization of gates and bank.
    pub fn init(
        n_trees: usize,
        depth: usize,
        n_features: usize,
        response_width: usize,
        cfg: &TrainConfig,
    ) -> Result<Self> {
        let forest = ForestParams::init(
            n_trees,
            depth,
            n_features,
            response_width,
            cfg.temperature,
            cfg.init_seed,
        )?;
        let bank = ResponseBank::init(forest.n_cells(), response_width, cfg.init_seed ^ BANK_SEED_SALT)?;
        Self::new(forest, bank)
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.forest.forward(&self.bank, x)
    }
}

const BANK_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub eta: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Registry name of the gate optimizer.
    pub optimizer: String,
    pub loss: LossKind,
    /// Erase value applied on every bank write, in `[0, 1]`.
    pub decay: f64,
    pub temperature: f64,
    pub shuffle_seed: u64,
    pub init_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            eta: 0.05,
            batch_size: 32,
            max_epochs: 200,
            patience: 10,
            optimizer: "adam".into(),
            loss: LossKind::Mse,
            decay: 0.0,
            temperature: 1.0,
            shuffle_seed: 0,
            init_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(RadfError::invalid(format!(
                "learning rate must be positive, got {}",
                self.eta
            )));
        }
        if self.batch_size == 0 {
            return Err(RadfError::invalid("batch size must be at least 1"));
        }
        if self.max_epochs == 0 {
            return Err(RadfError::invalid("max epochs must be at least 1"));
        }
        if self.patience == 0 {
            return Err(RadfError::invalid("patience must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.decay) {
            return Err(RadfError::invalid(format!("erase decay {} outside [0, 1]", self.decay)));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(RadfError::invalid(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        registry::optimizers().get(&self.optimizer)?;
        Ok(())
    }

    pub fn build_optimizer(&self) -> Result<Box<dyn Optimizer>> {
        let ctor = registry::optimizers().get(&self.optimizer)?;
        Ok(ctor(&OptimizerSettings::new(self.eta)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchStats {
    pub mean_loss: f64,
    pub n_samples: usize,
}

/// Optimizer slot of tree `h`'s weight matrix; its thresholds use the next slot.
pub fn weight_slot(tree: usize) -> usize {
    2 * tree
}

pub fn threshold_slot(tree: usize) -> usize {
    2 * tree + 1
}

/// Moves every tree's gate weights and thresholds by its gradient.
pub fn optimizer_update(forest: &mut ForestParams, grads: &Gradients, opt: &mut dyn Optimizer) -> Result<()> {
    opt.begin_step();
    for (h, tree) in forest.trees_mut().iter_mut().enumerate() {
        opt.update(weight_slot(h), tree.gates.weights_mut(), &grads.weights[h])?;
        opt.update(threshold_slot(h), tree.gates.thresholds_mut(), &grads.thresholds[h])?;
    }
    Ok(())
}

/// One mini-batch update. Nothing is modified when the loss or gradients
/// come out non-finite.
pub fn train_step(
    model: &mut Model,
    opt: &mut dyn Optimizer,
    batch: &[Sample<'_>],
    cfg: &TrainConfig,
) -> Result<BatchStats> {
    let grads = model.forest.backward(&model.bank, batch, cfg.loss)?;
    if !grads.is_finite() {
        return Err(RadfError::Divergence(format!(
            "non-finite loss or gradient (batch loss {})",
            grads.mean_loss
        )));
    }
    let plan = WritePlan::from_gradient(
        &grads.bank,
        &grads.mean_leaf_probs,
        model.bank.width(),
        cfg.eta,
        cfg.decay,
    )?;
    let bank = model.bank.write(&plan)?;
    let mut forest = model.forest.clone();
    optimizer_update(&mut forest, &grads, opt)?;
    let finite = bank.as_flat().iter().all(|v| v.is_finite())
        && forest.trees().iter().all(|t| {
            t.gates
                .weights()
                .iter()
                .chain(t.gates.thresholds())
                .all(|v| v.is_finite())
        });
    if !finite {
        return Err(RadfError::Divergence("parameters became non-finite".into()));
    }
    model.bank = bank;
    model.forest = forest;
    Ok(BatchStats {
        mean_loss: grads.mean_loss,
        n_samples: batch.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
    /// Epoch with the lowest validation loss (earliest on ties); 0 before
    /// any epoch completed.
    pub best_epoch: usize,
}

impl TrainHistory {
    pub fn best(&self) -> Option<&EpochRecord> {
        self.records.iter().find(|r| r.epoch == self.best_epoch)
    }
}

/// Patience-based stopping on validation loss.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            stale: 0,
        }
    }

    /// Records an epoch's validation loss; returns whether it is a new best.
    pub fn observe(&mut self, epoch: usize, val_loss: f64) -> bool {
        if val_loss < self.best {
            self.best = val_loss;
            self.best_epoch = epoch;
            self.stale = 0;
            true
        } else {
            self.stale += 1;
            false
        }
    }

    pub fn should_stop(&self) -> bool {
        self.stale >= self.patience
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

/// Training ended early with an error; carries the epochs that completed.
#[derive(Debug, Error)]
#[error("{error} (after {} completed epochs)", history.records.len())]
pub struct FitFailure {
    #[source]
    pub error: RadfError,
    pub history: TrainHistory,
}

#[derive(Debug, Clone)]
pub struct Fitted {
    /// Snapshot from the best validation epoch.
    pub model: Model,
    pub history: TrainHistory,
}

/// Epoch loop with validation-based early stopping. Returns the model as
/// it was at the best validation epoch.
pub fn fit(model: Model, train: &Dataset, val: &Dataset, cfg: &TrainConfig) -> std::result::Result<Fitted, FitFailure> {
    let mut history = TrainHistory::default();
    let fail = |error, history: &TrainHistory| FitFailure {
        error,
        history: history.clone(),
    };
    if let Err(e) = check_fit_inputs(&model, train, val, cfg) {
        return Err(fail(e, &history));
    }
    let mut opt = cfg.build_optimizer().map_err(|e| fail(e, &history))?;
    let mut model = model;
    let mut best = model.clone();
    let mut stopper = EarlyStopping::new(cfg.patience);

    for epoch in 1..=cfg.max_epochs {
        let order =
            batches(train.len(), cfg.batch_size, cfg.shuffle_seed, epoch as u64).map_err(|e| fail(e, &history))?;
        let mut total = 0.0;
        for rows in &order {
            let batch = train.samples_at(rows);
            let stats = train_step(&mut model, opt.as_mut(), &batch, cfg).map_err(|e| fail(e, &history))?;
            total += stats.mean_loss * stats.n_samples as f64;
        }
        let train_loss = total / train.len() as f64;
        let val_loss = evaluate(&model, val, Metric::Loss, cfg.loss).map_err(|e| fail(e, &history))?;
        if !val_loss.is_finite() {
            return Err(fail(
                RadfError::Divergence(format!("validation loss {val_loss} at epoch {epoch}")),
                &history,
            ));
        }
        history.records.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
        });
        if stopper.observe(epoch, val_loss) {
            best = model.clone();
            history.best_epoch = epoch;
        }
        if stopper.should_stop() {
            break;
        }
    }
    Ok(Fitted { model: best, history })
}

fn check_fit_inputs(model: &Model, train: &Dataset, val: &Dataset, cfg: &TrainConfig) -> Result<()> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(RadfError::Data("training and validation sets must be non-empty".into()));
    }
    for ds in [train, val] {
        if ds.n_features() != model.forest.n_features() {
            return Err(RadfError::ShapeMismatch {
                what: "dataset features",
                expected: model.forest.n_features(),
                got: ds.n_features(),
            });
        }
        if ds.response_width() != model.forest.response_width() {
            return Err(RadfError::ShapeMismatch {
                what: "dataset response width",
                expected: model.forest.response_width(),
                got: ds.response_width(),
            });
        }
    }
    if cfg.loss.is_classification() != matches!(train.targets(), Targets::Classes { .. }) {
        return Err(RadfError::invalid(format!(
            "loss {} does not fit the dataset's targets",
            cfg.loss
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Loss,
    Accuracy,
    Rmse,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Loss => "loss",
            Metric::Accuracy => "accuracy",
            Metric::Rmse => "rmse",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = RadfError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "loss" => Ok(Metric::Loss),
            "accuracy" => Ok(Metric::Accuracy),
            "rmse" => Ok(Metric::Rmse),
            other => Err(RadfError::invalid(format!(
                "unknown metric `{other}` (expected loss, accuracy or rmse)"
            ))),
        }
    }
}

/// Index of the largest entry; the first one on ties.
pub fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold(
            (0, f64::NEG_INFINITY),
            |(bi, bv), (i, &x)| if x > bv { (i, x) } else { (bi, bv) },
        )
        .0
}

/// Mean of `metric` over `ds`. `loss` selects the loss for [`Metric::Loss`].
pub fn evaluate(model: &Model, ds: &Dataset, metric: Metric, loss: LossKind) -> Result<f64> {
    if ds.is_empty() {
        return Err(RadfError::Data("cannot evaluate on an empty dataset".into()));
    }
    let n = ds.len() as f64;
    match (metric, ds.targets()) {
        (Metric::Loss, _) => {
            let strategy = loss.strategy();
            let mut total = 0.0;
            for i in 0..ds.len() {
                total += strategy.loss(&model.predict(ds.row(i))?, ds.target(i))?;
            }
            Ok(total / n)
        }
        (Metric::Accuracy, Targets::Classes { indices, .. }) => {
            let mut correct = 0usize;
            for (i, &class) in indices.iter().enumerate() {
                if argmax(&model.predict(ds.row(i))?) == class {
                    correct += 1;
                }
            }
            Ok(correct as f64 / n)
        }
        (Metric::Rmse, Targets::Values { values, width }) => {
            let mut total = 0.0;
            for i in 0..ds.len() {
                let pred = model.predict(ds.row(i))?;
                total += pred
                    .iter()
                    .zip(&values[i * width..(i + 1) * width])
                    .map(|(p, y)| (p - y) * (p - y))
                    .sum::<f64>();
            }
            Ok((total / (n * *width as f64)).sqrt())
        }
        (Metric::Accuracy, _) => Err(RadfError::invalid("accuracy needs classification targets")),
        (Metric::Rmse, _) => Err(RadfError::invalid("rmse needs regression targets")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Targets;
    use crate::forest::{GateParams, Tree, TreeTopology};
    use crate::numerics::TargetRef;

    fn stump_model(temperature: f64, cells: &[f64]) -> Model {
        let tree = Tree::new(
            TreeTopology::new(1).unwrap(),
            GateParams::new(1, vec![0.0], vec![0.0], temperature).unwrap(),
        )
        .unwrap();
        let forest = ForestParams::new(vec![tree], 1).unwrap();
        Model::new(forest, ResponseBank::from_flat(1, cells.to_vec()).unwrap()).unwrap()
    }

    fn cfg(optimizer: &str) -> TrainConfig {
        TrainConfig {
            eta: 0.1,
            optimizer: optimizer.into(),
            ..TrainConfig::default()
        }
    }

    #[test]
    fn step_on_fixed_gates_matches_hand_backprop() {
        let mut model = stump_model(1e12, &[0.0, 0.0]);
        let batch = [Sample {
            x: &[0.3],
            target: TargetRef::Values(&[1.0]),
        }];
        let mut opt = Sgd::new(0.1);
        let before = model.forest.batch_loss(&model.bank, &batch, LossKind::Mse).unwrap();
        assert!((before - 1.0).abs() < 1e-12);
        let stats = train_step(&mut model, &mut opt, &batch, &cfg("sgd")).unwrap();
        assert!((stats.mean_loss - 1.0).abs() < 1e-12);
        for q in model.bank.as_flat() {
            assert!((q - 0.1).abs() < 1e-12);
        }
        let after = model.forest.batch_loss(&model.bank, &batch, LossKind::Mse).unwrap();
        assert!((after - 0.81).abs() < 1e-12);
    }

    #[test]
    fn zero_residual_is_fixed_point() {
        for name in ["sgd", "adam"] {
            let mut model = stump_model(1.0, &[0.5, 0.5]);
            let before = model.clone();
            let batch = [Sample {
                x: &[2.0],
                target: TargetRef::Values(&[0.5]),
            }];
            let mut opt = cfg(name).build_optimizer().unwrap();
            train_step(&mut model, opt.as_mut(), &batch, &cfg(name)).unwrap();
            assert_eq!(model, before, "{name}");
        }
    }

    #[test]
    fn divergence_leaves_state_untouched() {
        let mut model = stump_model(1.0, &[1e308, -1e308]);
        let before = model.clone();
        let batch = [Sample {
            x: &[0.0],
            target: TargetRef::Values(&[-1e308]),
        }];
        let err = train_step(&mut model, &mut Sgd::new(0.1), &batch, &cfg("sgd")).unwrap_err();
        assert!(matches!(err, RadfError::Divergence(_)), "{err}");
        assert_eq!(model, before);
    }

    #[test]
    fn early_stopping_rule() {
        let mut stop = EarlyStopping::new(2);
        let mut stopped_at = None;
        for (epoch, v) in [(1, 1.0), (2, 0.9), (3, 0.95), (4, 0.97), (5, 0.5)] {
            stop.observe(epoch, v);
            if stop.should_stop() {
                stopped_at = Some(epoch);
                break;
            }
        }
        assert_eq!(stopped_at, Some(4));
        assert_eq!(stop.best_epoch(), 2);

        let mut tie = EarlyStopping::new(5);
        tie.observe(1, 0.5);
        assert!(!tie.observe(2, 0.5));
        assert_eq!(tie.best_epoch(), 1);
    }

    fn tiny_regression(n: usize) -> Dataset {
        let xs: Vec<f64> = (0..n).map(|i| i as f64 / n as f64 - 0.5).collect();
        let ys: Vec<f64> = xs.iter().map(|x| if *x > 0.0 { 1.0 } else { -1.0 }).collect();
        Dataset::new(
            xs,
            vec!["x".into()],
            "y".into(),
            Targets::Values { values: ys, width: 1 },
        )
        .unwrap()
    }

    #[test]
    fn fit_contracts() {
        let ds = tiny_regression(20);
        let mut c = TrainConfig {
            max_epochs: 0,
            ..TrainConfig::default()
        };
        let model = Model::init(1, 1, 1, 1, &c).unwrap();
        assert!(fit(model.clone(), &ds, &ds, &c).is_err());

        c.max_epochs = 1;
        let fitted = fit(model.clone(), &ds, &ds, &c).unwrap();
        assert_eq!(fitted.history.records.len(), 1);
        assert_eq!(fitted.history.records[0].epoch, 1);
        assert_eq!(fitted.history.best_epoch, 1);

        let bad = TrainConfig {
            loss: LossKind::CrossEntropy,
            ..c.clone()
        };
        assert!(fit(model, &ds, &ds, &bad).is_err());
    }

    #[test]
    fn fit_returns_best_snapshot_and_is_reproducible() {
        let ds = tiny_regression(40);
        let c = TrainConfig {
            max_epochs: 30,
            patience: 3,
            batch_size: 8,
            eta: 0.2,
            ..TrainConfig::default()
        };
        let model = Model::init(2, 2, 1, 1, &c).unwrap();
        let a = fit(model.clone(), &ds, &ds, &c).unwrap();
        let b = fit(model, &ds, &ds, &c).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.model, b.model);
        let best = a.history.best().unwrap().val_loss;
        let again = evaluate(&a.model, &ds, Metric::Loss, c.loss).unwrap();
        assert!((again - best).abs() <= 1e-12);
        let min = a
            .history
            .records
            .iter()
            .map(|r| r.val_loss)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(best, min);
    }

    #[test]
    fn evaluate_examples() {
        let zero = stump_model(1.0, &[0.0, 0.0]);
        let ds = Dataset::new(
            vec![0.0, 1.0],
            vec!["x".into()],
            "y".into(),
            Targets::Values {
                values: vec![0.0, 2.0],
                width: 1,
            },
        )
        .unwrap();
        let rmse = evaluate(&zero, &ds, Metric::Rmse, LossKind::Mse).unwrap();
        assert!((rmse - 2f64.sqrt()).abs() < 1e-15);
        assert!(evaluate(&zero, &ds, Metric::Accuracy, LossKind::Mse).is_err());

        let exact = stump_model(1.0, &[3.0, 3.0]);
        let ds3 = Dataset::new(
            vec![0.0, 5.0],
            vec!["x".into()],
            "y".into(),
            Targets::Values {
                values: vec![3.0, 3.0],
                width: 1,
            },
        )
        .unwrap();
        assert_eq!(evaluate(&exact, &ds3, Metric::Rmse, LossKind::Mse).unwrap(), 0.0);

        // class 0 always wins when cell 0 carries the larger logit
        let tree = Tree::new(
            TreeTopology::new(1).unwrap(),
            GateParams::new(1, vec![0.0], vec![0.0], 1.0).unwrap(),
        )
        .unwrap();
        let forest = ForestParams::new(vec![tree], 2).unwrap();
        let model = Model::new(forest, ResponseBank::from_flat(2, vec![1.0, 0.0, 1.0, 0.0]).unwrap()).unwrap();
        let labels = vec!["a".to_string(), "b".to_string()];
        let half = Dataset::new(
            vec![0.0, 1.0],
            vec!["x".into()],
            "y".into(),
            Targets::Classes {
                indices: vec![0, 1],
                labels: labels.clone(),
            },
        )
        .unwrap();
        assert_eq!(
            evaluate(&model, &half, Metric::Accuracy, LossKind::CrossEntropy).unwrap(),
            0.5
        );
        let all = Dataset::new(
            vec![0.0, 1.0],
            vec!["x".into()],
            "y".into(),
            Targets::Classes {
                indices: vec![0, 0],
                labels,
            },
        )
        .unwrap();
        assert_eq!(
            evaluate(&model, &all, Metric::Accuracy, LossKind::CrossEntropy).unwrap(),
            1.0
        );
        assert!(evaluate(&model, &all, Metric::Rmse, LossKind::CrossEntropy).is_err());
    }

    #[test]
    fn metric_names() {
        for m in [Metric::Loss, Metric::Accuracy, Metric::Rmse] {
            assert_eq!(m.name().parse::<Metric>().unwrap(), m);
        }
        assert!("auc".parse::<Metric>().is_err());
    }
}
