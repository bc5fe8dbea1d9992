//! Soft-gated complete binary trees and the forest that averages them.
//!
//! Nodes use 1-based breadth-first numbering: internal nodes are
//! `1..2^d`, leaves are `2^d..2^(d+1)`, and node `i` has children `2i`
//! (left) and `2i + 1` (right). A gate value `g` is the probability of
//! taking the left child.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, RadfError, Result};
use crate::memory::ResponseBank;
use crate::numerics::{logistic, LossKind, TargetRef, SIGMOID_CLAMP};

/// Deepest tree we agree to allocate.
pub const MAX_DEPTH: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeTopology {
    depth: usize,
}

impl TreeTopology {
    pub fn new(depth: usize) -> Result<Self> {
        if depth == 0 || depth > MAX_DEPTH {
            return Err(RadfError::invalid(format!(
                "tree depth must be in 1..={MAX_DEPTH}, got {depth}"
            )));
        }
        Ok(Self { depth })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn n_internal(&self) -> usize {
        (1 << self.depth) - 1
    }

    pub fn n_leaves(&self) -> usize {
        1 << self.depth
    }

    /// BFS index of the first leaf.
    pub fn first_leaf(&self) -> usize {
        1 << self.depth
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        node >= self.first_leaf() && node < 2 * self.first_leaf()
    }

    /// Internal nodes on the root-to-leaf path, root first.
    pub fn path(&self, leaf: usize) -> Vec<usize> {
        debug_assert!(self.is_leaf(leaf));
        let mut path: Vec<usize> = std::iter::successors(Some(leaf / 2), |&n| (n > 1).then_some(n / 2)).collect();
        path.reverse();
        path
    }
}

/// Split parameters of one tree: a full feature-weight row and a threshold
/// per internal node, plus the gate temperature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    n_features: usize,
    weights: Vec<f64>,
    thresholds: Vec<f64>,
    temperature: f64,
}

impl GateParams {
    pub fn new(n_features: usize, weights: Vec<f64>, thresholds: Vec<f64>, temperature: f64) -> Result<Self> {
        if n_features == 0 {
            return Err(RadfError::invalid("gates need at least one feature"));
        }
        check_len("gate weight entries", thresholds.len() * n_features, weights.len())?;
        if weights.iter().chain(&thresholds).any(|v| !v.is_finite()) {
            return Err(RadfError::invalid("gate parameters must be finite"));
        }
        check_temperature(temperature)?;
        Ok(Self {
            n_features,
            weights,
            thresholds,
            temperature,
        })
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_nodes(&self) -> usize {
        self.thresholds.len()
    }

    /// Feature-weight row of internal node `node` (BFS, 1-based).
    pub fn row(&self, node: usize) -> &[f64] {
        &self.weights[(node - 1) * self.n_features..node * self.n_features]
    }

    pub fn threshold(&self, node: usize) -> f64 {
        self.thresholds[node - 1]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn thresholds_mut(&mut self) -> &mut [f64] {
        &mut self.thresholds
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn set_temperature(&mut self, temperature: f64) -> Result<()> {
        check_temperature(temperature)?;
        self.temperature = temperature;
        Ok(())
    }

    /// `A_n · x − b_n` for internal node `node`.
    pub fn margin(&self, node: usize, x: &[f64]) -> f64 {
        self.row(node).iter().zip(x).map(|(a, v)| a * v).sum::<f64>() - self.threshold(node)
    }
}

fn check_temperature(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(RadfError::invalid(format!(
            "temperature must be positive and finite, got {t}"
        )))
    }
}

fn check_features(n_features: usize, x: &[f64]) -> Result<()> {
    check_len("feature vector", n_features, x.len())?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(RadfError::invalid("feature vector contains non-finite values"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub topology: TreeTopology,
    pub gates: GateParams,
}

/// Gate values and leaf probabilities of one tree for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutingResult {
    /// Indexed by internal node minus one.
    pub gates: Vec<f64>,
    /// Indexed by leaf minus `2^d`.
    pub leaf_probs: Vec<f64>,
}

impl Tree {
    pub fn new(topology: TreeTopology, gates: GateParams) -> Result<Self> {
        check_len("gate rows", topology.n_internal(), gates.n_nodes())?;
        Ok(Self { topology, gates })
    }

    /// `g_n = σ((A_n·x − b_n)/τ)` for every internal node.
    pub fn gate_values(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_features(self.gates.n_features, x)?;
        let t = self.gates.temperature;
        Ok((1..=self.topology.n_internal())
            .map(|n| logistic(self.gates.margin(n, x) / t))
            .collect())
    }

    pub fn route(&self, x: &[f64]) -> Result<RoutingResult> {
        let gates = self.gate_values(x)?;
        let leaf_probs = leaf_probabilities(self.topology, &gates)?;
        Ok(RoutingResult { gates, leaf_probs })
    }

    /// `Σ_j p_j q_j` over this tree's cells, which start at `first_cell`.
    pub fn forward(&self, bank: &ResponseBank, first_cell: usize, x: &[f64]) -> Result<Vec<f64>> {
        let routing = self.route(x)?;
        bank.read_block(first_cell, &routing.leaf_probs)
    }

    /// Classical routing: left when `A_n·x − b_n >= 0`, right otherwise.
    /// Returns the reached leaf's BFS index.
    pub fn hard_route(&self, x: &[f64]) -> Result<usize> {
        check_len("feature vector", self.gates.n_features, x.len())?;
        let mut node = 1;
        while !self.topology.is_leaf(node) {
            node = if self.gates.margin(node, x) >= 0.0 {
                2 * node
            } else {
                2 * node + 1
            };
        }
        Ok(node)
    }
}

/// Probability of reaching every node, indexed by BFS number (slot 0 unused).
fn reach_probabilities(topology: TreeTopology, gates: &[f64], reach: &mut Vec<f64>) {
    reach.clear();
    reach.resize(2 * topology.first_leaf(), 0.0);
    reach[1] = 1.0;
    for (i, &g) in gates.iter().enumerate() {
        let node = i + 1;
        let mass = reach[node];
        reach[2 * node] = mass * g;
        reach[2 * node + 1] = mass * (1.0 - g);
    }
}

/// Leaf probabilities from gate values: each leaf gets the product of the
/// branch probabilities on its root path (`g` to the left, `1 − g` right).
pub fn leaf_probabilities(topology: TreeTopology, gates: &[f64]) -> Result<Vec<f64>> {
    check_len("gate values", topology.n_internal(), gates.len())?;
    if let Some(g) = gates.iter().find(|g| !(0.0..=1.0).contains(*g)) {
        return Err(RadfError::invalid(format!("gate value {g} outside [0, 1]")));
    }
    let mut reach = Vec::new();
    reach_probabilities(topology, gates, &mut reach);
    Ok(reach.split_off(topology.first_leaf()))
}

/// An ensemble of equally shaped trees averaged with weight `1/K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    trees: Vec<Tree>,
    response_width: usize,
}

/// Gradients of the batch-mean loss. Per-tree vectors mirror
/// [`GateParams::weights`] and [`GateParams::thresholds`]; `bank` mirrors
/// the bank's flat layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub thresholds: Vec<Vec<f64>>,
    pub bank: Vec<f64>,
    pub mean_loss: f64,
    /// Batch-mean routing probability of each bank cell.
    pub mean_leaf_probs: Vec<f64>,
}

impl Gradients {
    pub fn is_finite(&self) -> bool {
        self.mean_loss.is_finite()
            && self
                .weights
                .iter()
                .chain(&self.thresholds)
                .flatten()
                .chain(&self.bank)
                .all(|v| v.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.weights
            .iter()
            .chain(&self.thresholds)
            .flatten()
            .chain(&self.bank)
            .all(|&v| v == 0.0)
    }
}

/// One training example as seen by the forest.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub x: &'a [f64],
    pub target: TargetRef<'a>,
}

impl ForestParams {
    pub fn new(trees: Vec<Tree>, response_width: usize) -> Result<Self> {
        let first = trees
            .first()
            .ok_or_else(|| RadfError::invalid("a forest needs at least one tree"))?;
        if response_width == 0 {
            return Err(RadfError::invalid("response width must be at least 1"));
        }
        let (topology, n_features) = (first.topology, first.gates.n_features);
        for tree in &trees {
            if tree.topology != topology || tree.gates.n_features != n_features {
                return Err(RadfError::invalid("all trees must share depth and feature count"));
            }
            check_len("gate rows", topology.n_internal(), tree.gates.n_nodes())?;
        }
        Ok(Self { trees, response_width })
    }

    /// Random forest parameters: weights uniform on `[-1, 1]`, thresholds
    /// uniform on `[-0.1, 0.1]`.
    pub fn init(
        n_trees: usize,
        depth: usize,
        n_features: usize,
        response_width: usize,
        temperature: f64,
        seed: u64,
    ) -> Result<Self> {
        let topology = TreeTopology::new(depth)?;
        if n_trees == 0 {
            return Err(RadfError::invalid("a forest needs at least one tree"));
        }
        if n_features == 0 {
            return Err(RadfError::invalid("gates need at least one feature"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_nodes = topology.n_internal();
        let trees = (0..n_trees)
            .map(|_| {
                let weights = (0..n_nodes * n_features).map(|_| rng.gen_range(-1.0..=1.0)).collect();
                let thresholds = (0..n_nodes).map(|_| rng.gen_range(-0.1..=0.1)).collect();
                GateParams::new(n_features, weights, thresholds, temperature).map(|gates| Tree { topology, gates })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(trees, response_width)
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn trees_mut(&mut self) -> &mut [Tree] {
        &mut self.trees
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn topology(&self) -> TreeTopology {
        self.trees[0].topology
    }

    pub fn depth(&self) -> usize {
        self.topology().depth()
    }

    pub fn n_features(&self) -> usize {
        self.trees[0].gates.n_features
    }

    pub fn response_width(&self) -> usize {
        self.response_width
    }

    pub fn temperature(&self) -> f64 {
        self.trees[0].gates.temperature
    }

    pub fn set_temperature(&mut self, temperature: f64) -> Result<()> {
        for tree in &mut self.trees {
            tree.gates.set_temperature(temperature)?;
        }
        Ok(())
    }

    /// Number of bank cells this forest addresses.
    pub fn n_cells(&self) -> usize {
        self.trees.len() * self.topology().n_leaves()
    }

    pub fn check_bank(&self, bank: &ResponseBank) -> Result<()> {
        check_len("bank cells", self.n_cells(), bank.n_cells())?;
        check_len("bank width", self.response_width, bank.width())
    }

    /// `ŷ = (1/K) Σ_h Q_h(x)`, summed in tree order.
    pub fn forward(&self, bank: &ResponseBank, x: &[f64]) -> Result<Vec<f64>> {
        self.check_bank(bank)?;
        check_features(self.n_features(), x)?;
        let n_leaves = self.topology().n_leaves();
        let mut out = vec![0.0; self.response_width];
        for (h, tree) in self.trees.iter().enumerate() {
            let routing = tree.route(x)?;
            bank.accumulate_read(h * n_leaves, &routing.leaf_probs, &mut out);
        }
        let inv_k = 1.0 / self.trees.len() as f64;
        out.iter_mut().for_each(|v| *v *= inv_k);
        Ok(out)
    }

    /// Batch-mean loss and its gradients with respect to every gate weight,
    /// threshold and bank cell. Samples are accumulated in order.
    pub fn backward(&self, bank: &ResponseBank, batch: &[Sample<'_>], kind: LossKind) -> Result<Gradients> {
        if batch.is_empty() {
            return Err(RadfError::invalid("backward needs a non-empty batch"));
        }
        self.check_bank(bank)?;
        let topology = self.topology();
        let (n_nodes, n_leaves, first_leaf) = (topology.n_internal(), topology.n_leaves(), topology.first_leaf());
        let (m, width, k) = (self.n_features(), self.response_width, self.trees.len());
        let inv_k = 1.0 / k as f64;
        let loss = kind.strategy();

        let mut grads = Gradients {
            weights: vec![vec![0.0; n_nodes * m]; k],
            thresholds: vec![vec![0.0; n_nodes]; k],
            bank: vec![0.0; bank.as_flat().len()],
            mean_loss: 0.0,
            mean_leaf_probs: vec![0.0; self.n_cells()],
        };

        let mut gates = vec![vec![0.0; n_nodes]; k];
        let mut reach = vec![Vec::new(); k];
        let mut cond = vec![0.0; 2 * first_leaf];

        for sample in batch {
            check_features(m, sample.x)?;
            let mut pred = vec![0.0; width];
            for (h, tree) in self.trees.iter().enumerate() {
                let t = tree.gates.temperature;
                for (n, g) in gates[h].iter_mut().enumerate() {
                    *g = logistic(tree.gates.margin(n + 1, sample.x) / t);
                }
                reach_probabilities(topology, &gates[h], &mut reach[h]);
                bank.accumulate_read(h * n_leaves, &reach[h][first_leaf..], &mut pred);
            }
            pred.iter_mut().for_each(|v| *v *= inv_k);

            let (l, d_pred) = loss.loss_and_grad(&pred, sample.target)?;
            grads.mean_loss += l;

            for (h, tree) in self.trees.iter().enumerate() {
                let t = tree.gates.temperature;
                for j in 0..n_leaves {
                    let cell = h * n_leaves + j;
                    let p = reach[h][first_leaf + j];
                    grads.mean_leaf_probs[cell] += p;
                    let q = bank.cell(cell);
                    let mut u = 0.0;
                    for ((dq, dp), qv) in grads.bank[cell * width..(cell + 1) * width]
                        .iter_mut()
                        .zip(&d_pred)
                        .zip(q)
                    {
                        *dq += dp * p * inv_k;
                        u += dp * qv;
                    }
                    // dL/dp_j, conditioned on reaching the leaf
                    cond[first_leaf + j] = u * inv_k;
                }
                for node in (1..=n_nodes).rev() {
                    let g = gates[h][node - 1];
                    let (left, right) = (cond[2 * node], cond[2 * node + 1]);
                    cond[node] = g * left + (1.0 - g) * right;
                    let d_gate = reach[h][node] * (left - right);
                    let z = tree.gates.margin(node, sample.x) / t;
                    let d_margin = if z.abs() > SIGMOID_CLAMP {
                        0.0
                    } else {
                        d_gate * g * (1.0 - g) / t
                    };
                    for (dw, xv) in grads.weights[h][(node - 1) * m..node * m].iter_mut().zip(sample.x) {
                        *dw += d_margin * xv;
                    }
                    grads.thresholds[h][node - 1] -= d_margin;
                }
            }
        }

        let inv_b = 1.0 / batch.len() as f64;
        grads
            .weights
            .iter_mut()
            .chain(grads.thresholds.iter_mut())
            .flat_map(|v| v.iter_mut())
            .chain(grads.bank.iter_mut())
            .chain(grads.mean_leaf_probs.iter_mut())
            .for_each(|v| *v *= inv_b);
        grads.mean_loss *= inv_b;
        // guard against rounding pushing an average of probabilities past 1
        grads.mean_leaf_probs.iter_mut().for_each(|p| *p = p.clamp(0.0, 1.0));
        Ok(grads)
    }

    /// Batch-mean loss via the forward pass only.
    pub fn batch_loss(&self, bank: &ResponseBank, batch: &[Sample<'_>], kind: LossKind) -> Result<f64> {
        if batch.is_empty() {
            return Err(RadfError::invalid("loss of an empty batch"));
        }
        let loss = kind.strategy();
        let mut total = 0.0;
        for s in batch {
            total += loss.loss(&self.forward(bank, s.x)?, s.target)?;
        }
        Ok(total / batch.len() as f64)
    }
}

/// `Q_h(x)` for a single tree whose bank holds exactly its own leaves.
pub fn forward_tree(tree: &Tree, bank: &ResponseBank, x: &[f64]) -> Result<Vec<f64>> {
    check_len("bank cells", tree.topology.n_leaves(), bank.n_cells())?;
    tree.forward(bank, 0, x)
}

/// `ŷ(x)` for the whole forest.
pub fn forward_forest(forest: &ForestParams, bank: &ResponseBank, x: &[f64]) -> Result<Vec<f64>> {
    forest.forward(bank, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stump(a: f64, b: f64, t: f64) -> Tree {
        Tree::new(
            TreeTopology::new(1).unwrap(),
            GateParams::new(1, vec![a], vec![b], t).unwrap(),
        )
        .unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn topology_indexing() {
        let t = TreeTopology::new(3).unwrap();
        assert_eq!((t.n_internal(), t.n_leaves(), t.first_leaf()), (7, 8, 8));
        assert!(t.is_leaf(8) && t.is_leaf(15) && !t.is_leaf(7) && !t.is_leaf(16));
        assert_eq!(t.path(13), vec![1, 3, 6]);
        for leaf in 8..16 {
            assert_eq!(t.path(leaf).len(), 3);
        }
        assert!(TreeTopology::new(0).is_err());
    }

    #[test]
    fn gate_value_examples() {
        let zero = Tree::new(
            TreeTopology::new(1).unwrap(),
            GateParams::new(2, vec![0.0, 0.0], vec![0.0], 1.0).unwrap(),
        )
        .unwrap();
        assert_eq!(zero.gate_values(&[3.0, -7.0]).unwrap(), vec![0.5]);
        assert!(close(
            stump(1.0, 1.0, 1.0).gate_values(&[3.0]).unwrap()[0],
            0.8807970779778823,
            1e-16
        ));
        assert!(close(
            stump(1.0, 1.0, 0.5).gate_values(&[3.0]).unwrap()[0],
            0.9820137900379085,
            1e-16
        ));
        assert!(stump(1.0, 1.0, 1.0).gate_values(&[3.0, 1.0]).is_err());
        assert!(stump(1.0, 1.0, 1.0).gate_values(&[f64::NAN]).is_err());
    }

    #[test]
    fn leaf_probability_examples() {
        let t = TreeTopology::new(2).unwrap();
        let p = leaf_probabilities(t, &[0.3, 0.7, 0.4]).unwrap();
        let expected = [0.21, 0.09, 0.28, 0.42];
        for (a, b) in p.iter().zip(expected) {
            assert!(close(*a, b, 1e-15), "{p:?}");
        }
        assert!(close(p.iter().sum(), 1.0, 1e-12));
        // leaf 6 is the left child of node 3
        assert_eq!(p[6 - 4], (1.0 - 0.3) * 0.4);

        let t = TreeTopology::new(4).unwrap();
        let p = leaf_probabilities(t, &[0.5; 15]).unwrap();
        assert!(p.iter().all(|&v| v == 1.0 / 16.0));

        assert!(leaf_probabilities(t, &[0.5; 3]).is_err());
        assert!(leaf_probabilities(TreeTopology::new(1).unwrap(), &[1.5]).is_err());
    }

    #[test]
    fn forward_tree_examples() {
        let tree = stump(0.0, 0.0, 1.0);
        let bank = ResponseBank::from_rows(&[vec![1.0], vec![3.0]]).unwrap();
        assert_eq!(forward_tree(&tree, &bank, &[9.0]).unwrap(), vec![2.0]);
        assert_eq!(
            forward_tree(&tree, &ResponseBank::zeros(2, 1), &[9.0]).unwrap(),
            vec![0.0]
        );

        // saturated gates behave like hard routing
        let sharp = stump(1.0, 0.0, 1.0);
        let y = forward_tree(&sharp, &bank, &[1e3]).unwrap()[0];
        assert!(close(y, 1.0, 1e-15));
        assert!(forward_tree(&sharp, &ResponseBank::zeros(3, 1), &[0.0]).is_err());
    }

    #[test]
    fn forward_forest_examples() {
        let forest = ForestParams::new(vec![stump(0.0, 0.0, 1.0), stump(0.0, 0.0, 1.0)], 1).unwrap();
        let bank = ResponseBank::from_rows(&[vec![1.0], vec![1.0], vec![3.0], vec![3.0]]).unwrap();
        assert_eq!(forward_forest(&forest, &bank, &[0.0]).unwrap(), vec![2.0]);

        let single = ForestParams::new(vec![stump(0.7, -0.2, 1.0)], 1).unwrap();
        let bank = ResponseBank::from_rows(&[vec![1.5], vec![-2.0]]).unwrap();
        assert_eq!(
            forward_forest(&single, &bank, &[0.4]).unwrap(),
            forward_tree(&single.trees()[0], &bank, &[0.4]).unwrap()
        );

        let forest = ForestParams::init(3, 2, 2, 2, 1.0, 5).unwrap();
        let mut rows = Vec::new();
        for _ in 0..3 {
            rows.extend([vec![0.1, 0.2], vec![0.3, -0.4], vec![1.0, 2.0], vec![-0.5, 0.25]]);
        }
        let bank = ResponseBank::from_rows(&rows).unwrap();
        let same = ForestParams::new(vec![forest.trees()[0].clone(); 3], 2).unwrap();
        let y = same.forward(&bank, &[0.3, -0.8]).unwrap();
        let single = forward_tree(
            &same.trees()[0],
            &ResponseBank::from_rows(&rows[..4]).unwrap(),
            &[0.3, -0.8],
        )
        .unwrap();
        for (a, b) in y.iter().zip(&single) {
            assert!(close(*a, *b, 1e-15));
        }
        assert!(forest.forward(&ResponseBank::zeros(4, 2), &[0.0, 0.0]).is_err());
    }

    #[test]
    fn hard_route_examples() {
        assert_eq!(stump(1.0, 0.0, 1.0).hard_route(&[5.0]).unwrap(), 2);
        assert_eq!(stump(1.0, 0.0, 1.0).hard_route(&[-5.0]).unwrap(), 3);
        assert_eq!(stump(2.0, 4.0, 1.0).hard_route(&[2.0]).unwrap(), 2);
    }

    #[test]
    fn backward_hand_example() {
        let forest = ForestParams::new(vec![stump(1.0, 0.0, 1.0)], 1).unwrap();
        let bank = ResponseBank::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let batch = [Sample {
            x: &[0.0],
            target: TargetRef::Values(&[0.0]),
        }];
        let g = forest.backward(&bank, &batch, LossKind::Mse).unwrap();
        assert!(close(g.mean_loss, 0.25, 1e-15));
        assert!(close(g.thresholds[0][0], 0.25, 1e-15));
        assert!(close(g.weights[0][0], 0.0, 1e-15));
        assert!(close(g.bank[0], 0.5, 1e-15));
        assert!(close(g.bank[1], 0.5, 1e-15));
        assert_eq!(g.mean_leaf_probs, vec![0.5, 0.5]);
    }

    #[test]
    fn backward_zero_residual() {
        let forest = ForestParams::init(2, 2, 3, 1, 1.0, 3).unwrap();
        let bank = ResponseBank::from_flat(1, vec![0.7; 8]).unwrap();
        let xs = [[0.1, -0.3, 2.0], [1.0, 0.0, -1.0]];
        let batch: Vec<Sample> = xs
            .iter()
            .map(|x| Sample {
                x,
                target: TargetRef::Values(&[0.7]),
            })
            .collect();
        let g = forest.backward(&bank, &batch, LossKind::Mse).unwrap();
        assert!(g.mean_loss.abs() < 1e-28);
        assert!(g
            .weights
            .iter()
            .chain(&g.thresholds)
            .flatten()
            .chain(&g.bank)
            .all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn backward_errors() {
        let forest = ForestParams::init(1, 1, 1, 1, 1.0, 1).unwrap();
        let bank = ResponseBank::zeros(2, 1);
        assert!(forest.backward(&bank, &[], LossKind::Mse).is_err());
        let bad = [Sample {
            x: &[0.0, 1.0],
            target: TargetRef::Values(&[0.0]),
        }];
        assert!(forest.backward(&bank, &bad, LossKind::Mse).is_err());
        let ok = [Sample {
            x: &[0.0],
            target: TargetRef::Values(&[0.0]),
        }];
        assert!(forest.backward(&ResponseBank::zeros(3, 1), &ok, LossKind::Mse).is_err());
    }

    #[test]
    fn uniform_shape_enforced() {
        let t1 = stump(1.0, 0.0, 1.0);
        let t2 = Tree::new(
            TreeTopology::new(1).unwrap(),
            GateParams::new(2, vec![1.0, 1.0], vec![0.0], 1.0).unwrap(),
        )
        .unwrap();
        assert!(ForestParams::new(vec![t1, t2], 1).is_err());
        assert!(ForestParams::new(vec![], 1).is_err());
    }

    #[test]
    fn raising_root_threshold_lowers_left_subtree() {
        let mut forest = ForestParams::init(1, 3, 2, 1, 1.0, 17).unwrap();
        let x = [0.4, -0.2];
        let before = forest.trees()[0].route(&x).unwrap().leaf_probs;
        forest.trees_mut()[0].gates.thresholds_mut()[0] += 0.3;
        let after = forest.trees()[0].route(&x).unwrap().leaf_probs;
        for j in 0..4 {
            assert!(after[j] < before[j]);
        }
    }

    proptest! {
        #[test]
        fn leaf_probs_sum_to_one(depth in 1usize..6, seed in any::<u64>(), x in prop::collection::vec(-3.0..3.0f64, 4), t in prop::sample::select(vec![1e-3, 1.0, 10.0])) {
            let forest = ForestParams::init(1, depth, 4, 1, t, seed).unwrap();
            let r = forest.trees()[0].route(&x).unwrap();
            prop_assert!(r.gates.iter().chain(&r.leaf_probs).all(|v| (0.0..=1.0).contains(v)));
            prop_assert!((r.leaf_probs.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn tree_permutation_symmetry(k in 2usize..5, seed in any::<u64>(), x in prop::collection::vec(-2.0..2.0f64, 3)) {
            let forest = ForestParams::init(k, 2, 3, 2, 1.0, seed).unwrap();
            let bank = ResponseBank::init(forest.n_cells(), 2, seed ^ 1).unwrap();
            let y = forest.forward(&bank, &x).unwrap();

            let order: Vec<usize> = (0..k).rev().collect();
            let trees = order.iter().map(|&h| forest.trees()[h].clone()).collect();
            let rows: Vec<Vec<f64>> = order
                .iter()
                .flat_map(|&h| (h * 4..h * 4 + 4).map(|c| bank.cell(c).to_vec()).collect::<Vec<_>>())
                .collect();
            let permuted = ForestParams::new(trees, 2).unwrap();
            let y2 = permuted.forward(&ResponseBank::from_rows(&rows).unwrap(), &x).unwrap();
            for (a, b) in y.iter().zip(&y2) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}
