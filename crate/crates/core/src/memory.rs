//! External response memory and its attention-weighted read/write.
//!
//! The bank stores one response vector per leaf, laid out tree by tree and,
//! within a tree, in breadth-first leaf order. Leaves address their own cell;
//! the soft attention is carried entirely by the read/write weights.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, RadfError, Result};

/// Weights below this are treated as dead and never receive an add vector.
pub const WRITE_EPS: f64 = 1e-8;

/// Half-width of the uniform initialization range.
pub const INIT_SCALE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseBank {
    width: usize,
    cells: Vec<f64>,
}

/// One erase/add write: per-cell weights, a shared erase vector and per-cell
/// add vectors (stored row-major, `n_cells × width`).
#[derive(Debug, Clone, PartialEq)]
pub struct WritePlan {
    pub weights: Vec<f64>,
    pub erase: Vec<f64>,
    pub add: Vec<f64>,
}

impl ResponseBank {
    /// Seeded uniform initialization on `[-0.1, 0.1]`.
    pub fn init(n_cells: usize, width: usize, seed: u64) -> Result<Self> {
        if n_cells == 0 || width == 0 {
            return Err(RadfError::invalid(format!(
                "response bank needs at least one cell and width >= 1 (got {n_cells} x {width})"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cells = (0..n_cells * width)
            .map(|_| rng.gen_range(-INIT_SCALE..=INIT_SCALE))
            .collect();
        Ok(Self { width, cells })
    }

    pub fn zeros(n_cells: usize, width: usize) -> Self {
        Self {
            width,
            cells: vec![0.0; n_cells * width],
        }
    }

    /// Builds a bank from a flat row-major buffer.
    pub fn from_flat(width: usize, cells: Vec<f64>) -> Result<Self> {
        if width == 0 || cells.is_empty() || !cells.len().is_multiple_of(width) {
            return Err(RadfError::invalid(format!(
                "{} values cannot be split into cells of width {width}",
                cells.len()
            )));
        }
        if cells.iter().any(|v| !v.is_finite()) {
            return Err(RadfError::invalid("response bank entries must be finite"));
        }
        Ok(Self { width, cells })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        let mut flat = Vec::with_capacity(rows.len() * width);
        for row in rows {
            check_len("response cell width", width, row.len())?;
            flat.extend_from_slice(row);
        }
        Self::from_flat(width, flat)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len() / self.width
    }

    pub fn cell(&self, i: usize) -> &[f64] {
        &self.cells[i * self.width..(i + 1) * self.width]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.cells
    }

    pub fn as_flat_mut(&mut self) -> &mut [f64] {
        &mut self.cells
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.cells.chunks_exact(self.width)
    }

    /// `r = Σ_i w_i · M_i` over every cell.
    pub fn read(&self, weights: &[f64]) -> Result<Vec<f64>> {
        check_len("read weights", self.n_cells(), weights.len())?;
        let mut out = vec![0.0; self.width];
        self.accumulate_read(0, weights, &mut out);
        Ok(out)
    }

    /// Read restricted to the contiguous block of cells starting at `first`.
    pub fn read_block(&self, first: usize, weights: &[f64]) -> Result<Vec<f64>> {
        if first + weights.len() > self.n_cells() {
            return Err(RadfError::ShapeMismatch {
                what: "read block end",
                expected: self.n_cells(),
                got: first + weights.len(),
            });
        }
        let mut out = vec![0.0; self.width];
        self.accumulate_read(first, weights, &mut out);
        Ok(out)
    }

    /// Adds `Σ w_i · M_{first+i}` into `out` without bounds re-checking.
    pub(crate) fn accumulate_read(&self, first: usize, weights: &[f64], out: &mut [f64]) {
        for (i, &w) in weights.iter().enumerate() {
            for (o, q) in out.iter_mut().zip(self.cell(first + i)) {
                *o += w * q;
            }
        }
    }

    /// Erase/add write: `M'_{i,f} = M_{i,f}(1 − w_i e_f) + w_i a_{i,f}`.
    pub fn write(&self, plan: &WritePlan) -> Result<ResponseBank> {
        let n = self.n_cells();
        check_len("write weights", n, plan.weights.len())?;
        check_len("erase vector", self.width, plan.erase.len())?;
        check_len("add vectors", n * self.width, plan.add.len())?;
        if let Some(w) = plan.weights.iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return Err(RadfError::invalid(format!("write weight {w} outside [0, 1]")));
        }
        if let Some(e) = plan.erase.iter().find(|e| !(0.0..=1.0).contains(*e)) {
            return Err(RadfError::invalid(format!("erase entry {e} outside [0, 1]")));
        }
        let mut cells = self.cells.clone();
        for (i, row) in cells.chunks_exact_mut(self.width).enumerate() {
            let w = plan.weights[i];
            let add = &plan.add[i * self.width..(i + 1) * self.width];
            for ((q, e), a) in row.iter_mut().zip(&plan.erase).zip(add) {
                *q = *q * (1.0 - w * e) + w * a;
            }
        }
        Ok(ResponseBank {
            width: self.width,
            cells,
        })
    }
}

impl WritePlan {
    /// Write plan that turns a gradient on the bank into an erase/add write.
    ///
    /// `w_i` is the batch-mean routing probability of cell `i`, the erase
    /// vector is `decay` everywhere, and `a_i = −eta·dQ_i / w_i` (zero for
    /// dead cells). With `decay = 0` the write equals `Q − eta·dQ` on every
    /// live cell.
    pub fn from_gradient(
        d_bank: &[f64],
        mean_leaf_probs: &[f64],
        width: usize,
        eta: f64,
        decay: f64,
    ) -> Result<WritePlan> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(RadfError::invalid(format!("learning rate must be positive, got {eta}")));
        }
        if !(0.0..=1.0).contains(&decay) {
            return Err(RadfError::invalid(format!("erase decay {decay} outside [0, 1]")));
        }
        check_len("bank gradient", mean_leaf_probs.len() * width, d_bank.len())?;
        if let Some(p) = mean_leaf_probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(RadfError::invalid(format!("leaf probability {p} outside [0, 1]")));
        }
        let mut add = vec![0.0; d_bank.len()];
        for (i, &w) in mean_leaf_probs.iter().enumerate() {
            if w < WRITE_EPS {
                continue;
            }
            let scale = -eta / w.max(WRITE_EPS);
            for (a, g) in add[i * width..(i + 1) * width]
                .iter_mut()
                .zip(&d_bank[i * width..(i + 1) * width])
            {
                *a = scale * g;
            }
        }
        Ok(WritePlan {
            weights: mean_leaf_probs.to_vec(),
            erase: vec![decay; width],
            add,
        })
    }
}

/// Free-function form of [`WritePlan::from_gradient`].
pub fn gradient_write_plan(
    d_bank: &[f64],
    mean_leaf_probs: &[f64],
    width: usize,
    eta: f64,
    decay: f64,
) -> Result<WritePlan> {
    WritePlan::from_gradient(d_bank, mean_leaf_probs, width, eta, decay)
}
