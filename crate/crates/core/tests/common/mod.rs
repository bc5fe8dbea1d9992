#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::Path;

use radf::data::{Dataset, Targets};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Noisy two-bit XOR: features in {0, 1} plus uniform noise in ±0.1.
pub fn xor_dataset(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs = Vec::with_capacity(2 * n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let (a, b) = (rng.gen_range(0..2usize), rng.gen_range(0..2usize));
        xs.push(a as f64 + rng.gen_range(-0.1..0.1));
        xs.push(b as f64 + rng.gen_range(-0.1..0.1));
        ys.push(a ^ b);
    }
    Dataset::new(
        xs,
        vec!["x1".into(), "x2".into()],
        "y".into(),
        Targets::Classes {
            indices: ys,
            labels: vec!["0".into(), "1".into()],
        },
    )
    .unwrap()
}

/// `y = 1[x1 > 0] + 2·1[x2 > 0]` with x uniform on [-1, 1]².
pub fn piecewise_dataset(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs = Vec::with_capacity(2 * n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let (a, b): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        xs.extend([a, b]);
        ys.push(f64::from(u8::from(a > 0.0)) + 2.0 * f64::from(u8::from(b > 0.0)));
    }
    Dataset::new(
        xs,
        vec!["x1".into(), "x2".into()],
        "y".into(),
        Targets::Values { values: ys, width: 1 },
    )
    .unwrap()
}

/// Writes `ds` as CSV with its target as the last column.
pub fn write_csv(ds: &Dataset, path: &Path) {
    let mut text = ds.feature_names().join(",");
    writeln!(text, ",{}", ds.target_name()).unwrap();
    for i in 0..ds.len() {
        for v in ds.row(i) {
            write!(text, "{v},").unwrap();
        }
        match ds.targets() {
            Targets::Classes { indices, labels } => writeln!(text, "{}", labels[indices[i]]).unwrap(),
            Targets::Values { values, .. } => writeln!(text, "{}", values[i]).unwrap(),
        }
    }
    std::fs::write(path, text).unwrap();
}
