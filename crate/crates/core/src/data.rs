//! Tabular datasets: CSV ingestion, seeded splitting, standardization and
//! batch order.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{RadfError, Result};
use crate::forest::Sample;
use crate::numerics::TargetRef;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    Classification,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Regression => "regression",
            Task::Classification => "classification",
        })
    }
}

impl FromStr for Task {
    type Err = RadfError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "regression" => Ok(Task::Regression),
            "classification" => Ok(Task::Classification),
            other => Err(RadfError::invalid(format!(
                "unknown task `{other}` (expected regression or classification)"
            ))),
        }
    }
}

/// What to do with empty feature cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MissingPolicy {
    #[default]
    Reject,
    /// Keep them as NaN until [`impute_missing`] fills them with training means.
    Impute,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    /// Class indices into `labels`; labels are numbered by first appearance.
    Classes { indices: Vec<usize>, labels: Vec<String> },
    /// Row-major `N × width` real targets.
    Values { values: Vec<f64>, width: usize },
}

impl Targets {
    fn subset(&self, rows: &[usize]) -> Targets {
        match self {
            Targets::Classes { indices, labels } => Targets::Classes {
                indices: rows.iter().map(|&r| indices[r]).collect(),
                labels: labels.clone(),
            },
            Targets::Values { values, width } => Targets::Values {
                values: rows
                    .iter()
                    .flat_map(|&r| values[r * width..(r + 1) * width].iter().copied())
                    .collect(),
                width: *width,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    n_rows: usize,
    feature_names: Vec<String>,
    target_name: String,
    targets: Targets,
}

impl Dataset {
    pub fn new(features: Vec<f64>, feature_names: Vec<String>, target_name: String, targets: Targets) -> Result<Self> {
        let m = feature_names.len();
        if m == 0 {
            return Err(RadfError::Data("dataset has no feature columns".into()));
        }
        if features.is_empty() || !features.len().is_multiple_of(m) {
            return Err(RadfError::Data(format!(
                "{} feature values do not form rows of {m}",
                features.len()
            )));
        }
        let n_rows = features.len() / m;
        let target_rows = match &targets {
            Targets::Classes { indices, labels } => {
                if let Some(bad) = indices.iter().find(|&&c| c >= labels.len()) {
                    return Err(RadfError::Data(format!("class index {bad} out of range")));
                }
                indices.len()
            }
            Targets::Values { values, width } => {
                if *width == 0 || values.len() % width != 0 {
                    return Err(RadfError::Data("target width does not divide target values".into()));
                }
                values.len() / width
            }
        };
        if target_rows != n_rows {
            return Err(RadfError::Data(format!(
                "{n_rows} feature rows but {target_rows} targets"
            )));
        }
        Ok(Self {
            features,
            n_rows,
            feature_names,
            target_name,
            targets,
        })
    }

    pub fn len(&self) -> usize {
        self.n_rows
    }

    pub fn is_empty(&self) -> bool {
        self.n_rows == 0
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn targets(&self) -> &Targets {
        &self.targets
    }

    pub fn task(&self) -> Task {
        match self.targets {
            Targets::Classes { .. } => Task::Classification,
            Targets::Values { .. } => Task::Regression,
        }
    }

    /// Class labels for classification data.
    pub fn class_labels(&self) -> Option<&[String]> {
        match &self.targets {
            Targets::Classes { labels, .. } => Some(labels),
            Targets::Values { .. } => None,
        }
    }

    /// Width of the model response this dataset needs: the class count for
    /// classification, the target width for regression.
    pub fn response_width(&self) -> usize {
        match &self.targets {
            Targets::Classes { labels, .. } => labels.len(),
            Targets::Values { width, .. } => *width,
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let m = self.n_features();
        &self.features[i * m..(i + 1) * m]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks_exact(self.n_features())
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn target(&self, i: usize) -> TargetRef<'_> {
        match &self.targets {
            Targets::Classes { indices, .. } => TargetRef::Class(indices[i]),
            Targets::Values { values, width } => TargetRef::Values(&values[i * width..(i + 1) * width]),
        }
    }

    pub fn sample(&self, i: usize) -> Sample<'_> {
        Sample {
            x: self.row(i),
            target: self.target(i),
        }
    }

    pub fn samples(&self) -> Vec<Sample<'_>> {
        (0..self.n_rows).map(|i| self.sample(i)).collect()
    }

    pub fn samples_at(&self, rows: &[usize]) -> Vec<Sample<'_>> {
        rows.iter().map(|&i| self.sample(i)).collect()
    }

    /// New dataset holding `rows` in the given order.
    pub fn subset(&self, rows: &[usize]) -> Result<Dataset> {
        if rows.is_empty() {
            return Err(RadfError::Data("empty subset".into()));
        }
        let features = rows.iter().flat_map(|&r| self.row(r).iter().copied()).collect();
        Dataset::new(
            features,
            self.feature_names.clone(),
            self.target_name.clone(),
            self.targets.subset(rows),
        )
    }

    fn has_missing(&self) -> bool {
        self.features.iter().any(|v| v.is_nan())
    }
}

/// Raw CSV contents: header plus string cells.
struct Table {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn read(path: &Path) -> Result<Table> {
        let file = std::fs::File::open(path).map_err(|e| RadfError::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(file);
        let csv_err = |e: csv::Error| RadfError::Data(format!("{}: {e}", path.display()));
        let headers = reader.headers().map_err(csv_err)?.iter().map(str::to_owned).collect();
        let mut rows = Vec::new();
        for record in reader.records() {
            rows.push(record.map_err(csv_err)?.iter().map(str::to_owned).collect());
        }
        if rows.is_empty() {
            return Err(RadfError::Data(format!("{}: no data rows", path.display())));
        }
        Ok(Table { headers, rows })
    }

    fn column(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    fn numeric_columns(&self, columns: &[usize], missing: MissingPolicy) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.rows.len() * columns.len());
        for (r, row) in self.rows.iter().enumerate() {
            for &c in columns {
                let cell = row[c].as_str();
                let value = if cell.is_empty() {
                    match missing {
                        MissingPolicy::Reject => {
                            return Err(RadfError::Data(format!(
                                "missing value at row {}, column {:?}",
                                r + 1,
                                self.headers[c]
                            )))
                        }
                        MissingPolicy::Impute => f64::NAN,
                    }
                } else {
                    parse_number(cell, r, &self.headers[c])?
                };
                out.push(value);
            }
        }
        Ok(out)
    }
}

fn parse_number(cell: &str, row: usize, column: &str) -> Result<f64> {
    cell.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| RadfError::Parse {
            row: row + 1,
            column: column.to_owned(),
            value: cell.to_owned(),
        })
}

/// Loads a CSV whose non-target columns are all numeric features.
pub fn load_csv(path: impl AsRef<Path>, target_column: &str, task: Task) -> Result<Dataset> {
    load_csv_with(path, target_column, task, MissingPolicy::Reject)
}

pub fn load_csv_with(
    path: impl AsRef<Path>,
    target_column: &str,
    task: Task,
    missing: MissingPolicy,
) -> Result<Dataset> {
    let path = path.as_ref();
    let table = Table::read(path)?;
    let target = table
        .column(target_column)
        .ok_or_else(|| RadfError::MissingColumns(vec![target_column.to_owned()]))?;
    let columns: Vec<usize> = (0..table.headers.len()).filter(|&c| c != target).collect();
    let features = table.numeric_columns(&columns, missing)?;
    let feature_names = columns.iter().map(|&c| table.headers[c].clone()).collect();
    let targets = match task {
        Task::Regression => Targets::Values {
            values: table.numeric_columns(&[target], MissingPolicy::Reject)?,
            width: 1,
        },
        Task::Classification => {
            let mut labels: Vec<String> = Vec::new();
            let mut indices = Vec::with_capacity(table.rows.len());
            for (r, row) in table.rows.iter().enumerate() {
                let label = &row[target];
                if label.is_empty() {
                    return Err(RadfError::Data(format!("missing class label at row {}", r + 1)));
                }
                let idx = labels.iter().position(|l| l == label).unwrap_or_else(|| {
                    labels.push(label.clone());
                    labels.len() - 1
                });
                indices.push(idx);
            }
            Targets::Classes { indices, labels }
        }
    };
    Dataset::new(features, feature_names, target_column.to_owned(), targets)
}

/// Column layout a trained model expects when reading new data.
#[derive(Debug, Clone)]
pub struct Schema<'a> {
    pub feature_names: &'a [String],
    pub target_name: &'a str,
    pub task: Task,
    /// Label order of a classification model.
    pub class_labels: Option<&'a [String]>,
}

/// Feature matrix (row-major) read by column name; extra columns are ignored.
pub fn load_features(path: impl AsRef<Path>, feature_names: &[String]) -> Result<(Vec<f64>, usize)> {
    let table = Table::read(path.as_ref())?;
    let columns = locate(&table, feature_names)?;
    Ok((
        table.numeric_columns(&columns, MissingPolicy::Reject)?,
        table.rows.len(),
    ))
}

/// Reads features and targets laid out for an existing model. Class labels
/// map through the model's label order.
pub fn load_with_schema(path: impl AsRef<Path>, schema: &Schema<'_>) -> Result<Dataset> {
    let table = Table::read(path.as_ref())?;
    let mut wanted = schema.feature_names.to_vec();
    wanted.push(schema.target_name.to_owned());
    let columns = locate(&table, &wanted)?;
    let (feature_cols, target) = columns.split_at(schema.feature_names.len());
    let target = target[0];
    let features = table.numeric_columns(feature_cols, MissingPolicy::Reject)?;
    let targets = match schema.task {
        Task::Regression => Targets::Values {
            values: table.numeric_columns(&[target], MissingPolicy::Reject)?,
            width: 1,
        },
        Task::Classification => {
            let labels = schema
                .class_labels
                .ok_or_else(|| RadfError::invalid("classification schema without class labels"))?;
            let indices = table
                .rows
                .iter()
                .enumerate()
                .map(|(r, row)| {
                    labels.iter().position(|l| *l == row[target]).ok_or_else(|| {
                        RadfError::Data(format!("unknown class label {:?} at row {}", row[target], r + 1))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Targets::Classes {
                indices,
                labels: labels.to_vec(),
            }
        }
    };
    Dataset::new(
        features,
        schema.feature_names.to_vec(),
        schema.target_name.to_owned(),
        targets,
    )
}

fn locate(table: &Table, names: &[String]) -> Result<Vec<usize>> {
    let mut missing = Vec::new();
    let columns = names
        .iter()
        .filter_map(|n| {
            let c = table.column(n);
            if c.is_none() {
                missing.push(n.clone());
            }
            c
        })
        .collect();
    if missing.is_empty() {
        Ok(columns)
    } else {
        Err(RadfError::MissingColumns(missing))
    }
}

/// Seeded permutation followed by a contiguous three-way cut with sizes
/// `floor(N·train)`, `floor(N·val)` and the remainder.
pub fn split_dataset(ds: &Dataset, fractions: (f64, f64, f64), seed: u64) -> Result<(Dataset, Dataset, Dataset)> {
    let (ft, fv, fe) = fractions;
    if [ft, fv, fe].iter().any(|f| !(*f > 0.0 && f.is_finite())) || (ft + fv + fe - 1.0).abs() > 1e-9 {
        return Err(RadfError::invalid(format!(
            "split fractions must be positive and sum to 1, got ({ft}, {fv}, {fe})"
        )));
    }
    let n = ds.len();
    // the small slack keeps e.g. 0.7 * 10 from flooring to 6
    let n_train = (n as f64 * ft + 1e-9).floor() as usize;
    let n_val = (n as f64 * fv + 1e-9).floor() as usize;
    if n_train == 0 || n_val == 0 || n_train + n_val >= n {
        return Err(RadfError::Data(format!(
            "splitting {n} rows by ({ft}, {fv}, {fe}) leaves an empty part"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (train, rest) = order.split_at(n_train);
    let (val, test) = rest.split_at(n_val);
    Ok((ds.subset(train)?, ds.subset(val)?, ds.subset(test)?))
}

/// Per-feature mean and population standard deviation from a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl StandardizationStats {
    /// Constant features get `std = 1` (and their exact value as mean) so
    /// they map to zero.
    pub fn fit(train: &Dataset) -> Result<Self> {
        if train.is_empty() {
            return Err(RadfError::Data("cannot standardize an empty dataset".into()));
        }
        let m = train.n_features();
        let n = train.len() as f64;
        let mut mean = vec![0.0; m];
        let mut std = vec![0.0; m];
        for f in 0..m {
            let column = || train.rows().map(move |r| r[f]);
            let first = train.row(0)[f];
            if column().all(|v| v == first) {
                mean[f] = first;
                std[f] = 1.0;
                continue;
            }
            let mu = column().sum::<f64>() / n;
            let var = column().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
            mean[f] = mu;
            std[f] = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
        Ok(Self { mean, std })
    }

    pub fn identity(n_features: usize) -> Self {
        Self {
            mean: vec![0.0; n_features],
            std: vec![1.0; n_features],
        }
    }

    pub fn apply_row(&self, row: &mut [f64]) {
        for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = (*v - m) / s;
        }
    }

    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        if ds.n_features() != self.mean.len() {
            return Err(RadfError::ShapeMismatch {
                what: "standardized features",
                expected: self.mean.len(),
                got: ds.n_features(),
            });
        }
        let mut out = ds.clone();
        let m = out.n_features();
        for row in out.features.chunks_exact_mut(m) {
            self.apply_row(row);
        }
        Ok(out)
    }
}

/// Fits statistics on `train` and transforms it along with `others`.
pub fn standardize(train: &Dataset, others: &[&Dataset]) -> Result<(StandardizationStats, Dataset, Vec<Dataset>)> {
    let stats = StandardizationStats::fit(train)?;
    let train = stats.apply(train)?;
    let others = others.iter().map(|d| stats.apply(d)).collect::<Result<Vec<_>>>()?;
    Ok((stats, train, others))
}

/// Replaces NaN feature cells in every dataset with the training-set column
/// mean over present values.
pub fn impute_missing(train: &mut Dataset, others: &mut [&mut Dataset]) -> Result<()> {
    if !train.has_missing() && others.iter().all(|d| !d.has_missing()) {
        return Ok(());
    }
    let m = train.n_features();
    let mut means = Vec::with_capacity(m);
    for f in 0..m {
        let present: Vec<f64> = train.rows().map(|r| r[f]).filter(|v| !v.is_nan()).collect();
        if present.is_empty() {
            return Err(RadfError::Data(format!(
                "column {:?} has no values in the training split",
                train.feature_names[f]
            )));
        }
        means.push(present.iter().sum::<f64>() / present.len() as f64);
    }
    for ds in std::iter::once(train).chain(others.iter_mut().map(|d| &mut **d)) {
        for row in ds.features.chunks_exact_mut(m) {
            for (v, mean) in row.iter_mut().zip(&means) {
                if v.is_nan() {
                    *v = *mean;
                }
            }
        }
    }
    Ok(())
}

/// Row-index batches for one epoch, shuffled by a generator keyed on
/// `(seed, epoch)`. The last batch may be short.
pub fn batches(n_rows: usize, batch_size: usize, seed: u64, epoch: u64) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(RadfError::invalid("batch size must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch);
    let mut order: Vec<usize> = (0..n_rows).collect();
    order.shuffle(&mut rng);
    Ok(order.chunks(batch_size).map(<[usize]>::to_vec).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn csv_file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn regression(xs: &[&[f64]], ys: &[f64]) -> Dataset {
        let m = xs[0].len();
        Dataset::new(
            xs.iter().flat_map(|r| r.iter().copied()).collect(),
            (0..m).map(|i| format!("x{i}")).collect(),
            "y".into(),
            Targets::Values {
                values: ys.to_vec(),
                width: 1,
            },
        )
        .unwrap()
    }

    #[test]
    fn load_regression() {
        let f = csv_file("a,b,y\n1,2,0.5\n3,4,1.5\n");
        let ds = load_csv(f.path(), "y", Task::Regression).unwrap();
        assert_eq!((ds.len(), ds.n_features()), (2, 2));
        assert_eq!(ds.feature_names(), ["a", "b"]);
        assert_eq!(ds.row(1), &[3.0, 4.0]);
        assert_eq!(ds.target(0), TargetRef::Values(&[0.5]));
        assert_eq!(ds.target(1), TargetRef::Values(&[1.5]));
    }

    #[test]
    fn load_classification_first_appearance() {
        let f = csv_file("x,label\n0.1,cat\n0.2,dog\n0.3,cat\n");
        let ds = load_csv(f.path(), "label", Task::Classification).unwrap();
        assert_eq!(ds.class_labels().unwrap(), ["cat", "dog"]);
        let Targets::Classes { indices, .. } = ds.targets() else {
            panic!()
        };
        assert_eq!(indices, &[0, 1, 0]);
        assert_eq!(ds.response_width(), 2);
    }

    #[test]
    fn load_errors() {
        let f = csv_file("a,b,y\n1,abc,0.5\n");
        match load_csv(f.path(), "y", Task::Regression) {
            Err(RadfError::Parse { row, column, value }) => {
                assert_eq!((row, column.as_str(), value.as_str()), (1, "b", "abc"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            load_csv(f.path(), "z", Task::Regression),
            Err(RadfError::MissingColumns(_))
        ));
        assert!(matches!(
            load_csv("/nonexistent/file.csv", "y", Task::Regression),
            Err(RadfError::Io { .. })
        ));
        let empty = csv_file("a,y\n");
        assert!(matches!(
            load_csv(empty.path(), "y", Task::Regression),
            Err(RadfError::Data(_))
        ));
    }

    #[test]
    fn missing_values_policy() {
        let f = csv_file("a,b,y\n1,,0\n3,4,1\n5,8,2\n");
        assert!(load_csv(f.path(), "y", Task::Regression).is_err());
        let mut ds = load_csv_with(f.path(), "y", Task::Regression, MissingPolicy::Impute).unwrap();
        impute_missing(&mut ds, &mut []).unwrap();
        assert_eq!(ds.row(0), &[1.0, 6.0]);
    }

    #[test]
    fn split_sizes_and_partition() {
        let xs: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let ds = regression(&refs, &(0..10).map(|i| i as f64 * 10.0).collect::<Vec<_>>());
        let (a, b, c) = split_dataset(&ds, (0.6, 0.2, 0.2), 3).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (6, 2, 2));
        let (a2, _, _) = split_dataset(&ds, (0.6, 0.2, 0.2), 3).unwrap();
        assert_eq!(a, a2);

        let mut seen: Vec<f64> = [&a, &b, &c].iter().flat_map(|d| d.rows().map(|r| r[0])).collect();
        seen.sort_by(f64::total_cmp);
        assert_eq!(seen, (0..10).map(|i| i as f64).collect::<Vec<_>>());
        // sentinel: targets still follow their rows
        for d in [&a, &b, &c] {
            for i in 0..d.len() {
                assert_eq!(d.target(i), TargetRef::Values(&[d.row(i)[0] * 10.0]));
            }
        }

        assert!(split_dataset(&ds, (0.5, 0.2, 0.2), 3).is_err());
        assert!(split_dataset(&ds, (0.9, 0.05, 0.05), 3).is_err());
    }

    #[test]
    fn standardize_examples() {
        let ds = regression(&[&[0.0, 0.1], &[2.0, 0.1]], &[0.0, 1.0]);
        let (stats, train, _) = standardize(&ds, &[]).unwrap();
        assert_eq!(stats.mean, vec![1.0, 0.1]);
        assert_eq!(stats.std, vec![1.0, 1.0]);
        assert_eq!(train.row(0), &[-1.0, 0.0]);
        assert_eq!(train.row(1), &[1.0, 0.0]);
    }

    #[test]
    fn standardized_train_has_zero_mean_population_std() {
        let ds = regression(&[&[1.0], &[2.0], &[4.0], &[9.5]], &[0.0; 4]);
        let (stats, train, others) = standardize(&ds, &[&ds]).unwrap();
        let mean = train.rows().map(|r| r[0]).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12);
        let var = train.rows().map(|r| r[0] * r[0]).sum::<f64>() / 4.0;
        assert!((var - 1.0).abs() < 1e-12);
        assert_eq!(others[0], train);
        let expected_std =
            ((1.0f64 - 4.125).powi(2) + (2.0f64 - 4.125).powi(2) + (4.0f64 - 4.125).powi(2) + (9.5f64 - 4.125).powi(2))
                / 4.0;
        assert!((stats.std[0] - expected_std.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn batch_order() {
        let b = batches(5, 2, 1, 0).unwrap();
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![2, 2, 1]);
        assert_eq!(b, batches(5, 2, 1, 0).unwrap());
        let mut all: Vec<usize> = b.concat();
        all.sort();
        assert_eq!(all, vec![0, 1, 2, 3, 4]);
        assert_ne!(batches(20, 20, 1, 0).unwrap(), batches(20, 20, 1, 1).unwrap());
        assert!(batches(5, 0, 1, 0).is_err());
    }

    #[test]
    fn schema_loading() {
        let f = csv_file("extra,b,label,a\n9,2,dog,1\n9,4,cat,3\n");
        let names = vec!["a".to_string(), "b".to_string()];
        let labels = vec!["cat".to_string(), "dog".to_string()];
        let schema = Schema {
            feature_names: &names,
            target_name: "label",
            task: Task::Classification,
            class_labels: Some(&labels),
        };
        let ds = load_with_schema(f.path(), &schema).unwrap();
        assert_eq!(ds.row(0), &[1.0, 2.0]);
        assert_eq!(ds.target(0), TargetRef::Class(1));

        let (x, n) = load_features(f.path(), &names).unwrap();
        assert_eq!((x, n), (vec![1.0, 2.0, 3.0, 4.0], 2));
        let wrong = vec!["a".to_string(), "c".to_string()];
        match load_features(f.path(), &wrong) {
            Err(RadfError::MissingColumns(cols)) => assert_eq!(cols, vec!["c".to_string()]),
            other => panic!("{other:?}"),
        }
    }
}
