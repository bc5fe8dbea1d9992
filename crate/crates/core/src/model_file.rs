//! Self-contained, human-readable model documents.
//!
//! A model is stored as pretty-printed JSON with a fixed key order. Reals
//! are written with 17 significant digits so every `f64` survives a
//! save/load cycle bit for bit, and saving a loaded model reproduces the
//! original bytes.

use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::data::{StandardizationStats, Task};
use crate::error::{RadfError, Result};
use crate::forest::{ForestParams, GateParams, Tree, TreeTopology};
use crate::memory::ResponseBank;
use crate::numerics::loss::softmax;
use crate::numerics::LossKind;
use crate::training::Model;

pub const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeRecord {
    /// One feature-weight row per internal node, breadth-first.
    pub weights: Vec<Vec<f64>>,
    pub thresholds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format_version: u64,
    pub task: Task,
    pub loss: LossKind,
    pub n_trees: usize,
    pub depth: usize,
    pub n_features: usize,
    pub response_width: usize,
    pub temperature: f64,
    pub feature_names: Vec<String>,
    pub target_name: String,
    pub standardization: StandardizationStats,
    pub trees: Vec<TreeRecord>,
    /// One response vector per leaf, tree by tree.
    pub bank: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_labels: Option<Vec<String>>,
}

/// Everything besides the learned parameters that a model file records.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelMeta {
    pub task: Task,
    pub loss: LossKind,
    pub feature_names: Vec<String>,
    pub target_name: String,
    pub standardization: StandardizationStats,
    pub class_labels: Option<Vec<String>>,
}

/// A prediction on raw (unstandardized) features.
#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    Values(Vec<f64>),
    Class {
        index: usize,
        label: String,
        probabilities: Vec<f64>,
    },
}

impl ModelFile {
    pub fn new(model: &Model, meta: ModelMeta) -> Result<Self> {
        let forest = &model.forest;
        let m = forest.n_features();
        if meta.feature_names.len() != m || meta.standardization.mean.len() != m || meta.standardization.std.len() != m
        {
            return Err(RadfError::ShapeMismatch {
                what: "model feature metadata",
                expected: m,
                got: meta.feature_names.len(),
            });
        }
        let trees = forest
            .trees()
            .iter()
            .map(|t| TreeRecord {
                weights: t.gates.weights().chunks_exact(m).map(<[f64]>::to_vec).collect(),
                thresholds: t.gates.thresholds().to_vec(),
            })
            .collect();
        let file = ModelFile {
            format_version: FORMAT_VERSION,
            task: meta.task,
            loss: meta.loss,
            n_trees: forest.n_trees(),
            depth: forest.depth(),
            n_features: m,
            response_width: forest.response_width(),
            temperature: forest.temperature(),
            feature_names: meta.feature_names,
            target_name: meta.target_name,
            standardization: meta.standardization,
            trees,
            bank: model.bank.rows().map(<[f64]>::to_vec).collect(),
            class_labels: meta.class_labels,
        };
        file.validate()?;
        Ok(file)
    }

    fn malformed(path: impl Into<String>, message: impl Into<String>) -> RadfError {
        RadfError::Malformed {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Checks internal consistency beyond what the schema enforces.
    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(RadfError::Version {
                found: self.format_version,
                expected: FORMAT_VERSION,
            });
        }
        let expect = |ok: bool, path: String, msg: &str| if ok { Ok(()) } else { Err(Self::malformed(path, msg)) };
        let topology = TreeTopology::new(self.depth).map_err(|e| Self::malformed("depth", e.to_string()))?;
        expect(self.n_trees >= 1, "n_trees".into(), "at least one tree required")?;
        expect(
            self.trees.len() == self.n_trees,
            "trees".into(),
            "length differs from n_trees",
        )?;
        expect(
            self.feature_names.len() == self.n_features,
            "feature_names".into(),
            "length differs from n_features",
        )?;
        expect(
            self.standardization.mean.len() == self.n_features,
            "standardization.mean".into(),
            "length differs from n_features",
        )?;
        expect(
            self.standardization.std.len() == self.n_features,
            "standardization.std".into(),
            "length differs from n_features",
        )?;
        expect(
            self.standardization.std.iter().all(|s| *s > 0.0),
            "standardization.std".into(),
            "entries must be positive",
        )?;
        for (h, tree) in self.trees.iter().enumerate() {
            expect(
                tree.weights.len() == topology.n_internal(),
                format!("trees[{h}].weights"),
                "one row per internal node required",
            )?;
            expect(
                tree.thresholds.len() == topology.n_internal(),
                format!("trees[{h}].thresholds"),
                "one value per internal node required",
            )?;
            for (n, row) in tree.weights.iter().enumerate() {
                expect(
                    row.len() == self.n_features,
                    format!("trees[{h}].weights[{n}]"),
                    "row length differs from n_features",
                )?;
            }
        }
        expect(
            self.bank.len() == self.n_trees * topology.n_leaves(),
            "bank".into(),
            "one cell per leaf required",
        )?;
        for (i, cell) in self.bank.iter().enumerate() {
            expect(
                cell.len() == self.response_width,
                format!("bank[{i}]"),
                "cell width differs from response_width",
            )?;
        }
        match (self.task, &self.class_labels) {
            (Task::Classification, Some(labels)) => {
                expect(
                    labels.len() == self.response_width,
                    "class_labels".into(),
                    "one label per response component required",
                )?;
                expect(
                    self.loss.is_classification(),
                    "loss".into(),
                    "classification needs cross_entropy",
                )?;
            }
            (Task::Classification, None) => return Err(Self::malformed("class_labels", "required for classification")),
            (Task::Regression, Some(_)) => return Err(Self::malformed("class_labels", "not allowed for regression")),
            (Task::Regression, None) => {
                expect(
                    !self.loss.is_classification(),
                    "loss".into(),
                    "regression needs mse or mae",
                )?;
            }
        }
        Ok(())
    }

    /// Rebuilds the in-memory forest and bank.
    pub fn model(&self) -> Result<Model> {
        self.validate()?;
        let topology = TreeTopology::new(self.depth)?;
        let trees = self
            .trees
            .iter()
            .map(|t| {
                let gates = GateParams::new(
                    self.n_features,
                    t.weights.concat(),
                    t.thresholds.clone(),
                    self.temperature,
                )?;
                Tree::new(topology, gates)
            })
            .collect::<Result<Vec<_>>>()?;
        let forest = ForestParams::new(trees, self.response_width)?;
        Model::new(forest, ResponseBank::from_rows(&self.bank)?)
    }

    pub fn meta(&self) -> ModelMeta {
        ModelMeta {
            task: self.task,
            loss: self.loss,
            feature_names: self.feature_names.clone(),
            target_name: self.target_name.clone(),
            standardization: self.standardization.clone(),
            class_labels: self.class_labels.clone(),
        }
    }

    pub fn to_string_pretty(&self) -> Result<String> {
        self.validate()?;
        let mut buf = Vec::new();
        let mut ser = serde_json::Serializer::with_formatter(&mut buf, ExactFloatFormatter::default());
        self.serialize(&mut ser)
            .map_err(|e| Self::malformed("", e.to_string()))?;
        buf.push(b'\n');
        Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Self::malformed("", e.to_string()))?;
        let version = value
            .get("format_version")
            .ok_or_else(|| Self::malformed("format_version", "missing"))?
            .as_u64()
            .ok_or_else(|| Self::malformed("format_version", "not an unsigned integer"))?;
        if version != FORMAT_VERSION {
            return Err(RadfError::Version {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let file: ModelFile = serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            Self::malformed(path, e.into_inner().to_string())
        })?;
        file.validate()?;
        Ok(file)
    }
}

/// Writes `file` to `path`.
pub fn save_model(file: &ModelFile, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, file.to_string_pretty()?).map_err(|e| RadfError::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelFile> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| RadfError::io(path, e))?;
    ModelFile::parse(&text)
}

/// A loaded model ready to score raw feature rows.
#[derive(Debug, Clone)]
pub struct Predictor {
    pub file: ModelFile,
    pub model: Model,
}

impl Predictor {
    pub fn new(file: ModelFile) -> Result<Self> {
        let model = file.model()?;
        Ok(Self { file, model })
    }

    /// Raw forest output for an unstandardized row.
    pub fn raw(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut row = x.to_vec();
        self.file.standardization.apply_row(&mut row);
        self.model.predict(&row)
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        let out = self.raw(x)?;
        Ok(match &self.file.class_labels {
            Some(labels) => {
                let index = crate::training::argmax(&out);
                Prediction::Class {
                    index,
                    label: labels[index].clone(),
                    probabilities: softmax(&out),
                }
            }
            None => Prediction::Values(out),
        })
    }
}

/// Pretty printer that renders every `f64` with 17 significant digits.
#[derive(Default)]
struct ExactFloatFormatter {
    inner: PrettyFormatter<'static>,
}

impl Formatter for ExactFloatFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_array(writer)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_object(writer)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_object_value(writer)
    }
}
