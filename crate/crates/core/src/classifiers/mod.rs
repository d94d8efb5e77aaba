//! Classifiers producing per-class soft decisions: one-vs-rest linear SVM,
//! CART tree and random forest, fuzzy fingerprints, multinomial logistic
//! regression, and a constant baseline.

pub mod ffp;
pub mod softmax;
pub mod svm;
pub mod tree;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::ClassLabel;
use crate::error::{Error, Result};

pub use ffp::{ffp_build, ffp_build_with, ffp_scores, FfpConfig, FfpDecay, FfpModel, FfpRanking, FfpSimilarity};
pub use softmax::{softmax_loss_and_grad, softmax_scores, softmax_train, SoftmaxModel, SoftmaxParams};
pub use svm::{svm_scores, svm_train, LinearSvmModel};
pub use tree::{forest_train, tree_train, ForestModel, ForestParams, MaxFeatures, TreeModel, TreeParams};

/// Row-per-subject training matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<ClassLabel>,
    pub feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(x: Vec<Vec<f64>>, y: Vec<ClassLabel>, feature_names: Vec<String>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::InvalidInput(format!(
                "{} rows but {} labels",
                x.len(),
                y.len()
            )));
        }
        let d = x.first().map_or(feature_names.len(), Vec::len);
        if let Some(r) = x.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: r.len(),
            });
        }
        if !feature_names.is_empty() && feature_names.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: feature_names.len(),
            });
        }
        if x.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset".into()));
        }
        Ok(Dataset {
            x,
            y,
            feature_names,
        })
    }

    /// Unnamed features.
    pub fn unnamed(x: Vec<Vec<f64>>, y: Vec<ClassLabel>) -> Result<Self> {
        Self::new(x, y, Vec::new())
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn dim(&self) -> usize {
        self.x.first().map_or(self.feature_names.len(), Vec::len)
    }

    pub fn class_counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for y in &self.y {
            c[y.index()] += 1;
        }
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScoreKind {
    Distance,
    Probability,
    Softmax,
}

impl ScoreKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoreKind::Distance => "distance",
            ScoreKind::Probability => "probability",
            ScoreKind::Softmax => "softmax",
        }
    }

    /// Whether scores of this kind sum to one.
    pub fn is_normalized(self) -> bool {
        !matches!(self, ScoreKind::Distance)
    }
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScoreKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "distance" => Ok(ScoreKind::Distance),
            "probability" => Ok(ScoreKind::Probability),
            "softmax" => Ok(ScoreKind::Softmax),
            other => Err(format!("unknown score kind `{other}`")),
        }
    }
}

/// Per-class scores ordered (HC, MCI, Dementia).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftDecision {
    pub scores: [f64; 3],
    pub kind: ScoreKind,
}

impl SoftDecision {
    pub fn new(scores: [f64; 3], kind: ScoreKind) -> Self {
        SoftDecision { scores, kind }
    }

    /// Argmax; ties go to the lowest class index.
    pub fn predict(&self) -> ClassLabel {
        argmax(&self.scores)
    }

    /// Finite scores; normalized kinds are non-negative and sum to one.
    pub fn is_valid(&self) -> bool {
        self.scores.iter().all(|s| s.is_finite())
            && (!self.kind.is_normalized()
                || (self.scores.iter().all(|&s| s >= 0.0)
                    && (self.scores.iter().sum::<f64>() - 1.0).abs() <= 1e-9))
    }
}

pub fn argmax(scores: &[f64; 3]) -> ClassLabel {
    let mut best = 0;
    for i in 1..3 {
        if scores[i] > scores[best] {
            best = i;
        }
    }
    ClassLabel::ALL[best]
}

/// Per-feature z-scoring fit on training rows; std floored at 1e-12.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub const STD_FLOOR: f64 = 1e-12;

    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let d = rows.first().map_or(0, Vec::len);
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m).powi(2);
            }
        }
        let std = var
            .into_iter()
            .map(|s| (s / n).sqrt().max(Self::STD_FLOOR))
            .collect();
        Standardizer { mean, std }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect())
    }

    pub fn apply_all(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|r| self.apply(r)).collect()
    }
}

/// Classifier choice plus hyperparameters, as written in the experiment
/// config (`type = "svm"`, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClassifierSpec {
    Svm {
        c: f64,
        #[serde(default = "default_svm_epochs")]
        epochs: usize,
    },
    Tree {
        #[serde(default = "default_max_depth")]
        max_depth: usize,
        #[serde(default = "default_min_leaf")]
        min_leaf: usize,
    },
    Forest {
        #[serde(default = "default_n_trees")]
        n_trees: usize,
        #[serde(default = "default_max_depth")]
        max_depth: usize,
        #[serde(default = "default_min_leaf")]
        min_leaf: usize,
        #[serde(default = "default_true")]
        bootstrap: bool,
        #[serde(default)]
        max_features: MaxFeatures,
    },
    Ffp {
        k: usize,
        #[serde(default, flatten)]
        config: FfpConfig,
    },
    Softmax {
        #[serde(default = "default_l2")]
        l2: f64,
        #[serde(default = "default_lr")]
        lr: f64,
        #[serde(default = "default_iters")]
        iters: usize,
    },
    /// Always predicts one class; a sanity baseline.
    Constant {
        label: ClassLabel,
    },
}

fn default_svm_epochs() -> usize {
    200
}
fn default_max_depth() -> usize {
    4
}
fn default_min_leaf() -> usize {
    2
}
fn default_n_trees() -> usize {
    100
}
fn default_true() -> bool {
    true
}
fn default_l2() -> f64 {
    SoftmaxParams::default().l2
}
fn default_lr() -> f64 {
    SoftmaxParams::default().lr
}
fn default_iters() -> usize {
    SoftmaxParams::default().iters
}

/// Softmax regression on standardized inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxClassifier {
    pub standardizer: Standardizer,
    pub model: SoftmaxModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TrainedModel {
    Svm(LinearSvmModel),
    Tree(TreeModel),
    Forest(ForestModel),
    Ffp(FfpModel),
    Softmax(SoftmaxClassifier),
    Constant { label: ClassLabel },
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct SavedModel {
    version: u32,
    spec: ClassifierSpec,
    model: TrainedModel,
}

impl ClassifierSpec {
    pub fn fit(&self, data: &Dataset, seed: u64) -> Result<TrainedModel> {
        if data.n() == 0 {
            return Err(Error::InvalidInput("empty training data".into()));
        }
        Ok(match *self {
            ClassifierSpec::Svm { c, epochs } => TrainedModel::Svm(svm_train(data, c, epochs, seed)?),
            ClassifierSpec::Tree { max_depth, min_leaf } => {
                TrainedModel::Tree(tree_train(data, &TreeParams { max_depth, min_leaf })?)
            }
            ClassifierSpec::Forest {
                n_trees,
                max_depth,
                min_leaf,
                bootstrap,
                max_features,
            } => TrainedModel::Forest(forest_train(
                data,
                &ForestParams {
                    n_trees,
                    tree: TreeParams { max_depth, min_leaf },
                    bootstrap,
                    max_features,
                },
                seed,
            )?),
            ClassifierSpec::Ffp { k, config } => TrainedModel::Ffp(ffp_build_with(data, k, config)?),
            ClassifierSpec::Softmax { l2, lr, iters } => {
                let standardizer = Standardizer::fit(&data.x);
                let x = standardizer.apply_all(&data.x)?;
                let model = softmax_train(
                    &x,
                    &data.y,
                    &SoftmaxParams {
                        l2,
                        lr,
                        iters,
                        ..Default::default()
                    },
                )?;
                TrainedModel::Softmax(SoftmaxClassifier {
                    standardizer,
                    model,
                })
            }
            ClassifierSpec::Constant { label } => TrainedModel::Constant { label },
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ClassifierSpec::Svm { .. } => "SVM",
            ClassifierSpec::Tree { .. } => "DT",
            ClassifierSpec::Forest { .. } => "RF",
            ClassifierSpec::Ffp { .. } => "FFP",
            ClassifierSpec::Softmax { .. } => "LR",
            ClassifierSpec::Constant { .. } => "const",
        }
    }
}

impl TrainedModel {
    pub fn scores(&self, x: &[f64]) -> Result<SoftDecision> {
        match self {
            TrainedModel::Svm(m) => svm_scores(m, x),
            TrainedModel::Tree(m) => m.scores(x),
            TrainedModel::Forest(m) => m.scores(x),
            TrainedModel::Ffp(m) => ffp_scores(m, x),
            TrainedModel::Softmax(m) => softmax_scores(&m.model, &m.standardizer.apply(x)?),
            TrainedModel::Constant { label } => {
                let mut s = [0.0; 3];
                s[label.index()] = 1.0;
                Ok(SoftDecision::new(s, ScoreKind::Probability))
            }
        }
    }

    pub fn kind(&self) -> ScoreKind {
        match self {
            TrainedModel::Svm(_) => ScoreKind::Distance,
            TrainedModel::Tree(_) | TrainedModel::Forest(_) | TrainedModel::Constant { .. } => {
                ScoreKind::Probability
            }
            TrainedModel::Ffp(_) | TrainedModel::Softmax(_) => ScoreKind::Softmax,
        }
    }
}

/// Writes a versioned JSON document with hyperparameters and weights.
pub fn save_model(path: &Path, spec: &ClassifierSpec, model: &TrainedModel) -> Result<()> {
    let doc = SavedModel {
        version: MODEL_FORMAT_VERSION,
        spec: spec.clone(),
        model: model.clone(),
    };
    let json = serde_json::to_string_pretty(&doc).map_err(|e| Error::InvalidInput(e.to_string()))?;
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<(ClassifierSpec, TrainedModel)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: SavedModel = serde_json::from_str(&text)
        .map_err(|e| Error::malformed(path, e.line() as u64, e.to_string()))?;
    if doc.version != MODEL_FORMAT_VERSION {
        return Err(Error::InvalidInput(format!(
            "{}: unsupported model format version {}",
            path.display(),
            doc.version
        )));
    }
    Ok((doc.spec, doc.model))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[1.0, 1.0, 0.0]), ClassLabel::Hc);
        assert_eq!(argmax(&[0.0, 2.0, 2.0]), ClassLabel::Mci);
        assert_eq!(argmax(&[0.0, 0.0, 0.1]), ClassLabel::Dementia);
    }

    #[test]
    fn standardizer_floors_constant_columns() {
        let s = Standardizer::fit(&[vec![1.0, 2.0], vec![1.0, 4.0]]);
        assert_eq!(s.std[0], Standardizer::STD_FLOOR);
        assert_eq!(s.apply(&[1.0, 3.0]).unwrap(), vec![0.0, 0.0]);
        assert!(s.apply(&[1.0]).is_err());
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::unnamed(vec![vec![1.0]], vec![]).is_err());
        assert!(Dataset::unnamed(vec![vec![1.0], vec![1.0, 2.0]], vec![ClassLabel::Hc; 2]).is_err());
        assert!(Dataset::unnamed(vec![vec![f64::NAN]], vec![ClassLabel::Hc]).is_err());
    }

    #[test]
    fn spec_parses_from_toml_and_model_round_trips() {
        let spec: ClassifierSpec = toml::from_str("type = \"svm\"\nc = 0.1\n").unwrap();
        assert_eq!(spec, ClassifierSpec::Svm { c: 0.1, epochs: 200 });
        let spec: ClassifierSpec = toml::from_str("type = \"constant\"\nlabel = \"MCI\"\n").unwrap();
        assert_eq!(spec, ClassifierSpec::Constant { label: ClassLabel::Mci });

        let data = Dataset::unnamed(
            vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![2.0, 2.0], vec![3.0, 1.0]],
            vec![ClassLabel::Hc, ClassLabel::Hc, ClassLabel::Mci, ClassLabel::Dementia],
        )
        .unwrap();
        let spec = ClassifierSpec::Softmax { l2: 1e-3, lr: 0.1, iters: 50 };
        let model = spec.fit(&data, 0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        save_model(&p, &spec, &model).unwrap();
        let (spec2, model2) = load_model(&p).unwrap();
        assert_eq!(spec2, spec);
        assert_eq!(model2.scores(&[1.0, 1.0]).unwrap(), model.scores(&[1.0, 1.0]).unwrap());
    }
}
