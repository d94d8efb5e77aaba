//! Metrics, confusion matrices and the cross-validation runner.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{ClassifierSpec, Dataset, ScoreKind, SoftDecision};
use crate::corpus::{ClassLabel, FoldPlan};
use crate::error::{Error, Result};
use crate::features::{pca_fit, PcaModel};

/// Row = true class, column = predicted class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 3]; 3],
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

pub fn confusion(y_true: &[ClassLabel], y_pred: &[ClassLabel]) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::InvalidInput(format!(
            "{} true labels but {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.is_empty() {
        return Err(Error::InvalidInput("no predictions to evaluate".into()));
    }
    let mut cm = ConfusionMatrix::default();
    for (t, p) in y_true.iter().zip(y_pred) {
        cm.counts[t.index()][p.index()] += 1;
    }
    Ok(cm)
}

/// Percentages. Any 0/0 ratio is 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub uaf1: f64,
    pub f1: [f64; 3],
    pub precision: [f64; 3],
    pub recall: [f64; 3],
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

pub fn metrics(cm: &ConfusionMatrix) -> MetricReport {
    let mut f1 = [0.0; 3];
    let mut precision = [0.0; 3];
    let mut recall = [0.0; 3];
    for c in 0..3 {
        let tp = cm.counts[c][c] as f64;
        let predicted: u64 = (0..3).map(|t| cm.counts[t][c]).sum();
        let actual: u64 = cm.counts[c].iter().sum();
        let p = ratio(tp, predicted as f64);
        let r = ratio(tp, actual as f64);
        precision[c] = 100.0 * p;
        recall[c] = 100.0 * r;
        f1[c] = 100.0 * ratio(2.0 * p * r, p + r);
    }
    MetricReport {
        uaf1: f1.iter().sum::<f64>() / 3.0,
        f1,
        precision,
        recall,
    }
}

pub fn evaluate(y_true: &[ClassLabel], y_pred: &[ClassLabel]) -> Result<MetricReport> {
    Ok(metrics(&confusion(y_true, y_pred)?))
}

/// Metrics of argmax predictions over the subjects in `scores`.
pub fn evaluate_scores(
    scores: &BTreeMap<String, SoftDecision>,
    labels: &BTreeMap<String, ClassLabel>,
) -> Result<MetricReport> {
    let mut t = Vec::with_capacity(scores.len());
    let mut p = Vec::with_capacity(scores.len());
    for (id, s) in scores {
        let y = labels
            .get(id)
            .ok_or_else(|| Error::InvalidInput(format!("no label for subject `{id}`")))?;
        t.push(*y);
        p.push(s.predict());
    }
    evaluate(&t, &p)
}

/// A run of consecutive feature columns; embedding blocks may be reduced
/// with PCA fit on each fold's training rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureBlock {
    pub len: usize,
    pub pca_dim: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub id: String,
    pub classifier: ClassifierSpec,
    /// Column layout of the feature vectors; empty means one raw block.
    #[serde(default)]
    pub blocks: Vec<FeatureBlock>,
}

/// Subject id → feature vector.
pub type FeatureMap = BTreeMap<String, Vec<f64>>;

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub system_id: String,
    pub kind: ScoreKind,
    /// Train subject → (fold index, score from the model that held that fold out).
    pub oof_scores: BTreeMap<String, (usize, SoftDecision)>,
    /// Dev subject → mean of the fold models' scores.
    pub dev_scores: BTreeMap<String, SoftDecision>,
    /// Training subject ids of each fold model.
    pub fold_training: Vec<Vec<String>>,
    pub train_metrics: MetricReport,
    pub dev_metrics: Option<MetricReport>,
}

impl CvResult {
    pub fn oof_decisions(&self) -> BTreeMap<String, SoftDecision> {
        self.oof_scores.iter().map(|(k, v)| (k.clone(), v.1)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CvOptions {
    /// Drop subjects without features instead of failing.
    pub allow_missing: bool,
}

/// Per-fold PCA over the configured blocks.
struct BlockTransform {
    blocks: Vec<(FeatureBlock, Option<PcaModel>)>,
}

impl BlockTransform {
    fn fit(blocks: &[FeatureBlock], dim: usize, rows: &[&Vec<f64>]) -> Result<Self> {
        if blocks.is_empty() {
            return Ok(BlockTransform { blocks: vec![(FeatureBlock { len: dim, pca_dim: None }, None)] });
        }
        let total: usize = blocks.iter().map(|b| b.len).sum();
        if total != dim {
            return Err(Error::DimensionMismatch {
                expected: total,
                found: dim,
            });
        }
        let mut out = Vec::with_capacity(blocks.len());
        let mut start = 0;
        for b in blocks {
            let pca = match b.pca_dim {
                Some(k) => {
                    let sub: Vec<Vec<f64>> = rows.iter().map(|r| r[start..start + b.len].to_vec()).collect();
                    let k = k.min(b.len).min(rows.len().saturating_sub(1)).max(1);
                    Some(pca_fit(&sub, k)?)
                }
                None => None,
            };
            out.push((*b, pca));
            start += b.len;
        }
        Ok(BlockTransform { blocks: out })
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(x.len());
        let mut start = 0;
        for (b, pca) in &self.blocks {
            let part = x.get(start..start + b.len).ok_or(Error::DimensionMismatch {
                expected: start + b.len,
                found: x.len(),
            })?;
            match pca {
                Some(m) => out.extend(m.transform(part)?),
                None => out.extend_from_slice(part),
            }
            start += b.len;
        }
        Ok(out)
    }
}

fn fold_seed(seed: u64, fold: usize) -> u64 {
    seed ^ (fold as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Mean of like-kind soft decisions.
pub fn average_decisions(ds: &[SoftDecision]) -> Result<SoftDecision> {
    let first = ds.first().ok_or_else(|| Error::InvalidInput("nothing to average".into()))?;
    if ds.iter().any(|d| d.kind != first.kind) {
        return Err(Error::InvalidInput("cannot average scores of different kinds".into()));
    }
    let mut s = [0.0; 3];
    for d in ds {
        for c in 0..3 {
            s[c] += d.scores[c];
        }
    }
    Ok(SoftDecision::new(s.map(|v| v / ds.len() as f64), first.kind))
}

/// k-fold cross-validation over the subjects of `folds`.
///
/// Model `f` is trained on every fold except `f`, scores the subjects of
/// fold `f`, and scores the whole dev set; dev scores are averaged over
/// the `k` models. `dev_labels` only feeds the reported metrics.
#[allow(clippy::too_many_arguments)]
pub fn run_cv(
    system: &SystemSpec,
    features: &FeatureMap,
    labels: &BTreeMap<String, ClassLabel>,
    folds: &FoldPlan,
    dev_features: &FeatureMap,
    dev_labels: Option<&BTreeMap<String, ClassLabel>>,
    seed: u64,
    opts: CvOptions,
) -> Result<CvResult> {
    let mut train_ids = Vec::new();
    for id in folds.assignment.keys() {
        if features.contains_key(id) {
            train_ids.push(id.as_str());
        } else if !opts.allow_missing {
            return Err(Error::MissingFeatures { subject_id: id.clone() });
        }
    }
    for id in &train_ids {
        if !labels.contains_key(*id) {
            return Err(Error::InvalidInput(format!("no label for train subject `{id}`")));
        }
    }
    let dim = train_ids
        .first()
        .map(|id| features[*id].len())
        .ok_or_else(|| Error::InvalidInput(format!("system `{}` has no train subjects", system.id)))?;
    for (id, x) in features.iter().chain(dev_features) {
        if x.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("features of `{id}`")));
        }
    }

    let per_fold: Vec<Result<(Vec<String>, Vec<(String, SoftDecision)>, Vec<SoftDecision>)>> = (0..folds.k)
        .into_par_iter()
        .map(|f| {
            let train: Vec<&str> = train_ids.iter().copied().filter(|id| folds.assignment[*id] != f).collect();
            let rows: Vec<&Vec<f64>> = train.iter().map(|id| &features[*id]).collect();
            let bt = BlockTransform::fit(&system.blocks, dim, &rows)?;
            let x = rows.iter().map(|r| bt.apply(r)).collect::<Result<Vec<_>>>()?;
            let y = train.iter().map(|id| labels[*id]).collect();
            let model = system.classifier.fit(&Dataset::unnamed(x, y)?, fold_seed(seed, f))?;
            let mut oof = Vec::new();
            for id in train_ids.iter().filter(|id| folds.assignment[**id] == f) {
                oof.push((id.to_string(), model.scores(&bt.apply(&features[*id])?)?));
            }
            let dev = dev_features
                .values()
                .map(|x| model.scores(&bt.apply(x)?))
                .collect::<Result<Vec<_>>>()?;
            Ok((train.iter().map(|s| s.to_string()).collect(), oof, dev))
        })
        .collect();

    let mut oof_scores = BTreeMap::new();
    let mut fold_training = Vec::with_capacity(folds.k);
    let mut dev_by_fold = Vec::with_capacity(folds.k);
    for (f, r) in per_fold.into_iter().enumerate() {
        let (train, oof, dev) = r?;
        fold_training.push(train);
        for (id, s) in oof {
            oof_scores.insert(id, (f, s));
        }
        dev_by_fold.push(dev);
    }
    let mut dev_scores = BTreeMap::new();
    for (i, id) in dev_features.keys().enumerate() {
        let ds: Vec<SoftDecision> = dev_by_fold.iter().map(|d| d[i]).collect();
        dev_scores.insert(id.clone(), average_decisions(&ds)?);
    }
    let kind = oof_scores.values().next().map(|v| v.1.kind).unwrap_or(ScoreKind::Probability);
    let oof: BTreeMap<String, SoftDecision> = oof_scores.iter().map(|(k, v)| (k.clone(), v.1)).collect();
    let train_metrics = evaluate_scores(&oof, labels)?;
    let dev_metrics = match dev_labels {
        Some(l) if !dev_scores.is_empty() => Some(evaluate_scores(&dev_scores, l)?),
        _ => None,
    };
    Ok(CvResult {
        system_id: system.id.clone(),
        kind,
        oof_scores,
        dev_scores,
        fold_training,
        train_metrics,
        dev_metrics,
    })
}

pub const SCORE_CSV_HEADER: &str = "system_id,subject_id,split,fold,score_hc,score_mci,score_dem,kind";

/// Score table: out-of-fold train rows then dev rows, each in id order.
/// The fold cell is empty for dev rows.
pub fn cv_to_csv(r: &CvResult) -> String {
    let mut out = String::new();
    out.push_str(SCORE_CSV_HEADER);
    out.push('\n');
    for (id, (f, s)) in &r.oof_scores {
        let [a, b, c] = s.scores;
        let _ = writeln!(out, "{},{id},train,{f},{a},{b},{c},{}", r.system_id, s.kind);
    }
    for (id, s) in &r.dev_scores {
        let [a, b, c] = s.scores;
        let _ = writeln!(out, "{},{id},dev,,{a},{b},{c},{}", r.system_id, s.kind);
    }
    out
}

pub fn write_cv_csv(path: &Path, r: &CvResult) -> Result<()> {
    std::fs::write(path, cv_to_csv(r)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ClassLabel::*;

    #[test]
    fn hand_counted_confusion_and_metrics() {
        let cm = confusion(&[Hc, Mci, Dementia, Hc], &[Hc, Hc, Dementia, Mci]).unwrap();
        assert_eq!(cm.counts, [[1, 1, 0], [1, 0, 0], [0, 0, 1]]);
        let m = metrics(&cm);
        assert_eq!(m.f1, [50.0, 0.0, 100.0]);
        assert_eq!(m.uaf1, 50.0);
        assert!(confusion(&[Hc], &[]).is_err());
        assert!(confusion(&[], &[]).is_err());
    }

    #[test]
    fn perfect_and_all_hc() {
        let y = [Hc, Mci, Dementia, Mci];
        let m = evaluate(&y, &y).unwrap();
        assert_eq!(m.uaf1, 100.0);
        let cm = confusion(&y, &[Hc; 4]).unwrap();
        assert!(cm.counts.iter().all(|r| r[1] == 0 && r[2] == 0));
        let m = metrics(&cm);
        assert_eq!(m.f1[2], 0.0);
        assert_eq!(m.f1[1], 0.0);
    }

    fn toy_plan(n: usize, k: usize) -> (FeatureMap, BTreeMap<String, ClassLabel>, FoldPlan) {
        let mut feats = FeatureMap::new();
        let mut labels = BTreeMap::new();
        let mut assignment = BTreeMap::new();
        for i in 0..n {
            let id = format!("s{i:03}");
            let y = ClassLabel::ALL[i % 3];
            feats.insert(id.clone(), vec![y.index() as f64 + 0.1 * (i % 4) as f64, (i % 7) as f64]);
            labels.insert(id.clone(), y);
            assignment.insert(id, i % k);
        }
        (feats, labels, FoldPlan { k, assignment })
    }

    #[test]
    fn constant_classifier_cv() {
        let (feats, labels, plan) = toy_plan(30, 5);
        let sys = SystemSpec {
            id: "const".into(),
            classifier: ClassifierSpec::Constant { label: Hc },
            blocks: vec![],
        };
        let r = run_cv(&sys, &feats, &labels, &plan, &feats, Some(&labels), 0, CvOptions::default()).unwrap();
        assert_eq!(r.oof_scores.len(), 30);
        assert!(r.oof_scores.values().all(|(_, s)| s.predict() == Hc));
        assert_eq!(r.train_metrics.f1[2], 0.0);
        for (id, (f, _)) in &r.oof_scores {
            assert_eq!(plan.fold_of(id), Some(*f));
            assert!(!r.fold_training[*f].contains(id));
        }
        // Five identical models: the mean is any one of them.
        assert!(r.dev_scores.values().all(|s| s.scores == [1.0, 0.0, 0.0]));
    }

    #[test]
    fn missing_features_are_reported_or_skipped() {
        let (mut feats, labels, plan) = toy_plan(30, 5);
        feats.remove("s004");
        let sys = SystemSpec {
            id: "svm".into(),
            classifier: ClassifierSpec::Svm { c: 0.1, epochs: 50 },
            blocks: vec![],
        };
        match run_cv(&sys, &feats, &labels, &plan, &FeatureMap::new(), None, 0, CvOptions::default()) {
            Err(Error::MissingFeatures { subject_id }) => assert_eq!(subject_id, "s004"),
            other => panic!("{other:?}"),
        }
        let r = run_cv(&sys, &feats, &labels, &plan, &FeatureMap::new(), None, 0, CvOptions { allow_missing: true })
            .unwrap();
        assert_eq!(r.oof_scores.len(), 29);
        assert!(r.dev_metrics.is_none());
    }

    #[test]
    fn pca_blocks_and_csv_layout() {
        let (feats, labels, plan) = toy_plan(30, 5);
        let sys = SystemSpec {
            id: "pca".into(),
            classifier: ClassifierSpec::Svm { c: 0.1, epochs: 50 },
            blocks: vec![FeatureBlock { len: 1, pca_dim: None }, FeatureBlock { len: 1, pca_dim: Some(1) }],
        };
        let dev: FeatureMap = feats.iter().take(4).map(|(k, v)| (format!("d{k}"), v.clone())).collect();
        let r = run_cv(&sys, &feats, &labels, &plan, &dev, None, 3, CvOptions::default()).unwrap();
        let csv = cv_to_csv(&r);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], SCORE_CSV_HEADER);
        assert_eq!(lines.len(), 1 + 30 + 4);
        assert!(lines[31].starts_with("pca,ds000,dev,,"));
        assert!(lines[1].ends_with(",distance"));
        let bad = SystemSpec { blocks: vec![FeatureBlock { len: 3, pca_dim: None }], ..sys };
        assert!(run_cv(&bad, &feats, &labels, &plan, &dev, None, 3, CvOptions::default()).is_err());
    }

    #[test]
    fn average_keeps_kind_and_normalization() {
        let a = SoftDecision::new([0.2, 0.3, 0.5], ScoreKind::Softmax);
        let b = SoftDecision::new([0.6, 0.3, 0.1], ScoreKind::Softmax);
        let m = average_decisions(&[a, b]).unwrap();
        assert!(m.is_valid());
        assert_eq!(m.kind, ScoreKind::Softmax);
        assert!(average_decisions(&[a, SoftDecision::new([0.0; 3], ScoreKind::Distance)]).is_err());
    }
}
