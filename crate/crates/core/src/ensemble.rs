//! Late fusion of single systems, exhaustive subset search, the selection
//! filter and member frequency analysis.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{softmax_scores, softmax_train, ScoreKind, SoftDecision, SoftmaxModel, SoftmaxParams, Standardizer};
use crate::corpus::ClassLabel;
use crate::error::{Error, Result};
use crate::eval::{evaluate_scores, CvResult, MetricReport};

/// One system's out-of-fold train scores and averaged dev scores.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemOutput {
    pub system_id: String,
    pub kind: ScoreKind,
    pub oof: BTreeMap<String, [f64; 3]>,
    pub dev: BTreeMap<String, [f64; 3]>,
}

impl SystemOutput {
    pub fn from_cv(r: &CvResult) -> Self {
        SystemOutput {
            system_id: r.system_id.clone(),
            kind: r.kind,
            oof: r.oof_scores.iter().map(|(k, v)| (k.clone(), v.1.scores)).collect(),
            dev: r.dev_scores.iter().map(|(k, v)| (k.clone(), v.scores)).collect(),
        }
    }

    /// Reads a score table. Rows of any split other than train and dev
    /// are ignored.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::malformed(path, 0, e.to_string()))?;
        let header = rdr.headers().map_err(|e| Error::malformed(path, 1, e.to_string()))?;
        let expected: Vec<&str> = crate::eval::SCORE_CSV_HEADER.split(',').collect();
        if header.iter().collect::<Vec<_>>() != expected {
            return Err(Error::malformed(path, 1, format!("expected header `{}`", crate::eval::SCORE_CSV_HEADER)));
        }
        let mut out: Option<SystemOutput> = None;
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::malformed(path, e.position().map_or(0, |p| p.line()), e.to_string()))?;
            let line = rec.position().map_or(0, |p| p.line());
            let mut scores = [0.0f64; 3];
            for (c, s) in scores.iter_mut().enumerate() {
                *s = rec[4 + c]
                    .parse()
                    .map_err(|_| Error::malformed(path, line, format!("bad score `{}`", &rec[4 + c])))?;
                if !s.is_finite() {
                    return Err(Error::NonFinite(format!("{}:{line}", path.display())));
                }
            }
            let kind: ScoreKind = rec[7].parse().map_err(|m: String| Error::malformed(path, line, m))?;
            let sys = out.get_or_insert_with(|| SystemOutput {
                system_id: rec[0].to_string(),
                kind,
                oof: BTreeMap::new(),
                dev: BTreeMap::new(),
            });
            if sys.system_id != rec[0] || sys.kind != kind {
                return Err(Error::malformed(path, line, "mixed system ids or score kinds in one table"));
            }
            let table = match &rec[2] {
                "train" => &mut sys.oof,
                "dev" => &mut sys.dev,
                _ => continue,
            };
            if table.insert(rec[1].to_string(), scores).is_some() {
                return Err(Error::malformed(path, line, format!("duplicate subject `{}`", &rec[1])));
            }
        }
        out.ok_or_else(|| Error::malformed(path, 1, "empty score table"))
    }
}

/// Lexicographically ordered index subsets with sizes in `min..=max`.
pub fn enumerate_subsets(n: usize, min_size: usize, max_size: usize) -> Result<Vec<Vec<usize>>> {
    if min_size == 0 || n < min_size || max_size < min_size {
        return Err(Error::InvalidInput(format!(
            "cannot form subsets of size {min_size}..={max_size} from {n} systems"
        )));
    }
    fn dfs(n: usize, start: usize, min: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        for i in start..n {
            cur.push(i);
            if cur.len() >= min {
                out.push(cur.clone());
            }
            if cur.len() < max {
                dfs(n, i + 1, min, max, cur, out);
            }
            cur.pop();
        }
    }
    let mut out = Vec::new();
    dfs(n, 0, min_size, max_size, &mut Vec::new(), &mut out);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionModel {
    pub members: Vec<String>,
    pub normalizer: Standardizer,
    pub model: SoftmaxModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Oof,
    Dev,
}

/// Concatenated member scores per subject, checking that every member
/// covers the same subjects as the first.
fn stacked(members: &[&SystemOutput], side: Side) -> Result<BTreeMap<String, Vec<f64>>> {
    fn table(m: &SystemOutput, side: Side) -> &BTreeMap<String, [f64; 3]> {
        match side {
            Side::Oof => &m.oof,
            Side::Dev => &m.dev,
        }
    }
    let first = members.first().ok_or_else(|| Error::InvalidInput("no members".into()))?;
    for m in &members[1..] {
        for id in table(first, side).keys() {
            if !table(m, side).contains_key(id) {
                return Err(Error::CoverageMismatch {
                    subject_id: id.clone(),
                    system_id: m.system_id.clone(),
                });
            }
        }
        if let Some(id) = table(m, side).keys().find(|id| !table(first, side).contains_key(*id)) {
            return Err(Error::CoverageMismatch {
                subject_id: id.clone(),
                system_id: first.system_id.clone(),
            });
        }
    }
    Ok(table(first, side)
        .keys()
        .map(|id| {
            let row = members.iter().flat_map(|m| table(m, side)[id]).collect();
            (id.clone(), row)
        })
        .collect())
}

pub fn fuse_train(
    members: &[&SystemOutput],
    labels: &BTreeMap<String, ClassLabel>,
    params: &SoftmaxParams,
) -> Result<FusionModel> {
    let rows = stacked(members, Side::Oof)?;
    let mut x = Vec::with_capacity(rows.len());
    let mut y = Vec::with_capacity(rows.len());
    for (id, r) in &rows {
        let l = labels
            .get(id)
            .ok_or_else(|| Error::InvalidInput(format!("no label for train subject `{id}`")))?;
        x.push(r.clone());
        y.push(*l);
    }
    let normalizer = Standardizer::fit(&x);
    let z = normalizer.apply_all(&x)?;
    let model = softmax_train(&z, &y, params)?;
    Ok(FusionModel {
        members: members.iter().map(|m| m.system_id.clone()).collect(),
        normalizer,
        model,
    })
}

fn fuse_side(model: &FusionModel, members: &[&SystemOutput], side: Side) -> Result<BTreeMap<String, SoftDecision>> {
    let found: Vec<String> = members.iter().map(|m| m.system_id.clone()).collect();
    if found != model.members {
        return Err(Error::MemberOrder {
            expected: model.members.clone(),
            found,
        });
    }
    stacked(members, side)?
        .into_iter()
        .map(|(id, r)| Ok((id, softmax_scores(&model.model, &model.normalizer.apply(&r)?)?)))
        .collect()
}

/// Fused dev-set decisions.
pub fn fuse_predict(model: &FusionModel, members: &[&SystemOutput]) -> Result<BTreeMap<String, SoftDecision>> {
    fuse_side(model, members, Side::Dev)
}

/// Fused decisions on the out-of-fold inputs the model was trained on.
pub fn fuse_predict_oof(model: &FusionModel, members: &[&SystemOutput]) -> Result<BTreeMap<String, SoftDecision>> {
    fuse_side(model, members, Side::Oof)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionCriteria {
    pub min_train_uaf1: f64,
    pub min_dev_uaf1: f64,
    pub min_dementia_f1: f64,
}

impl Default for SelectionCriteria {
    fn default() -> Self {
        SelectionCriteria {
            min_train_uaf1: 55.0,
            min_dev_uaf1: 55.0,
            min_dementia_f1: 0.0,
        }
    }
}

impl SelectionCriteria {
    pub fn validate(&self) -> Result<()> {
        for v in [self.min_train_uaf1, self.min_dev_uaf1, self.min_dementia_f1] {
            if !(0.0..=100.0).contains(&v) {
                return Err(Error::Config(format!("selection threshold {v} outside [0, 100]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleCandidate {
    pub members: Vec<String>,
    pub train_metrics: MetricReport,
    pub dev_metrics: MetricReport,
}

impl EnsembleCandidate {
    fn rank_key(&self) -> f64 {
        self.train_metrics.uaf1.min(self.dev_metrics.uaf1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    pub min_size: usize,
    pub max_size: usize,
    pub softmax: SoftmaxParams,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            min_size: 2,
            max_size: 6,
            softmax: SoftmaxParams::default(),
        }
    }
}

/// Fits and evaluates a fusion model for every member subset, ranked by
/// min(train, dev) UAF1, then dev UAF1, then member ids.
pub fn search(
    outputs: &[SystemOutput],
    train_labels: &BTreeMap<String, ClassLabel>,
    dev_labels: &BTreeMap<String, ClassLabel>,
    opts: &SearchOptions,
) -> Result<Vec<EnsembleCandidate>> {
    if outputs.len() < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 systems, got {}", outputs.len())));
    }
    let ids: BTreeSet<&str> = outputs.iter().map(|o| o.system_id.as_str()).collect();
    if ids.len() != outputs.len() {
        return Err(Error::InvalidInput("duplicate system ids".into()));
    }
    let subsets = enumerate_subsets(outputs.len(), opts.min_size, opts.max_size.min(outputs.len()))?;
    let results: Vec<Result<EnsembleCandidate>> = subsets
        .par_iter()
        .map(|s| {
            let members: Vec<&SystemOutput> = s.iter().map(|&i| &outputs[i]).collect();
            let model = fuse_train(&members, train_labels, &opts.softmax)?;
            let train_metrics = evaluate_scores(&fuse_predict_oof(&model, &members)?, train_labels)?;
            let dev_metrics = evaluate_scores(&fuse_predict(&model, &members)?, dev_labels)?;
            Ok(EnsembleCandidate {
                members: model.members,
                train_metrics,
                dev_metrics,
            })
        })
        .collect();
    let mut out = results.into_iter().collect::<Result<Vec<_>>>()?;
    rank(&mut out);
    Ok(out)
}

pub fn rank(cands: &mut [EnsembleCandidate]) {
    cands.sort_by(|a, b| {
        b.rank_key()
            .total_cmp(&a.rank_key())
            .then(b.dev_metrics.uaf1.total_cmp(&a.dev_metrics.uaf1))
            .then_with(|| a.members.cmp(&b.members))
    });
}

/// Candidates strictly above every threshold, in input order.
pub fn select(candidates: &[EnsembleCandidate], criteria: &SelectionCriteria) -> Vec<EnsembleCandidate> {
    candidates
        .iter()
        .filter(|c| {
            c.train_metrics.uaf1 > criteria.min_train_uaf1
                && c.dev_metrics.uaf1 > criteria.min_dev_uaf1
                && c.dev_metrics.f1[ClassLabel::Dementia.index()] > criteria.min_dementia_f1
        })
        .cloned()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyReport {
    /// (system id, fraction of selected candidates containing it), in roster order.
    pub frequencies: Vec<(String, f64)>,
    /// Set when the selection was empty and every frequency is 0.
    pub empty: bool,
}

pub fn frequency(selected: &[EnsembleCandidate], systems: &[String]) -> FrequencyReport {
    let n = selected.len();
    let frequencies = systems
        .iter()
        .map(|s| {
            let hits = selected.iter().filter(|c| c.members.contains(s)).count();
            (s.clone(), if n == 0 { 0.0 } else { hits as f64 / n as f64 })
        })
        .collect();
    FrequencyReport {
        frequencies,
        empty: n == 0,
    }
}

pub const ENSEMBLES_CSV_HEADER: &str = "members,train_uaf1,dev_uaf1,f1_hc,f1_mci,f1_dem";

/// Members are joined with `+`; per-class F1 columns are dev-set values.
pub fn ensembles_to_csv(cands: &[EnsembleCandidate]) -> String {
    let mut out = String::from(ENSEMBLES_CSV_HEADER);
    out.push('\n');
    for c in cands {
        let [h, m, d] = c.dev_metrics.f1;
        let _ = writeln!(
            out,
            "{},{},{},{h},{m},{d}",
            c.members.join("+"),
            c.train_metrics.uaf1,
            c.dev_metrics.uaf1
        );
    }
    out
}

/// One row of a persisted ensembles table.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleRow {
    pub members: Vec<String>,
    pub train_uaf1: f64,
    pub dev_uaf1: f64,
    pub dev_f1: [f64; 3],
}

pub fn read_ensembles_csv(path: &Path) -> Result<Vec<EnsembleRow>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::malformed(path, 0, e.to_string()))?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::malformed(path, e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 6 {
            return Err(Error::malformed(path, line, format!("expected 6 fields, found {}", rec.len())));
        }
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse()
                .map_err(|_| Error::malformed(path, line, format!("bad number `{}`", &rec[i])))
        };
        out.push(EnsembleRow {
            members: rec[0].split('+').map(str::to_string).collect(),
            train_uaf1: num(1)?,
            dev_uaf1: num(2)?,
            dev_f1: [num(3)?, num(4)?, num(5)?],
        });
    }
    Ok(out)
}

pub fn frequency_to_csv(report: &FrequencyReport) -> String {
    let mut out = String::from("system_id,frequency\n");
    for (s, f) in &report.frequencies {
        let _ = writeln!(out, "{s},{f}");
    }
    out
}

pub fn read_frequency_csv(path: &Path) -> Result<Vec<(String, f64)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::malformed(path, 0, e.to_string()))?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::malformed(path, e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let f: f64 = rec
            .get(1)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::malformed(path, line, "bad frequency row"))?;
        out.push((rec[0].to_string(), f));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binom(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn subset_counts_and_order() {
        assert_eq!(enumerate_subsets(3, 2, 2).unwrap(), vec![vec![0, 1], vec![0, 2], vec![1, 2]]);
        assert_eq!(enumerate_subsets(2, 2, 6).unwrap(), vec![vec![0, 1]]);
        let all = enumerate_subsets(15, 2, 6).unwrap();
        assert_eq!(all.len(), 9933);
        assert_eq!(all.len(), (2..=6).map(|k| binom(15, k)).sum::<usize>());
        assert!(all.windows(2).all(|w| w[0] < w[1]));
        assert!(enumerate_subsets(1, 2, 6).is_err());
    }

    fn labels() -> BTreeMap<String, ClassLabel> {
        (0..12).map(|i| (format!("s{i:02}"), ClassLabel::ALL[i % 3])).collect()
    }

    fn output(id: &str, f: impl Fn(usize) -> [f64; 3]) -> SystemOutput {
        let oof = (0..12).map(|i| (format!("s{i:02}"), f(i))).collect::<BTreeMap<_, _>>();
        SystemOutput {
            system_id: id.into(),
            kind: ScoreKind::Distance,
            dev: oof.clone(),
            oof,
        }
    }

    fn perfect(i: usize) -> [f64; 3] {
        let mut s = [-1.0; 3];
        s[i % 3] = 1.0;
        s
    }

    fn noisy(i: usize) -> [f64; 3] {
        [(i % 5) as f64, ((i * 3) % 7) as f64 * 0.1, (i % 2) as f64]
    }

    #[test]
    fn perfect_member_fuses_perfectly() {
        let a = output("a", perfect);
        let m = fuse_train(&[&a], &labels(), &SoftmaxParams::default()).unwrap();
        let pred = fuse_predict_oof(&m, &[&a]).unwrap();
        assert_eq!(evaluate_scores(&pred, &labels()).unwrap().uaf1, 100.0);
    }

    #[test]
    fn duplicated_member_matches_single() {
        let a = output("a", noisy);
        let b = output("b", noisy);
        let p = SoftmaxParams::default();
        let single = fuse_predict(&fuse_train(&[&a], &labels(), &p).unwrap(), &[&a]).unwrap();
        let pair_model = fuse_train(&[&a, &b], &labels(), &p).unwrap();
        assert_eq!(pair_model.model.input_dim(), 6);
        let pair = fuse_predict(&pair_model, &[&a, &b]).unwrap();
        for (id, s) in &single {
            assert_eq!(s.predict(), pair[id].predict());
        }
        assert!(matches!(fuse_predict(&pair_model, &[&b, &a]), Err(Error::MemberOrder { .. })));
    }

    #[test]
    fn constant_column_stays_finite() {
        let a = output("a", |_| [0.5, 0.5, 0.5]);
        let b = output("b", perfect);
        let m = fuse_train(&[&a, &b], &labels(), &SoftmaxParams::default()).unwrap();
        assert!(fuse_predict(&m, &[&a, &b]).unwrap().values().all(SoftDecision::is_valid));
    }

    #[test]
    fn coverage_mismatch_names_subject() {
        let a = output("a", perfect);
        let mut b = output("b", noisy);
        b.oof.remove("s03");
        match fuse_train(&[&a, &b], &labels(), &SoftmaxParams::default()) {
            Err(Error::CoverageMismatch { subject_id, system_id }) => {
                assert_eq!((subject_id.as_str(), system_id.as_str()), ("s03", "b"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_weight_model_is_uniform() {
        let a = output("a", noisy);
        let m = FusionModel {
            members: vec!["a".into()],
            normalizer: Standardizer { mean: vec![0.0; 3], std: vec![1.0; 3] },
            model: SoftmaxModel::zeros(3),
        };
        assert!(fuse_predict(&m, &[&a]).unwrap().values().all(|s| s.scores == [1.0 / 3.0; 3]));
    }

    fn cand(members: &[&str], train: f64, dev: f64, dem: f64) -> EnsembleCandidate {
        let r = |u: f64, d: f64| MetricReport { uaf1: u, f1: [u, u, d], precision: [0.0; 3], recall: [0.0; 3] };
        EnsembleCandidate {
            members: members.iter().map(|s| s.to_string()).collect(),
            train_metrics: r(train, dem),
            dev_metrics: r(dev, dem),
        }
    }

    #[test]
    fn selection_filter_and_frequency() {
        let cs = vec![cand(&["a", "c"], 56.0, 56.0, 10.0), cand(&["b", "c"], 70.0, 80.0, 0.0), cand(&["c", "d"], 60.0, 54.0, 5.0)];
        let sel = select(&cs, &SelectionCriteria::default());
        assert_eq!(sel, vec![cs[0].clone()]);
        assert!(select(&[], &SelectionCriteria::default()).is_empty());
        let vacuous = SelectionCriteria { min_train_uaf1: 0.0, min_dev_uaf1: 0.0, min_dementia_f1: 0.0 };
        let positive = vec![cs[0].clone(), cs[2].clone()];
        assert_eq!(select(&positive, &vacuous), positive);

        let systems: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
        let f = frequency(&positive, &systems);
        assert_eq!(f.frequencies, vec![("a".into(), 0.5), ("b".into(), 0.0), ("c".into(), 1.0), ("d".into(), 0.5)]);
        assert!(!f.empty);
        assert!(frequency(&[], &systems).empty);
    }

    #[test]
    fn ranking_order() {
        let mut cs = vec![cand(&["b", "c"], 60.0, 70.0, 1.0), cand(&["a", "c"], 70.0, 60.0, 1.0), cand(&["a", "b"], 65.0, 65.0, 1.0)];
        rank(&mut cs);
        let order: Vec<String> = cs.iter().map(|c| c.members.join("+")).collect();
        assert_eq!(order, ["a+b", "b+c", "a+c"]);
    }

    #[test]
    fn search_is_deterministic_and_blind_to_dev_labels() {
        let outs = vec![output("a", noisy), output("b", perfect), output("c", |i| noisy(i + 3))];
        let tl = labels();
        let opts = SearchOptions { softmax: SoftmaxParams { iters: 200, ..Default::default() }, ..Default::default() };
        let r1 = search(&outs, &tl, &tl, &opts).unwrap();
        assert_eq!(r1.len(), 4);
        assert_eq!(ensembles_to_csv(&r1), ensembles_to_csv(&search(&outs, &tl, &tl, &opts).unwrap()));
        // Permuting dev labels changes only the evaluation, never the fits.
        let permuted: BTreeMap<String, ClassLabel> = tl.iter().map(|(k, v)| (k.clone(), ClassLabel::ALL[(v.index() + 1) % 3])).collect();
        let r2 = search(&outs, &tl, &permuted, &opts).unwrap();
        for c in &r1 {
            let other = r2.iter().find(|o| o.members == c.members).unwrap();
            assert_eq!(other.train_metrics, c.train_metrics);
        }
    }

    #[test]
    fn csv_round_trips() {
        let cs = vec![cand(&["a", "c"], 56.25, 56.0, 10.0)];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        std::fs::write(&p, ensembles_to_csv(&cs)).unwrap();
        let rows = read_ensembles_csv(&p).unwrap();
        assert_eq!(rows[0].members, ["a", "c"]);
        assert_eq!(rows[0].train_uaf1, 56.25);
    }
}
