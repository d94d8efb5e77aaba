//! Command implementations: every stage reads and writes files under the
//! configured output directory so later stages can be rerun independently.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::classifiers::SoftmaxParams;
use crate::config::{ExperimentConfig, FeatureSet, SystemConfig, TaskChoice};
use crate::corpus::{load_manifest, make_folds, synth_corpus, ClassLabel, Manifest, Split, TaskKind};
use crate::dsp::{denoise, read_wav, vad, write_wav, DenoiseConfig};
use crate::ensemble::{
    self, ensembles_to_csv, frequency, frequency_to_csv, read_ensembles_csv, read_frequency_csv, search, select,
    SearchOptions, SystemOutput,
};
use crate::error::{Error, Result};
use crate::eval::{evaluate_scores, run_cv, write_cv_csv, CvOptions, FeatureBlock, FeatureMap, MetricReport, SystemSpec};
use crate::features::{
    default_fillers, default_stopwords, embedding_file_name, extract_targets, fluency_features, linguistic_features,
    load_embedding, load_macrodescriptors, normalize_disfluencies, pause_features, tokenize, wer, FluencyFeatures,
    LinguisticFeatures, PauseFeatures, TargetLexicon, Transcript, DISFLUENCY_PLACEHOLDER,
};
use crate::report::{bar_svg, scatter_svg, ScatterPoint};

pub const CONFIG_FILE: &str = "experiment.toml";
pub const DENOISED_DIR: &str = "denoised";
pub const FEATURES_DIR: &str = "features";
pub const SCORES_DIR: &str = "scores";
pub const METRICS_DIR: &str = "metrics";
pub const REPORT_DIR: &str = "report";

/// Files written and per-item failures of one command. Failures do not
/// abort the command; they make it exit non-zero at the end.
#[derive(Debug, Default)]
pub struct CmdOutcome {
    pub written: Vec<PathBuf>,
    pub failures: Vec<String>,
}

impl CmdOutcome {
    fn write(&mut self, path: PathBuf, body: &str) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        self.written.push(path);
        Ok(())
    }
}

fn mkdir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

/// Writes the synthetic corpus plus an `experiment.toml` that points at it.
pub fn cmd_synth(out_dir: &Path, seed: u64) -> Result<Manifest> {
    let manifest = synth_corpus(out_dir, seed)?;
    let cfg = ExperimentConfig {
        manifest: PathBuf::from("."),
        output_dir: PathBuf::from("results"),
        seed,
        ..Default::default()
    };
    let path = out_dir.join(CONFIG_FILE);
    fs::write(&path, cfg.to_toml()).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

fn recording_stem(id: &str, task: TaskKind) -> String {
    format!("{id}_{task}")
}

fn file_seed(seed: u64, i: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (i as u64).wrapping_mul(0xD1B5_4A32_D192_ED03)
}

/// One cleaned WAV per recording plus `denoise_log.csv`.
pub fn cmd_denoise(cfg: &ExperimentConfig) -> Result<CmdOutcome> {
    let manifest = load_manifest(&cfg.manifest)?;
    let out_dir = cfg.output_dir.join(DENOISED_DIR);
    mkdir(&out_dir)?;
    let results: Vec<(String, Result<(usize, usize)>)> = manifest
        .recordings
        .par_iter()
        .enumerate()
        .map(|(i, r)| {
            let stem = recording_stem(&r.subject_id, r.task);
            let res = (|| {
                let audio = read_wav(&manifest.resolve(&r.audio_path))?;
                let dcfg = DenoiseConfig {
                    seed: cfg.dsp.seed ^ file_seed(cfg.seed, i),
                    ..cfg.dsp.clone()
                };
                let out = denoise(&audio, &dcfg)?;
                write_wav(&out_dir.join(format!("{stem}.wav")), &out.audio)?;
                Ok((out.replaced_frames, out.replaced_samples))
            })();
            (format!("{},{}", r.subject_id, r.task), res)
        })
        .collect();
    let mut outcome = CmdOutcome::default();
    let mut log = String::from("subject_id,task,status,replaced_frames,replaced_samples,message\n");
    for (key, res) in results {
        match res {
            Ok((f, s)) => {
                let _ = writeln!(log, "{key},ok,{f},{s},");
            }
            Err(e) => {
                let msg = e.to_string().replace([',', '\n'], ";");
                let _ = writeln!(log, "{key},error,,,{msg}");
                outcome.failures.push(format!("{key}: {e}"));
            }
        }
    }
    outcome.write(cfg.output_dir.join("denoise_log.csv"), &log)?;
    Ok(outcome)
}

pub fn feature_table_path(cfg: &ExperimentConfig, set: FeatureSet, task: TaskKind) -> PathBuf {
    cfg.output_dir.join(FEATURES_DIR).join(format!("{set}_{task}.csv"))
}

fn table_to_csv(names: &[&str], rows: &BTreeMap<String, Vec<f64>>) -> String {
    let mut out = format!("subject_id,{}\n", names.join(","));
    for (id, v) in rows {
        let cells: Vec<String> = v.iter().map(|x| x.to_string()).collect();
        let _ = writeln!(out, "{id},{}", cells.join(","));
    }
    out
}

/// Reads a `subject_id,f1,...` table.
pub fn read_feature_table(path: &Path) -> Result<(Vec<String>, FeatureMap)> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::malformed(path, 0, e.to_string()))?;
    let names: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::malformed(path, 1, e.to_string()))?
        .iter()
        .skip(1)
        .map(str::to_string)
        .collect();
    let mut rows = FeatureMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::malformed(path, e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let v = rec
            .iter()
            .skip(1)
            .map(|c| c.parse::<f64>().map_err(|_| Error::malformed(path, line, format!("bad value `{c}`"))))
            .collect::<Result<Vec<_>>>()?;
        if v.len() != names.len() {
            return Err(Error::malformed(path, line, "row length differs from header"));
        }
        rows.insert(rec[0].to_string(), v);
    }
    Ok((names, rows))
}

type RowResult = (String, TaskKind, Vec<(FeatureSet, Result<Vec<f64>>)>);

/// Pause, linguistic, fluency and macrodescriptor tables per task.
pub fn cmd_features(cfg: &ExperimentConfig) -> Result<CmdOutcome> {
    let manifest = load_manifest(&cfg.manifest)?;
    let fp = &cfg.features;
    let lex_for = |path: &Path| TargetLexicon::load(&cfg.corpus_path(path), &cfg.corpus_path(&fp.word_vectors));
    let animals = lex_for(&fp.animals_lexicon);
    let pwords = lex_for(&fp.pwords_lexicon);
    let macro_path = cfg.corpus_path(&fp.macro_file);
    let macros = if macro_path.exists() { Some(load_macrodescriptors(&macro_path)?) } else { None };
    let fillers = default_fillers();
    let stopwords = default_stopwords();
    let denoised_dir = cfg.output_dir.join(DENOISED_DIR);

    let rows: Vec<RowResult> = manifest
        .recordings
        .par_iter()
        .map(|r| {
            let stem = recording_stem(&r.subject_id, r.task);
            let mut out = Vec::new();
            let cleaned = denoised_dir.join(format!("{stem}.wav"));
            let audio_path = if fp.use_denoised && cleaned.exists() { cleaned } else { manifest.resolve(&r.audio_path) };
            let pauses = read_wav(&audio_path)
                .and_then(|a| vad(&a, &cfg.dsp.vad))
                .and_then(|s| pause_features(&s))
                .map(|p| p.to_vec());
            out.push((FeatureSet::Pauses, pauses));

            let transcript = r
                .transcript_path
                .as_ref()
                .ok_or_else(|| Error::InvalidInput(format!("{stem}: no transcript")))
                .and_then(|p| {
                    let p = manifest.resolve(p);
                    fs::read_to_string(&p).map_err(|e| Error::io(&p, e))
                })
                .map(Transcript::new);
            match &transcript {
                Ok(t) => {
                    out.push((FeatureSet::Ling, Ok(linguistic_features(t, &fillers, &stopwords).to_vec())));
                    let lex = match r.task {
                        TaskKind::Sft => Some(&animals),
                        TaskKind::Pft => Some(&pwords),
                        TaskKind::Ctd => None,
                    };
                    if let Some(lex) = lex {
                        let v = match lex {
                            Ok(lex) => fluency_features(&extract_targets(t, lex), lex, t.tokens.len()).map(|f| f.to_vec()),
                            Err(e) => Err(Error::InvalidInput(format!("lexicon: {e}"))),
                        };
                        out.push((FeatureSet::Fluency, v));
                    }
                }
                Err(e) => {
                    out.push((FeatureSet::Ling, Err(Error::InvalidInput(e.to_string()))));
                }
            }
            if let Some(m) = &macros {
                let v = m
                    .get(&(r.subject_id.clone(), r.task))
                    .map(|d| d.values.to_vec())
                    .ok_or_else(|| Error::MissingFeatures { subject_id: r.subject_id.clone() });
                out.push((FeatureSet::Macro, v));
            }
            (r.subject_id.clone(), r.task, out)
        })
        .collect();

    let mut outcome = CmdOutcome::default();
    let mut tables: BTreeMap<(FeatureSet, TaskKind), BTreeMap<String, Vec<f64>>> = BTreeMap::new();
    for (id, task, feats) in rows {
        for (set, v) in feats {
            match v {
                Ok(v) => {
                    tables.entry((set, task)).or_default().insert(id.clone(), v);
                }
                Err(e) => outcome.failures.push(format!("{id} {task} {set}: {e}")),
            }
        }
    }
    for ((set, task), rows) in &tables {
        let names: Vec<&str> = match set {
            FeatureSet::Pauses => PauseFeatures::NAMES.to_vec(),
            FeatureSet::Ling => LinguisticFeatures::NAMES.to_vec(),
            FeatureSet::Fluency => FluencyFeatures::NAMES.to_vec(),
            _ => vec!["m1", "m2", "m3", "m4"],
        };
        outcome.write(feature_table_path(cfg, *set, *task), &table_to_csv(&names, rows))?;
    }
    Ok(outcome)
}

/// Loads the feature vectors of one system for `ids`. Subjects lacking any
/// part are left out of the map.
fn system_features(
    cfg: &ExperimentConfig,
    sys: &SystemConfig,
    ids: &[String],
    tables: &mut BTreeMap<(FeatureSet, TaskKind), FeatureMap>,
) -> Result<(FeatureMap, Vec<FeatureBlock>)> {
    let mut parts: Vec<BTreeMap<String, Vec<f64>>> = Vec::new();
    let mut blocks = Vec::new();
    for &set in &sys.features {
        let tasks: Vec<TaskKind> = sys.task.tasks().into_iter().filter(|t| set.tasks().contains(t)).collect();
        let mut per_subject: BTreeMap<String, Vec<f64>> = ids.iter().map(|id| (id.clone(), Vec::new())).collect();
        let mut len = None;
        for task in tasks {
            if let Some(src) = set.embedding_source() {
                let dir = cfg.corpus_path(&cfg.features.embeddings_dir);
                for id in ids {
                    let f32_path = dir.join(embedding_file_name(id, task, &src));
                    let path = if f32_path.exists() { f32_path } else { f32_path.with_extension("csv") };
                    match load_embedding(&path, None) {
                        Ok(e) => per_subject.get_mut(id).expect("seeded").extend(e.values),
                        Err(_) => {
                            per_subject.remove(id);
                        }
                    }
                }
            } else {
                if !tables.contains_key(&(set, task)) {
                    let path = feature_table_path(cfg, set, task);
                    if !path.exists() {
                        return Err(Error::InvalidInput(format!(
                            "system `{}`: {} missing; run `features` first",
                            sys.id,
                            path.display()
                        )));
                    }
                    tables.insert((set, task), read_feature_table(&path)?.1);
                }
                let table = &tables[&(set, task)];
                per_subject.retain(|id, v| match table.get(id) {
                    Some(x) => {
                        v.extend_from_slice(x);
                        true
                    }
                    None => false,
                });
            }
        }
        for v in per_subject.values() {
            match len {
                None => len = Some(v.len()),
                Some(l) if l != v.len() => {
                    return Err(Error::DimensionMismatch {
                        expected: l,
                        found: v.len(),
                    })
                }
                _ => {}
            }
        }
        blocks.push(FeatureBlock {
            len: len.unwrap_or(0),
            pca_dim: if set.embedding_source().is_some() { sys.pca } else { None },
        });
        parts.push(per_subject);
    }
    let mut out = FeatureMap::new();
    for id in ids {
        if parts.iter().all(|p| p.contains_key(id)) {
            out.insert(id.clone(), parts.iter().flat_map(|p| p[id].iter().copied()).collect());
        }
    }
    Ok((out, blocks))
}

fn metrics_json(train: &MetricReport, dev: Option<&MetricReport>) -> String {
    let v = serde_json::json!({ "train": train, "dev": dev });
    serde_json::to_string_pretty(&v).expect("metrics serialize") + "\n"
}

/// Cross-validates every roster system and writes its score table.
pub fn cmd_run(cfg: &ExperimentConfig) -> Result<CmdOutcome> {
    let manifest = load_manifest(&cfg.manifest)?;
    let plan = make_folds(&manifest, cfg.folds, cfg.seed)?;
    let train_labels = manifest.labels(Split::Train);
    let dev_labels = manifest.labels(Split::Dev);
    let train_ids = manifest.split_ids(Split::Train);
    let dev_ids = manifest.split_ids(Split::Dev);
    let mut outcome = CmdOutcome::default();

    let mut folds_csv = String::from("subject_id,fold\n");
    for (id, f) in &plan.assignment {
        let _ = writeln!(folds_csv, "{id},{f}");
    }
    outcome.write(cfg.output_dir.join("folds.csv"), &folds_csv)?;

    let mut tables = BTreeMap::new();
    for sys in &cfg.systems {
        let res = (|| -> Result<()> {
            let (train, blocks) = system_features(cfg, sys, &train_ids, &mut tables)?;
            let (dev, _) = system_features(cfg, sys, &dev_ids, &mut tables)?;
            if !cfg.allow_missing {
                if let Some(id) = dev_ids.iter().find(|id| !dev.contains_key(*id)) {
                    return Err(Error::MissingFeatures { subject_id: id.clone() });
                }
            }
            let spec = SystemSpec {
                id: sys.id.clone(),
                classifier: sys.classifier.clone(),
                blocks,
            };
            let r = run_cv(
                &spec,
                &train,
                &train_labels,
                &plan,
                &dev,
                Some(&dev_labels),
                cfg.seed,
                CvOptions {
                    allow_missing: cfg.allow_missing,
                },
            )?;
            let path = cfg.output_dir.join(SCORES_DIR).join(format!("{}.csv", sys.id));
            mkdir(path.parent().expect("has parent"))?;
            write_cv_csv(&path, &r)?;
            outcome.written.push(path);
            outcome.write(
                cfg.output_dir.join(METRICS_DIR).join(format!("{}.json", sys.id)),
                &metrics_json(&r.train_metrics, r.dev_metrics.as_ref()),
            )
        })();
        if let Err(e) = res {
            outcome.failures.push(format!("system `{}`: {e}", sys.id));
        }
    }
    Ok(outcome)
}

fn load_outputs(cfg: &ExperimentConfig) -> Result<Vec<SystemOutput>> {
    cfg.systems
        .iter()
        .map(|s| SystemOutput::read_csv(&cfg.output_dir.join(SCORES_DIR).join(format!("{}.csv", s.id))))
        .collect()
}

/// Exhaustive fusion search, selection, frequency analysis and the report.
pub fn cmd_ensemble(cfg: &ExperimentConfig) -> Result<CmdOutcome> {
    if cfg.systems.len() < 2 {
        return Err(Error::Config(format!("ensemble search needs at least 2 systems, roster has {}", cfg.systems.len())));
    }
    let manifest = load_manifest(&cfg.manifest)?;
    let outputs = load_outputs(cfg)?;
    let opts = SearchOptions {
        min_size: cfg.fusion.min_size,
        max_size: cfg.fusion.max_size,
        softmax: SoftmaxParams {
            l2: cfg.fusion.l2,
            lr: cfg.fusion.lr,
            iters: cfg.fusion.iters,
            ..Default::default()
        },
    };
    let cands = search(&outputs, &manifest.labels(Split::Train), &manifest.labels(Split::Dev), &opts)?;
    let selected = select(&cands, &cfg.selection);
    let ids: Vec<String> = cfg.systems.iter().map(|s| s.id.clone()).collect();
    let freq = frequency(&selected, &ids);

    let mut outcome = CmdOutcome::default();
    outcome.write(cfg.output_dir.join("ensembles.csv"), &ensembles_to_csv(&cands))?;
    outcome.write(cfg.output_dir.join("selected.csv"), &ensembles_to_csv(&selected))?;
    outcome.write(cfg.output_dir.join("frequency.csv"), &frequency_to_csv(&freq))?;
    if freq.empty {
        outcome.failures.push("no ensemble passed the selection criteria; frequencies are all zero".into());
    }
    let report = cmd_report(cfg)?;
    outcome.written.extend(report.written);
    outcome.failures.extend(report.failures);
    Ok(outcome)
}

fn single_system_metrics(cfg: &ExperimentConfig, manifest: &Manifest) -> Result<Vec<(String, MetricReport, MetricReport)>> {
    let train = manifest.labels(Split::Train);
    let dev = manifest.labels(Split::Dev);
    let decisions = |t: &BTreeMap<String, [f64; 3]>, kind| {
        t.iter()
            .map(|(k, s)| (k.clone(), crate::classifiers::SoftDecision::new(*s, kind)))
            .collect::<BTreeMap<_, _>>()
    };
    load_outputs(cfg)?
        .into_iter()
        .map(|o| {
            let tm = evaluate_scores(&decisions(&o.oof, o.kind), &train)?;
            let dm = evaluate_scores(&decisions(&o.dev, o.kind), &dev)?;
            Ok((o.system_id, tm, dm))
        })
        .collect()
}

fn fmt_row(name: &str, t: f64, d: f64, f1: [f64; 3]) -> String {
    format!("| {name} | {t:.2} | {d:.2} | {:.2} | {:.2} | {:.2} |\n", f1[0], f1[1], f1[2])
}

/// Figures and a markdown summary, rebuilt purely from the persisted CSVs.
pub fn cmd_report(cfg: &ExperimentConfig) -> Result<CmdOutcome> {
    let manifest = load_manifest(&cfg.manifest)?;
    let all = read_ensembles_csv(&cfg.output_dir.join("ensembles.csv"))?;
    let selected = read_ensembles_csv(&cfg.output_dir.join("selected.csv"))?;
    let freq = read_frequency_csv(&cfg.output_dir.join("frequency.csv"))?;
    let singles = single_system_metrics(cfg, &manifest)?;
    let mut outcome = CmdOutcome::default();

    let points: Vec<ScatterPoint> = all
        .iter()
        .map(|r| ScatterPoint {
            x: r.train_uaf1,
            y: r.dev_uaf1,
            flagged: r.dev_f1[ClassLabel::Dementia.index()] == 0.0,
        })
        .collect();
    let dir = cfg.output_dir.join(REPORT_DIR);
    outcome.write(
        dir.join("ensembles_scatter.svg"),
        &scatter_svg(&points, "Model ensemble performance (UAF1, %)", "Cross-validation UAF1", "Development UAF1"),
    )?;
    outcome.write(dir.join("frequency.svg"), &bar_svg(&freq, "Frequency in selected ensembles"))?;

    let mut md = String::from("# Results\n\n## Selected ensembles\n\n");
    md.push_str("| Members | CV UAF1 | Dev UAF1 | Dev F1 HC | Dev F1 MCI | Dev F1 Dem |\n|---|---|---|---|---|---|\n");
    for r in selected.iter().take(10) {
        md.push_str(&fmt_row(&r.members.join(" + "), r.train_uaf1, r.dev_uaf1, r.dev_f1));
    }
    let _ = writeln!(md, "\n{} of {} ensembles selected.\n", selected.len(), all.len());
    md.push_str("## Single systems\n\n");
    md.push_str("| System | CV UAF1 | Dev UAF1 | Dev F1 HC | Dev F1 MCI | Dev F1 Dem |\n|---|---|---|---|---|---|\n");
    let top: BTreeSet<&String> = selected.first().map(|r| r.members.iter().collect()).unwrap_or_default();
    for (id, t, d) in &singles {
        let name = if top.contains(id) { format!("{id} *") } else { id.clone() };
        md.push_str(&fmt_row(&name, t.uaf1, d.uaf1, d.f1));
    }
    if !top.is_empty() {
        md.push_str("\n`*` member of the top selected ensemble.\n");
    }
    outcome.write(dir.join("summary.md"), &md)?;

    let mut csv = String::from("system_id,train_uaf1,dev_uaf1,f1_hc,f1_mci,f1_dem\n");
    for (id, t, d) in &singles {
        let [a, b, c] = d.f1;
        let _ = writeln!(csv, "{id},{},{},{a},{b},{c}", t.uaf1, d.uaf1);
    }
    outcome.write(dir.join("systems.csv"), &csv)?;
    Ok(outcome)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct WerCell {
    pub edits: usize,
    pub n_ref: usize,
}

impl WerCell {
    pub fn wer(&self) -> f64 {
        if self.n_ref == 0 {
            0.0
        } else {
            self.edits as f64 / self.n_ref as f64
        }
    }
}

/// Corpus-level WER (total edits over total reference words).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WerTable {
    pub all: WerCell,
    pub per_task: BTreeMap<TaskKind, WerCell>,
}

impl WerTable {
    pub fn to_csv(&self) -> String {
        let cell = |t: TaskKind| self.per_task.get(&t).copied().unwrap_or_default().wer();
        format!(
            "All,CTD,PFT,SFT\n{},{},{},{}\n",
            self.all.wer(),
            cell(TaskKind::Ctd),
            cell(TaskKind::Pft),
            cell(TaskKind::Sft)
        )
    }
}

fn task_of(stem: &str) -> Option<TaskKind> {
    stem.rsplit_once('_').and_then(|(_, t)| t.parse().ok())
}

/// Pairs `*.txt` files by name. Disfluency tokens on both sides are
/// replaced by one placeholder before alignment.
pub fn cmd_wer(ref_dir: &Path, hyp_dir: &Path, disfluency_file: Option<&Path>) -> Result<(WerTable, CmdOutcome)> {
    let disfl: BTreeSet<String> = match disfluency_file {
        Some(p) => crate::features::text::read_word_list(p)?.into_iter().collect(),
        None => default_fillers(),
    };
    let list = |d: &Path| -> Result<BTreeSet<String>> {
        let mut names = BTreeSet::new();
        for e in fs::read_dir(d).map_err(|e| Error::io(d, e))? {
            let e = e.map_err(|e| Error::io(d, e))?;
            let name = e.file_name().to_string_lossy().into_owned();
            if name.ends_with(".txt") {
                names.insert(name);
            }
        }
        Ok(names)
    };
    let refs = list(ref_dir)?;
    let hyps = list(hyp_dir)?;
    let mut table = WerTable::default();
    let mut outcome = CmdOutcome::default();
    for name in refs.symmetric_difference(&hyps) {
        outcome.failures.push(format!("{name}: no matching file in the other directory"));
    }
    for name in refs.intersection(&hyps) {
        let read = |d: &Path| {
            let p = d.join(name);
            fs::read_to_string(&p).map_err(|e| Error::io(&p, e))
        };
        let res = (|| {
            let r = normalize_disfluencies(&tokenize(&read(ref_dir)?), &disfl, DISFLUENCY_PLACEHOLDER);
            let h = normalize_disfluencies(&tokenize(&read(hyp_dir)?), &disfl, DISFLUENCY_PLACEHOLDER);
            wer(&r, &h)
        })();
        match res {
            Ok(rep) => {
                table.all.edits += rep.edits();
                table.all.n_ref += rep.n_ref;
                if let Some(t) = task_of(name.trim_end_matches(".txt")) {
                    let c = table.per_task.entry(t).or_default();
                    c.edits += rep.edits();
                    c.n_ref += rep.n_ref;
                }
            }
            Err(e) => outcome.failures.push(format!("{name}: {e}")),
        }
    }
    Ok((table, outcome))
}

/// Tasks feeding a system, after dropping those its features lack.
pub fn system_tasks(sys: &SystemConfig) -> Vec<TaskKind> {
    let all = sys.task.tasks();
    match sys.task {
        TaskChoice::All => all.into_iter().filter(|t| sys.features.iter().any(|f| f.tasks().contains(t))).collect(),
        _ => all,
    }
}

pub use ensemble::SelectionCriteria;
