//! Rhythm features from a speech/non-speech segmentation, and ingestion of
//! precomputed neural embeddings.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::TaskKind;
use crate::dsp::VadSegmentation;
use crate::error::{Error, Result};

/// Eleven rhythm features of one recording. Pauses are the gaps between
/// consecutive speech intervals; leading and trailing silence is excluded.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PauseFeatures {
    pub total_speech_s: f64,
    pub total_pause_s: f64,
    pub n_pauses: f64,
    pub mean_pause_s: f64,
    pub std_pause_s: f64,
    pub max_pause_s: f64,
    pub pause_rate_per_min: f64,
    pub speech_pause_ratio: f64,
    pub phonation_ratio: f64,
    pub mean_speech_seg_s: f64,
    pub segs_per_min: f64,
}

impl PauseFeatures {
    pub const NAMES: [&'static str; 11] = [
        "total_speech_s",
        "total_pause_s",
        "n_pauses",
        "mean_pause_s",
        "std_pause_s",
        "max_pause_s",
        "pause_rate_per_min",
        "speech_pause_ratio",
        "phonation_ratio",
        "mean_speech_seg_s",
        "segs_per_min",
    ];

    pub fn to_vec(&self) -> Vec<f64> {
        vec![
            self.total_speech_s,
            self.total_pause_s,
            self.n_pauses,
            self.mean_pause_s,
            self.std_pause_s,
            self.max_pause_s,
            self.pause_rate_per_min,
            self.speech_pause_ratio,
            self.phonation_ratio,
            self.mean_speech_seg_s,
            self.segs_per_min,
        ]
    }
}

/// Sorts intervals and merges any that touch or overlap.
fn normalize_intervals(intervals: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut v: Vec<(f64, f64)> = intervals.iter().copied().filter(|(s, e)| e > s).collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(v.len());
    for (s, e) in v {
        match out.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => out.push((s, e)),
        }
    }
    out
}

pub fn pause_features(seg: &VadSegmentation) -> Result<PauseFeatures> {
    let duration = seg.total_duration_s;
    if !(duration > 0.0) {
        return Err(Error::InvalidInput(format!(
            "total duration must be positive, got {duration}"
        )));
    }
    let speech = normalize_intervals(&seg.speech_intervals);
    if speech.is_empty() {
        return Ok(PauseFeatures::default());
    }
    let pauses: Vec<f64> = speech.windows(2).map(|w| w[1].0 - w[0].1).collect();
    let total_speech: f64 = speech.iter().map(|(s, e)| e - s).sum();
    let total_pause: f64 = pauses.iter().sum();
    let n_pauses = pauses.len() as f64;
    let minutes = duration / 60.0;

    let mean_pause = if pauses.is_empty() { 0.0 } else { total_pause / n_pauses };
    let std_pause = if pauses.len() < 2 {
        0.0
    } else {
        (pauses.iter().map(|p| (p - mean_pause).powi(2)).sum::<f64>() / n_pauses).sqrt()
    };
    Ok(PauseFeatures {
        total_speech_s: total_speech,
        total_pause_s: total_pause,
        n_pauses,
        mean_pause_s: mean_pause,
        std_pause_s: std_pause,
        max_pause_s: pauses.iter().copied().fold(0.0, f64::max),
        pause_rate_per_min: n_pauses / minutes,
        speech_pause_ratio: if total_pause > 0.0 { total_speech / total_pause } else { 0.0 },
        phonation_ratio: (total_speech / duration).clamp(0.0, 1.0),
        mean_speech_seg_s: total_speech / speech.len() as f64,
        segs_per_min: speech.len() as f64 / minutes,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EmbeddingSource {
    #[serde(rename = "ECAPA")]
    Ecapa,
    #[serde(rename = "TRILLsson")]
    Trillsson,
    LongFormer,
    Other(String),
}

impl fmt::Display for EmbeddingSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EmbeddingSource::Ecapa => f.write_str("ECAPA"),
            EmbeddingSource::Trillsson => f.write_str("TRILLsson"),
            EmbeddingSource::LongFormer => f.write_str("LongFormer"),
            EmbeddingSource::Other(s) => f.write_str(s),
        }
    }
}

impl FromStr for EmbeddingSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "ecapa" => EmbeddingSource::Ecapa,
            "trillsson" => EmbeddingSource::Trillsson,
            "longformer" => EmbeddingSource::LongFormer,
            "" => return Err("empty embedding source".into()),
            _ => EmbeddingSource::Other(s.to_string()),
        })
    }
}

/// Task of an embedding; `All` marks a concatenation over the three tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TaskScope {
    Task(TaskKind),
    All,
}

impl fmt::Display for TaskScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaskScope::Task(t) => t.fmt(f),
            TaskScope::All => f.write_str("ALL"),
        }
    }
}

impl FromStr for TaskScope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "ALL" | "All" | "all" => Ok(TaskScope::All),
            other => other.parse().map(TaskScope::Task),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub source: EmbeddingSource,
    pub task: TaskScope,
}

/// Embedding file name for one (subject, task, source).
pub fn embedding_file_name(subject_id: &str, task: TaskKind, source: &EmbeddingSource) -> String {
    format!("{subject_id}_{task}_{source}.f32")
}

/// Loads `<subject>_<task>_<source>.f32` (little-endian f32) or the
/// `.csv` alternative with header-less `index,value` rows. Tags come from the
/// file name.
pub fn load_embedding(path: &Path, expected_dim: Option<usize>) -> Result<EmbeddingVector> {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::InvalidInput(format!("bad embedding path {}", path.display())))?;
    let mut parts = stem.rsplitn(3, '_');
    let (source, task) = match (parts.next(), parts.next(), parts.next()) {
        (Some(src), Some(task), Some(_subject)) => (src, task),
        _ => {
            return Err(Error::InvalidInput(format!(
                "embedding file name `{stem}` is not <subject>_<task>_<source>"
            )))
        }
    };
    let source: EmbeddingSource = source.parse().map_err(Error::InvalidInput)?;
    let task: TaskScope = task.parse().map_err(Error::InvalidInput)?;

    let values = match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => read_csv_values(path)?,
        _ => {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            if bytes.len() % 4 != 0 {
                return Err(Error::InvalidInput(format!(
                    "{}: length {} is not a multiple of 4",
                    path.display(),
                    bytes.len()
                )));
            }
            bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect()
        }
    };
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("{} at index {i}", path.display())));
    }
    if let Some(d) = expected_dim {
        if values.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: values.len(),
            });
        }
    }
    if values.is_empty() {
        return Err(Error::InvalidInput(format!("{}: empty embedding", path.display())));
    }
    Ok(EmbeddingVector {
        values,
        source,
        task,
    })
}

fn read_csv_values(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::malformed(path, ln as u64 + 1, format!("expected `index,value`: {line}"));
        let (idx, val) = line.split_once(',').ok_or_else(bad)?;
        let idx: usize = idx.trim().parse().map_err(|_| bad())?;
        let val: f64 = val.trim().parse().map_err(|_| bad())?;
        rows.push((idx, val));
    }
    rows.sort_by_key(|r| r.0);
    if rows.iter().enumerate().any(|(i, r)| r.0 != i) {
        return Err(Error::InvalidInput(format!(
            "{}: indices are not 0..n",
            path.display()
        )));
    }
    Ok(rows.into_iter().map(|r| r.1).collect())
}

/// Writes an embedding as little-endian f32.
pub fn write_embedding(path: &Path, values: &[f64]) -> Result<()> {
    let bytes: Vec<u8> = values
        .iter()
        .flat_map(|&v| (v as f32).to_le_bytes())
        .collect();
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Concatenates one embedding per task in CTD, PFT, SFT order.
pub fn concat_embeddings(per_task: &BTreeMap<TaskKind, EmbeddingVector>) -> Result<EmbeddingVector> {
    let mut values = Vec::new();
    let mut source: Option<&EmbeddingSource> = None;
    for task in TaskKind::ALL {
        let e = per_task.get(&task).ok_or(Error::MissingTask(task))?;
        match source {
            Some(s) if *s != e.source => return Err(Error::MixedSources),
            _ => source = Some(&e.source),
        }
        values.extend_from_slice(&e.values);
    }
    Ok(EmbeddingVector {
        values,
        source: source.cloned().expect("three tasks present"),
        task: TaskScope::All,
    })
}
