//! Subjects, recordings, manifest IO and subject-level fold planning.

pub mod synth;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use synth::{synth_corpus, synth_corpus_with, SynthSpec};

pub const SUBJECTS_FILE: &str = "subjects.csv";
pub const RECORDINGS_FILE: &str = "recordings.csv";

/// Diagnostic class. Encoded 0/1/2 in every score table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ClassLabel {
    #[serde(rename = "HC")]
    Hc,
    #[serde(rename = "MCI")]
    Mci,
    Dementia,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 3] = [ClassLabel::Hc, ClassLabel::Mci, ClassLabel::Dementia];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ClassLabel::Hc => "HC",
            ClassLabel::Mci => "MCI",
            ClassLabel::Dementia => "Dementia",
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "HC" | "hc" => Ok(ClassLabel::Hc),
            "MCI" | "mci" => Ok(ClassLabel::Mci),
            "Dementia" | "dementia" | "Dem" => Ok(ClassLabel::Dementia),
            other => Err(format!("unknown label `{other}`")),
        }
    }
}

/// Elicitation task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TaskKind {
    #[serde(rename = "CTD")]
    Ctd,
    #[serde(rename = "PFT")]
    Pft,
    #[serde(rename = "SFT")]
    Sft,
}

impl TaskKind {
    pub const ALL: [TaskKind; 3] = [TaskKind::Ctd, TaskKind::Pft, TaskKind::Sft];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Ctd => "CTD",
            TaskKind::Pft => "PFT",
            TaskKind::Sft => "SFT",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "CTD" => Ok(TaskKind::Ctd),
            "PFT" => Ok(TaskKind::Pft),
            "SFT" => Ok(TaskKind::Sft),
            other => Err(format!("unknown task `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Gender {
    Male,
    Female,
    Unreported,
}

impl Gender {
    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Male => "Male",
            Gender::Female => "Female",
            Gender::Unreported => "Unreported",
        }
    }
}

impl FromStr for Gender {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "Male" | "male" | "M" => Ok(Gender::Male),
            "Female" | "female" | "F" => Ok(Gender::Female),
            "Unreported" | "unreported" | "" | "U" => Ok(Gender::Unreported),
            other => Err(format!("unknown gender `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubjectRecord {
    pub subject_id: String,
    pub gender: Gender,
    pub age: u32,
    /// Absent only for test-split subjects.
    pub label: Option<ClassLabel>,
    pub mmse: Option<u8>,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordingRef {
    pub subject_id: String,
    pub task: TaskKind,
    pub audio_path: PathBuf,
    pub transcript_path: Option<PathBuf>,
}

/// Subjects plus recordings. Relative paths in recordings resolve against
/// `base_dir`, the directory holding the manifest files.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    pub subjects: Vec<SubjectRecord>,
    pub recordings: Vec<RecordingRef>,
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn subject(&self, id: &str) -> Option<&SubjectRecord> {
        self.subjects.iter().find(|s| s.subject_id == id)
    }

    pub fn recording(&self, id: &str, task: TaskKind) -> Option<&RecordingRef> {
        self.recordings
            .iter()
            .find(|r| r.subject_id == id && r.task == task)
    }

    pub fn split_ids(&self, split: Split) -> Vec<String> {
        self.subjects
            .iter()
            .filter(|s| s.split == split)
            .map(|s| s.subject_id.clone())
            .collect()
    }

    /// Labels of every labeled subject in `split`, keyed by id.
    pub fn labels(&self, split: Split) -> BTreeMap<String, ClassLabel> {
        self.subjects
            .iter()
            .filter(|s| s.split == split)
            .filter_map(|s| s.label.map(|l| (s.subject_id.clone(), l)))
            .collect()
    }

    /// Writes `subjects.csv` and `recordings.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut s = String::from("subject_id,gender,age,label,mmse,split\n");
        for r in &self.subjects {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.subject_id,
                r.gender.as_str(),
                r.age,
                r.label.map(|l| l.as_str()).unwrap_or(""),
                r.mmse.map(|m| m.to_string()).unwrap_or_default(),
                r.split.as_str()
            ));
        }
        let path = dir.join(SUBJECTS_FILE);
        fs::write(&path, s).map_err(|e| Error::io(&path, e))?;

        let mut s = String::from("subject_id,task,audio_path,transcript_path\n");
        for r in &self.recordings {
            s.push_str(&format!(
                "{},{},{},{}\n",
                r.subject_id,
                r.task,
                r.audio_path.display(),
                r.transcript_path
                    .as_ref()
                    .map(|p| p.display().to_string())
                    .unwrap_or_default()
            ));
        }
        let path = dir.join(RECORDINGS_FILE);
        fs::write(&path, s).map_err(|e| Error::io(&path, e))
    }
}

/// Loads a manifest from a directory holding `subjects.csv` and
/// `recordings.csv`, or from the subjects file itself (the recordings file is
/// then looked up next to it).
pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let (subjects_path, base_dir) = if path.is_dir() {
        (path.join(SUBJECTS_FILE), path.to_path_buf())
    } else {
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        (path.to_path_buf(), dir)
    };
    if !subjects_path.exists() {
        return Err(Error::io(
            &subjects_path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "manifest not found"),
        ));
    }
    let recordings_path = base_dir.join(RECORDINGS_FILE);

    let subjects = read_subjects(&subjects_path)?;
    let recordings = if recordings_path.exists() {
        read_recordings(&recordings_path, &subjects)?
    } else {
        Vec::new()
    };
    Ok(Manifest {
        subjects,
        recordings,
        base_dir,
    })
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn csv_line(err: &csv::Error) -> u64 {
    err.position().map(|p| p.line()).unwrap_or(0)
}

fn read_subjects(path: &Path) -> Result<Vec<SubjectRecord>> {
    let mut rdr = csv_reader(path)?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::malformed(path, csv_line(&e), e.to_string()))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let bad = |msg: String| Error::malformed(path, line, msg);
        if rec.len() != 6 {
            return Err(bad(format!("expected 6 fields, found {}", rec.len())));
        }
        let subject_id = rec[0].to_string();
        if subject_id.is_empty() {
            return Err(bad("empty subject_id".into()));
        }
        let gender: Gender = rec[1].parse().map_err(bad)?;
        let age: u32 = rec[2]
            .parse()
            .map_err(|_| bad(format!("invalid age `{}`", &rec[2])))?;
        let label = match &rec[3] {
            "" => None,
            s => Some(s.parse::<ClassLabel>().map_err(bad)?),
        };
        let mmse = match &rec[4] {
            "" => None,
            s => {
                let m: u8 = s.parse().map_err(|_| bad(format!("invalid mmse `{s}`")))?;
                if m > 30 {
                    return Err(bad(format!("mmse {m} outside [0, 30]")));
                }
                Some(m)
            }
        };
        let split: Split = rec[5].parse().map_err(bad)?;
        if label.is_none() && split != Split::Test {
            return Err(bad(format!("{} subject without label", split.as_str())));
        }
        if !seen.insert(subject_id.clone()) {
            return Err(Error::DuplicateSubject(subject_id));
        }
        out.push(SubjectRecord {
            subject_id,
            gender,
            age,
            label,
            mmse,
            split,
        });
    }
    Ok(out)
}

fn read_recordings(path: &Path, subjects: &[SubjectRecord]) -> Result<Vec<RecordingRef>> {
    let known: HashSet<&str> = subjects.iter().map(|s| s.subject_id.as_str()).collect();
    let mut rdr = csv_reader(path)?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::malformed(path, csv_line(&e), e.to_string()))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let bad = |msg: String| Error::malformed(path, line, msg);
        if rec.len() != 4 {
            return Err(bad(format!("expected 4 fields, found {}", rec.len())));
        }
        let subject_id = rec[0].to_string();
        let task: TaskKind = rec[1].parse().map_err(bad)?;
        if !known.contains(subject_id.as_str()) {
            return Err(Error::UnknownSubject {
                path: path.to_path_buf(),
                line,
                subject_id,
            });
        }
        if !seen.insert((subject_id.clone(), task)) {
            return Err(bad(format!("second {task} recording for `{subject_id}`")));
        }
        if rec[2].is_empty() {
            return Err(bad("empty audio_path".into()));
        }
        out.push(RecordingRef {
            subject_id,
            task,
            audio_path: PathBuf::from(&rec[2]),
            transcript_path: match &rec[3] {
                "" => None,
                s => Some(PathBuf::from(s)),
            },
        });
    }
    Ok(out)
}

/// Subject-level assignment of training subjects to `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignment: BTreeMap<String, usize>,
}

impl FoldPlan {
    pub fn fold_of(&self, subject_id: &str) -> Option<usize> {
        self.assignment.get(subject_id).copied()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in self.assignment.values() {
            sizes[f] += 1;
        }
        sizes
    }

    /// Subjects held out in fold `f`, in id order.
    pub fn held_out(&self, f: usize) -> Vec<&str> {
        self.assignment
            .iter()
            .filter(|(_, &g)| g == f)
            .map(|(id, _)| id.as_str())
            .collect()
    }

    /// Subjects used for training when fold `f` is held out, in id order.
    pub fn training(&self, f: usize) -> Vec<&str> {
        self.assignment
            .iter()
            .filter(|(_, &g)| g != f)
            .map(|(id, _)| id.as_str())
            .collect()
    }
}

/// Stratified subject-level folds over the train split.
///
/// Subjects are grouped by (label, gender); each stratum is sorted by id,
/// shuffled with the seeded generator, and dealt round-robin. The dealing
/// cursor carries over between strata so overall fold sizes also stay within
/// one of each other.
pub fn make_folds(manifest: &Manifest, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidInput(format!("fold count must be >= 2, got {k}")));
    }
    let mut strata: BTreeMap<(ClassLabel, Gender), Vec<&str>> = BTreeMap::new();
    for s in manifest.subjects.iter().filter(|s| s.split == Split::Train) {
        let label = s.label.ok_or_else(|| {
            Error::InvalidInput(format!("train subject `{}` has no label", s.subject_id))
        })?;
        strata
            .entry((label, s.gender))
            .or_default()
            .push(s.subject_id.as_str());
    }
    let n: usize = strata.values().map(Vec::len).sum();
    if n < k {
        return Err(Error::TooFewSubjects { n, k });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = BTreeMap::new();
    let mut cursor = 0usize;
    for ids in strata.values_mut() {
        ids.sort_unstable();
        ids.shuffle(&mut rng);
        for id in ids.iter() {
            assignment.insert((*id).to_string(), cursor % k);
            cursor += 1;
        }
    }
    Ok(FoldPlan { k, assignment })
}

/// Per-fold counts of each (label, gender) stratum present in the plan.
pub fn stratum_counts(
    manifest: &Manifest,
    plan: &FoldPlan,
) -> BTreeMap<(ClassLabel, Gender), Vec<usize>> {
    let mut out: BTreeMap<(ClassLabel, Gender), Vec<usize>> = BTreeMap::new();
    for s in &manifest.subjects {
        if let (Some(f), Some(label)) = (plan.fold_of(&s.subject_id), s.label) {
            out.entry((label, s.gender)).or_insert_with(|| vec![0; plan.k])[f] += 1;
        }
    }
    out
}

/// Subjects of `split` present in the manifest, as a set.
pub fn id_set(manifest: &Manifest, split: Split) -> BTreeSet<String> {
    manifest.split_ids(split).into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn subject(id: &str, label: ClassLabel, gender: Gender) -> SubjectRecord {
        SubjectRecord {
            subject_id: id.into(),
            gender,
            age: 70,
            label: Some(label),
            mmse: None,
            split: Split::Train,
        }
    }

    fn write(dir: &Path, name: &str, body: &str) {
        fs::write(dir.join(name), body).unwrap();
    }

    #[test]
    fn empty_manifest_loads() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), SUBJECTS_FILE, "subject_id,gender,age,label,mmse,split\n");
        write(dir.path(), RECORDINGS_FILE, "subject_id,task,audio_path,transcript_path\n");
        let m = load_manifest(dir.path()).unwrap();
        assert!(m.subjects.is_empty());
        assert!(m.recordings.is_empty());
    }

    #[test]
    fn two_subjects_three_tasks() {
        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path(),
            SUBJECTS_FILE,
            "subject_id,gender,age,label,mmse,split\ns1,Male,70,HC,29,train\ns2,Female,65,MCI,,dev\n",
        );
        let mut rec = String::from("subject_id,task,audio_path,transcript_path\n");
        for s in ["s1", "s2"] {
            for t in ["CTD", "PFT", "SFT"] {
                rec.push_str(&format!("{s},{t},audio/{s}_{t}.wav,\n"));
            }
        }
        write(dir.path(), RECORDINGS_FILE, &rec);
        let m = load_manifest(&dir.path().join(SUBJECTS_FILE)).unwrap();
        assert_eq!(m.subjects.len(), 2);
        assert_eq!(m.recordings.len(), 6);
        assert_eq!(m.subjects[0].mmse, Some(29));
        assert_eq!(m.subjects[1].mmse, None);
        assert_eq!(m.recordings[3].subject_id, "s2");
        assert_eq!(m.recordings[3].task, TaskKind::Ctd);
    }

    #[test]
    fn bad_task_names_line() {
        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path(),
            SUBJECTS_FILE,
            "subject_id,gender,age,label,mmse,split\ns1,Male,70,HC,,train\n",
        );
        write(
            dir.path(),
            RECORDINGS_FILE,
            "subject_id,task,audio_path,transcript_path\ns1,CTD,a.wav,\ns1,XYZ,b.wav,\n",
        );
        match load_manifest(dir.path()) {
            Err(Error::Malformed { line, msg, .. }) => {
                assert_eq!(line, 3);
                assert!(msg.contains("XYZ"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_duplicates_unknown_and_mmse_range() {
        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path(),
            SUBJECTS_FILE,
            "subject_id,gender,age,label,mmse,split\ns1,Male,70,HC,,train\ns1,Male,70,HC,,train\n",
        );
        assert!(matches!(load_manifest(dir.path()), Err(Error::DuplicateSubject(_))));

        write(
            dir.path(),
            SUBJECTS_FILE,
            "subject_id,gender,age,label,mmse,split\ns1,Male,70,HC,31,train\n",
        );
        assert!(matches!(load_manifest(dir.path()), Err(Error::Malformed { line: 2, .. })));

        write(
            dir.path(),
            SUBJECTS_FILE,
            "subject_id,gender,age,label,mmse,split\ns1,Male,70,HC,,train\n",
        );
        write(
            dir.path(),
            RECORDINGS_FILE,
            "subject_id,task,audio_path,transcript_path\nghost,CTD,a.wav,\n",
        );
        assert!(matches!(load_manifest(dir.path()), Err(Error::UnknownSubject { .. })));
    }

    #[test]
    fn missing_manifest_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_manifest(&dir.path().join("nope.csv")), Err(Error::Io { .. })));
    }

    #[test]
    fn write_then_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = Manifest {
            subjects: vec![subject("a", ClassLabel::Hc, Gender::Unreported)],
            recordings: vec![RecordingRef {
                subject_id: "a".into(),
                task: TaskKind::Sft,
                audio_path: "x.wav".into(),
                transcript_path: Some("x.txt".into()),
            }],
            base_dir: dir.path().to_path_buf(),
        };
        m.write(dir.path()).unwrap();
        assert_eq!(load_manifest(dir.path()).unwrap(), m);
    }

    #[test]
    fn divisible_strata_fill_every_fold_once() {
        let mut subjects = Vec::new();
        for i in 0..5 {
            subjects.push(subject(&format!("h{i}"), ClassLabel::Hc, Gender::Male));
            subjects.push(subject(&format!("m{i}"), ClassLabel::Mci, Gender::Male));
        }
        let m = Manifest {
            subjects,
            ..Default::default()
        };
        let plan = make_folds(&m, 5, 3).unwrap();
        for counts in stratum_counts(&m, &plan).values() {
            assert_eq!(counts, &vec![1; 5]);
        }
    }

    #[test]
    fn table_train_split_fold_sizes() {
        // 60 HC (23 M / 37 F), 44 MCI (22 / 22), 12 Dementia (8 / 4).
        let mut subjects = Vec::new();
        for (label, g, n) in [
            (ClassLabel::Hc, Gender::Male, 23),
            (ClassLabel::Hc, Gender::Female, 37),
            (ClassLabel::Mci, Gender::Male, 22),
            (ClassLabel::Mci, Gender::Female, 22),
            (ClassLabel::Dementia, Gender::Male, 8),
            (ClassLabel::Dementia, Gender::Female, 4),
        ] {
            for i in 0..n {
                subjects.push(subject(&format!("{label}-{g:?}-{i:02}"), label, g));
            }
        }
        let m = Manifest {
            subjects,
            ..Default::default()
        };
        let plan = make_folds(&m, 5, 11).unwrap();
        let mut sizes = plan.fold_sizes();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        assert_eq!(sizes, vec![24, 23, 23, 23, 23]);
        let mut dem = [0usize; 5];
        for (&(label, _), counts) in &stratum_counts(&m, &plan) {
            if label == ClassLabel::Dementia {
                for (f, c) in counts.iter().enumerate() {
                    dem[f] += c;
                }
            }
        }
        assert!(dem.iter().all(|&c| c == 2 || c == 3), "{dem:?}");
        assert_eq!(plan, make_folds(&m, 5, 11).unwrap());
    }

    #[test]
    fn too_few_subjects() {
        let m = Manifest {
            subjects: vec![subject("a", ClassLabel::Hc, Gender::Male)],
            ..Default::default()
        };
        assert!(matches!(make_folds(&m, 5, 0), Err(Error::TooFewSubjects { n: 1, k: 5 })));
        assert!(make_folds(&m, 1, 0).is_err());
    }
}
