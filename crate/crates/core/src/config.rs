//! Experiment configuration (TOML).

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classifiers::ClassifierSpec;
use crate::corpus::synth::{ANIMALS_FILE, EMBEDDING_DIR, LEXICON_DIR, MACRO_FILE, PWORDS_FILE, VECTORS_FILE};
use crate::corpus::TaskKind;
use crate::dsp::DenoiseConfig;
use crate::ensemble::SelectionCriteria;
use crate::error::{Error, Result};
use crate::features::EmbeddingSource;

/// Feature producers a system can draw from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSet {
    Pauses,
    Fluency,
    Ling,
    Macro,
    Ecapa,
    Trillsson,
    Longformer,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 7] = [
        FeatureSet::Pauses,
        FeatureSet::Fluency,
        FeatureSet::Ling,
        FeatureSet::Macro,
        FeatureSet::Ecapa,
        FeatureSet::Trillsson,
        FeatureSet::Longformer,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSet::Pauses => "pauses",
            FeatureSet::Fluency => "fluency",
            FeatureSet::Ling => "ling",
            FeatureSet::Macro => "macro",
            FeatureSet::Ecapa => "ecapa",
            FeatureSet::Trillsson => "trillsson",
            FeatureSet::Longformer => "longformer",
        }
    }

    pub fn embedding_source(self) -> Option<EmbeddingSource> {
        match self {
            FeatureSet::Ecapa => Some(EmbeddingSource::Ecapa),
            FeatureSet::Trillsson => Some(EmbeddingSource::Trillsson),
            FeatureSet::Longformer => Some(EmbeddingSource::LongFormer),
            _ => None,
        }
    }

    /// Tasks the producer yields vectors for.
    pub fn tasks(self) -> &'static [TaskKind] {
        match self {
            FeatureSet::Fluency => &[TaskKind::Pft, TaskKind::Sft],
            _ => &TaskKind::ALL,
        }
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        FeatureSet::ALL
            .into_iter()
            .find(|f| f.as_str() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| format!("unknown feature set `{s}`"))
    }
}

/// One task or all three concatenated in CTD, PFT, SFT order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskChoice {
    #[serde(rename = "CTD")]
    Ctd,
    #[serde(rename = "PFT")]
    Pft,
    #[serde(rename = "SFT")]
    Sft,
    #[serde(rename = "ALL")]
    All,
}

impl TaskChoice {
    pub fn tasks(self) -> Vec<TaskKind> {
        match self {
            TaskChoice::Ctd => vec![TaskKind::Ctd],
            TaskChoice::Pft => vec![TaskKind::Pft],
            TaskChoice::Sft => vec![TaskKind::Sft],
            TaskChoice::All => TaskKind::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub id: String,
    pub features: Vec<FeatureSet>,
    pub task: TaskChoice,
    /// PCA output size for each embedding block, fit per training fold.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pca: Option<usize>,
    pub classifier: ClassifierSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeaturePaths {
    pub animals_lexicon: PathBuf,
    pub pwords_lexicon: PathBuf,
    pub word_vectors: PathBuf,
    pub macro_file: PathBuf,
    pub embeddings_dir: PathBuf,
    /// Compute pause features from denoised audio when it exists.
    pub use_denoised: bool,
}

impl Default for FeaturePaths {
    fn default() -> Self {
        FeaturePaths {
            animals_lexicon: Path::new(LEXICON_DIR).join(ANIMALS_FILE),
            pwords_lexicon: Path::new(LEXICON_DIR).join(PWORDS_FILE),
            word_vectors: Path::new(LEXICON_DIR).join(VECTORS_FILE),
            macro_file: PathBuf::from(MACRO_FILE),
            embeddings_dir: PathBuf::from(EMBEDDING_DIR),
            use_denoised: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    pub min_size: usize,
    pub max_size: usize,
    pub l2: f64,
    pub lr: f64,
    pub iters: usize,
}

impl Default for FusionConfig {
    fn default() -> Self {
        let s = crate::classifiers::SoftmaxParams::default();
        FusionConfig {
            min_size: 2,
            max_size: 6,
            l2: s.l2,
            lr: s.lr,
            iters: s.iters,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Corpus directory, or its subjects file. Feature paths are relative
    /// to the corpus directory.
    pub manifest: PathBuf,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub folds: usize,
    /// Drop subjects lacking features instead of failing the run.
    pub allow_missing: bool,
    pub dsp: DenoiseConfig,
    pub features: FeaturePaths,
    pub fusion: FusionConfig,
    pub selection: SelectionCriteria,
    #[serde(rename = "system")]
    pub systems: Vec<SystemConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            manifest: PathBuf::from("corpus"),
            output_dir: PathBuf::from("results"),
            seed: 7,
            folds: 5,
            allow_missing: false,
            dsp: DenoiseConfig::default(),
            features: FeaturePaths::default(),
            fusion: FusionConfig::default(),
            selection: SelectionCriteria::default(),
            systems: default_roster(),
        }
    }
}

fn sys(id: &str, features: &[FeatureSet], task: TaskChoice, pca: Option<usize>, classifier: ClassifierSpec) -> SystemConfig {
    SystemConfig {
        id: id.to_string(),
        features: features.to_vec(),
        task,
        pca,
        classifier,
    }
}

/// Nine systems over every feature family.
pub fn default_roster() -> Vec<SystemConfig> {
    use FeatureSet::*;
    let svm = |c| ClassifierSpec::Svm { c, epochs: 200 };
    vec![
        sys("fluency_sft_svm", &[Fluency], TaskChoice::Sft, None, svm(0.1)),
        sys("pauses_macro_pft_svm", &[Pauses, Macro], TaskChoice::Pft, None, svm(0.1)),
        sys("pauses_macro_sft_svm", &[Pauses, Macro], TaskChoice::Sft, None, svm(0.1)),
        sys("ecapa_sft_ffp", &[Ecapa], TaskChoice::Sft, None, ClassifierSpec::Ffp { k: 24, config: Default::default() }),
        sys("ecapa_all_svm", &[Ecapa], TaskChoice::All, Some(10), svm(1e-4)),
        sys("ecapa_trillsson_all_svm", &[Ecapa, Trillsson], TaskChoice::All, Some(10), svm(1e-4)),
        sys(
            "ling_ctd_rf",
            &[Ling],
            TaskChoice::Ctd,
            None,
            ClassifierSpec::Forest {
                n_trees: 100,
                max_depth: 4,
                min_leaf: 2,
                bootstrap: true,
                max_features: Default::default(),
            },
        ),
        sys("pauses_ctd_dt", &[Pauses], TaskChoice::Ctd, None, ClassifierSpec::Tree { max_depth: 3, min_leaf: 4 }),
        sys("longformer_ctd_lr", &[Longformer], TaskChoice::Ctd, None, ClassifierSpec::Softmax { l2: 1e-2, lr: 0.1, iters: 500 }),
    ]
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses `path`; relative manifest and output paths are taken from the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.manifest, &mut cfg.output_dir] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::Config(format!("folds must be >= 2, got {}", self.folds)));
        }
        self.selection.validate()?;
        let f = &self.fusion;
        if f.min_size < 1 || f.max_size < f.min_size {
            return Err(Error::Config(format!("fusion sizes {}..={} invalid", f.min_size, f.max_size)));
        }
        let mut ids = BTreeSet::new();
        for s in &self.systems {
            if s.id.is_empty() || s.id.contains(['+', ',', '/', '\\']) {
                return Err(Error::Config(format!("invalid system id `{}`", s.id)));
            }
            if !ids.insert(s.id.as_str()) {
                return Err(Error::Config(format!("duplicate system id `{}`", s.id)));
            }
            if s.features.is_empty() {
                return Err(Error::Config(format!("system `{}` has no features", s.id)));
            }
            for feat in &s.features {
                let tasks = s.task.tasks();
                if s.task != TaskChoice::All && !feat.tasks().contains(&tasks[0]) {
                    return Err(Error::Config(format!(
                        "system `{}`: feature `{feat}` is not available for task {}",
                        s.id, tasks[0]
                    )));
                }
            }
            if s.pca == Some(0) {
                return Err(Error::Config(format!("system `{}`: pca must be >= 1", s.id)));
            }
        }
        Ok(())
    }

    /// Directory holding the manifest files.
    pub fn corpus_dir(&self) -> PathBuf {
        if self.manifest.is_dir() {
            self.manifest.clone()
        } else {
            self.manifest.parent().map(Path::to_path_buf).unwrap_or_default()
        }
    }

    pub fn corpus_path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.corpus_dir().join(p)
        }
    }
}
