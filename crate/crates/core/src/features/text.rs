//! Transcript tokenization, fluency-task features, general linguistic
//! features and macrodescriptor ingestion.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::TaskKind;
use crate::error::{Error, Result};

pub const DEFAULT_FILLERS: [&str; 6] = ["um", "uh", "hmm", "er", "erm", "mm"];

/// Placeholder substituted for disfluencies before WER scoring.
pub const DISFLUENCY_PLACEHOLDER: &str = "<disfl>";

pub const DEFAULT_STOPWORDS: [&str; 48] = [
    "a", "an", "the", "and", "or", "but", "so", "then", "of", "to", "in", "on", "at", "for",
    "with", "from", "by", "is", "are", "was", "were", "be", "been", "it", "it's", "this", "that",
    "there", "here", "he", "she", "they", "we", "i", "you", "his", "her", "their", "my", "me",
    "not", "no", "yes", "do", "does", "like", "just", "oh",
];

/// Lowercases and splits on runs of non-alphabetic characters. Apostrophes
/// are kept when they sit between two letters.
pub fn tokenize(raw: &str) -> Vec<String> {
    let chars: Vec<char> = raw.chars().collect();
    let mut tokens = Vec::new();
    let mut cur = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphabetic() {
            cur.extend(c.to_lowercase());
        } else if (c == '\'' || c == '’')
            && !cur.is_empty()
            && chars.get(i + 1).is_some_and(|n| n.is_alphabetic())
        {
            cur.push('\'');
        } else if !cur.is_empty() {
            tokens.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        tokens.push(cur);
    }
    tokens
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transcript {
    pub raw: String,
    pub tokens: Vec<String>,
}

impl Transcript {
    pub fn new(raw: impl Into<String>) -> Self {
        let raw = raw.into();
        let tokens = tokenize(&raw);
        Transcript { raw, tokens }
    }
}

/// Target words for a fluency task with unit-normalized word vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetLexicon {
    pub words: BTreeSet<String>,
    pub embeddings: HashMap<String, Vec<f64>>,
}

impl TargetLexicon {
    /// Builds a lexicon; every word needs a non-zero vector, which is
    /// normalized to unit length. Vectors for non-member words are kept so
    /// embeddings can be shared across lexicons.
    pub fn new(
        words: impl IntoIterator<Item = String>,
        vectors: HashMap<String, Vec<f64>>,
    ) -> Result<Self> {
        let words: BTreeSet<String> = words.into_iter().map(|w| w.to_lowercase()).collect();
        if words.is_empty() {
            return Err(Error::InvalidInput("empty target lexicon".into()));
        }
        let mut embeddings = HashMap::with_capacity(vectors.len());
        for (w, v) in vectors {
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !(norm > 0.0 && norm.is_finite()) {
                return Err(Error::InvalidInput(format!("zero or non-finite vector for `{w}`")));
            }
            embeddings.insert(w.to_lowercase(), v.iter().map(|x| x / norm).collect());
        }
        if let Some(w) = words.iter().find(|w| !embeddings.contains_key(*w)) {
            return Err(Error::MissingEmbedding(w.clone()));
        }
        Ok(TargetLexicon { words, embeddings })
    }

    /// Reads a one-word-per-line lexicon and a `word,v1,...,vd` table.
    pub fn load(lexicon: &Path, table: &Path) -> Result<Self> {
        let words = read_word_list(lexicon)?;
        let text = fs::read_to_string(table).map_err(|e| Error::io(table, e))?;
        let mut vectors = HashMap::new();
        for (ln, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let word = parts.next().unwrap_or_default().trim().to_string();
            let vals: std::result::Result<Vec<f64>, _> =
                parts.map(|p| p.trim().parse::<f64>()).collect();
            let vals = vals.map_err(|e| Error::malformed(table, ln as u64 + 1, e.to_string()))?;
            if word.is_empty() || vals.is_empty() {
                return Err(Error::malformed(table, ln as u64 + 1, "expected word,v1,...,vd"));
            }
            vectors.insert(word, vals);
        }
        Self::new(words, vectors)
    }

    pub fn contains(&self, w: &str) -> bool {
        self.words.contains(w)
    }

    fn vector(&self, w: &str) -> Result<&[f64]> {
        self.embeddings
            .get(w)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::MissingEmbedding(w.to_string()))
    }
}

/// One word per line; blank lines and `#` comments skipped.
pub fn read_word_list(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect())
}

/// Lexicon members of the transcript, in utterance order, duplicates kept.
pub fn extract_targets(t: &Transcript, lex: &TargetLexicon) -> Vec<String> {
    t.tokens.iter().filter(|w| lex.contains(w)).cloned().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FluencyFeatures {
    pub n_unique_targets: f64,
    pub n_target_repetitions: f64,
    pub mean_adjacent_cosine: f64,
    pub std_adjacent_cosine: f64,
    pub n_targets_total: f64,
    pub target_token_fraction: f64,
}

impl FluencyFeatures {
    pub const NAMES: [&'static str; 6] = [
        "n_unique_targets",
        "n_target_repetitions",
        "mean_adjacent_cosine",
        "std_adjacent_cosine",
        "n_targets_total",
        "target_token_fraction",
    ];

    pub fn to_vec(&self) -> Vec<f64> {
        vec![
            self.n_unique_targets,
            self.n_target_repetitions,
            self.mean_adjacent_cosine,
            self.std_adjacent_cosine,
            self.n_targets_total,
            self.target_token_fraction,
        ]
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn fluency_features(
    targets: &[String],
    lex: &TargetLexicon,
    n_tokens_total: usize,
) -> Result<FluencyFeatures> {
    let vectors: Vec<&[f64]> = targets.iter().map(|w| lex.vector(w)).collect::<Result<_>>()?;
    let unique: BTreeSet<&String> = targets.iter().collect();
    let cosines: Vec<f64> = vectors
        .windows(2)
        .map(|w| {
            w[0].iter()
                .zip(w[1])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                .clamp(-1.0, 1.0)
        })
        .collect();
    let (mean, std) = mean_std(&cosines);
    Ok(FluencyFeatures {
        n_unique_targets: unique.len() as f64,
        n_target_repetitions: (targets.len() - unique.len()) as f64,
        mean_adjacent_cosine: mean,
        std_adjacent_cosine: std,
        n_targets_total: targets.len() as f64,
        target_token_fraction: if n_tokens_total == 0 {
            0.0
        } else {
            (targets.len() as f64 / n_tokens_total as f64).min(1.0)
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LinguisticFeatures {
    pub n_tokens: f64,
    pub n_types: f64,
    pub type_token_ratio: f64,
    pub mean_word_len_chars: f64,
    pub n_sentences: f64,
    pub mean_sentence_len_tokens: f64,
    pub n_fillers: f64,
    pub n_immediate_repetitions: f64,
    pub content_word_ratio: f64,
    pub hapax_ratio: f64,
    /// Brunet's W = N^(V^-0.165).
    pub brunet_index: f64,
}

impl LinguisticFeatures {
    pub const NAMES: [&'static str; 11] = [
        "n_tokens",
        "n_types",
        "type_token_ratio",
        "mean_word_len_chars",
        "n_sentences",
        "mean_sentence_len_tokens",
        "n_fillers",
        "n_immediate_repetitions",
        "content_word_ratio",
        "hapax_ratio",
        "brunet_index",
    ];

    pub fn to_vec(&self) -> Vec<f64> {
        vec![
            self.n_tokens,
            self.n_types,
            self.type_token_ratio,
            self.mean_word_len_chars,
            self.n_sentences,
            self.mean_sentence_len_tokens,
            self.n_fillers,
            self.n_immediate_repetitions,
            self.content_word_ratio,
            self.hapax_ratio,
            self.brunet_index,
        ]
    }
}

pub fn linguistic_features(
    t: &Transcript,
    fillers: &BTreeSet<String>,
    stopwords: &BTreeSet<String>,
) -> LinguisticFeatures {
    let tokens = &t.tokens;
    if tokens.is_empty() {
        return LinguisticFeatures::default();
    }
    let n = tokens.len() as f64;
    let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
    for w in tokens {
        *freq.entry(w.as_str()).or_default() += 1;
    }
    let types = freq.len() as f64;
    let n_sentences = t
        .raw
        .split(['.', '?', '!'])
        .filter(|s| !tokenize(s).is_empty())
        .count()
        .max(1) as f64;
    let n_fillers = tokens.iter().filter(|w| fillers.contains(*w)).count() as f64;
    let content = tokens
        .iter()
        .filter(|w| !fillers.contains(*w) && !stopwords.contains(*w))
        .count() as f64;
    let hapax = freq.values().filter(|&&c| c == 1).count() as f64;
    LinguisticFeatures {
        n_tokens: n,
        n_types: types,
        type_token_ratio: types / n,
        mean_word_len_chars: tokens.iter().map(|w| w.chars().count()).sum::<usize>() as f64 / n,
        n_sentences,
        mean_sentence_len_tokens: n / n_sentences,
        n_fillers,
        n_immediate_repetitions: tokens.windows(2).filter(|w| w[0] == w[1]).count() as f64,
        content_word_ratio: content / n,
        hapax_ratio: hapax / types,
        brunet_index: n.powf(types.powf(-0.165)),
    }
}

/// Replaces every disfluency token by `placeholder`; length is preserved.
pub fn normalize_disfluencies(
    tokens: &[String],
    disfluencies: &BTreeSet<String>,
    placeholder: &str,
) -> Vec<String> {
    tokens
        .iter()
        .map(|w| {
            if disfluencies.contains(w) {
                placeholder.to_string()
            } else {
                w.clone()
            }
        })
        .collect()
}

pub fn default_fillers() -> BTreeSet<String> {
    DEFAULT_FILLERS.iter().map(|s| s.to_string()).collect()
}

pub fn default_stopwords() -> BTreeSet<String> {
    DEFAULT_STOPWORDS.iter().map(|s| s.to_string()).collect()
}

/// Four opaque per-recording descriptors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroDescriptors {
    pub values: [f64; 4],
}

/// Reads `subject_id,task,m1,m2,m3,m4` rows (header required).
pub fn load_macrodescriptors(path: &Path) -> Result<BTreeMap<(String, TaskKind), MacroDescriptors>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            Error::malformed(path, e.position().map(|p| p.line()).unwrap_or(0), e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != 6 {
            return Err(Error::malformed(path, line, format!("expected 6 fields, found {}", rec.len())));
        }
        let task: TaskKind = rec[1].parse().map_err(|m: String| Error::malformed(path, line, m))?;
        let mut values = [0.0f64; 4];
        for (i, v) in values.iter_mut().enumerate() {
            *v = rec[2 + i]
                .parse()
                .map_err(|_| Error::malformed(path, line, format!("bad value `{}`", &rec[2 + i])))?;
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("{}:{line}", path.display())));
            }
        }
        out.insert((rec[0].to_string(), task), MacroDescriptors { values });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &[&str]) -> Vec<String> {
        s.iter().map(|w| w.to_string()).collect()
    }

    fn set(s: &[&str]) -> BTreeSet<String> {
        s.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn tokenize_examples() {
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("The cat, the CAT!"), toks(&["the", "cat", "the", "cat"]));
        assert_eq!(tokenize("it's p-p-pig"), toks(&["it's", "p", "p", "pig"]));
        assert_eq!(tokenize("'quoted' dogs'"), toks(&["quoted", "dogs"]));
    }

    /// dog and cat at cosine 0.5, horse orthogonal to both.
    fn lexicon() -> TargetLexicon {
        let s = 3f64.sqrt() / 2.0;
        let vecs: HashMap<String, Vec<f64>> = [
            ("dog", vec![1.0, 0.0, 0.0]),
            ("cat", vec![0.5, s, 0.0]),
            ("horse", vec![0.0, 0.0, 2.0]),
        ]
        .into_iter()
        .map(|(w, v)| (w.to_string(), v))
        .collect();
        TargetLexicon::new(toks(&["dog", "cat", "horse"]), vecs).unwrap()
    }

    #[test]
    fn lexicon_requires_embeddings_and_normalizes() {
        let lex = lexicon();
        let n: f64 = lex.embeddings["horse"].iter().map(|x| x * x).sum();
        assert!((n - 1.0).abs() < 1e-12);
        assert!(matches!(
            TargetLexicon::new(toks(&["emu"]), HashMap::new()),
            Err(Error::MissingEmbedding(_))
        ));
    }

    #[test]
    fn extract_targets_examples() {
        let lex = lexicon();
        let t = Transcript::new("dog um cat dog");
        assert_eq!(extract_targets(&t, &lex), toks(&["dog", "cat", "dog"]));
        assert!(extract_targets(&Transcript::new("um uh"), &lex).is_empty());
        let t = Transcript::new("dog cat horse");
        assert_eq!(extract_targets(&t, &lex), t.tokens);
    }

    #[test]
    fn fluency_examples() {
        let lex = lexicon();
        let f = fluency_features(&toks(&["dog", "cat", "dog"]), &lex, 4).unwrap();
        assert_eq!(f.n_unique_targets, 2.0);
        assert_eq!(f.n_target_repetitions, 1.0);
        assert!((f.mean_adjacent_cosine - 0.5).abs() < 1e-12);
        assert!(f.std_adjacent_cosine.abs() < 1e-12);
        assert_eq!(f.n_targets_total, 3.0);
        assert_eq!(f.target_token_fraction, 0.75);

        let f = fluency_features(&toks(&["dog"]), &lex, 1).unwrap();
        assert_eq!((f.n_unique_targets, f.n_target_repetitions), (1.0, 0.0));
        assert_eq!((f.mean_adjacent_cosine, f.std_adjacent_cosine), (0.0, 0.0));

        let f = fluency_features(&toks(&["dog", "dog"]), &lex, 2).unwrap();
        assert!((f.mean_adjacent_cosine - 1.0).abs() < 1e-6);

        assert!(matches!(
            fluency_features(&toks(&["emu"]), &lex, 1),
            Err(Error::MissingEmbedding(_))
        ));
    }

    proptest! {
        #[test]
        fn new_word_adds_one_unique(seq in prop::collection::vec(0usize..2, 0..10)) {
            let lex = lexicon();
            let words = ["dog", "cat"];
            let mut targets: Vec<String> = seq.iter().map(|&i| words[i].to_string()).collect();
            let before = fluency_features(&targets, &lex, 20).unwrap();
            targets.push("horse".into());
            let after = fluency_features(&targets, &lex, 20).unwrap();
            prop_assert_eq!(after.n_unique_targets, before.n_unique_targets + 1.0);
            prop_assert!((-1.0..=1.0).contains(&after.mean_adjacent_cosine));
            prop_assert_eq!(after.n_targets_total, after.n_unique_targets + after.n_target_repetitions);
        }

        #[test]
        fn ttr_in_unit_interval(s in "[a-z .!?]{1,60}") {
            let t = Transcript::new(s);
            let f = linguistic_features(&t, &default_fillers(), &default_stopwords());
            if !t.tokens.is_empty() {
                prop_assert!(f.type_token_ratio > 0.0 && f.type_token_ratio <= 1.0);
                prop_assert!((0.0..=1.0).contains(&f.hapax_ratio));
                prop_assert!((0.0..=1.0).contains(&f.content_word_ratio));
            }
        }
    }

    #[test]
    fn linguistic_examples() {
        let fl = default_fillers();
        let sw = default_stopwords();
        assert_eq!(linguistic_features(&Transcript::new(""), &fl, &sw), LinguisticFeatures::default());

        let f = linguistic_features(&Transcript::new("the dog. the dog."), &fl, &sw);
        assert_eq!(f.n_tokens, 4.0);
        assert_eq!(f.n_types, 2.0);
        assert_eq!(f.type_token_ratio, 0.5);
        assert_eq!(f.n_sentences, 2.0);
        assert_eq!(f.mean_sentence_len_tokens, 2.0);
        assert_eq!(f.content_word_ratio, 0.5);
        assert_eq!(f.hapax_ratio, 0.0);
        assert!((f.brunet_index - 4f64.powf(2f64.powf(-0.165))).abs() < 1e-12);

        let f = linguistic_features(&Transcript::new("um the the cat"), &set(&["um"]), &sw);
        assert_eq!(f.n_fillers, 1.0);
        assert_eq!(f.n_immediate_repetitions, 1.0);
        assert_eq!(f.n_sentences, 1.0);
    }

    #[test]
    fn disfluency_normalization() {
        let d = set(&["um", "uh", "hmm"]);
        assert_eq!(
            normalize_disfluencies(&toks(&["um", "cat"]), &d, DISFLUENCY_PLACEHOLDER),
            toks(&["<disfl>", "cat"])
        );
        assert_eq!(normalize_disfluencies(&toks(&["a", "cat"]), &d, "<disfl>"), toks(&["a", "cat"]));
        assert_eq!(
            normalize_disfluencies(&toks(&["um", "uh", "hmm"]), &d, "<disfl>"),
            toks(&["<disfl>", "<disfl>", "<disfl>"])
        );
    }

    #[test]
    fn macrodescriptor_csv() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("macro.csv");
        fs::write(&p, "subject_id,task,m1,m2,m3,m4\ns1,PFT,1,2,3,4\ns1,SFT,0.5,0,0,-1\n").unwrap();
        let m = load_macrodescriptors(&p).unwrap();
        assert_eq!(m[&("s1".to_string(), TaskKind::Pft)].values, [1.0, 2.0, 3.0, 4.0]);
        fs::write(&p, "subject_id,task,m1,m2,m3,m4\ns1,PFT,1,2,3\n").unwrap();
        assert!(load_macrodescriptors(&p).is_err());
        fs::write(&p, "subject_id,task,m1,m2,m3,m4\ns1,PFT,1,2,3,NaN\n").unwrap();
        assert!(matches!(load_macrodescriptors(&p), Err(Error::NonFinite(_))));
    }
}
