//! Seeded synthetic corpus with the challenge's split/label/gender counts.
//!
//! Every subject gets a latent severity (class centre plus noise). Each view
//! of the subject (audio per task, transcript per task, embeddings,
//! macrodescriptors) adds its own noise on top, so no single view is
//! decisive and combining views pays off.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal, Poisson};

use super::{ClassLabel, Gender, Manifest, RecordingRef, Split, SubjectRecord, TaskKind};
use crate::dsp::{write_wav, AudioBuffer};
use crate::error::{Error, Result};
use crate::features::{embedding_file_name, write_embedding, EmbeddingSource};

pub const AUDIO_DIR: &str = "audio";
pub const TRANSCRIPT_DIR: &str = "transcripts";
pub const EMBEDDING_DIR: &str = "embeddings";
pub const LEXICON_DIR: &str = "lexicons";
pub const ANIMALS_FILE: &str = "animals.txt";
pub const PWORDS_FILE: &str = "pwords.txt";
pub const VECTORS_FILE: &str = "vectors.csv";
pub const MACRO_FILE: &str = "macro.csv";

pub const ECAPA_DIM: usize = 192;
pub const TRILLSSON_DIM: usize = 64;
pub const LONGFORMER_DIM: usize = 32;
const WORD_DIM: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub seed: u64,
    pub sample_rate: u32,
    /// Latent severity centres for HC, MCI, Dementia.
    pub class_centres: [f64; 3],
    /// Subject-level spread around the class centre.
    pub subject_noise: f64,
    /// Extra independent noise per view.
    pub view_noise: f64,
    /// Chance that a recording carries a short non-speech beep.
    pub beep_prob: f64,
}

impl SynthSpec {
    pub fn new(seed: u64) -> Self {
        SynthSpec {
            seed,
            sample_rate: 16_000,
            class_centres: [0.0, 1.0, 2.4],
            subject_noise: 0.7,
            view_noise: 0.9,
            beep_prob: 0.25,
        }
    }
}

/// (split, label, gender, count, subjects with MMSE, age mean, age sd, MMSE mean, MMSE sd)
type Stratum = (Split, ClassLabel, Gender, usize, usize, f64, f64, f64, f64);

const STRATA: [Stratum; 13] = [
    (Split::Train, ClassLabel::Hc, Gender::Male, 23, 10, 64.8, 13.3, 29.0, 1.0),
    (Split::Train, ClassLabel::Hc, Gender::Female, 37, 17, 62.9, 12.1, 28.9, 0.7),
    (Split::Train, ClassLabel::Hc, Gender::Unreported, 1, 0, 63.8, 12.7, 29.0, 0.9),
    (Split::Train, ClassLabel::Mci, Gender::Male, 22, 10, 69.1, 7.9, 27.1, 1.8),
    (Split::Train, ClassLabel::Mci, Gender::Female, 22, 10, 69.8, 10.3, 26.5, 2.6),
    (Split::Train, ClassLabel::Dementia, Gender::Male, 8, 4, 75.8, 8.0, 26.3, 2.1),
    (Split::Train, ClassLabel::Dementia, Gender::Female, 4, 1, 69.0, 6.3, 20.0, 0.0),
    (Split::Dev, ClassLabel::Hc, Gender::Male, 12, 5, 63.6, 13.1, 29.2, 1.2),
    (Split::Dev, ClassLabel::Hc, Gender::Female, 9, 4, 61.0, 14.3, 29.5, 0.5),
    (Split::Dev, ClassLabel::Mci, Gender::Male, 7, 3, 68.1, 10.8, 23.7, 3.4),
    (Split::Dev, ClassLabel::Mci, Gender::Female, 8, 4, 61.6, 13.0, 27.0, 1.6),
    (Split::Dev, ClassLabel::Dementia, Gender::Male, 3, 1, 67.0, 3.7, 27.7, 0.9),
    (Split::Dev, ClassLabel::Dementia, Gender::Female, 1, 0, 60.0, 0.0, 0.0, 0.0),
];

const ANIMAL_CLUSTERS: [[&str; 12]; 4] = [
    ["dog", "cat", "hamster", "rabbit", "parrot", "goldfish", "canary", "ferret", "gerbil", "turtle", "mouse", "guinea"],
    ["cow", "pig", "horse", "sheep", "goat", "chicken", "duck", "donkey", "rooster", "turkey", "goose", "llama"],
    ["lion", "tiger", "elephant", "giraffe", "zebra", "monkey", "bear", "wolf", "fox", "deer", "kangaroo", "hippo"],
    ["shark", "whale", "dolphin", "octopus", "seal", "crab", "eagle", "owl", "sparrow", "penguin", "pelican", "salmon"],
];

const PWORDS: [&str; 48] = [
    "pen", "paper", "park", "party", "piano", "picture", "pillow", "pink", "pizza", "plane", "plant", "plate",
    "play", "pocket", "poem", "police", "pony", "pool", "potato", "pour", "power", "price", "prince", "print",
    "prize", "problem", "pump", "pumpkin", "puppy", "purple", "push", "puzzle", "palace", "panda", "pants", "parade",
    "parent", "pasta", "peach", "pear", "pepper", "person", "phone", "pilot", "pirate", "planet", "pocketbook", "pudding",
];

const CTD_CLAUSES: [&str; 16] = [
    "the boy is taking cookies from the jar",
    "he is standing on a stool",
    "the stool is tipping over",
    "the girl is reaching for a cookie",
    "she has her finger to her lips",
    "the mother is washing the dishes",
    "the water is overflowing from the sink",
    "the floor is getting wet",
    "she is drying a plate",
    "the window is open",
    "there are curtains on the window",
    "outside you can see the garden",
    "there are two cups and a plate on the counter",
    "the cupboard door is open",
    "the mother does not notice the children",
    "the boy might fall and hurt himself",
];

const VAGUE_CLAUSES: [&str; 4] = ["there is a thing there", "and that one", "this is something", "the thing is there"];
const FILLERS: [&str; 4] = ["um", "uh", "er", "hmm"];
const CONNECTORS: [&str; 5] = ["and", "let me see", "also", "a", "the"];

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Independent generator for a (seed, stream, index) triple.
fn sub_rng(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix(splitmix(seed ^ stream.wrapping_mul(0xA24B_AED4_963E_E407)) ^ index))
}

fn gauss(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    if sd <= 0.0 {
        return 0.0;
    }
    Normal::new(0.0, sd).expect("finite sd").sample(rng)
}

fn poisson(rng: &mut ChaCha8Rng, lambda: f64) -> usize {
    if lambda <= 0.0 {
        return 0;
    }
    Poisson::new(lambda).expect("positive rate").sample(rng) as usize
}

struct Latent {
    id: String,
    record: SubjectRecord,
    severity: f64,
}

fn make_subjects(spec: &SynthSpec) -> Vec<Latent> {
    let mut rng = sub_rng(spec.seed, 1, 0);
    let mut slots: Vec<(usize, bool)> = Vec::new();
    for (si, s) in STRATA.iter().enumerate() {
        for j in 0..s.3 {
            slots.push((si, j < s.4));
        }
    }
    slots.shuffle(&mut rng);
    slots
        .into_iter()
        .enumerate()
        .map(|(i, (si, has_mmse))| {
            let (split, label, gender, _, _, age_m, age_sd, mmse_m, mmse_sd) = STRATA[si];
            let id = format!("S{:03}", i + 1);
            let age = (age_m + gauss(&mut rng, age_sd)).round().clamp(40.0, 95.0) as u32;
            let mmse = has_mmse.then(|| (mmse_m + gauss(&mut rng, mmse_sd)).round().clamp(0.0, 30.0) as u8);
            let severity = spec.class_centres[label.index()] + gauss(&mut rng, spec.subject_noise);
            Latent {
                record: SubjectRecord {
                    subject_id: id.clone(),
                    gender,
                    age,
                    label: Some(label),
                    mmse,
                    split,
                },
                id,
                severity,
            }
        })
        .collect()
}

fn task_index(t: TaskKind) -> u64 {
    match t {
        TaskKind::Ctd => 0,
        TaskKind::Pft => 1,
        TaskKind::Sft => 2,
    }
}

/// Tone/silence alternation. More severe → fewer and shorter speech runs,
/// more and longer pauses.
fn synth_audio(spec: &SynthSpec, rng: &mut ChaCha8Rng, u: f64, gender: Gender) -> AudioBuffer {
    let sr = spec.sample_rate as f64;
    let f0 = match gender {
        Gender::Male => 120.0,
        Gender::Female => 210.0,
        Gender::Unreported => 165.0,
    } * (1.0 + gauss(rng, 0.05));
    let n_seg = (8.0 - 1.6 * u + gauss(rng, 1.0)).round().clamp(3.0, 14.0) as usize;
    let pause_scale = LogNormal::new(0.0, 0.35).expect("valid");

    let mut plan: Vec<(bool, f64)> = vec![(false, 0.6)];
    for k in 0..n_seg {
        if k > 0 {
            let p = ((0.3 + 0.3 * u.max(-0.5)) * pause_scale.sample(rng)).max(0.2);
            plan.push((false, p));
        }
        let len = (rng.random_range(0.35..0.9) * (1.0 - 0.08 * u)).max(0.2);
        plan.push((true, len));
    }
    plan.push((false, 0.4));

    let total: f64 = plan.iter().map(|p| p.1).sum();
    let n = (total * sr).round() as usize;
    let floor = Normal::new(0.0, 1e-3).expect("valid");
    let mut samples: Vec<f32> = (0..n).map(|_| floor.sample(rng) as f32).collect();
    let ramp = (0.01 * sr) as usize;
    let mut t0 = 0usize;
    for (speech, dur) in plan {
        let len = (dur * sr).round() as usize;
        if speech {
            let phase = rng.random_range(0.0..2.0 * PI);
            for i in 0..len.min(n - t0) {
                let t = i as f64 / sr;
                let am = 0.6 + 0.4 * (2.0 * PI * 4.0 * t + phase).sin();
                let tone: f64 = [(1.0, 0.3), (2.0, 0.15), (3.0, 0.08)]
                    .iter()
                    .map(|(h, a)| a * (2.0 * PI * f0 * h * t).sin())
                    .sum();
                let edge = i.min(len - 1 - i);
                let env = if edge < ramp { 0.5 - 0.5 * (PI * edge as f64 / ramp as f64).cos() } else { 1.0 };
                samples[t0 + i] += (am * env * tone) as f32;
            }
        }
        t0 += len;
    }
    if rng.random_bool(spec.beep_prob) {
        let start = (0.25 * sr) as usize;
        for i in 0..(0.06 * sr) as usize {
            samples[start + i] += (0.7 * (2.0 * PI * 1000.0 * i as f64 / sr).sin()) as f32;
        }
    }
    AudioBuffer {
        samples,
        sample_rate: spec.sample_rate,
    }
}

fn sprinkle(rng: &mut ChaCha8Rng, words: &mut Vec<String>, n: usize, pool: &[&str]) {
    for _ in 0..n {
        let at = rng.random_range(0..=words.len());
        words.insert(at, pool[rng.random_range(0..pool.len())].to_string());
    }
}

fn fluency_transcript(rng: &mut ChaCha8Rng, u: f64, semantic: bool) -> String {
    let n_unique = (15.0 - 3.5 * u + gauss(rng, 2.0)).round().clamp(3.0, 30.0) as usize;
    let mut picked: Vec<String> = Vec::new();
    if semantic {
        // Walk clusters; severe speakers switch more and exhaust less.
        let switch_p = (0.15 + 0.15 * u).clamp(0.05, 0.8);
        let mut cluster = rng.random_range(0..4);
        let mut pools: Vec<Vec<&str>> = ANIMAL_CLUSTERS.iter().map(|c| c.to_vec()).collect();
        for p in &mut pools {
            p.shuffle(rng);
        }
        while picked.len() < n_unique && pools.iter().any(|p| !p.is_empty()) {
            if pools[cluster].is_empty() || rng.random_bool(switch_p) {
                cluster = (cluster + rng.random_range(1..4)) % 4;
                continue;
            }
            picked.push(pools[cluster].pop().expect("non-empty").to_string());
        }
    } else {
        let mut pool = PWORDS.to_vec();
        pool.shuffle(rng);
        picked = pool.into_iter().take(n_unique).map(str::to_string).collect();
    }
    let reps = poisson(rng, (0.4 + 1.2 * u).max(0.1));
    for _ in 0..reps {
        let w = picked[rng.random_range(0..picked.len())].clone();
        let at = rng.random_range(0..=picked.len());
        picked.insert(at, w);
    }
    let mut words = picked;
    let fillers = poisson(rng, (1.0 + 1.5 * u).max(0.2));
    sprinkle(rng, &mut words, fillers, &FILLERS);
    let connectors = poisson(rng, 3.0);
    sprinkle(rng, &mut words, connectors, &CONNECTORS);
    words.join(" ")
}

fn ctd_transcript(rng: &mut ChaCha8Rng, u: f64) -> String {
    let n_clauses = (9.0 - 2.0 * u + gauss(rng, 1.5)).round().clamp(2.0, 16.0) as usize;
    let mut order: Vec<usize> = (0..CTD_CLAUSES.len()).collect();
    order.shuffle(rng);
    let vague_p = (0.1 + 0.15 * u).clamp(0.0, 0.7);
    let mut sentences = Vec::new();
    for &c in order.iter().take(n_clauses) {
        let clause = if rng.random_bool(vague_p) {
            VAGUE_CLAUSES[rng.random_range(0..VAGUE_CLAUSES.len())]
        } else {
            CTD_CLAUSES[c]
        };
        let mut words: Vec<String> = clause.split(' ').map(str::to_string).collect();
        let fillers = poisson(rng, (0.3 + 0.6 * u).max(0.05));
        sprinkle(rng, &mut words, fillers, &FILLERS);
        if rng.random_bool((0.05 + 0.2 * u).clamp(0.0, 0.9)) {
            let at = rng.random_range(0..words.len());
            let w = words[at].clone();
            words.insert(at, w);
        }
        sentences.push(words.join(" "));
    }
    let mut text = sentences.join(". ");
    text.push('.');
    text
}

/// Fixed random loading matrix `rows × cols`.
fn loading(seed: u64, stream: u64, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    let mut rng = sub_rng(seed, stream, 0);
    (0..rows).map(|_| (0..cols).map(|_| gauss(&mut rng, 1.0)).collect()).collect()
}

/// x = A·z + 0.2·ε with z = (severity view, gender, age, 5 nuisance factors).
fn embedding(rng: &mut ChaCha8Rng, a: &[Vec<f64>], v: f64, gender: Gender, age: u32) -> Vec<f64> {
    let g = match gender {
        Gender::Male => 1.0,
        Gender::Female => -1.0,
        Gender::Unreported => 0.0,
    };
    let mut z = vec![v, g, (age as f64 - 65.0) / 10.0];
    z.extend((0..5).map(|_| gauss(rng, 1.0)));
    a.iter()
        .map(|row| row.iter().zip(&z).map(|(w, zi)| w * zi).sum::<f64>() + gauss(rng, 0.2))
        .collect()
}

fn write_text(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

fn write_lexicons(dir: &Path, seed: u64) -> Result<()> {
    let mut rng = sub_rng(seed, 9, 0);
    let mut vectors = String::new();
    let mut animals = String::new();
    for cluster in &ANIMAL_CLUSTERS {
        let centre: Vec<f64> = (0..WORD_DIM).map(|_| gauss(&mut rng, 1.0)).collect();
        for w in cluster {
            let _ = writeln!(animals, "{w}");
            let v: Vec<String> = centre.iter().map(|c| format!("{:.6}", c + gauss(&mut rng, 0.45))).collect();
            let _ = writeln!(vectors, "{w},{}", v.join(","));
        }
    }
    let mut pwords = String::new();
    for w in PWORDS {
        let _ = writeln!(pwords, "{w}");
        let v: Vec<String> = (0..WORD_DIM).map(|_| format!("{:.6}", gauss(&mut rng, 1.0))).collect();
        let _ = writeln!(vectors, "{w},{}", v.join(","));
    }
    write_text(&dir.join(ANIMALS_FILE), &animals)?;
    write_text(&dir.join(PWORDS_FILE), &pwords)?;
    write_text(&dir.join(VECTORS_FILE), &vectors)
}

fn mkdir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

/// Writes the synthetic corpus under `out_dir` and returns its manifest.
pub fn synth_corpus(out_dir: &Path, seed: u64) -> Result<Manifest> {
    synth_corpus_with(out_dir, &SynthSpec::new(seed))
}

pub fn synth_corpus_with(out_dir: &Path, spec: &SynthSpec) -> Result<Manifest> {
    for d in [AUDIO_DIR, TRANSCRIPT_DIR, EMBEDDING_DIR, LEXICON_DIR] {
        mkdir(&out_dir.join(d))?;
    }
    write_lexicons(&out_dir.join(LEXICON_DIR), spec.seed)?;
    let subjects = make_subjects(spec);
    let ecapa = loading(spec.seed, 10, ECAPA_DIM, 8);
    let trill = loading(spec.seed, 11, TRILLSSON_DIM, 8);
    let longformer = loading(spec.seed, 12, LONGFORMER_DIM, 8);

    let mut recordings = Vec::new();
    let mut macro_csv = String::from("subject_id,task,m1,m2,m3,m4\n");
    for (si, s) in subjects.iter().enumerate() {
        let r = &s.record;
        for task in TaskKind::ALL {
            let mut rng = sub_rng(spec.seed, 100 + task_index(task), si as u64);
            let view = |rng: &mut ChaCha8Rng| s.severity + gauss(rng, spec.view_noise);

            let audio_rel = PathBuf::from(AUDIO_DIR).join(format!("{}_{task}.wav", s.id));
            let u = view(&mut rng);
            write_wav(&out_dir.join(&audio_rel), &synth_audio(spec, &mut rng, u, r.gender))?;

            let text_rel = PathBuf::from(TRANSCRIPT_DIR).join(format!("{}_{task}.txt", s.id));
            let u = view(&mut rng);
            let text = match task {
                TaskKind::Ctd => ctd_transcript(&mut rng, u),
                TaskKind::Pft => fluency_transcript(&mut rng, u, false),
                TaskKind::Sft => fluency_transcript(&mut rng, u, true),
            };
            write_text(&out_dir.join(&text_rel), &format!("{text}\n"))?;

            let emb_dir = out_dir.join(EMBEDDING_DIR);
            let u = view(&mut rng);
            let e = embedding(&mut rng, &ecapa, u, r.gender, r.age);
            write_embedding(&emb_dir.join(embedding_file_name(&s.id, task, &EmbeddingSource::Ecapa)), &e)?;
            let u = view(&mut rng);
            let e = embedding(&mut rng, &trill, u, r.gender, r.age);
            write_embedding(&emb_dir.join(embedding_file_name(&s.id, task, &EmbeddingSource::Trillsson)), &e)?;
            if task == TaskKind::Ctd {
                let u = view(&mut rng);
                let e = embedding(&mut rng, &longformer, u, r.gender, r.age);
                write_embedding(&emb_dir.join(embedding_file_name(&s.id, task, &EmbeddingSource::LongFormer)), &e)?;
            }

            let u = view(&mut rng);
            let m: Vec<String> = [0.9, -0.7, 0.5, 0.3]
                .iter()
                .map(|b| format!("{:.6}", b * u + gauss(&mut rng, 0.5)))
                .collect();
            let _ = writeln!(macro_csv, "{},{task},{}", s.id, m.join(","));

            recordings.push(RecordingRef {
                subject_id: s.id.clone(),
                task,
                audio_path: audio_rel,
                transcript_path: Some(text_rel),
            });
        }
    }
    write_text(&out_dir.join(MACRO_FILE), &macro_csv)?;
    let manifest = Manifest {
        subjects: subjects.into_iter().map(|s| s.record).collect(),
        recordings,
        base_dir: out_dir.to_path_buf(),
    };
    manifest.write(out_dir)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strata_sum_to_challenge_totals() {
        let train: usize = STRATA.iter().filter(|s| s.0 == Split::Train).map(|s| s.3).sum();
        let dev: usize = STRATA.iter().filter(|s| s.0 == Split::Dev).map(|s| s.3).sum();
        let mmse: usize = STRATA.iter().map(|s| s.4).sum();
        assert_eq!((train, dev, mmse), (117, 40, 69));
    }

    #[test]
    fn subjects_are_deterministic() {
        let a: Vec<SubjectRecord> = make_subjects(&SynthSpec::new(7)).into_iter().map(|s| s.record).collect();
        let b: Vec<SubjectRecord> = make_subjects(&SynthSpec::new(7)).into_iter().map(|s| s.record).collect();
        assert_eq!(a, b);
        assert!(a.iter().all(|r| r.mmse.is_none_or(|m| m <= 30)));
    }

    #[test]
    fn severe_transcripts_have_fewer_unique_targets() {
        let mut lo = 0;
        let mut hi = 0;
        for i in 0..40 {
            let mut rng = sub_rng(3, 0, i);
            let count = |t: String| t.split(' ').filter(|w| ANIMAL_CLUSTERS.iter().flatten().any(|a| a == w)).collect::<std::collections::BTreeSet<_>>().len();
            lo += count(fluency_transcript(&mut rng, 0.0, true));
            hi += count(fluency_transcript(&mut rng, 2.4, true));
        }
        assert!(hi < lo);
    }
}
