//! Fuzzy fingerprints: each class keeps its k most salient features with a
//! rank-decaying membership, and a sample is scored by how much of each
//! class fingerprint its own fingerprint covers.

use serde::{Deserialize, Serialize};

use super::{Dataset, ScoreKind, SoftDecision, Standardizer};
use crate::error::{Error, Result};

/// How features are ranked when building a class fingerprint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FfpRanking {
    /// |mean of the standardized feature over the class rows|.
    #[default]
    AbsMean,
    /// |class mean − rest mean| over the class's own standard deviation.
    Separation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FfpDecay {
    /// μ(r) = 1 − r/k.
    #[default]
    Linear,
    /// μ(r) = 1 for every kept rank.
    Flat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FfpSimilarity {
    /// Σ_shared min(μ_s, μ_c) / Σ μ_c.
    #[default]
    ClassCoverage,
    /// Σ_shared min(μ_s, μ_c) / Σ_union max(μ_s, μ_c).
    Jaccard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FfpConfig {
    #[serde(default)]
    pub ranking: FfpRanking,
    #[serde(default)]
    pub decay: FfpDecay,
    #[serde(default)]
    pub similarity: FfpSimilarity,
}

/// Ranked `(feature index, membership)` pairs.
pub type Fingerprint = Vec<(usize, f64)>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FfpModel {
    pub standardizer: Standardizer,
    /// One per class; empty for a class absent from training.
    pub fingerprints: Vec<Fingerprint>,
    pub k: usize,
    pub config: FfpConfig,
}

/// Top-`k` indices of `salience` (descending; ties to the lower index)
/// with memberships from `decay`.
pub fn fingerprint(salience: &[f64], k: usize, decay: FfpDecay) -> Fingerprint {
    let mut idx: Vec<usize> = (0..salience.len()).collect();
    idx.sort_by(|&a, &b| salience[b].total_cmp(&salience[a]).then(a.cmp(&b)));
    idx.into_iter()
        .take(k)
        .enumerate()
        .map(|(r, j)| {
            let mu = match decay {
                FfpDecay::Linear => 1.0 - r as f64 / k as f64,
                FfpDecay::Flat => 1.0,
            };
            (j, mu)
        })
        .collect()
}

pub fn fingerprint_similarity(sample: &[(usize, f64)], class: &[(usize, f64)], kind: FfpSimilarity) -> f64 {
    let mu_of = |fp: &[(usize, f64)], j: usize| fp.iter().find(|e| e.0 == j).map(|e| e.1);
    let shared: f64 = class
        .iter()
        .filter_map(|&(j, mc)| mu_of(sample, j).map(|ms| ms.min(mc)))
        .sum();
    let denom = match kind {
        FfpSimilarity::ClassCoverage => class.iter().map(|e| e.1).sum::<f64>(),
        FfpSimilarity::Jaccard => {
            let class_side: f64 = class
                .iter()
                .map(|&(j, mc)| mu_of(sample, j).map_or(mc, |ms| ms.max(mc)))
                .sum();
            let sample_only: f64 = sample
                .iter()
                .filter(|e| mu_of(class, e.0).is_none())
                .map(|e| e.1)
                .sum();
            class_side + sample_only
        }
    };
    if denom > 0.0 {
        shared / denom
    } else {
        0.0
    }
}

pub fn ffp_build(data: &Dataset, k: usize) -> Result<FfpModel> {
    ffp_build_with(data, k, FfpConfig::default())
}

pub fn ffp_build_with(data: &Dataset, k: usize, config: FfpConfig) -> Result<FfpModel> {
    let d = data.dim();
    if k == 0 || k > d {
        return Err(Error::InvalidInput(format!("fingerprint size k={k} must be in 1..={d}")));
    }
    let standardizer = Standardizer::fit(&data.x);
    let z = standardizer.apply_all(&data.x)?;
    let mut fingerprints = Vec::with_capacity(3);
    for class in 0..3 {
        let (inside, outside): (Vec<&Vec<f64>>, Vec<&Vec<f64>>) = z
            .iter()
            .zip(&data.y)
            .map(|(r, y)| (r, y.index() == class))
            .fold((Vec::new(), Vec::new()), |(mut a, mut b), (r, hit)| {
                if hit { a.push(r) } else { b.push(r) }
                (a, b)
            });
        if inside.is_empty() {
            fingerprints.push(Vec::new());
            continue;
        }
        let mean = |rows: &[&Vec<f64>], j: usize| {
            rows.iter().map(|r| r[j]).sum::<f64>() / rows.len().max(1) as f64
        };
        let salience: Vec<f64> = (0..d)
            .map(|j| {
                let m = mean(&inside, j);
                match config.ranking {
                    FfpRanking::AbsMean => m.abs(),
                    FfpRanking::Separation => {
                        let var = inside.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>()
                            / inside.len() as f64;
                        (m - mean(&outside, j)).abs() / var.sqrt().max(Standardizer::STD_FLOOR)
                    }
                }
            })
            .collect();
        fingerprints.push(fingerprint(&salience, k, config.decay));
    }
    Ok(FfpModel {
        standardizer,
        fingerprints,
        k,
        config,
    })
}

/// Similarities normalized to sum to one; all-zero gives uniform scores.
pub fn ffp_scores(model: &FfpModel, x: &[f64]) -> Result<SoftDecision> {
    let z = model.standardizer.apply(x)?;
    let salience: Vec<f64> = z.iter().map(|v| v.abs()).collect();
    let own = fingerprint(&salience, model.k, model.config.decay);
    let mut sims = [0.0; 3];
    for (s, fp) in sims.iter_mut().zip(&model.fingerprints) {
        *s = fingerprint_similarity(&own, fp, model.config.similarity);
    }
    let total: f64 = sims.iter().sum();
    let scores = if total > 0.0 {
        sims.map(|s| s / total)
    } else {
        [1.0 / 3.0; 3]
    };
    Ok(SoftDecision::new(scores, ScoreKind::Softmax))
}
