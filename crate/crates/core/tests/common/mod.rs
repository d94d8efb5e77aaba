//! Independent oracles shared by the integration targets.
#![allow(dead_code)]

use std::collections::VecDeque;

use cogspeech::classifiers::softmax_loss_and_grad;
use cogspeech::corpus::ClassLabel;
use cogspeech::features::wer;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn label(i: usize) -> ClassLabel {
    ClassLabel::ALL[i % 3]
}

// ---------- cyclic Jacobi eigensolver ----------

/// Eigenvalues and eigenvectors (one vector per entry) of a symmetric matrix.
pub fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-24 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = if theta == 0.0 {
                    1.0
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let vals: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    let vecs: Vec<Vec<f64>> = (0..n).map(|j| (0..n).map(|i| v[i][j]).collect()).collect();
    (vals, vecs)
}

/// Population covariance.
pub fn covariance(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len() as f64;
    let d = rows[0].len();
    let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    (0..d)
        .map(|i| {
            (0..d)
                .map(|j| rows.iter().map(|r| (r[i] - mean[i]) * (r[j] - mean[j])).sum::<f64>() / n)
                .collect()
        })
        .collect()
}

/// Column scales spread out so eigenvalues are well separated.
pub fn random_rows(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..d).map(|j| rng.random_range(-1.0..1.0) * (1.0 + 1.5 * j as f64)).collect())
        .collect()
}

// ---------- F1 by direct counting ----------

/// Per-class F1 (percent) as 2TP / (2TP + FP + FN), 0 when undefined, and their mean.
pub fn brute_f1(t: &[usize], p: &[usize]) -> ([f64; 3], f64) {
    let mut f1 = [0.0; 3];
    for c in 0..3 {
        let (mut tp, mut fp, mut fneg) = (0.0, 0.0, 0.0);
        for i in 0..t.len() {
            match (t[i] == c, p[i] == c) {
                (true, true) => tp += 1.0,
                (false, true) => fp += 1.0,
                (true, false) => fneg += 1.0,
                _ => {}
            }
        }
        let den = 2.0 * tp + fp + fneg;
        f1[c] = if den == 0.0 { 0.0 } else { 100.0 * 2.0 * tp / den };
    }
    (f1, (f1[0] + f1[1] + f1[2]) / 3.0)
}

// ---------- edit distance by breadth-first search over all strings ----------

pub const MAX_LEN: usize = 7;

/// Sequences over {0,1,2} of length ≤ MAX_LEN, indexed by (length, base-3 value).
struct Space {
    offsets: Vec<usize>,
}

impl Space {
    fn new() -> Self {
        let mut offsets = vec![0];
        for l in 0..=MAX_LEN {
            offsets.push(offsets[l] + 3usize.pow(l as u32));
        }
        Space { offsets }
    }
    fn size(&self) -> usize {
        self.offsets[MAX_LEN + 1]
    }
    fn index(&self, s: &[u8]) -> usize {
        self.offsets[s.len()] + s.iter().fold(0, |acc, &c| acc * 3 + c as usize)
    }
    fn seq(&self, idx: usize) -> Vec<u8> {
        let l = (0..=MAX_LEN).find(|&l| idx < self.offsets[l + 1]).unwrap();
        let mut v = idx - self.offsets[l];
        let mut out = vec![0u8; l];
        for i in (0..l).rev() {
            out[i] = (v % 3) as u8;
            v /= 3;
        }
        out
    }
}

fn neighbours(s: &[u8], out: &mut Vec<Vec<u8>>) {
    out.clear();
    for i in 0..s.len() {
        for c in 0..3u8 {
            if c != s[i] {
                let mut t = s.to_vec();
                t[i] = c;
                out.push(t);
            }
        }
        let mut t = s.to_vec();
        t.remove(i);
        out.push(t);
    }
    if s.len() < MAX_LEN {
        for i in 0..=s.len() {
            for c in 0..3u8 {
                let mut t = s.to_vec();
                t.insert(i, c);
                out.push(t);
            }
        }
    }
}

/// Compares `wer` against breadth-first edit distance for every pair of
/// sequences of length ≤ MAX_LEN (empty references must be rejected).
/// Returns the number of pairs compared or the first mismatch.
pub fn wer_exhaustive() -> Result<usize, String> {
    // An optimal edit script never needs a sequence longer than both ends,
    // so the search can stay within lengths ≤ MAX_LEN.
    let space = Space::new();
    let n = space.size();
    let seqs: Vec<Vec<u8>> = (0..n).map(|i| space.seq(i)).collect();
    let mut buf = Vec::new();
    let adj: Vec<Vec<u32>> = seqs
        .iter()
        .map(|s| {
            neighbours(s, &mut buf);
            buf.iter().map(|t| space.index(t) as u32).collect()
        })
        .collect();
    let mut dist = vec![u8::MAX; n];
    let mut queue = VecDeque::new();
    let mut checked = 0;
    for src in 0..n {
        let r = &seqs[src];
        if r.is_empty() {
            if wer(r, &seqs[1]).is_ok() {
                return Err("empty reference accepted".into());
            }
            continue;
        }
        dist.iter_mut().for_each(|d| *d = u8::MAX);
        dist[src] = 0;
        queue.push_back(src as u32);
        while let Some(u) = queue.pop_front() {
            let du = dist[u as usize];
            for &v in &adj[u as usize] {
                if dist[v as usize] == u8::MAX {
                    dist[v as usize] = du + 1;
                    queue.push_back(v);
                }
            }
        }
        for (dst, h) in seqs.iter().enumerate() {
            let rep = wer(r, h).map_err(|e| e.to_string())?;
            if rep.edits() != dist[dst] as usize || rep.n_ref != r.len() {
                return Err(format!("ref {r:?} hyp {h:?}: dp {} vs search {}", rep.edits(), dist[dst]));
            }
            checked += 1;
        }
    }
    Ok(checked)
}

// ---------- softmax central differences ----------

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs()).max(1e-8)
}

/// Largest relative error between the analytic gradient and central
/// differences with step `h` over `instances` random 5×4 problems.
pub fn softmax_fd_worst(seed: u64, instances: usize, h: f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let (n, d) = (5, 4);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let y: Vec<ClassLabel> = (0..n).map(|_| label(rng.random_range(0..3))).collect();
        let w: Vec<Vec<f64>> = (0..3).map(|_| (0..=d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let l2 = rng.random_range(0.0..0.1);
        let (_, grad) = softmax_loss_and_grad(&w, &x, &y, l2);
        for c in 0..3 {
            for j in 0..=d {
                let mut wp = w.clone();
                wp[c][j] += h;
                let mut wm = w.clone();
                wm[c][j] -= h;
                let num = (softmax_loss_and_grad(&wp, &x, &y, l2).0 - softmax_loss_and_grad(&wm, &x, &y, l2).0) / (2.0 * h);
                worst = worst.max(rel_err(grad[c][j], num));
            }
        }
    }
    worst
}
