use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WerReport {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub n_ref: usize,
    /// (S + D + I) / n_ref; may exceed 1.
    pub wer: f64,
}

impl WerReport {
    pub fn edits(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }
}

/// Unit-cost minimum edit alignment of `hyp` against `reference`.
///
/// Counts come from one optimal path; on ties the backtrace prefers the
/// diagonal (match/substitution), then insertion, then deletion.
pub fn wer<T: PartialEq>(reference: &[T], hyp: &[T]) -> Result<WerReport> {
    if reference.is_empty() {
        return Err(Error::EmptyReference);
    }
    let (n, m) = (reference.len(), hyp.len());
    let w = m + 1;
    let mut cost = vec![0usize; (n + 1) * w];
    for j in 0..=m {
        cost[j] = j;
    }
    for i in 1..=n {
        cost[i * w] = i;
        for j in 1..=m {
            let diag = cost[(i - 1) * w + j - 1] + usize::from(reference[i - 1] != hyp[j - 1]);
            let ins = cost[i * w + j - 1] + 1;
            let del = cost[(i - 1) * w + j] + 1;
            cost[i * w + j] = diag.min(ins).min(del);
        }
    }

    let (mut i, mut j) = (n, m);
    let (mut s, mut d, mut ins) = (0, 0, 0);
    while i > 0 || j > 0 {
        let here = cost[i * w + j];
        if i > 0 && j > 0 {
            let mismatch = usize::from(reference[i - 1] != hyp[j - 1]);
            if cost[(i - 1) * w + j - 1] + mismatch == here {
                s += mismatch;
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if j > 0 && cost[i * w + j - 1] + 1 == here {
            ins += 1;
            j -= 1;
        } else {
            d += 1;
            i -= 1;
        }
    }
    debug_assert_eq!(s + d + ins, cost[n * w + m]);
    Ok(WerReport {
        substitutions: s,
        deletions: d,
        insertions: ins,
        n_ref: n,
        wer: (s + d + ins) as f64 / n as f64,
    })
}
