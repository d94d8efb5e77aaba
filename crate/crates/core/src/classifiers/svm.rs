use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, ScoreKind, SoftDecision, Standardizer};
use crate::error::{Error, Result};

/// One-vs-rest linear SVM over standardized features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvmModel {
    pub standardizer: Standardizer,
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    /// Classes seen during training; the others get no machine.
    pub present: [bool; 3],
    pub c: f64,
    /// Primal objective of each machine after every epoch.
    pub objective_trace: Vec<Vec<f64>>,
}

const PG_TOL: f64 = 1e-3;

/// ½(‖w‖² + b²) + C·Σ max(0, 1 − y(w·x + b)).
fn primal_objective(w: &[f64], b: f64, x: &[Vec<f64>], y: &[f64], c: f64) -> f64 {
    let reg = 0.5 * (w.iter().map(|v| v * v).sum::<f64>() + b * b);
    let hinge: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| (1.0 - yi * (dot(w, xi) + b)).max(0.0))
        .sum();
    reg + c * hinge
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Dual coordinate descent for one binary hinge-loss machine. The bias is
/// handled as a weight on a constant unit feature. Returns `(w, b, trace)`.
fn train_binary(
    x: &[Vec<f64>],
    y: &[f64],
    c: f64,
    epochs: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<f64>, f64, Vec<f64>) {
    let n = x.len();
    let d = x[0].len();
    let q: Vec<f64> = x.iter().map(|xi| dot(xi, xi) + 1.0).collect();
    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = Vec::new();
    for _ in 0..epochs {
        order.shuffle(rng);
        let mut max_pg: f64 = 0.0;
        for &i in &order {
            let g = y[i] * (dot(&w, &x[i]) + b) - 1.0;
            let pg = if alpha[i] <= 0.0 {
                g.min(0.0)
            } else if alpha[i] >= c {
                g.max(0.0)
            } else {
                g
            };
            max_pg = max_pg.max(pg.abs());
            if pg.abs() > 1e-12 {
                let old = alpha[i];
                alpha[i] = (old - g / q[i]).clamp(0.0, c);
                let step = (alpha[i] - old) * y[i];
                for (wj, xj) in w.iter_mut().zip(&x[i]) {
                    *wj += step * xj;
                }
                b += step;
            }
        }
        trace.push(primal_objective(&w, b, x, y, c));
        if max_pg < PG_TOL {
            break;
        }
    }
    (w, b, trace)
}

pub fn svm_train(data: &Dataset, c: f64, epochs: usize, seed: u64) -> Result<LinearSvmModel> {
    if !(c > 0.0) {
        return Err(Error::InvalidInput(format!("C must be positive, got {c}")));
    }
    if epochs == 0 {
        return Err(Error::InvalidInput("epochs must be >= 1".into()));
    }
    let counts = data.class_counts();
    if data.n() < 2 || counts.iter().filter(|&&k| k > 0).count() < 2 {
        return Err(Error::SingleClass);
    }
    let standardizer = Standardizer::fit(&data.x);
    let x = standardizer.apply_all(&data.x)?;
    let d = data.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut weights = vec![vec![0.0; d]; 3];
    let mut bias = vec![0.0; 3];
    let mut present = [false; 3];
    let mut objective_trace = vec![Vec::new(); 3];
    for class in 0..3 {
        if counts[class] == 0 {
            continue;
        }
        present[class] = true;
        let y: Vec<f64> = data
            .y
            .iter()
            .map(|l| if l.index() == class { 1.0 } else { -1.0 })
            .collect();
        let (w, b, trace) = train_binary(&x, &y, c, epochs, &mut rng);
        weights[class] = w;
        bias[class] = b;
        objective_trace[class] = trace;
    }
    Ok(LinearSvmModel {
        standardizer,
        weights,
        bias,
        present,
        c,
        objective_trace,
    })
}

/// Signed distance of the standardized sample to each class hyperplane.
///
/// A zero-norm machine scores 0. A class absent from training scores one
/// unit below the lowest trained machine so it is never predicted.
pub fn svm_scores(model: &LinearSvmModel, x: &[f64]) -> Result<SoftDecision> {
    let z = model.standardizer.apply(x)?;
    let mut scores = [0.0; 3];
    for c in 0..3 {
        let norm = dot(&model.weights[c], &model.weights[c]).sqrt();
        if norm > 0.0 {
            scores[c] = (dot(&model.weights[c], &z) + model.bias[c]) / norm;
        }
    }
    let floor = (0..3)
        .filter(|&c| model.present[c])
        .map(|c| scores[c])
        .fold(f64::INFINITY, f64::min);
    for c in 0..3 {
        if !model.present[c] {
            scores[c] = floor - 1.0;
        }
    }
    Ok(SoftDecision::new(scores, ScoreKind::Distance))
}
