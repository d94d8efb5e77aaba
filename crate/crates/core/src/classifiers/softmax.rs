use serde::{Deserialize, Serialize};

use super::{ScoreKind, SoftDecision};
use crate::corpus::ClassLabel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxParams {
    pub l2: f64,
    pub lr: f64,
    pub iters: usize,
    /// Stop once every gradient entry is below this magnitude.
    pub tol: f64,
}

impl Default for SoftmaxParams {
    fn default() -> Self {
        SoftmaxParams {
            l2: 1e-3,
            lr: 0.1,
            iters: 2000,
            tol: 1e-7,
        }
    }
}

/// Three-class multinomial logistic regression. Row `c` of `weights` holds
/// the class-`c` coefficients followed by its bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxModel {
    pub weights: Vec<Vec<f64>>,
    pub l2: f64,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub iterations: usize,
}

impl SoftmaxModel {
    pub fn zeros(dim: usize) -> Self {
        SoftmaxModel {
            weights: vec![vec![0.0; dim + 1]; 3],
            l2: 0.0,
            initial_loss: 0.0,
            final_loss: 0.0,
            iterations: 0,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].len() - 1
    }
}

fn logits(weights: &[Vec<f64>], x: &[f64]) -> [f64; 3] {
    let mut z = [0.0; 3];
    for (zc, w) in z.iter_mut().zip(weights) {
        let d = x.len();
        *zc = w[d] + w[..d].iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
    z
}

fn softmax(z: [f64; 3]) -> [f64; 3] {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e = z.map(|v| (v - m).exp());
    let s: f64 = e.iter().sum();
    e.map(|v| v / s)
}

/// Mean negative log-likelihood plus `l2/2 · ‖W‖²` (bias excluded), and its
/// gradient with the same shape as `weights`.
pub fn softmax_loss_and_grad(
    weights: &[Vec<f64>],
    x: &[Vec<f64>],
    y: &[ClassLabel],
    l2: f64,
) -> (f64, Vec<Vec<f64>>) {
    let n = x.len().max(1) as f64;
    let d = weights[0].len() - 1;
    let mut grad = vec![vec![0.0; d + 1]; 3];
    let mut loss = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        let z = logits(weights, xi);
        let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        loss += lse - z[yi.index()];
        let p = softmax(z);
        for c in 0..3 {
            let r = p[c] - f64::from(u8::from(c == yi.index()));
            for j in 0..d {
                grad[c][j] += r * xi[j];
            }
            grad[c][d] += r;
        }
    }
    loss /= n;
    for (g, w) in grad.iter_mut().zip(weights) {
        for j in 0..=d {
            g[j] /= n;
            if j < d {
                g[j] += l2 * w[j];
            }
        }
        loss += 0.5 * l2 * w[..d].iter().map(|v| v * v).sum::<f64>();
    }
    (loss, grad)
}

/// Full-batch gradient descent from zero weights.
pub fn softmax_train(x: &[Vec<f64>], y: &[ClassLabel], params: &SoftmaxParams) -> Result<SoftmaxModel> {
    if params.iters == 0 {
        return Err(Error::InvalidInput("iters must be >= 1".into()));
    }
    if params.l2 < 0.0 {
        return Err(Error::InvalidInput("l2 must be >= 0".into()));
    }
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::InvalidInput(format!("{} rows, {} labels", x.len(), y.len())));
    }
    let d = x[0].len();
    if let Some(r) = x.iter().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: r.len(),
        });
    }
    let mut weights = vec![vec![0.0; d + 1]; 3];
    let (initial_loss, mut grad) = softmax_loss_and_grad(&weights, x, y, params.l2);
    let mut loss = initial_loss;
    let mut iterations = 0;
    for it in 1..=params.iters {
        if grad.iter().flatten().all(|g| g.abs() < params.tol) {
            break;
        }
        for (w, g) in weights.iter_mut().zip(&grad) {
            for (wj, gj) in w.iter_mut().zip(g) {
                *wj -= params.lr * gj;
            }
        }
        (loss, grad) = softmax_loss_and_grad(&weights, x, y, params.l2);
        if !loss.is_finite() {
            return Err(Error::Divergence { iteration: it });
        }
        iterations = it;
    }
    Ok(SoftmaxModel {
        weights,
        l2: params.l2,
        initial_loss,
        final_loss: loss,
        iterations,
    })
}

pub fn softmax_scores(model: &SoftmaxModel, x: &[f64]) -> Result<SoftDecision> {
    if x.len() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            found: x.len(),
        });
    }
    Ok(SoftDecision::new(softmax(logits(&model.weights, x)), ScoreKind::Softmax))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ClassLabel::*;

    #[test]
    fn zero_weights_give_uniform_and_ln3() {
        let x = vec![vec![1.0, -2.0], vec![0.5, 0.0], vec![3.0, 1.0]];
        let y = vec![Hc, Mci, Dementia];
        let (loss, _) = softmax_loss_and_grad(&SoftmaxModel::zeros(2).weights, &x, &y, 0.1);
        assert!((loss - 3f64.ln()).abs() < 1e-9);
        let s = softmax_scores(&SoftmaxModel::zeros(2), &[4.0, 4.0]).unwrap();
        for v in s.scores {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn hand_computed_logits() {
        let mut m = SoftmaxModel::zeros(1);
        m.weights[0][1] = 2f64.ln();
        let s = softmax_scores(&m, &[0.0]).unwrap();
        assert!((s.scores[0] - 0.5).abs() < 1e-15);
        assert!((s.scores[1] - 0.25).abs() < 1e-15);
        assert!((s.scores[2] - 0.25).abs() < 1e-15);

        // A shared bias shift leaves scores unchanged.
        let mut shifted = m.clone();
        shifted.weights.iter_mut().for_each(|w| w[1] += 7.5);
        let t = softmax_scores(&shifted, &[0.0]).unwrap();
        for (a, b) in s.scores.iter().zip(t.scores) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(softmax_scores(&m, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn separable_two_class_reaches_full_accuracy() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 / 10.0 - 1.0 + if i < 10 { -0.1 } else { 0.1 }]).collect();
        let y: Vec<ClassLabel> = (0..20).map(|i| if i < 10 { Hc } else { Dementia }).collect();
        let m = softmax_train(&x, &y, &SoftmaxParams { l2: 0.0, lr: 1.0, iters: 2000, tol: 0.0 }).unwrap();
        assert!(m.final_loss <= m.initial_loss);
        for (xi, yi) in x.iter().zip(&y) {
            assert_eq!(softmax_scores(&m, xi).unwrap().predict(), *yi);
        }
    }

    #[test]
    fn divergence_is_reported_with_iteration() {
        let x = vec![vec![1e200], vec![-1e200]];
        let y = vec![Hc, Mci];
        match softmax_train(&x, &y, &SoftmaxParams { l2: 0.0, lr: 1e200, iters: 10, tol: 0.0 }) {
            Err(Error::Divergence { iteration }) => assert!(iteration >= 1),
            other => panic!("{other:?}"),
        }
        assert!(softmax_train(&x, &y, &SoftmaxParams { iters: 0, ..Default::default() }).is_err());
    }

    #[test]
    fn deterministic() {
        let x = vec![vec![0.1, 0.3], vec![0.9, -0.2], vec![-0.5, 0.5], vec![0.2, 0.2]];
        let y = vec![Hc, Mci, Dementia, Hc];
        let p = SoftmaxParams::default();
        assert_eq!(softmax_train(&x, &y, &p).unwrap(), softmax_train(&x, &y, &p).unwrap());
    }
}
