use rand::seq::index::sample;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, ScoreKind, SoftDecision};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 4,
            min_leaf: 2,
        }
    }
}

/// Features considered at each split of a forest tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    /// `max(1, floor(√d))` drawn without replacement.
    #[default]
    Sqrt,
    All,
}

impl MaxFeatures {
    fn count(self, d: usize) -> usize {
        match self {
            MaxFeatures::Sqrt => ((d as f64).sqrt().floor() as usize).max(1),
            MaxFeatures::All => d,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub tree: TreeParams,
    pub bootstrap: bool,
    pub max_features: MaxFeatures,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            tree: TreeParams::default(),
            bootstrap: true,
            max_features: MaxFeatures::Sqrt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        /// Class frequencies of the training rows reaching the leaf.
        freq: [f64; 3],
        n: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// CART tree stored as a node arena; node 0 is the root. Rows with
/// `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub nodes: Vec<Node>,
    pub n_features: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<TreeModel>,
    pub seeds: Vec<u64>,
    pub n_features: usize,
}

fn gini(counts: &[usize; 3], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: Vec<usize>,
    params: TreeParams,
    mtry: usize,
    rng: Option<ChaCha8Rng>,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn leaf(&mut self, counts: [usize; 3], n: usize) -> usize {
        let freq = counts.map(|c| c as f64 / n as f64);
        self.nodes.push(Node::Leaf { freq, n });
        self.nodes.len() - 1
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let d = self.x[0].len();
        match self.rng.as_mut() {
            Some(rng) if self.mtry < d => {
                let mut f = sample(rng, d, self.mtry).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        }
    }

    /// Lowest weighted child impurity; ties keep the earlier feature and
    /// the smaller threshold.
    fn best_split(&mut self, rows: &[usize], counts: &[usize; 3]) -> Option<(usize, f64)> {
        let n = rows.len();
        let min_leaf = self.params.min_leaf.max(1);
        let mut best: Option<(f64, usize, f64)> = None;
        for f in self.candidate_features() {
            let mut order = rows.to_vec();
            order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
            let mut left = [0usize; 3];
            for i in 0..n - 1 {
                left[self.y[order[i]]] += 1;
                let (lo, hi) = (self.x[order[i]][f], self.x[order[i + 1]][f]);
                let n_left = i + 1;
                if lo == hi || n_left < min_leaf || n - n_left < min_leaf {
                    continue;
                }
                let right = [0, 1, 2].map(|c| counts[c] - left[c]);
                let imp = (n_left as f64 * gini(&left, n_left)
                    + (n - n_left) as f64 * gini(&right, n - n_left))
                    / n as f64;
                if best.is_none_or(|(b, _, _)| imp < b) {
                    best = Some((imp, f, lo + (hi - lo) / 2.0));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }

    fn grow(&mut self, rows: &[usize], depth: usize) -> usize {
        let mut counts = [0usize; 3];
        for &r in rows {
            counts[self.y[r]] += 1;
        }
        let n = rows.len();
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || depth >= self.params.max_depth || n < 2 * self.params.min_leaf.max(1) {
            return self.leaf(counts, n);
        }
        let Some((feature, threshold)) = self.best_split(rows, &counts) else {
            return self.leaf(counts, n);
        };
        let (l, r): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&i| self.x[i][feature] <= threshold);
        let id = self.nodes.len();
        self.nodes.push(Node::Split {
            feature,
            threshold,
            left: 0,
            right: 0,
        });
        let left = self.grow(&l, depth + 1);
        let right = self.grow(&r, depth + 1);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
}

fn build(data: &Dataset, rows: &[usize], params: TreeParams, mtry: usize, rng: Option<ChaCha8Rng>) -> TreeModel {
    let mut b = Builder {
        x: &data.x,
        y: data.y.iter().map(|l| l.index()).collect(),
        params,
        mtry,
        rng,
        nodes: Vec::new(),
    };
    b.grow(rows, 0);
    TreeModel {
        nodes: b.nodes,
        n_features: data.dim(),
    }
}

fn check(data: &Dataset) -> Result<()> {
    if data.n() < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 rows, got {}", data.n())));
    }
    if data.dim() == 0 {
        return Err(Error::InvalidInput("no features".into()));
    }
    Ok(())
}

/// Greedy Gini CART over all features. Deterministic.
pub fn tree_train(data: &Dataset, params: &TreeParams) -> Result<TreeModel> {
    check(data)?;
    let rows: Vec<usize> = (0..data.n()).collect();
    Ok(build(data, &rows, *params, data.dim(), None))
}

pub fn forest_train(data: &Dataset, params: &ForestParams, seed: u64) -> Result<ForestModel> {
    check(data)?;
    if params.n_trees == 0 {
        return Err(Error::InvalidInput("n_trees must be >= 1".into()));
    }
    let n = data.n();
    let mtry = params.max_features.count(data.dim());
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let mut trees = Vec::with_capacity(params.n_trees);
    let mut seeds = Vec::with_capacity(params.n_trees);
    for _ in 0..params.n_trees {
        let s = master.next_u64();
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let rows: Vec<usize> = if params.bootstrap {
            (0..n).map(|_| rng.random_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        trees.push(build(data, &rows, params.tree, mtry, Some(rng)));
        seeds.push(s);
    }
    Ok(ForestModel {
        trees,
        seeds,
        n_features: data.dim(),
    })
}

impl TreeModel {
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    fn leaf_freq(&self, x: &[f64]) -> [f64; 3] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { freq, .. } => return *freq,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn scores(&self, x: &[f64]) -> Result<SoftDecision> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                found: x.len(),
            });
        }
        Ok(SoftDecision::new(self.leaf_freq(x), ScoreKind::Probability))
    }
}

impl ForestModel {
    /// Mean of the trees' leaf frequencies.
    pub fn scores(&self, x: &[f64]) -> Result<SoftDecision> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                found: x.len(),
            });
        }
        let mut s = [0.0; 3];
        for t in &self.trees {
            let f = t.leaf_freq(x);
            for c in 0..3 {
                s[c] += f[c];
            }
        }
        let k = self.trees.len() as f64;
        Ok(SoftDecision::new(s.map(|v| v / k), ScoreKind::Probability))
    }
}
