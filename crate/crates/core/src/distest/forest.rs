use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::QuantileModel;
use crate::data::{Arm, Dataset};
use crate::error::{CpteError, Result};
use crate::rng::{derive_seed, rng_from};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    /// Fraction of features tried at each split.
    pub max_features: f64,
    pub min_samples_split: usize,
    pub bootstrap: bool,
}

impl ForestParams {
    /// Hyperparameters by training size.
    pub fn for_size(n: usize) -> Self {
        let (max_depth, max_features, min_samples_split, n_trees) = if n >= 10_000 {
            (25, 0.35, 5, 500)
        } else if n > 100 {
            (15, 0.50, 7, 400)
        } else {
            (15, 0.60, 5, 50)
        };
        Self {
            n_trees,
            max_depth,
            max_features,
            min_samples_split,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// Bootstrap draws (training positions, with repetition) that reached the leaf.
    Leaf { members: Vec<u32> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn leaf(&self, x: &[f64]) -> &[u32] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { members } => return members,
            }
        }
    }
}

/// Bagged squared-error regression trees whose leaves keep their training
/// members, so predictions can be either leaf-weighted means or leaf-weighted
/// empirical distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionForest {
    trees: Vec<Tree>,
    y: Vec<f64>,
    params: ForestParams,
}

struct Grower<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    params: &'a ForestParams,
    n_try: usize,
}

impl RegressionForest {
    /// `x` and `y` are the training rows of a single arm.
    pub fn fit(x: &[Vec<f64>], y: &[f64], params: &ForestParams, seed: u64) -> Result<Self> {
        if y.is_empty() {
            return Err(CpteError::InvalidInput("forest needs at least one training row".into()));
        }
        let p = x[0].len();
        let n_try = ((params.max_features * p as f64).round() as usize).clamp(1, p.max(1));
        let grower = Grower { x, y, params, n_try };
        let grow = |t: &usize| -> Tree {
            let mut rng = rng_from(derive_seed(seed, &[*t as u64]));
            let n = y.len();
            let rows: Vec<u32> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n) as u32).collect()
            } else {
                (0..n as u32).collect()
            };
            let mut tree = Tree { nodes: Vec::new() };
            grower.grow(&mut tree, rows, 0, &mut rng);
            tree
        };
        let ids: Vec<usize> = (0..params.n_trees).collect();
        let trees = crate::par::map(&ids, grow);
        Ok(Self {
            trees,
            y: y.to_vec(),
            params: params.clone(),
        })
    }

    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    /// Sparse leaf weights `(training position, weight)`; they sum to one.
    pub fn weights(&self, x: &[f64]) -> Vec<(usize, f64)> {
        let mut dense = vec![0.0; self.y.len()];
        let mut touched = Vec::new();
        let per_tree = 1.0 / self.trees.len() as f64;
        for tree in &self.trees {
            let members = tree.leaf(x);
            let w = per_tree / members.len() as f64;
            for &m in members {
                let m = m as usize;
                if dense[m] == 0.0 {
                    touched.push(m);
                }
                dense[m] += w;
            }
        }
        touched.sort_unstable();
        touched.into_iter().map(|m| (m, dense[m])).collect()
    }

    pub fn predict_mean(&self, x: &[f64]) -> f64 {
        self.weights(x).iter().map(|&(i, w)| w * self.y[i]).sum()
    }

    /// Weighted empirical quantiles: smallest outcome whose cumulative weight reaches `q`.
    pub fn predict_quantiles(&self, x: &[f64], levels: &[f64]) -> Vec<f64> {
        let mut w = self.weights(x);
        w.sort_by(|a, b| self.y[a.0].total_cmp(&self.y[b.0]).then(a.0.cmp(&b.0)));
        let mut cum = Vec::with_capacity(w.len());
        let mut acc = 0.0;
        for &(_, v) in &w {
            acc += v;
            cum.push(acc);
        }
        let total = acc;
        levels
            .iter()
            .map(|&q| {
                let target = q * total;
                let k = cum.partition_point(|&c| c < target - 1e-12 * total).min(w.len() - 1);
                self.y[w[k].0]
            })
            .collect()
    }
}

impl Grower<'_> {
    fn grow(&self, tree: &mut Tree, rows: Vec<u32>, depth: usize, rng: &mut impl Rng) -> usize {
        let id = tree.nodes.len();
        tree.nodes.push(Node::Leaf { members: Vec::new() });
        let split = if depth < self.params.max_depth && rows.len() >= self.params.min_samples_split {
            self.best_split(&rows, rng)
        } else {
            None
        };
        match split {
            Some((feature, threshold)) => {
                let (l, r): (Vec<u32>, Vec<u32>) = rows
                    .into_iter()
                    .partition(|&i| self.x[i as usize][feature] <= threshold);
                let left = self.grow(tree, l, depth + 1, rng);
                let right = self.grow(tree, r, depth + 1, rng);
                tree.nodes[id] = Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
            }
            None => tree.nodes[id] = Node::Leaf { members: rows },
        }
        id
    }

    /// Best squared-error split at a midpoint between distinct values, over a
    /// random subset of features.
    fn best_split(&self, rows: &[u32], rng: &mut impl Rng) -> Option<(usize, f64)> {
        let p = self.x[0].len();
        let n = rows.len() as f64;
        let total: f64 = rows.iter().map(|&i| self.y[i as usize]).sum();
        let first = self.y[rows[0] as usize];
        if rows.iter().all(|&i| self.y[i as usize] == first) {
            return None;
        }
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order: Vec<(f64, f64)> = Vec::with_capacity(rows.len());
        for feature in sample_indices(rng, p, self.n_try).into_iter() {
            order.clear();
            order.extend(
                rows.iter()
                    .map(|&i| (self.x[i as usize][feature], self.y[i as usize])),
            );
            order.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_sum = 0.0;
            for k in 0..order.len() - 1 {
                left_sum += order[k].1;
                if order[k].0 == order[k + 1].0 {
                    continue;
                }
                let nl = (k + 1) as f64;
                let nr = n - nl;
                let right_sum = total - left_sum;
                // maximising this is minimising the children's squared error
                let gain = left_sum * left_sum / nl + right_sum * right_sum / nr;
                if best.is_none_or(|b| gain > b.0) {
                    best = Some((gain, feature, 0.5 * (order[k].0 + order[k + 1].0)));
                }
            }
        }
        let (gain, feature, threshold) = best?;
        if gain <= total * total / n * (1.0 + 1e-12) {
            return None;
        }
        Some((feature, threshold))
    }
}

/// Quantile regression forest for one arm and one outcome coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestQuantileModel {
    pub forest: RegressionForest,
}

impl QuantileModel for ForestQuantileModel {
    fn quantiles(&self, x: &[f64], levels: &[f64]) -> Vec<Vec<f64>> {
        vec![self.forest.predict_quantiles(x, levels)]
    }

    fn summary(&self) -> String {
        let p = &self.forest.params;
        format!(
            "quantile_forest trees={} depth={} max_features={} min_split={}",
            p.n_trees, p.max_depth, p.max_features, p.min_samples_split
        )
    }
}

pub(crate) fn arm_rows(data: &Dataset, arm: Arm, component: usize) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let idx = data.arm_indices(arm);
    if idx.is_empty() {
        return Err(CpteError::EmptyArm { arm: arm.index() as u8 });
    }
    Ok((
        idx.iter().map(|&i| data.x.row(i).to_vec()).collect(),
        idx.iter().map(|&i| data.y.get(i, component)).collect(),
    ))
}

pub fn fit_qrf(
    data: &Dataset,
    arm: Arm,
    component: usize,
    params: &ForestParams,
    seed: u64,
) -> Result<ForestQuantileModel> {
    let (x, y) = arm_rows(data, arm, component)?;
    Ok(ForestQuantileModel {
        forest: RegressionForest::fit(&x, &y, params, seed)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::empirical_quantile;
    use rand_distr::{Distribution, Normal};

    fn params(n_trees: usize, max_depth: usize) -> ForestParams {
        ForestParams {
            n_trees,
            max_depth,
            max_features: 1.0,
            min_samples_split: 2,
            bootstrap: false,
        }
    }

    #[test]
    fn hyperparameter_table() {
        assert_eq!(ForestParams::for_size(10_000).n_trees, 500);
        assert_eq!(ForestParams::for_size(10_000).max_depth, 25);
        assert_eq!(ForestParams::for_size(5000).min_samples_split, 7);
        assert_eq!(ForestParams::for_size(101).max_features, 0.5);
        assert_eq!(ForestParams::for_size(100).n_trees, 50);
    }

    #[test]
    fn depth_zero_is_global_quantile() {
        let x: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..50).map(|i| ((i * 37) % 50) as f64).collect();
        let f = RegressionForest::fit(&x, &y, &params(1, 0), 0).unwrap();
        let mut sorted = y.clone();
        sorted.sort_by(f64::total_cmp);
        for q in [0.1, 0.5, 0.93] {
            let expected = sorted[((q * 50.0f64).ceil() as usize).saturating_sub(1)];
            assert_eq!(f.predict_quantiles(&[3.0], &[q])[0], expected);
            assert!((expected - empirical_quantile(&sorted, q)).abs() <= 1.0);
        }
    }

    #[test]
    fn pure_leaf_gives_constant() {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..40).map(|i| if i < 20 { 2.0 } else { 7.0 }).collect();
        let f = RegressionForest::fit(&x, &y, &params(5, 4), 1).unwrap();
        assert_eq!(f.predict_quantiles(&[3.0], &[0.05, 0.5, 0.95]), vec![2.0; 3]);
        let w = f.weights(&[30.0]);
        assert!((w.iter().map(|p| p.1).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn median_tracks_linear_signal() {
        let mut rng = rng_from(4);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let x: Vec<Vec<f64>> = (0..2000).map(|_| vec![rng.random_range(-1.0..1.0)]).collect();
        let y: Vec<f64> = x.iter().map(|r| r[0] + noise.sample(&mut rng)).collect();
        let f = RegressionForest::fit(&x, &y, &ForestParams::for_size(2000), 5).unwrap();
        let grid: Vec<f64> = (0..41).map(|i| -0.8 + 0.04 * i as f64).collect();
        let mae = grid
            .iter()
            .map(|&g| (f.predict_quantiles(&[g], &[0.5])[0] - g).abs())
            .sum::<f64>()
            / grid.len() as f64;
        assert!(mae < 0.1, "{mae}");
        let (lo, hi) = (
            y.iter().cloned().fold(f64::INFINITY, f64::min),
            y.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        );
        for q in f.predict_quantiles(&[0.3], &[0.001, 0.5, 0.999]) {
            assert!((lo..=hi).contains(&q));
        }
    }
}
