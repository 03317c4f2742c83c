use serde::{Deserialize, Serialize};

use super::{Decide, Policy};
use crate::data::Matrix;
use crate::error::{CpteError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    /// `x[feature] <= threshold` goes left.
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf { treat: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreePolicy {
    pub root: TreeNode,
}

impl TreePolicy {
    pub fn depth(&self) -> usize {
        fn d(n: &TreeNode) -> usize {
            match n {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + d(left).max(d(right)),
            }
        }
        d(&self.root)
    }
}

impl Decide for TreePolicy {
    fn treat(&self, x: &[f64]) -> bool {
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { treat } => return *treat,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if x[*feature] <= *threshold { left } else { right },
            }
        }
    }
}

/// `Σ_i π(x_i) Γ_W,i + (1 − π(x_i)) Γ_L,i`.
pub fn tree_reward(policy: &dyn Decide, x: &Matrix, gw: &[f64], gl: &[f64]) -> f64 {
    x.rows()
        .zip(gw.iter().zip(gl))
        .map(|(r, (&a, &b))| if policy.treat(r) { a } else { b })
        .sum()
}

#[derive(Debug, Clone, Copy)]
struct Leaf {
    sw: f64,
    sl: f64,
}

impl Leaf {
    fn reward(self) -> f64 {
        self.sw.max(self.sl)
    }

    fn node(self) -> TreeNode {
        TreeNode::Leaf {
            treat: self.sw > self.sl,
        }
    }
}

/// Best depth-≤1 tree over the units with `member[i] == side`, scanning
/// features in order and thresholds ascending; a split must strictly beat
/// every earlier candidate, including the unsplit leaf.
fn best_stump(
    x: &Matrix,
    sorted: &[Vec<usize>],
    member: &[u8],
    side: u8,
    gw: &[f64],
    gl: &[f64],
) -> (f64, TreeNode) {
    let mut total = Leaf { sw: 0.0, sl: 0.0 };
    let mut count = 0usize;
    for (i, &m) in member.iter().enumerate() {
        if m == side {
            total.sw += gw[i];
            total.sl += gl[i];
            count += 1;
        }
    }
    let mut best_reward = total.reward();
    let mut best_node = total.node();
    if count < 2 {
        return (best_reward, best_node);
    }
    for (feature, order) in sorted.iter().enumerate() {
        let mut left = Leaf { sw: 0.0, sl: 0.0 };
        let mut prev: Option<usize> = None;
        for &i in order {
            if member[i] != side {
                continue;
            }
            if let Some(p) = prev {
                let (a, b) = (x.get(p, feature), x.get(i, feature));
                if a != b {
                    let right = Leaf {
                        sw: total.sw - left.sw,
                        sl: total.sl - left.sl,
                    };
                    let r = left.reward() + right.reward();
                    if r > best_reward {
                        best_reward = r;
                        best_node = TreeNode::Split {
                            feature,
                            threshold: 0.5 * (a + b),
                            left: Box::new(left.node()),
                            right: Box::new(right.node()),
                        };
                    }
                }
            }
            left.sw += gw[i];
            left.sl += gl[i];
            prev = Some(i);
        }
    }
    (best_reward, best_node)
}

/// Exhaustive axis-aligned policy tree of depth 1 or 2 maximizing
/// `Σ_leaves max(Σ Γ_W, Σ Γ_L)`. Leaves treat only when `Σ Γ_W > Σ Γ_L`.
pub fn policy_tree_fit(train_x: &Matrix, gw: &[f64], gl: &[f64], depth: usize) -> Result<Policy> {
    let n = train_x.nrows();
    if gw.len() != n || gl.len() != n {
        return Err(CpteError::DimensionMismatch {
            expected: n,
            got: gw.len().min(gl.len()),
        });
    }
    if !(1..=2).contains(&depth) {
        return Err(CpteError::InvalidInput("policy tree depth must be 1 or 2".into()));
    }
    if n == 0 {
        return Err(CpteError::InvalidInput("policy tree needs training points".into()));
    }
    let p = train_x.ncols();
    let sorted: Vec<Vec<usize>> = (0..p)
        .map(|j| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| train_x.get(a, j).total_cmp(&train_x.get(b, j)).then(a.cmp(&b)));
            idx
        })
        .collect();
    let all = vec![0u8; n];
    let (stump_reward, stump) = best_stump(train_x, &sorted, &all, 0, gw, gl);
    if depth == 1 {
        return Ok(Policy::Tree(TreePolicy { root: stump }));
    }

    // depth 2: every root split, each side completed by its best stump
    let per_feature = |j: &usize| -> Option<(f64, TreeNode)> {
        let j = *j;
        let order = &sorted[j];
        let mut member = vec![1u8; n];
        let mut best: Option<(f64, TreeNode)> = None;
        for k in 0..n - 1 {
            member[order[k]] = 0;
            let (a, b) = (train_x.get(order[k], j), train_x.get(order[k + 1], j));
            if a == b {
                continue;
            }
            let (rl, nl) = best_stump(train_x, &sorted, &member, 0, gw, gl);
            let (rr, nr) = best_stump(train_x, &sorted, &member, 1, gw, gl);
            let r = rl + rr;
            if best.as_ref().is_none_or(|(br, _)| r > *br) {
                best = Some((
                    r,
                    TreeNode::Split {
                        feature: j,
                        threshold: 0.5 * (a + b),
                        left: Box::new(nl),
                        right: Box::new(nr),
                    },
                ));
            }
        }
        best
    };
    let features: Vec<usize> = (0..p).collect();
    let candidates = crate::par::map(&features, per_feature);
    let mut best_reward = stump_reward;
    let mut best_node = stump;
    for (r, node) in candidates.into_iter().flatten() {
        if r > best_reward {
            best_reward = r;
            best_node = node;
        }
    }
    Ok(Policy::Tree(TreePolicy { root: best_node }))
}
