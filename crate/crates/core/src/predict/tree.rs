//! Exact greedy regression trees, the weak learner of the boosted model.
//!
//! Splits minimize the sum of squared errors. Candidate thresholds are
//! midpoints between consecutive distinct values of a column; rows with
//! value <= threshold go left. Ties between equally good splits resolve
//! to the lowest column, then the lowest threshold, so refits are
//! reproducible.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        column: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<TreeNode>,
}

impl RegressionTree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    column,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[*column] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], at: usize) -> usize {
            match &nodes[at] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => {
                    1 + walk(nodes, *left).max(walk(nodes, *right))
                }
            }
        }
        walk(&self.nodes, 0)
    }
}

struct BestSplit {
    column: usize,
    threshold: f64,
    gain: f64,
}

fn mean_of(targets: &[f64], indices: &[usize]) -> f64 {
    indices.iter().map(|&i| targets[i]).sum::<f64>() / indices.len() as f64
}

fn find_split(
    rows: &[Vec<f64>],
    targets: &[f64],
    indices: &[usize],
    columns: &[usize],
    min_leaf: usize,
) -> Option<BestSplit> {
    let n = indices.len();
    let total: f64 = indices.iter().map(|&i| targets[i]).sum();
    let parent_score = total * total / n as f64;
    let mut best: Option<BestSplit> = None;

    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(n);
    for &col in columns {
        pairs.clear();
        pairs.extend(indices.iter().map(|&i| (rows[i][col], targets[i])));
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite features"));

        let mut left_sum = 0.0;
        let mut left_n = 0usize;
        let mut pos = 0;
        while pos < n {
            let value = pairs[pos].0;
            while pos < n && pairs[pos].0 == value {
                left_sum += pairs[pos].1;
                left_n += 1;
                pos += 1;
            }
            if pos == n {
                break;
            }
            if left_n < min_leaf || n - left_n < min_leaf {
                continue;
            }
            let next = pairs[pos].0;
            let mut threshold = (value + next) / 2.0;
            // midpoint can round up to the right value for adjacent floats;
            // fall back to the left value so the partition stays real
            if threshold >= next {
                threshold = value;
            }
            let right_sum = total - left_sum;
            let right_n = n - left_n;
            let score =
                left_sum * left_sum / left_n as f64 + right_sum * right_sum / right_n as f64;
            let gain = score - parent_score;
            let better = match &best {
                None => gain > 0.0,
                Some(b) => gain > b.gain,
            };
            if better {
                best = Some(BestSplit {
                    column: col,
                    threshold,
                    gain,
                });
            }
        }
    }
    best
}

/// Fits a tree on the rows selected by `indices`, considering only the
/// given feature columns. `max_depth` counts split levels; 0 always gives
/// a single leaf. A node becomes a leaf when it is too small to split
/// into two `min_leaf` halves, its targets are constant, or no split has
/// positive gain.
pub fn fit_tree_on(
    rows: &[Vec<f64>],
    targets: &[f64],
    indices: &[usize],
    columns: &[usize],
    max_depth: usize,
    min_leaf: usize,
) -> RegressionTree {
    assert!(!indices.is_empty(), "cannot fit a tree without rows");
    let mut nodes = Vec::new();
    build(
        rows, targets, indices, columns, max_depth, min_leaf, 0, &mut nodes,
    );
    RegressionTree { nodes }
}

/// Fits a tree on all rows and columns.
pub fn fit_tree(
    rows: &[Vec<f64>],
    targets: &[f64],
    max_depth: usize,
    min_leaf: usize,
) -> RegressionTree {
    let indices: Vec<usize> = (0..rows.len()).collect();
    let columns: Vec<usize> = (0..rows.first().map_or(0, |r| r.len())).collect();
    fit_tree_on(rows, targets, &indices, &columns, max_depth, min_leaf)
}

#[allow(clippy::too_many_arguments)]
fn build(
    rows: &[Vec<f64>],
    targets: &[f64],
    indices: &[usize],
    columns: &[usize],
    max_depth: usize,
    min_leaf: usize,
    depth: usize,
    nodes: &mut Vec<TreeNode>,
) -> usize {
    let mean = mean_of(targets, indices);
    let leaf = |nodes: &mut Vec<TreeNode>| {
        nodes.push(TreeNode::Leaf { value: mean });
        nodes.len() - 1
    };

    if depth >= max_depth || indices.len() < 2 * min_leaf {
        return leaf(nodes);
    }
    let first = targets[indices[0]];
    if indices.iter().all(|&i| targets[i] == first) {
        return leaf(nodes);
    }
    let Some(split) = find_split(rows, targets, indices, columns, min_leaf) else {
        return leaf(nodes);
    };

    let slot = nodes.len();
    nodes.push(TreeNode::Leaf { value: mean });
    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
        .iter()
        .partition(|&&i| rows[i][split.column] <= split.threshold);
    let left = build(
        rows,
        targets,
        &left_idx,
        columns,
        max_depth,
        min_leaf,
        depth + 1,
        nodes,
    );
    let right = build(
        rows,
        targets,
        &right_idx,
        columns,
        max_depth,
        min_leaf,
        depth + 1,
        nodes,
    );
    nodes[slot] = TreeNode::Split {
        column: split.column,
        threshold: split.threshold,
        left,
        right,
    };
    slot
}
