//! Greedy binary classification trees with Gini impurity.
//!
//! A fitted tree is the piecewise-constant function
//! `f(x) = sum_m c_m * 1{x in R_m}`, where each leaf holds the weighted
//! class-1 share `c_m` of the training rows that reached region `R_m`.
//! Rows with a masked value in the split column follow the node's learned
//! missing direction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::rng;

pub const TREE_SCHEMA_VERSION: u32 = 1;

/// Splits with a smaller impurity decrease are treated as no improvement.
const MIN_DECREASE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Split {
        column: usize,
        /// Rows with `x < threshold` go left.
        threshold: f64,
        /// Direction for masked values.
        missing_left: bool,
        left: usize,
        right: usize,
        /// Criterion improvement credited to `column`.
        gain: f64,
    },
    Leaf {
        value: f64,
        /// Sum of training weights in the leaf.
        weight: f64,
        /// Number of training rows in the leaf.
        count: usize,
    },
}

/// Binary tree stored as a node array; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub schema_version: u32,
    pub n_columns: usize,
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split {
                    column,
                    threshold,
                    missing_left,
                    left,
                    right,
                    ..
                } => {
                    let v = row[*column];
                    let go_left = if v.is_nan() { *missing_left } else { v < *threshold };
                    i = if go_left { *left } else { *right };
                }
            }
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        match &self.nodes[self.leaf_index(row)] {
            Node::Leaf { value, .. } => *value,
            Node::Split { .. } => unreachable!("leaf_index returns a leaf"),
        }
    }

    /// Predicts every row of `x`, which must have the training column count.
    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        if x.n_cols() != self.n_columns {
            return Err(Error::ColumnMismatch(format!(
                "tree expects {} columns, got {}",
                self.n_columns,
                x.n_cols()
            )));
        }
        Ok((0..x.n_rows()).map(|i| self.predict_row(&x.row(i))).collect())
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    /// Number of split levels on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(t: &DecisionTree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(t, *left).max(walk(t, *right)),
            }
        }
        walk(self, 0)
    }

    /// Per-column sum of split gains.
    pub fn importance(&self) -> Vec<f64> {
        let mut imp = vec![0.0; self.n_columns];
        for n in &self.nodes {
            if let Node::Split { column, gain, .. } = n {
                imp[*column] += gain;
            }
        }
        imp
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let t: DecisionTree = serde_json::from_str(s)?;
        if t.schema_version != TREE_SCHEMA_VERSION {
            return Err(Error::invalid(format!(
                "unsupported tree schema version {}",
                t.schema_version
            )));
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// Maximum number of split levels; 1 grows a stump.
    pub max_depth: usize,
    /// Minimum number of rows in each child of a split.
    pub min_node_size: usize,
    /// Candidate columns drawn per node; 0 means all.
    pub mtry: usize,
    pub seed: u64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 64,
            min_node_size: 1,
            mtry: 0,
            seed: 0,
        }
    }
}

/// `2 p (1 - p)` with `p = n1 / (n0 + n1)`. Accepts fractional (weighted) counts.
pub fn gini_impurity(n0: f64, n1: f64) -> Result<f64> {
    if !(n0 >= 0.0 && n1 >= 0.0 && n0 + n1 > 0.0) {
        return Err(Error::degenerate("gini of an empty node"));
    }
    Ok(gini(n0, n1))
}

#[inline]
fn gini(w0: f64, w1: f64) -> f64 {
    let p = w1 / (w0 + w1);
    2.0 * p * (1.0 - p)
}

/// Impurity decrease per unit weight: `g(parent) - (wl/w) g(left) - (wr/w) g(right)`.
#[inline]
pub fn gini_decrease(left: (f64, f64), right: (f64, f64)) -> f64 {
    let (wl, wr) = (left.0 + left.1, right.0 + right.1);
    let w = wl + wr;
    gini(left.0 + right.0, left.1 + right.1) - (wl / w) * gini(left.0, left.1) - (wr / w) * gini(right.0, right.1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub column: usize,
    pub threshold: f64,
    /// Per-unit-weight Gini decrease at this node.
    pub decrease: f64,
    pub missing_left: bool,
}

#[derive(Default, Clone, Copy)]
struct ClassWeights {
    w0: f64,
    w1: f64,
    n: usize,
}

impl ClassWeights {
    fn add(&mut self, y: bool, w: f64) {
        if y {
            self.w1 += w;
        } else {
            self.w0 += w;
        }
        self.n += 1;
    }

    fn plus(self, o: ClassWeights) -> ClassWeights {
        ClassWeights {
            w0: self.w0 + o.w0,
            w1: self.w1 + o.w1,
            n: self.n + o.n,
        }
    }

    fn minus(self, o: ClassWeights) -> ClassWeights {
        ClassWeights {
            w0: self.w0 - o.w0,
            w1: self.w1 - o.w1,
            n: self.n - o.n,
        }
    }

    fn weight(&self) -> f64 {
        self.w0 + self.w1
    }
}

/// Best Gini split of `rows` over the `candidates` columns.
///
/// Thresholds are midpoints between consecutive distinct values. Masked rows
/// are tried on both sides. Each child must receive at least `min_leaf` rows
/// and positive weight. Ties go to the lowest column index, then the lowest
/// threshold, then missing-left. Returns `None` when no split decreases impurity.
pub fn best_split(
    x: &FeatureMatrix,
    y: &[bool],
    weights: &[f64],
    rows: &[usize],
    candidates: &[usize],
    min_leaf: usize,
) -> Option<SplitSpec> {
    let mut cand = candidates.to_vec();
    cand.sort_unstable();
    cand.dedup();
    let mut best: Option<SplitSpec> = None;
    let mut buf: Vec<(f64, bool, f64)> = Vec::with_capacity(rows.len());
    for &j in &cand {
        if let Some(s) = best_split_column(x.column(j), y, weights, rows, j, min_leaf.max(1), &mut buf) {
            if best.is_none_or(|b| s.decrease > b.decrease) {
                best = Some(s);
            }
        }
    }
    best
}

fn best_split_column(
    col: &[f64],
    y: &[bool],
    weights: &[f64],
    rows: &[usize],
    column: usize,
    min_leaf: usize,
    buf: &mut Vec<(f64, bool, f64)>,
) -> Option<SplitSpec> {
    buf.clear();
    let mut missing = ClassWeights::default();
    for &r in rows {
        let v = col[r];
        if v.is_nan() {
            missing.add(y[r], weights[r]);
        } else {
            buf.push((v, y[r], weights[r]));
        }
    }
    if buf.len() < 2 {
        return None;
    }
    buf.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    let mut complete = ClassWeights::default();
    for &(_, yi, w) in buf.iter() {
        complete.add(yi, w);
    }
    let total = complete.plus(missing);

    let mut best: Option<SplitSpec> = None;
    let mut left = ClassWeights::default();
    for i in 0..buf.len() - 1 {
        left.add(buf[i].1, buf[i].2);
        let (v, next) = (buf[i].0, buf[i + 1].0);
        if v == next {
            continue;
        }
        let mut threshold = v + (next - v) / 2.0;
        if threshold <= v {
            threshold = next;
        }
        let directions: &[bool] = if missing.n > 0 { &[true, false] } else { &[false] };
        for &missing_left in directions {
            let l = if missing_left { left.plus(missing) } else { left };
            let r = total.minus(l);
            if l.n < min_leaf || r.n < min_leaf || l.weight() <= 0.0 || r.weight() <= 0.0 {
                continue;
            }
            let decrease = gini_decrease((l.w0, l.w1), (r.w0, r.w1));
            if decrease > MIN_DECREASE && best.is_none_or(|b| decrease > b.decrease) {
                best = Some(SplitSpec {
                    column,
                    threshold,
                    decrease,
                    missing_left,
                });
            }
        }
    }
    // Without training-time missing values, unseen masked rows follow the heavier child.
    if let Some(b) = best.as_mut() {
        if missing.n == 0 {
            let lw: f64 = buf.iter().filter(|e| e.0 < b.threshold).map(|e| e.2).sum();
            b.missing_left = lw > total.weight() - lw;
        }
    }
    best
}

/// Grows a tree on the rows with positive weight.
pub fn fit_tree(x: &FeatureMatrix, y: &[bool], weights: &[f64], params: &TreeParams) -> Result<DecisionTree> {
    let n = x.n_rows();
    if y.len() != n || weights.len() != n {
        return Err(Error::invalid(format!(
            "row count mismatch: x has {n}, y has {}, weights has {}",
            y.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::invalid("weights must be finite and non-negative"));
    }
    let rows: Vec<usize> = (0..n).filter(|&i| weights[i] > 0.0).collect();
    if rows.is_empty() {
        return Err(Error::degenerate("no rows with positive weight"));
    }
    if params.max_depth < 1 || params.min_node_size < 1 {
        return Err(Error::invalid("max_depth and min_node_size must be >= 1"));
    }
    let p = x.n_cols();
    if params.mtry > p {
        return Err(Error::invalid(format!("mtry {} exceeds column count {p}", params.mtry)));
    }
    let all_columns: Vec<usize> = (0..p).collect();
    let mut rng = rng::stream(params.seed);
    let root_weight: f64 = rows.iter().map(|&r| weights[r]).sum();

    let mut nodes: Vec<Node> = vec![Node::Leaf {
        value: 0.0,
        weight: 0.0,
        count: 0,
    }];
    let mut stack = vec![(0usize, rows, 0usize)];
    while let Some((id, node_rows, depth)) = stack.pop() {
        let mut stats = ClassWeights::default();
        for &r in &node_rows {
            stats.add(y[r], weights[r]);
        }
        let leaf = Node::Leaf {
            value: stats.w1 / stats.weight(),
            weight: stats.weight(),
            count: node_rows.len(),
        };
        let pure = stats.w0 == 0.0 || stats.w1 == 0.0;
        if pure || depth >= params.max_depth || node_rows.len() < 2 * params.min_node_size {
            nodes[id] = leaf;
            continue;
        }
        let candidates = if params.mtry == 0 || params.mtry == p {
            all_columns.clone()
        } else {
            rng::sample_without_replacement(&mut rng, &all_columns, params.mtry)
        };
        let Some(split) = best_split(x, y, weights, &node_rows, &candidates, params.min_node_size) else {
            nodes[id] = leaf;
            continue;
        };
        let col = x.column(split.column);
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = node_rows.iter().partition(|&&r| {
            let v = col[r];
            if v.is_nan() {
                split.missing_left
            } else {
                v < split.threshold
            }
        });
        let (left, right) = (nodes.len(), nodes.len() + 1);
        nodes.push(Node::Leaf {
            value: 0.0,
            weight: 0.0,
            count: 0,
        });
        nodes.push(Node::Leaf {
            value: 0.0,
            weight: 0.0,
            count: 0,
        });
        nodes[id] = Node::Split {
            column: split.column,
            threshold: split.threshold,
            missing_left: split.missing_left,
            left,
            right,
            gain: stats.weight() / root_weight * split.decrease,
        };
        stack.push((right, right_rows, depth + 1));
        stack.push((left, left_rows, depth + 1));
    }
    Ok(DecisionTree {
        schema_version: TREE_SCHEMA_VERSION,
        n_columns: p,
        nodes,
    })
}

/// Class-1 probability for one row.
pub fn predict_tree(tree: &DecisionTree, row: &[f64]) -> Result<f64> {
    if row.len() != tree.n_columns {
        return Err(Error::ColumnMismatch(format!(
            "tree expects {} columns, row has {}",
            tree.n_columns,
            row.len()
        )));
    }
    Ok(tree.predict_row(row))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_col(x: Vec<f64>) -> FeatureMatrix {
        FeatureMatrix::from_named_columns(&["x"], vec![x]).unwrap()
    }

    #[test]
    fn gini_values() {
        assert_eq!(gini_impurity(5.0, 0.0).unwrap(), 0.0);
        assert_eq!(gini_impurity(4.0, 4.0).unwrap(), 0.5);
        assert_eq!(gini_impurity(3.0, 1.0).unwrap(), 0.375);
        assert!(gini_impurity(0.0, 0.0).is_err());
    }

    #[test]
    fn perfect_separator() {
        let x = one_col(vec![1.0, 2.0, 3.0, 4.0]);
        let y = [false, false, true, true];
        let w = [1.0; 4];
        let s = best_split(&x, &y, &w, &[0, 1, 2, 3], &[0], 1).unwrap();
        assert_eq!(s.threshold, 2.5);
        assert_eq!(s.decrease, 0.5);

        let stump = fit_tree(&x, &y, &w, &TreeParams { max_depth: 1, ..Default::default() }).unwrap();
        assert_eq!(stump.depth(), 1);
        let pred = stump.predict(&x).unwrap();
        assert_eq!(pred, vec![0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn constant_labels_have_no_split() {
        let x = one_col(vec![1.0, 2.0, 3.0]);
        assert!(best_split(&x, &[true; 3], &[1.0; 3], &[0, 1, 2], &[0], 1).is_none());
    }

    #[test]
    fn missing_values_follow_better_side() {
        // NaN rows are all positive: sending them right (with the large-x positives) is best
        let x = one_col(vec![1.0, 2.0, 3.0, 4.0, f64::NAN, f64::NAN]);
        let y = [false, false, true, true, true, true];
        let s = best_split(&x, &y, &[1.0; 6], &[0, 1, 2, 3, 4, 5], &[0], 1).unwrap();
        assert!(!s.missing_left);
        assert_eq!(s.decrease, gini(2.0, 4.0));
        let t = fit_tree(&x, &y, &[1.0; 6], &TreeParams::default()).unwrap();
        assert_eq!(t.predict_row(&[f64::NAN]), 1.0);
    }

    #[test]
    fn leaf_counts_sum_to_rows_and_gains_positive() {
        let x = FeatureMatrix::from_named_columns(
            &["a", "b"],
            vec![
                (0..40).map(|i| ((i * 7) % 13) as f64).collect(),
                (0..40).map(|i| ((i * 5) % 11) as f64).collect(),
            ],
        )
        .unwrap();
        let y: Vec<bool> = (0..40).map(|i| (i * 3) % 7 < 3).collect();
        let t = fit_tree(&x, &y, &[1.0; 40], &TreeParams::default()).unwrap();
        let total: usize = t
            .nodes
            .iter()
            .map(|n| match n {
                Node::Leaf { count, .. } => *count,
                _ => 0,
            })
            .sum();
        assert_eq!(total, 40);
        for n in &t.nodes {
            match n {
                Node::Split { gain, .. } => assert!(*gain > 0.0),
                Node::Leaf { value, .. } => assert!((0.0..=1.0).contains(value)),
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let x = one_col(vec![1.0, 2.0, 3.0, 4.0]);
        let t = fit_tree(&x, &[false, true, false, true], &[1.0; 4], &TreeParams::default()).unwrap();
        let back = DecisionTree::from_json(&t.to_json().unwrap()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn predict_rejects_wrong_width() {
        let x = one_col(vec![1.0, 2.0]);
        let t = fit_tree(&x, &[false, true], &[1.0; 2], &TreeParams::default()).unwrap();
        assert!(predict_tree(&t, &[1.0, 2.0]).is_err());
    }
}
