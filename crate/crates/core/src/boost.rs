//! Stagewise gradient-boosted regression trees for a binary target.
//!
//! The score is `F(x) = base + sum_m f_m(x)` and the default probability is
//! `logistic(F)` (logistic loss) or `logistic(2F)` (exponential loss). Each
//! round fits a regression tree to the negative gradient on a row subsample,
//! splitting by the reduction in gradient sum of squares and setting leaves
//! to the damped Newton step `-eta * G / (H + LAMBDA_REG)`.
//!
//! Split search runs on per-column quantile bins (at most `MAX_BINS`), which
//! is exact whenever a column has no more distinct values than that.

use serde::{Deserialize, Serialize};

use crate::cart::{DecisionTree, Node, TREE_SCHEMA_VERSION};
use crate::ensemble::rank_importance;
use crate::error::{Error, Result};
use crate::eval::{auc, stratified_folds};
use crate::features::FeatureMatrix;
use crate::par;
use crate::rng;

/// Ridge term in the leaf denominator.
pub const LAMBDA_REG: f64 = 1.0;
pub const MAX_BINS: usize = 255;
const MISSING_BIN: u8 = u8::MAX;
const MIN_GAIN: f64 = 1e-12;
pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    /// Binomial deviance, `log(1 + exp(-y'F))` with `y' = 2y - 1`.
    Logistic,
    /// `exp(-y'F)`.
    Exponential,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Loss {
    pub fn value(self, y: bool, f: f64) -> f64 {
        let s = if y { 1.0 } else { -1.0 };
        match self {
            Loss::Logistic => {
                let m = -s * f;
                if m > 0.0 {
                    m + (-m).exp().ln_1p()
                } else {
                    m.exp().ln_1p()
                }
            }
            Loss::Exponential => (-s * f).exp(),
        }
    }

    /// First derivative of the loss in `f`.
    pub fn gradient(self, y: bool, f: f64) -> f64 {
        match self {
            Loss::Logistic => sigmoid(f) - if y { 1.0 } else { 0.0 },
            Loss::Exponential => {
                let s = if y { 1.0 } else { -1.0 };
                -s * (-s * f).exp()
            }
        }
    }

    /// Second derivative of the loss in `f`.
    pub fn hessian(self, y: bool, f: f64) -> f64 {
        match self {
            Loss::Logistic => {
                let p = sigmoid(f);
                p * (1.0 - p)
            }
            Loss::Exponential => {
                let s = if y { 1.0 } else { -1.0 };
                (-s * f).exp()
            }
        }
    }

    /// Population minimiser of the loss for a constant score.
    pub fn base_score(self, rate: f64) -> f64 {
        let lo = (rate / (1.0 - rate)).ln();
        match self {
            Loss::Logistic => lo,
            Loss::Exponential => 0.5 * lo,
        }
    }

    pub fn probability(self, f: f64) -> f64 {
        match self {
            Loss::Logistic => sigmoid(f),
            Loss::Exponential => sigmoid(2.0 * f),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostParams {
    pub n_rounds: usize,
    pub eta: f64,
    /// Tree depth counted in levels of nodes: 2 grows stumps. A value of 1 also grows stumps.
    pub max_depth: usize,
    pub subsample: f64,
    pub loss: Loss,
    /// Minimum hessian sum per child.
    pub min_child_weight: f64,
    pub seed: u64,
}

impl Default for BoostParams {
    fn default() -> Self {
        BoostParams {
            n_rounds: 1000,
            eta: 0.01,
            max_depth: 5,
            subsample: 0.5,
            loss: Loss::Logistic,
            min_child_weight: 1.0,
            seed: 0,
        }
    }
}

impl BoostParams {
    /// Number of split levels per tree.
    pub fn split_levels(&self) -> usize {
        self.max_depth.saturating_sub(1).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::invalid(format!("eta must lie in (0, 1], got {}", self.eta)));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(Error::invalid(format!(
                "subsample must lie in (0, 1], got {}",
                self.subsample
            )));
        }
        if self.n_rounds < 1 {
            return Err(Error::invalid("n_rounds must be >= 1"));
        }
        if !(self.min_child_weight >= 0.0) {
            return Err(Error::invalid("min_child_weight must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedModel {
    pub schema_version: u32,
    pub params: BoostParams,
    pub column_names: Vec<String>,
    pub base_score: f64,
    pub trees: Vec<DecisionTree>,
    /// Mean training loss over all rows after each round.
    pub train_loss: Vec<f64>,
    /// Accumulated split gain per column.
    pub importance: Vec<f64>,
}

impl BoostedModel {
    pub fn score_row(&self, row: &[f64]) -> f64 {
        self.base_score + self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>()
    }

    pub fn scores(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        x.ensure_same_columns(&self.column_names)?;
        Ok(par::map_range(x.n_rows(), |i| self.score_row(&x.row(i))))
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        let loss = self.params.loss;
        Ok(self.scores(x)?.into_iter().map(|f| loss.probability(f)).collect())
    }

    /// Columns by descending accumulated gain; ties keep column order.
    pub fn importance(&self) -> Vec<(String, f64)> {
        rank_importance(&self.column_names, &self.importance)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: BoostedModel = serde_json::from_str(s)?;
        if m.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::invalid(format!(
                "unsupported model schema version {}",
                m.schema_version
            )));
        }
        Ok(m)
    }
}

pub fn predict_boost(model: &BoostedModel, x: &FeatureMatrix) -> Result<Vec<f64>> {
    model.predict(x)
}

pub fn boost_importance(model: &BoostedModel) -> Vec<(String, f64)> {
    model.importance()
}

/// Quantile binning of one column.
struct Binned {
    codes: Vec<u8>,
    /// Largest training value in each bin.
    upper: Vec<f64>,
    /// Smallest training value in each bin.
    lower: Vec<f64>,
}

impl Binned {
    fn new(col: &[f64]) -> Self {
        let mut v: Vec<f64> = col.iter().copied().filter(|x| !x.is_nan()).collect();
        v.sort_by(f64::total_cmp);
        let mut distinct = v.clone();
        distinct.dedup();
        let upper: Vec<f64> = if distinct.len() <= MAX_BINS {
            distinct.clone()
        } else {
            let mut u: Vec<f64> = (1..=MAX_BINS).map(|k| v[k * v.len() / MAX_BINS - 1]).collect();
            u.dedup();
            u
        };
        let lower = upper
            .iter()
            .enumerate()
            .map(|(k, _)| {
                if k == 0 {
                    distinct[0]
                } else {
                    let i = distinct.partition_point(|&d| d <= upper[k - 1]);
                    distinct[i]
                }
            })
            .collect();
        let codes = col
            .iter()
            .map(|&x| {
                if x.is_nan() {
                    MISSING_BIN
                } else {
                    upper.partition_point(|&u| u < x) as u8
                }
            })
            .collect();
        Binned { codes, upper, lower }
    }

    /// Threshold separating bin `k` from bin `k + 1`.
    fn threshold(&self, k: usize) -> f64 {
        let (a, b) = (self.upper[k], self.lower[k + 1]);
        let mid = a + (b - a) / 2.0;
        if mid > a && mid <= b {
            mid
        } else {
            b
        }
    }
}

#[derive(Clone, Copy, Default)]
struct Stat {
    g: f64,
    h: f64,
    n: f64,
}

impl Stat {
    fn add(&mut self, g: f64, h: f64) {
        self.g += g;
        self.h += h;
        self.n += 1.0;
    }

    fn plus(self, o: Stat) -> Stat {
        Stat {
            g: self.g + o.g,
            h: self.h + o.h,
            n: self.n + o.n,
        }
    }

    fn minus(self, o: Stat) -> Stat {
        Stat {
            g: self.g - o.g,
            h: self.h - o.h,
            n: self.n - o.n,
        }
    }

    fn score(self) -> f64 {
        if self.n > 0.0 {
            self.g * self.g / self.n
        } else {
            0.0
        }
    }
}

#[derive(Clone, Copy)]
struct BinSplit {
    column: usize,
    bin: usize,
    missing_left: bool,
    gain: f64,
}

fn best_bin_split(
    bins: &[Binned],
    grad: &[f64],
    hess: &[f64],
    rows: &[usize],
    total: Stat,
    min_child_weight: f64,
) -> Option<BinSplit> {
    let parent = total.score();
    let per_col = par::map_range(bins.len(), |j| {
        let b = &bins[j];
        let nb = b.upper.len();
        if nb < 2 {
            return None;
        }
        let mut hist = vec![Stat::default(); nb];
        let mut miss = Stat::default();
        for &r in rows {
            let c = b.codes[r];
            if c == MISSING_BIN {
                miss.add(grad[r], hess[r]);
            } else {
                hist[c as usize].add(grad[r], hess[r]);
            }
        }
        let mut best: Option<BinSplit> = None;
        let mut left = Stat::default();
        for (k, s) in hist.iter().enumerate().take(nb - 1) {
            left = left.plus(*s);
            let right = total.minus(miss).minus(left);
            let options: &[bool] = if miss.n > 0.0 { &[true, false] } else { &[true] };
            for &ml in options {
                let (l, r) = if ml { (left.plus(miss), right) } else { (left, right.plus(miss)) };
                if l.n < 1.0 || r.n < 1.0 || l.h < min_child_weight || r.h < min_child_weight {
                    continue;
                }
                let gain = l.score() + r.score() - parent;
                if gain > MIN_GAIN && best.is_none_or(|bs| gain > bs.gain) {
                    let missing_left = if miss.n > 0.0 { ml } else { left.n >= right.n };
                    best = Some(BinSplit {
                        column: j,
                        bin: k,
                        missing_left,
                        gain,
                    });
                }
            }
        }
        best
    });
    let mut best: Option<BinSplit> = None;
    for s in per_col.into_iter().flatten() {
        if best.is_none_or(|b| s.gain > b.gain) {
            best = Some(s);
        }
    }
    best
}

fn leaf(stat: Stat, eta: f64) -> Node {
    Node::Leaf {
        value: -eta * stat.g / (stat.h + LAMBDA_REG),
        weight: stat.h,
        count: stat.n as usize,
    }
}

/// One regression tree grown level by level on the sampled rows.
fn grow_tree(
    bins: &[Binned],
    grad: &[f64],
    hess: &[f64],
    sample: Vec<usize>,
    params: &BoostParams,
) -> DecisionTree {
    let mut nodes: Vec<Node> = Vec::new();
    let stat_of = |rows: &[usize]| {
        let mut s = Stat::default();
        for &r in rows {
            s.add(grad[r], hess[r]);
        }
        s
    };
    nodes.push(leaf(stat_of(&sample), params.eta));
    let mut frontier = vec![(0usize, sample)];
    for _ in 0..params.split_levels() {
        let mut next = Vec::new();
        for (id, rows) in frontier {
            let total = stat_of(&rows);
            if rows.len() < 2 {
                continue;
            }
            let Some(s) = best_bin_split(bins, grad, hess, &rows, total, params.min_child_weight) else {
                continue;
            };
            let b = &bins[s.column];
            let (lr, rr): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| {
                let c = b.codes[r];
                if c == MISSING_BIN {
                    s.missing_left
                } else {
                    c as usize <= s.bin
                }
            });
            let (l, r) = (nodes.len(), nodes.len() + 1);
            nodes.push(leaf(stat_of(&lr), params.eta));
            nodes.push(leaf(stat_of(&rr), params.eta));
            nodes[id] = Node::Split {
                column: s.column,
                threshold: b.threshold(s.bin),
                missing_left: s.missing_left,
                left: l,
                right: r,
                gain: s.gain,
            };
            next.push((l, lr));
            next.push((r, rr));
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    DecisionTree {
        schema_version: TREE_SCHEMA_VERSION,
        n_columns: bins.len(),
        nodes,
    }
}

/// Leaf value for training row `r`, routed by bin codes.
fn binned_value(tree: &DecisionTree, bins: &[Binned], r: usize) -> f64 {
    let mut i = 0;
    loop {
        match &tree.nodes[i] {
            Node::Leaf { value, .. } => return *value,
            Node::Split {
                column,
                threshold,
                missing_left,
                left,
                right,
                ..
            } => {
                let b = &bins[*column];
                let c = b.codes[r];
                let go_left = if c == MISSING_BIN {
                    *missing_left
                } else {
                    b.upper[c as usize] < *threshold
                };
                i = if go_left { *left } else { *right };
            }
        }
    }
}

fn check_target(y: &[bool]) -> Result<f64> {
    let pos = y.iter().filter(|&&v| v).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::degenerate("boosting needs both classes in y"));
    }
    Ok(pos as f64 / y.len() as f64)
}

fn fit_inner(
    x: &FeatureMatrix,
    y: &[bool],
    params: &BoostParams,
    mut on_round: impl FnMut(usize, &DecisionTree),
) -> Result<BoostedModel> {
    params.validate()?;
    if x.n_rows() != y.len() {
        return Err(Error::invalid("x and y differ in row count"));
    }
    let rate = check_target(y)?;
    let n = y.len();
    let loss = params.loss;
    let bins: Vec<Binned> = par::map_range(x.n_cols(), |j| Binned::new(x.column(j)));
    let base = loss.base_score(rate);
    let mut f = vec![base; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let all: Vec<usize> = (0..n).collect();
    let k = ((params.subsample * n as f64).floor() as usize).clamp(1, n);
    let mut r = rng::stream(params.seed);
    let mut trees = Vec::with_capacity(params.n_rounds);
    let mut train_loss = Vec::with_capacity(params.n_rounds);
    let mut importance = vec![0.0; x.n_cols()];
    for m in 0..params.n_rounds {
        let mut sample = if k == n {
            all.clone()
        } else {
            rng::sample_without_replacement(&mut r, &all, k)
        };
        sample.sort_unstable();
        for &i in &sample {
            grad[i] = loss.gradient(y[i], f[i]);
            hess[i] = loss.hessian(y[i], f[i]);
        }
        let tree = grow_tree(&bins, &grad, &hess, sample, params);
        for (i, fi) in f.iter_mut().enumerate() {
            *fi += binned_value(&tree, &bins, i);
        }
        for (acc, v) in importance.iter_mut().zip(tree.importance()) {
            *acc += v;
        }
        train_loss.push(y.iter().zip(&f).map(|(&yi, &fi)| loss.value(yi, fi)).sum::<f64>() / n as f64);
        on_round(m, &tree);
        trees.push(tree);
    }
    Ok(BoostedModel {
        schema_version: MODEL_SCHEMA_VERSION,
        params: *params,
        column_names: x.column_names(),
        base_score: base,
        trees,
        train_loss,
        importance,
    })
}

pub fn fit_boost(x: &FeatureMatrix, y: &[bool], params: &BoostParams) -> Result<BoostedModel> {
    fit_inner(x, y, params, |_, _| {})
}

/// Fits on `x` and reports validation AUC after each round listed in `checkpoints`.
pub fn staged_auc(
    x: &FeatureMatrix,
    y: &[bool],
    x_val: &FeatureMatrix,
    y_val: &[bool],
    params: &BoostParams,
    checkpoints: &[usize],
) -> Result<Vec<f64>> {
    x_val.ensure_same_columns(&x.column_names())?;
    let rows: Vec<Vec<f64>> = (0..x_val.n_rows()).map(|i| x_val.row(i)).collect();
    let mut f = vec![0.0; rows.len()];
    let mut out = Vec::with_capacity(checkpoints.len());
    let last = checkpoints.iter().copied().max().unwrap_or(0);
    let fit_params = BoostParams {
        n_rounds: last.max(1),
        ..*params
    };
    let mut failure = None;
    fit_inner(x, y, &fit_params, |m, tree| {
        for (fi, row) in f.iter_mut().zip(&rows) {
            *fi += tree.predict_row(row);
        }
        for &c in checkpoints {
            if c == m + 1 {
                match auc(&f, y_val) {
                    Ok(a) => out.push(a),
                    Err(e) => failure = Some(e),
                }
            }
        }
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRounds {
    pub best: usize,
    pub grid: Vec<usize>,
    pub mean_auc: Vec<f64>,
    /// `fold_auc[k][g]` for fold `k` at grid point `g`.
    pub fold_auc: Vec<Vec<f64>>,
}

/// Number of rounds maximising mean validation AUC over stratified folds. Ties go to the smaller count.
pub fn cv_rounds(
    x: &FeatureMatrix,
    y: &[bool],
    params: &BoostParams,
    k_folds: usize,
    grid: &[usize],
) -> Result<CvRounds> {
    if k_folds < 2 {
        return Err(Error::invalid("k_folds must be >= 2"));
    }
    let mut grid = grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    if grid.is_empty() || grid[0] == 0 {
        return Err(Error::invalid("grid must hold positive round counts"));
    }
    let folds = stratified_folds(y, k_folds, params.seed)?;
    let fold_auc = par::try_map_range(k_folds, |k| {
        let (train, val): (Vec<usize>, Vec<usize>) = (0..y.len()).partition(|&i| folds[i] != k);
        let yt: Vec<bool> = train.iter().map(|&i| y[i]).collect();
        let yv: Vec<bool> = val.iter().map(|&i| y[i]).collect();
        if yv.iter().all(|&v| v) || yv.iter().all(|&v| !v) {
            return Err(Error::degenerate(format!("fold {k} holds a single class")));
        }
        staged_auc(&x.select_rows(&train), &yt, &x.select_rows(&val), &yv, params, &grid)
    })?;
    let mean_auc: Vec<f64> = (0..grid.len())
        .map(|g| fold_auc.iter().map(|f| f[g]).sum::<f64>() / k_folds as f64)
        .collect();
    let mut best = 0;
    for g in 1..grid.len() {
        if mean_auc[g] > mean_auc[best] {
            best = g;
        }
    }
    Ok(CvRounds {
        best: grid[best],
        grid,
        mean_auc,
        fold_auc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn toy(n: usize, seed: u64) -> (FeatureMatrix, Vec<bool>) {
        let mut r = rng::stream(seed);
        let a: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
        let b: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
        let y: Vec<bool> = (0..n)
            .map(|i| r.random::<f64>() < 0.1 + 0.6 * a[i] * (b[i] > 0.5) as u8 as f64)
            .collect();
        (FeatureMatrix::from_named_columns(&["a", "b"], vec![a, b]).unwrap(), y)
    }

    #[test]
    fn closed_form_derivatives_at_zero() {
        assert_eq!(Loss::Logistic.gradient(true, 0.0), -0.5);
        assert_eq!(Loss::Logistic.gradient(false, 0.0), 0.5);
        assert_eq!(Loss::Logistic.hessian(true, 0.0), 0.25);
    }

    #[test]
    fn binning_is_exact_for_few_values() {
        let b = Binned::new(&[3.0, 1.0, f64::NAN, 2.0, 1.0]);
        assert_eq!(b.upper, vec![1.0, 2.0, 3.0]);
        assert_eq!(b.codes, vec![2, 0, MISSING_BIN, 1, 0]);
        assert_eq!(b.threshold(0), 1.5);
    }

    #[test]
    fn binning_caps_bin_count() {
        let col: Vec<f64> = (0..10_000).map(|i| i as f64).collect();
        let b = Binned::new(&col);
        assert_eq!(b.upper.len(), MAX_BINS);
        for (k, w) in b.upper.windows(2).enumerate() {
            assert!(w[0] < w[1]);
            assert!(b.lower[k + 1] > w[0]);
        }
    }

    #[test]
    fn zero_rounds_equivalent_is_base_rate() {
        let (x, y) = toy(500, 1);
        let m = fit_boost(&x, &y, &BoostParams { n_rounds: 1, ..Default::default() }).unwrap();
        let rate = y.iter().filter(|&&v| v).count() as f64 / 500.0;
        let bare = BoostedModel { trees: vec![], ..m };
        for p in bare.predict(&x).unwrap() {
            assert!((p - rate).abs() < 1e-12);
        }
    }

    #[test]
    fn one_stump_matches_leaf_rates() {
        let y: Vec<bool> = (0..400).map(|i| if i < 200 { i % 5 < 2 } else { i % 5 >= 2 }).collect();
        let a: Vec<f64> = (0..400).map(|i| i as f64).collect();
        let x = FeatureMatrix::from_named_columns(&["a"], vec![a]).unwrap();
        let params = BoostParams {
            n_rounds: 1,
            eta: 1.0,
            max_depth: 1,
            subsample: 1.0,
            min_child_weight: 0.0,
            ..Default::default()
        };
        let m = fit_boost(&x, &y, &params).unwrap();
        assert_eq!(m.trees[0].n_leaves(), 2);
        let p = m.predict(&x).unwrap();
        assert!((p[0] - 0.4).abs() < 1e-2, "{}", p[0]);
        assert!((p[399] - 0.6).abs() < 1e-2, "{}", p[399]);
    }

    #[test]
    fn score_is_base_plus_leaf_sum() {
        let (x, y) = toy(600, 2);
        let m = fit_boost(&x, &y, &BoostParams { n_rounds: 30, eta: 0.1, ..Default::default() }).unwrap();
        let s = m.scores(&x).unwrap();
        for i in 0..x.n_rows() {
            let row = x.row(i);
            let manual = m.base_score + m.trees.iter().map(|t| t.predict_row(&row)).sum::<f64>();
            assert_eq!(s[i], manual);
        }
    }

    #[test]
    fn zero_leaf_tree_changes_nothing() {
        let (x, y) = toy(300, 3);
        let mut m = fit_boost(&x, &y, &BoostParams { n_rounds: 5, ..Default::default() }).unwrap();
        let before = m.predict(&x).unwrap();
        let mut t = m.trees[0].clone();
        for n in &mut t.nodes {
            if let Node::Leaf { value, .. } = n {
                *value = 0.0;
            }
        }
        m.trees.push(t);
        assert_eq!(m.predict(&x).unwrap(), before);
    }

    #[test]
    fn full_batch_loss_never_increases() {
        let (x, y) = toy(800, 4);
        let m = fit_boost(
            &x,
            &y,
            &BoostParams { n_rounds: 100, eta: 0.1, subsample: 1.0, ..Default::default() },
        )
        .unwrap();
        for w in m.train_loss.windows(2) {
            assert!(w[1] <= w[0] + 1e-15, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn training_routing_matches_thresholds() {
        let (x, y) = toy(500, 5);
        let m = fit_boost(&x, &y, &BoostParams { n_rounds: 20, eta: 0.3, ..Default::default() }).unwrap();
        let final_loss = *m.train_loss.last().unwrap();
        let s = m.scores(&x).unwrap();
        let recomputed = y.iter().zip(&s).map(|(&yi, &fi)| Loss::Logistic.value(yi, fi)).sum::<f64>() / 500.0;
        assert!((final_loss - recomputed).abs() < 1e-12);
    }

    #[test]
    fn stumps_have_one_split() {
        let (x, y) = toy(500, 6);
        let m = fit_boost(&x, &y, &BoostParams { n_rounds: 10, max_depth: 2, ..Default::default() }).unwrap();
        assert!(m.trees.iter().all(|t| t.depth() <= 1));
        let m5 = fit_boost(&x, &y, &BoostParams { n_rounds: 10, max_depth: 5, eta: 0.5, ..Default::default() }).unwrap();
        assert!(m5.trees.iter().all(|t| t.depth() <= 4));
    }

    #[test]
    fn unused_column_and_accounting() {
        let (x0, y) = toy(400, 7);
        let cols = vec![x0.column(0).to_vec(), x0.column(1).to_vec(), vec![2.0; 400]];
        let x = FeatureMatrix::from_named_columns(&["a", "b", "c"], cols).unwrap();
        let m = fit_boost(&x, &y, &BoostParams { n_rounds: 20, ..Default::default() }).unwrap();
        assert_eq!(m.importance[2], 0.0);
        let total: f64 = m.trees.iter().flat_map(|t| t.importance()).sum();
        assert!((m.importance.iter().sum::<f64>() - total).abs() < 1e-9 * total.max(1.0));
    }

    #[test]
    fn missing_values_follow_default_direction() {
        let (x0, y) = toy(500, 8);
        let mut a = x0.column(0).to_vec();
        for v in a.iter_mut().step_by(7) {
            *v = f64::NAN;
        }
        let x = FeatureMatrix::from_named_columns(&["a", "b"], vec![a, x0.column(1).to_vec()]).unwrap();
        let m = fit_boost(&x, &y, &BoostParams { n_rounds: 10, eta: 0.3, ..Default::default() }).unwrap();
        let s = m.scores(&x).unwrap();
        let recomputed = y.iter().zip(&s).map(|(&yi, &fi)| Loss::Logistic.value(yi, fi)).sum::<f64>() / 500.0;
        assert!((m.train_loss.last().unwrap() - recomputed).abs() < 1e-12);
    }

    #[test]
    fn deterministic_and_json() {
        let (x, y) = toy(300, 9);
        let p = BoostParams { n_rounds: 15, seed: 4, ..Default::default() };
        let m1 = fit_boost(&x, &y, &p).unwrap();
        let m2 = fit_boost(&x, &y, &p).unwrap();
        assert_eq!(m1, m2);
        let back = BoostedModel::from_json(&m1.to_json().unwrap()).unwrap();
        assert_eq!(back.predict(&x).unwrap(), m1.predict(&x).unwrap());
    }

    #[test]
    fn singleton_grid() {
        let (x, y) = toy(300, 10);
        let cv = cv_rounds(&x, &y, &BoostParams::default(), 3, &[10]).unwrap();
        assert_eq!(cv.best, 10);
        assert!(cv_rounds(&x, &y, &BoostParams::default(), 1, &[10]).is_err());
    }

    #[test]
    fn constant_target_rejected() {
        let (x, _) = toy(50, 11);
        assert!(fit_boost(&x, &[false; 50], &BoostParams::default()).is_err());
    }
}
