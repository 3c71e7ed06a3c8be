//! Random forests with uniform or class-balanced per-tree samples.
//!
//! Each tree is grown to purity (bounded by `max_depth`) on its own sample
//! with `mtry` candidate columns per node. In uniform mode a tree sees a
//! `fraction` of all rows drawn without replacement; in balanced mode it sees
//! `floor(fraction * n_default)` defaults and as many non-defaults, which
//! counters the majority-class pull of imbalanced data.

use serde::{Deserialize, Serialize};

use crate::cart::{fit_tree, DecisionTree, TreeParams};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::par;
use crate::rng;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// `fraction` of rows, uniformly without replacement.
    Uniform,
    /// Classical bootstrap: `n` draws with replacement.
    Bootstrap,
    /// Stratified: equal numbers of defaults and non-defaults.
    Balanced,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Candidate columns per split; `None` means `floor(sqrt(p))`.
    pub mtry: Option<usize>,
    pub sampling: Sampling,
    /// Sampled share of rows (uniform) or of defaults (balanced).
    pub fraction: f64,
    pub min_node_size: usize,
    pub max_depth: usize,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 500,
            mtry: None,
            sampling: Sampling::Uniform,
            fraction: 2.0 / 3.0,
            min_node_size: 1,
            max_depth: 64,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn balanced() -> Self {
        ForestParams {
            sampling: Sampling::Balanced,
            ..Default::default()
        }
    }

    pub fn resolved_mtry(&self, p: usize) -> usize {
        self.mtry
            .unwrap_or_else(|| ((p as f64).sqrt().floor() as usize).max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub params: ForestParams,
    pub column_names: Vec<String>,
    pub tree_seeds: Vec<u64>,
    pub trees: Vec<DecisionTree>,
    /// Mean over trees of per-column Gini gain.
    pub importance: Vec<f64>,
    /// Sorted distinct in-bag rows per tree. Not persisted; re-derivable from the seeds.
    #[serde(skip)]
    pub in_bag: Vec<Vec<u32>>,
}

/// `floor(fraction * n_default)` defaults plus as many non-defaults, all without replacement.
pub fn stratified_sample(y: &[bool], fraction: f64, seed: u64) -> Result<Vec<usize>> {
    stratified_sample_with(y, fraction, &mut rng::stream(seed))
}

fn stratified_sample_with(y: &[bool], fraction: f64, rng: &mut rng::Rng) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(format!("fraction must lie in (0, 1], got {fraction}")));
    }
    let pos: Vec<usize> = (0..y.len()).filter(|&i| y[i]).collect();
    let neg: Vec<usize> = (0..y.len()).filter(|&i| !y[i]).collect();
    if pos.is_empty() {
        return Err(Error::degenerate("no default observations to stratify on"));
    }
    let k = ((fraction * pos.len() as f64).floor() as usize).max(1);
    if neg.len() < k {
        return Err(Error::degenerate(format!(
            "{} non-defaults cannot match {k} sampled defaults",
            neg.len()
        )));
    }
    let mut s = rng::sample_without_replacement(rng, &pos, k);
    s.extend(rng::sample_without_replacement(rng, &neg, k));
    Ok(s)
}

/// Per-row weights (draw multiplicities) for one tree's sample.
fn draw_sample(y: &[bool], params: &ForestParams, rng: &mut rng::Rng) -> Result<Vec<f64>> {
    let n = y.len();
    let mut w = vec![0.0; n];
    match params.sampling {
        Sampling::Uniform => {
            let k = ((params.fraction * n as f64).floor() as usize).clamp(1, n);
            let all: Vec<usize> = (0..n).collect();
            for i in rng::sample_without_replacement(rng, &all, k) {
                w[i] = 1.0;
            }
        }
        Sampling::Bootstrap => {
            for _ in 0..n {
                w[rng.random_range(0..n)] += 1.0;
            }
        }
        Sampling::Balanced => {
            for i in stratified_sample_with(y, params.fraction, rng)? {
                w[i] += 1.0;
            }
        }
    }
    Ok(w)
}

fn check_labels(y: &[bool]) -> Result<()> {
    let pos = y.iter().filter(|&&v| v).count();
    if pos < 2 || y.len() - pos < 2 {
        return Err(Error::degenerate("forest needs at least 2 rows of each class"));
    }
    Ok(())
}

pub fn fit_forest(x: &FeatureMatrix, y: &[bool], params: &ForestParams) -> Result<Forest> {
    if x.n_rows() != y.len() {
        return Err(Error::invalid("x and y differ in row count"));
    }
    check_labels(y)?;
    if params.n_trees < 1 {
        return Err(Error::invalid("n_trees must be >= 1"));
    }
    let p = x.n_cols();
    let mtry = params.resolved_mtry(p);
    if mtry < 1 || mtry > p {
        return Err(Error::invalid(format!("mtry {mtry} outside [1, {p}]")));
    }
    let fitted = par::try_map_range(params.n_trees, |b| {
        let seed = rng::derive(params.seed, b);
        let mut r = rng::stream(seed);
        let weights = draw_sample(y, params, &mut r)?;
        let tree = fit_tree(
            x,
            y,
            &weights,
            &TreeParams {
                max_depth: params.max_depth,
                min_node_size: params.min_node_size,
                mtry,
                seed: seed ^ 0x9E37_79B9_7F4A_7C15,
            },
        )?;
        let bag: Vec<u32> = (0..y.len()).filter(|&i| weights[i] > 0.0).map(|i| i as u32).collect();
        Ok::<_, Error>((seed, tree, bag))
    })?;
    let mut importance = vec![0.0; p];
    let mut tree_seeds = Vec::with_capacity(fitted.len());
    let mut trees = Vec::with_capacity(fitted.len());
    let mut in_bag = Vec::with_capacity(fitted.len());
    for (seed, tree, bag) in fitted {
        for (acc, v) in importance.iter_mut().zip(tree.importance()) {
            *acc += v;
        }
        tree_seeds.push(seed);
        trees.push(tree);
        in_bag.push(bag);
    }
    for v in &mut importance {
        *v /= params.n_trees as f64;
    }
    Ok(Forest {
        params: *params,
        column_names: x.column_names(),
        tree_seeds,
        trees,
        importance,
        in_bag,
    })
}

impl Forest {
    /// `trees x rows` matrix of individual tree outputs.
    pub fn tree_outputs(&self, x: &FeatureMatrix) -> Result<Vec<Vec<f64>>> {
        x.ensure_same_columns(&self.column_names)?;
        let rows: Vec<Vec<f64>> = (0..x.n_rows()).map(|i| x.row(i)).collect();
        Ok(par::map_slice(&self.trees, |t| {
            rows.iter().map(|r| t.predict_row(r)).collect()
        }))
    }

    /// Out-of-bag probability per training row; `None` where every tree saw the row.
    pub fn oob_predictions(&self, x_train: &FeatureMatrix) -> Result<Vec<Option<f64>>> {
        x_train.ensure_same_columns(&self.column_names)?;
        if self.in_bag.len() != self.trees.len() {
            return Err(Error::invalid("in-bag sets unavailable (forest was loaded from disk)"));
        }
        let n = x_train.n_rows();
        let per_row = par::map_range(n, |i| {
            let row = x_train.row(i);
            let (mut sum, mut k) = (0.0, 0usize);
            for (t, bag) in self.trees.iter().zip(&self.in_bag) {
                if bag.binary_search(&(i as u32)).is_err() {
                    sum += t.predict_row(&row);
                    k += 1;
                }
            }
            (k > 0).then(|| sum / k as f64)
        });
        Ok(per_row)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Mean tree probability per row.
pub fn predict_forest(forest: &Forest, x: &FeatureMatrix) -> Result<Vec<f64>> {
    x.ensure_same_columns(&forest.column_names)?;
    let b = forest.trees.len() as f64;
    Ok(par::map_range(x.n_rows(), |i| {
        let row = x.row(i);
        forest.trees.iter().map(|t| t.predict_row(&row)).sum::<f64>() / b
    }))
}

/// Majority vote at threshold 0.5.
pub fn predict_forest_labels(forest: &Forest, x: &FeatureMatrix) -> Result<Vec<bool>> {
    Ok(predict_forest(forest, x)?.into_iter().map(|p| p >= 0.5).collect())
}

/// Columns by descending mean Gini gain; ties keep column order.
pub fn forest_importance(forest: &Forest) -> Vec<(String, f64)> {
    rank_importance(&forest.column_names, &forest.importance)
}

pub(crate) fn rank_importance(names: &[String], values: &[f64]) -> Vec<(String, f64)> {
    let mut v: Vec<(String, f64)> = names.iter().cloned().zip(values.iter().copied()).collect();
    v.sort_by(|a, b| b.1.total_cmp(&a.1));
    v
}

// ---------------------------------------------------------------------------
// Variance of an average of correlated trees
// ---------------------------------------------------------------------------

/// `rho * sigma2 + (1 - rho) * sigma2 / b`
pub fn predicted_ensemble_variance(rho: f64, sigma2: f64, n_trees: usize) -> f64 {
    rho * sigma2 + (1.0 - rho) * sigma2 / n_trees as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleVarianceReport {
    /// Pairwise correlation of two trees' outputs at a fixed row, pooled over rows.
    pub rho: f64,
    /// Variance of a single tree's output at a fixed row, averaged over rows.
    pub sigma2: f64,
    pub n_trees: usize,
    /// `rho * sigma2 + (1 - rho) * sigma2 / n_trees`.
    pub predicted: f64,
    /// Variance of the `n_trees`-tree forest prediction across re-fits, averaged over rows.
    pub empirical: f64,
}

/// Unbiased `(sigma2, rho)` from replicate forests: `outputs[r][b][row]`.
///
/// Within-forest spread estimates `(1 - rho) sigma2`; the spread of forest
/// means estimates `rho sigma2 + (1 - rho) sigma2 / B`.
pub fn decompose_tree_variance(outputs: &[Vec<Vec<f64>>]) -> Result<(f64, f64)> {
    let r = outputs.len();
    if r < 2 {
        return Err(Error::invalid("need at least two replicate forests"));
    }
    let b = outputs[0].len();
    if b < 2 || outputs.iter().any(|f| f.len() != b) {
        return Err(Error::invalid("replicates need the same number (>= 2) of trees"));
    }
    let n = outputs[0][0].len();
    let (mut within_sum, mut shared_sum) = (0.0, 0.0);
    for x in 0..n {
        let means: Vec<f64> = outputs
            .iter()
            .map(|f| f.iter().map(|t| t[x]).sum::<f64>() / b as f64)
            .collect();
        let within: f64 = outputs
            .iter()
            .zip(&means)
            .map(|(f, m)| f.iter().map(|t| (t[x] - m).powi(2)).sum::<f64>() / (b - 1) as f64)
            .sum::<f64>()
            / r as f64;
        let grand = means.iter().sum::<f64>() / r as f64;
        let between = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (r - 1) as f64;
        within_sum += within;
        shared_sum += between - within / b as f64;
    }
    let within = within_sum / n as f64;
    let shared = shared_sum / n as f64;
    let sigma2 = shared + within;
    let rho = if sigma2 > 0.0 { shared / sigma2 } else { 0.0 };
    Ok((sigma2, rho))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariancePlan {
    /// Replicate forests used to estimate `sigma2` and `rho`.
    pub pilot_forests: usize,
    pub pilot_trees: usize,
    /// Independent full-size forests used for the empirical variance.
    pub refits: usize,
}

impl Default for VariancePlan {
    fn default() -> Self {
        VariancePlan {
            pilot_forests: 40,
            pilot_trees: 10,
            refits: 40,
        }
    }
}

fn bootstrap_fit(x: &FeatureMatrix, y: &[bool], params: &ForestParams, seed: u64) -> Result<Forest> {
    let mut r = rng::stream(seed);
    let n = y.len();
    let idx: Vec<usize> = (0..n).map(|_| r.random_range(0..n)).collect();
    let xs = x.select_rows(&idx);
    let ys: Vec<bool> = idx.iter().map(|&i| y[i]).collect();
    fit_forest(
        &xs,
        &ys,
        &ForestParams {
            seed: seed.wrapping_mul(1_000_003),
            ..*params
        },
    )
}

/// Checks the correlated-average variance formula for a forest configuration.
///
/// Randomness covers both the training sample (bootstrap re-draws of
/// `(x, y)`) and the trees' own sampling. Pilot replicates with few trees
/// estimate `sigma2` and `rho` on `eval_rows`; independent re-fits with
/// `params.n_trees` trees give the empirical variance of the forest average.
pub fn variance_report(
    x: &FeatureMatrix,
    y: &[bool],
    params: &ForestParams,
    eval_rows: &FeatureMatrix,
    plan: &VariancePlan,
) -> Result<EnsembleVarianceReport> {
    if params.n_trees < 2 || plan.pilot_trees < 2 {
        return Err(Error::invalid("variance report needs at least 2 trees"));
    }
    if plan.pilot_forests < 2 || plan.refits < 2 {
        return Err(Error::invalid("variance report needs at least 2 replicates"));
    }
    let pilot_params = ForestParams {
        n_trees: plan.pilot_trees,
        ..*params
    };
    let base = params.seed.wrapping_mul(7919);
    let pilots = (0..plan.pilot_forests)
        .map(|r| {
            let f = bootstrap_fit(x, y, &pilot_params, rng::derive(base, r))?;
            f.tree_outputs(eval_rows)
        })
        .collect::<Result<Vec<_>>>()?;
    let (sigma2, rho) = decompose_tree_variance(&pilots)?;

    let refit_base = base.wrapping_add(1 << 32);
    let preds = (0..plan.refits)
        .map(|r| {
            let f = bootstrap_fit(x, y, params, rng::derive(refit_base, r))?;
            predict_forest(&f, eval_rows)
        })
        .collect::<Result<Vec<_>>>()?;
    let n = eval_rows.n_rows();
    let rr = plan.refits as f64;
    let empirical = (0..n)
        .map(|i| {
            let m = preds.iter().map(|p| p[i]).sum::<f64>() / rr;
            preds.iter().map(|p| (p[i] - m).powi(2)).sum::<f64>() / (rr - 1.0)
        })
        .sum::<f64>()
        / n as f64;
    Ok(EnsembleVarianceReport {
        rho,
        sigma2,
        n_trees: params.n_trees,
        predicted: predicted_ensemble_variance(rho, sigma2, params.n_trees),
        empirical,
    })
}
