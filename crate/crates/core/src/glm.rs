//! Logistic regression: IRLS maximum likelihood with Wald inference,
//! stepwise AIC selection, and L1-penalised fits by coordinate descent.
//!
//! All fits are complete-case: rows with a masked value in any used column
//! are dropped and counted.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::par;

/// A non-converged fit whose slope moves the linear predictor by more than this per standard deviation of its column signals (quasi-)separation.
pub const SEPARATION_BOUND: f64 = 30.0;
pub const IRLS_TOL: f64 = 1e-8;
pub const IRLS_MAX_ITER: usize = 100;
/// Smallest accepted eigenvalue ratio of the scaled Gram matrix.
const COLLINEAR_TOL: f64 = 1e-12;
pub const KKT_TOL: f64 = 1e-4;
const CD_TOL: f64 = 1e-10;
const CD_MAX_SWEEPS: usize = 100_000;
const LASSO_MAX_OUTER: usize = 200;

pub const INTERCEPT: &str = "(Intercept)";

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Bernoulli log-likelihood at linear predictor `eta`.
pub fn log_likelihood(eta: &[f64], y: &[bool]) -> f64 {
    eta.iter()
        .zip(y)
        .map(|(&e, &yi)| if yi { e } else { 0.0 } - softplus(e))
        .sum()
}

fn y_f64(y: &[bool]) -> DVector<f64> {
    DVector::from_iterator(y.len(), y.iter().map(|&v| if v { 1.0 } else { 0.0 }))
}

/// Rows with no masked value among `cols`.
fn complete_rows(x: &FeatureMatrix, cols: &[usize]) -> Vec<usize> {
    (0..x.n_rows())
        .filter(|&i| cols.iter().all(|&j| !x.is_masked(i, j)))
        .collect()
}

/// Design matrix with a leading intercept column.
fn design(x: &FeatureMatrix, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    let mut d = DMatrix::from_element(rows.len(), cols.len() + 1, 1.0);
    for (k, &j) in cols.iter().enumerate() {
        let c = x.column(j);
        for (i, &r) in rows.iter().enumerate() {
            d[(i, k + 1)] = c[r];
        }
    }
    d
}

/// Greedy subset of `cols`, in order, whose design with an intercept has full rank on the rows complete in all of `cols`.
pub fn independent_columns(x: &FeatureMatrix, cols: &[usize]) -> Vec<usize> {
    let rows = complete_rows(x, cols);
    let mut kept: Vec<usize> = Vec::new();
    for &j in cols {
        let mut trial = kept.clone();
        trial.push(j);
        let names: Vec<String> = trial.iter().map(|&c| x.columns()[c].name.clone()).collect();
        if check_collinear(&design(x, &rows, &trial), &names).is_ok() {
            kept = trial;
        }
    }
    kept
}

fn check_collinear(d: &DMatrix<f64>, names: &[String]) -> Result<()> {
    let p = d.ncols();
    let norms: Vec<f64> = (0..p).map(|j| d.column(j).norm()).collect();
    if let Some(j) = (1..p).find(|&j| norms[j] == 0.0) {
        return Err(Error::Collinear(format!("column {} is identically zero", names[j - 1])));
    }
    let mut g = d.tr_mul(d);
    for a in 0..p {
        for b in 0..p {
            g[(a, b)] /= norms[a] * norms[b];
        }
    }
    let eig = g.clone().symmetric_eigen();
    let (mut lo, mut hi, mut arg) = (f64::INFINITY, 0.0f64, 0);
    for (k, &v) in eig.eigenvalues.iter().enumerate() {
        if v < lo {
            lo = v;
            arg = k;
        }
        hi = hi.max(v);
    }
    if lo <= COLLINEAR_TOL * hi {
        let v = eig.eigenvectors.column(arg);
        let mut involved: Vec<(f64, String)> = (0..p)
            .filter(|&k| v[k].abs() > 1e-3)
            .map(|k| {
                let n = if k == 0 { INTERCEPT.to_string() } else { names[k - 1].clone() };
                (v[k].abs(), n)
            })
            .collect();
        involved.sort_by(|a, b| b.0.total_cmp(&a.0));
        let list: Vec<String> = involved.into_iter().map(|(_, n)| n).collect();
        return Err(Error::Collinear(format!("linearly dependent columns: {}", list.join(", "))));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlmModel {
    /// Slope names; the intercept is listed separately.
    pub column_names: Vec<String>,
    /// Intercept first, then one slope per column.
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub z_values: Vec<f64>,
    pub p_values: Vec<f64>,
    pub log_likelihood: f64,
    pub aic: f64,
    pub iterations: usize,
    pub converged: bool,
    pub n_obs: usize,
    pub n_dropped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub term: String,
    pub estimate: f64,
    pub std_error: f64,
    pub z: f64,
    pub p: f64,
    pub stars: String,
}

/// `***` below 0.1%, `**` below 1%, `*` below 5%, `.` below 10%.
pub fn significance_stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else if p < 0.1 {
        "."
    } else {
        ""
    }
}

impl GlmModel {
    pub fn n_params(&self) -> usize {
        self.coefficients.len()
    }

    pub fn terms(&self) -> Vec<String> {
        std::iter::once(INTERCEPT.to_string())
            .chain(self.column_names.iter().cloned())
            .collect()
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        self.terms()
            .into_iter()
            .enumerate()
            .map(|(k, term)| SummaryRow {
                term,
                estimate: self.coefficients[k],
                std_error: self.std_errors[k],
                z: self.z_values[k],
                p: self.p_values[k],
                stars: significance_stars(self.p_values[k]).to_string(),
            })
            .collect()
    }

    /// Tab-separated coefficient table with a star legend.
    pub fn summary_table(&self) -> String {
        let mut s = String::from("term\testimate\tstd_error\tz\tp\tsignif\n");
        for r in self.summary() {
            let _ = writeln!(
                s,
                "{}\t{:.6}\t{:.6}\t{:.4}\t{:.6e}\t{}",
                r.term, r.estimate, r.std_error, r.z, r.p, r.stars
            );
        }
        let _ = writeln!(s, "# signif codes: *** 0.1%, ** 1%, * 5%, . 10%");
        let _ = writeln!(
            s,
            "# logLik {:.6}, AIC {:.6}, n {}, dropped {}",
            self.log_likelihood, self.aic, self.n_obs, self.n_dropped
        );
        s
    }

    pub fn write_summary(&self, path: &Path, header: &[String]) -> Result<()> {
        let mut s: String = header.iter().map(|h| format!("# {h}\n")).collect();
        s.push_str(&self.summary_table());
        std::fs::write(path, s).map_err(|e| Error::io(path, e))
    }

    /// Default probabilities; NaN for rows with a masked value in a used column.
    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        let idx = self
            .column_names
            .iter()
            .map(|n| {
                x.column_index(n)
                    .ok_or_else(|| Error::ColumnMismatch(format!("column {n} not in data")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((0..x.n_rows())
            .map(|i| {
                let mut eta = self.coefficients[0];
                for (k, &j) in idx.iter().enumerate() {
                    eta += self.coefficients[k + 1] * x.column(j)[i];
                }
                sigmoid(eta)
            })
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn irls(d: &DMatrix<f64>, y: &[bool], names: &[String]) -> Result<(DVector<f64>, DMatrix<f64>, usize, bool)> {
    let n = d.nrows();
    let p = d.ncols();
    let yv = y_f64(y);
    let rate = yv.sum() / n as f64;
    let mut beta = DVector::zeros(p);
    beta[0] = (rate / (1.0 - rate)).ln();
    let loglik = |b: &DVector<f64>| {
        let eta: Vec<f64> = (d * b).iter().copied().collect();
        log_likelihood(&eta, y)
    };
    let mut ll = loglik(&beta);
    let scale: Vec<f64> = (0..p)
        .map(|k| {
            if k == 0 {
                return 0.0;
            }
            let c = d.column(k);
            let m = c.mean();
            (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64).sqrt()
        })
        .collect();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < IRLS_MAX_ITER {
        iterations += 1;
        let eta = d * &beta;
        let mu = eta.map(sigmoid);
        let w = mu.map(|m| m * (1.0 - m));
        let mut dw = d.clone();
        for mut col in dw.column_iter_mut() {
            col.component_mul_assign(&w);
        }
        let info = d.tr_mul(&dw);
        let score = d.tr_mul(&(&yv - &mu));
        let Some(chol) = info.cholesky() else {
            if let Some(k) = (1..p).find(|&k| (beta[k] * scale[k]).abs() > SEPARATION_BOUND) {
                return Err(Error::Separation(format!(
                    "fitted probabilities saturated with {} at {:.3e} per sd after {iterations} iterations",
                    names[k - 1],
                    beta[k] * scale[k]
                )));
            }
            return Err(Error::Collinear("information matrix is not positive definite".into()));
        };
        let mut step = chol.solve(&score);
        // step halving while the likelihood falls
        let mut next = &beta + &step;
        let mut ll_next = loglik(&next);
        let mut halvings = 0;
        while !(ll_next >= ll - 1e-12 * ll.abs()) && halvings < 30 {
            step /= 2.0;
            next = &beta + &step;
            ll_next = loglik(&next);
            halvings += 1;
        }
        beta = next;
        ll = ll_next;
        if let Some(k) = (0..p).find(|&k| !beta[k].is_finite()) {
            let term = if k == 0 { INTERCEPT } else { names[k - 1].as_str() };
            return Err(Error::Separation(format!("coefficient of {term} diverged after {iterations} iterations")));
        }
        if step.amax() < IRLS_TOL {
            converged = true;
            break;
        }
    }
    if let Some(k) = (1..p).find(|&k| !converged && (beta[k] * scale[k]).abs() > SEPARATION_BOUND) {
        return Err(Error::Separation(format!(
            "coefficient of {} reached {:.3e} ({:.3e} per sd) after {iterations} iterations",
            names[k - 1],
            beta[k],
            beta[k] * scale[k]
        )));
    }
    let eta = d * &beta;
    let mu = eta.map(sigmoid);
    let w = mu.map(|m| m * (1.0 - m));
    let mut dw = d.clone();
    for mut col in dw.column_iter_mut() {
        col.component_mul_assign(&w);
    }
    let cov = d
        .tr_mul(&dw)
        .try_inverse()
        .ok_or_else(|| Error::Collinear("information matrix is singular".into()))?;
    Ok((beta, cov, iterations, converged))
}

fn fit_columns(x: &FeatureMatrix, y: &[bool], rows: &[usize], cols: &[usize], n_dropped: usize) -> Result<GlmModel> {
    let names: Vec<String> = cols.iter().map(|&j| x.columns()[j].name.clone()).collect();
    if rows.is_empty() {
        return Err(Error::invalid("no complete-case rows to fit"));
    }
    let yr: Vec<bool> = rows.iter().map(|&i| y[i]).collect();
    let pos = yr.iter().filter(|&&v| v).count();
    if pos == 0 || pos == yr.len() {
        return Err(Error::Separation("response has a single class".into()));
    }
    let d = design(x, rows, cols);
    check_collinear(&d, &names)?;
    let (beta, cov, iterations, converged) = irls(&d, &yr, &names)?;
    let eta: Vec<f64> = (&d * &beta).iter().copied().collect();
    let ll = log_likelihood(&eta, &yr);
    let k = beta.len();
    let coefficients: Vec<f64> = beta.iter().copied().collect();
    let std_errors: Vec<f64> = (0..k).map(|i| cov[(i, i)].max(0.0).sqrt()).collect();
    let z_values: Vec<f64> = coefficients.iter().zip(&std_errors).map(|(b, s)| b / s).collect();
    let p_values = z_values
        .iter()
        .map(|z| erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0))
        .collect();
    Ok(GlmModel {
        column_names: names,
        coefficients,
        std_errors,
        z_values,
        p_values,
        log_likelihood: ll,
        aic: 2.0 * k as f64 - 2.0 * ll,
        iterations,
        converged,
        n_obs: rows.len(),
        n_dropped,
    })
}

/// Maximum-likelihood logistic regression on all columns of `x`.
pub fn fit_logit(x: &FeatureMatrix, y: &[bool]) -> Result<GlmModel> {
    if x.n_rows() != y.len() {
        return Err(Error::invalid("x and y differ in row count"));
    }
    let cols: Vec<usize> = (0..x.n_cols()).collect();
    let rows = complete_rows(x, &cols);
    fit_columns(x, y, &rows, &cols, x.n_rows() - rows.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
    Both,
}

impl std::str::FromStr for Direction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forward" => Ok(Direction::Forward),
            "backward" => Ok(Direction::Backward),
            "both" => Ok(Direction::Both),
            other => Err(Error::invalid(format!("unknown stepwise direction {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// `start`, `add`, `drop`, or `skip` for a candidate that failed to fit.
    pub action: String,
    pub column: Option<String>,
    pub aic: f64,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepwiseResult {
    pub model: GlmModel,
    pub trace: Vec<StepRecord>,
}

/// Greedy AIC selection. All candidate models are fit on the rows complete in every column of `x`.
pub fn stepwise_select(x: &FeatureMatrix, y: &[bool], direction: Direction) -> Result<StepwiseResult> {
    if x.n_rows() != y.len() {
        return Err(Error::invalid("x and y differ in row count"));
    }
    let p = x.n_cols();
    let all: Vec<usize> = (0..p).collect();
    let rows = complete_rows(x, &all);
    let dropped = x.n_rows() - rows.len();
    let mut current: Vec<usize> = match direction {
        Direction::Backward => all.clone(),
        Direction::Forward | Direction::Both => Vec::new(),
    };
    let mut model = fit_columns(x, y, &rows, &current, dropped)?;
    let mut trace = vec![StepRecord {
        action: "start".into(),
        column: None,
        aic: model.aic,
        note: None,
    }];
    loop {
        let mut candidates: Vec<(bool, usize)> = Vec::new();
        if direction != Direction::Backward {
            candidates.extend(all.iter().filter(|j| !current.contains(j)).map(|&j| (true, j)));
        }
        if direction != Direction::Forward {
            candidates.extend(current.iter().map(|&j| (false, j)));
        }
        candidates.sort_by_key(|&(add, j)| (j, !add));
        let fits = par::map_slice(&candidates, |&(add, j)| {
            let mut cols: Vec<usize> = if add {
                current.iter().copied().chain([j]).collect()
            } else {
                current.iter().copied().filter(|&c| c != j).collect()
            };
            cols.sort_unstable();
            fit_columns(x, y, &rows, &cols, dropped).map(|m| (cols, m))
        });
        let mut best: Option<(usize, Vec<usize>, GlmModel)> = None;
        for (k, f) in fits.into_iter().enumerate() {
            match f {
                Ok((cols, m)) => {
                    if best.as_ref().is_none_or(|(_, _, b)| m.aic < b.aic) {
                        best = Some((k, cols, m));
                    }
                }
                Err(e) => trace.push(StepRecord {
                    action: "skip".into(),
                    column: Some(x.columns()[candidates[k].1].name.clone()),
                    aic: f64::NAN,
                    note: Some(e.to_string()),
                }),
            }
        }
        match best {
            Some((k, cols, m)) if m.aic < model.aic => {
                let (add, j) = candidates[k];
                trace.push(StepRecord {
                    action: if add { "add" } else { "drop" }.into(),
                    column: Some(x.columns()[j].name.clone()),
                    aic: m.aic,
                    note: None,
                });
                current = cols;
                model = m;
            }
            _ => break,
        }
    }
    Ok(StepwiseResult { model, trace })
}

// ---------------------------------------------------------------------------
// Lasso
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoFit {
    pub lambda: f64,
    pub column_names: Vec<String>,
    /// Original-scale intercept.
    pub intercept: f64,
    /// Original-scale slopes.
    pub coefficients: Vec<f64>,
    /// Slopes on standardised columns, the scale the penalty applies to.
    pub std_coefficients: Vec<f64>,
    /// Indices of nonzero slopes.
    pub active: Vec<usize>,
    /// Per-column KKT violation on the standardised problem.
    pub kkt_residuals: Vec<f64>,
    pub converged: bool,
    pub n_obs: usize,
}

impl LassoFit {
    pub fn max_kkt_residual(&self) -> f64 {
        self.kkt_residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn active_names(&self) -> Vec<String> {
        self.active.iter().map(|&j| self.column_names[j].clone()).collect()
    }
}

/// Complete-case, standardised copy of `x` (column-major) with the recorded transform.
struct Standardized {
    cols: Vec<Vec<f64>>,
    y: Vec<f64>,
    mean: Vec<f64>,
    scale: Vec<f64>,
    names: Vec<String>,
}

impl Standardized {
    fn new(x: &FeatureMatrix, y: &[bool]) -> Result<Self> {
        if x.n_rows() != y.len() {
            return Err(Error::invalid("x and y differ in row count"));
        }
        let all: Vec<usize> = (0..x.n_cols()).collect();
        let rows = complete_rows(x, &all);
        let n = rows.len();
        if n < 2 {
            return Err(Error::invalid("lasso needs at least two complete rows"));
        }
        let yv: Vec<f64> = rows.iter().map(|&i| if y[i] { 1.0 } else { 0.0 }).collect();
        let pos = yv.iter().sum::<f64>();
        if pos == 0.0 || pos == n as f64 {
            return Err(Error::degenerate("lasso response has a single class"));
        }
        let mut cols = Vec::with_capacity(all.len());
        let mut mean = Vec::with_capacity(all.len());
        let mut scale = Vec::with_capacity(all.len());
        for &j in &all {
            let c: Vec<f64> = rows.iter().map(|&i| x.column(j)[i]).collect();
            let m = c.iter().sum::<f64>() / n as f64;
            let s = (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64).sqrt();
            if s == 0.0 {
                return Err(Error::degenerate(format!(
                    "column {} is constant on complete cases",
                    x.columns()[j].name
                )));
            }
            cols.push(c.iter().map(|v| (v - m) / s).collect());
            mean.push(m);
            scale.push(s);
        }
        Ok(Standardized {
            cols,
            y: yv,
            mean,
            scale,
            names: x.column_names(),
        })
    }

    fn n(&self) -> usize {
        self.y.len()
    }

    fn eta(&self, b0: f64, beta: &[f64]) -> Vec<f64> {
        let mut eta = vec![b0; self.n()];
        for (c, &b) in self.cols.iter().zip(beta) {
            if b != 0.0 {
                for (e, v) in eta.iter_mut().zip(c) {
                    *e += b * v;
                }
            }
        }
        eta
    }

    /// `-(1/n) loglik + lambda * |beta|_1`
    fn objective(&self, b0: f64, beta: &[f64], lambda: f64) -> f64 {
        let eta = self.eta(b0, beta);
        let nll: f64 = eta
            .iter()
            .zip(&self.y)
            .map(|(&e, &yi)| softplus(e) - yi * e)
            .sum::<f64>()
            / self.n() as f64;
        nll + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
    }

    /// `(1/n) X'(y - p)` at the given coefficients.
    fn score(&self, b0: f64, beta: &[f64]) -> Vec<f64> {
        let eta = self.eta(b0, beta);
        let r: Vec<f64> = eta.iter().zip(&self.y).map(|(&e, &yi)| yi - sigmoid(e)).collect();
        let n = self.n() as f64;
        self.cols
            .iter()
            .map(|c| c.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>() / n)
            .collect()
    }

    fn lambda_max(&self) -> f64 {
        let ybar = self.y.iter().sum::<f64>() / self.n() as f64;
        let n = self.n() as f64;
        self.cols
            .iter()
            .map(|c| (c.iter().zip(&self.y).map(|(a, yi)| a * (yi - ybar)).sum::<f64>() / n).abs())
            .fold(0.0, f64::max)
    }

    fn kkt(&self, b0: f64, beta: &[f64], lambda: f64) -> Vec<f64> {
        self.score(b0, beta)
            .into_iter()
            .zip(beta)
            .map(|(s, &b)| {
                if b == 0.0 {
                    (s.abs() - lambda).max(0.0)
                } else {
                    (s - lambda * b.signum()).abs()
                }
            })
            .collect()
    }

    /// Proximal Newton: weighted least-squares coordinate descent inside, backtracking outside.
    fn solve(&self, lambda: f64, b0: &mut f64, beta: &mut [f64]) -> bool {
        let n = self.n();
        let nf = n as f64;
        let p = beta.len();
        let mut obj = self.objective(*b0, beta, lambda);
        for _ in 0..LASSO_MAX_OUTER {
            let eta = self.eta(*b0, beta);
            let mu: Vec<f64> = eta.iter().map(|&e| sigmoid(e)).collect();
            let w: Vec<f64> = mu.iter().map(|m| (m * (1.0 - m)).max(1e-5)).collect();
            let z: Vec<f64> = (0..n).map(|i| eta[i] + (self.y[i] - mu[i]) / w[i]).collect();
            let xw: Vec<f64> = self
                .cols
                .iter()
                .map(|c| c.iter().zip(&w).map(|(v, wi)| wi * v * v).sum::<f64>() / nf)
                .collect();
            let sw = w.iter().sum::<f64>() / nf;
            let (mut c0, mut c) = (*b0, beta.to_vec());
            let mut r: Vec<f64> = (0..n).map(|i| z[i] - eta[i]).collect();
            for _ in 0..CD_MAX_SWEEPS {
                let mut delta = 0.0f64;
                let g0 = r.iter().zip(&w).map(|(ri, wi)| wi * ri).sum::<f64>() / nf;
                let d0 = g0 / sw;
                if d0 != 0.0 {
                    c0 += d0;
                    for ri in &mut r {
                        *ri -= d0;
                    }
                    delta = delta.max(d0.abs());
                }
                for j in 0..p {
                    let col = &self.cols[j];
                    let g = col.iter().zip(&r).zip(&w).map(|((v, ri), wi)| wi * v * ri).sum::<f64>() / nf;
                    let u = g + xw[j] * c[j];
                    let new = soft_threshold(u, lambda) / xw[j];
                    let d = new - c[j];
                    if d != 0.0 {
                        for (ri, v) in r.iter_mut().zip(col) {
                            *ri -= d * v;
                        }
                        c[j] = new;
                        delta = delta.max(d.abs() * xw[j].sqrt());
                    }
                }
                if delta < CD_TOL {
                    break;
                }
            }
            // backtrack along the Newton direction if the true objective rises
            let (mut t, mut accepted) = (1.0, false);
            let mut cand = (c0, c.clone());
            for _ in 0..30 {
                cand.0 = *b0 + t * (c0 - *b0);
                for j in 0..p {
                    cand.1[j] = beta[j] + t * (c[j] - beta[j]);
                }
                let o = self.objective(cand.0, &cand.1, lambda);
                if o <= obj + 1e-15 {
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                return self.kkt(*b0, beta, lambda).iter().all(|&v| v <= KKT_TOL);
            }
            let change = (cand.0 - *b0)
                .abs()
                .max(cand.1.iter().zip(beta.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
            *b0 = cand.0;
            beta.copy_from_slice(&cand.1);
            obj = self.objective(*b0, beta, lambda);
            if change < 1e-9 {
                let kkt = self.kkt(*b0, beta, lambda);
                if kkt.iter().all(|&v| v <= KKT_TOL * 1e-2) {
                    return true;
                }
            }
        }
        self.kkt(*b0, beta, lambda).iter().all(|&v| v <= KKT_TOL)
    }

    fn to_fit(&self, lambda: f64, b0: f64, beta: &[f64], converged: bool) -> LassoFit {
        let coefficients: Vec<f64> = beta.iter().zip(&self.scale).map(|(b, s)| b / s).collect();
        let intercept = b0 - coefficients.iter().zip(&self.mean).map(|(c, m)| c * m).sum::<f64>();
        LassoFit {
            lambda,
            column_names: self.names.clone(),
            intercept,
            coefficients,
            std_coefficients: beta.to_vec(),
            active: (0..beta.len()).filter(|&j| beta[j] != 0.0).collect(),
            kkt_residuals: self.kkt(b0, beta, lambda),
            converged,
            n_obs: self.n(),
        }
    }
}

fn soft_threshold(u: f64, lambda: f64) -> f64 {
    if u > lambda {
        u - lambda
    } else if u < -lambda {
        u + lambda
    } else {
        0.0
    }
}

/// Smallest penalty at which every slope is zero.
pub fn lambda_max(x: &FeatureMatrix, y: &[bool]) -> Result<f64> {
    Ok(Standardized::new(x, y)?.lambda_max())
}

fn null_intercept(s: &Standardized) -> f64 {
    let r = s.y.iter().sum::<f64>() / s.n() as f64;
    (r / (1.0 - r)).ln()
}

/// Fits along `lambdas` visited in decreasing order, each warm-started from the previous.
pub fn fit_lasso_path(x: &FeatureMatrix, y: &[bool], lambdas: &[f64]) -> Result<Vec<LassoFit>> {
    if lambdas.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
        return Err(Error::invalid("lambda values must be finite and >= 0"));
    }
    let s = Standardized::new(x, y)?;
    let mut grid = lambdas.to_vec();
    grid.sort_by(|a, b| b.total_cmp(a));
    let mut b0 = null_intercept(&s);
    let mut beta = vec![0.0; s.cols.len()];
    let mut out = Vec::with_capacity(grid.len());
    for lambda in grid {
        let ok = s.solve(lambda, &mut b0, &mut beta);
        let fit = s.to_fit(lambda, b0, &beta, ok);
        if !ok {
            return Err(Error::NoConvergence(format!(
                "lasso at lambda {lambda:.3e} stopped with KKT residual {:.3e}",
                fit.max_kkt_residual()
            )));
        }
        out.push(fit);
    }
    Ok(out)
}

/// `n` penalties log-spaced from `lambda_max` down to `ratio * lambda_max`.
pub fn lambda_grid(x: &FeatureMatrix, y: &[bool], n: usize, ratio: f64) -> Result<Vec<f64>> {
    let hi = lambda_max(x, y)?;
    if n < 2 {
        return Ok(vec![hi]);
    }
    Ok((0..n)
        .map(|k| hi * ratio.powf(k as f64 / (n - 1) as f64))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactK {
    pub fit: LassoFit,
    /// False when no penalty gives exactly `k` active slopes; `fit` then has the largest active set below `k`.
    pub exact: bool,
}

/// Bisection on `log(lambda)` for a fit with exactly `k` nonzero slopes.
pub fn lasso_exact_k(x: &FeatureMatrix, y: &[bool], k: usize) -> Result<ExactK> {
    let s = Standardized::new(x, y)?;
    let p = s.cols.len();
    if k > p {
        return Err(Error::invalid(format!("k = {k} exceeds the {p} available columns")));
    }
    let hi0 = s.lambda_max() * (1.0 + 1e-6);
    let solve_at = |lambda: f64, warm: &(f64, Vec<f64>)| -> Result<LassoFit> {
        let (mut b0, mut beta) = warm.clone();
        let ok = s.solve(lambda, &mut b0, &mut beta);
        let fit = s.to_fit(lambda, b0, &beta, ok);
        if !ok {
            return Err(Error::NoConvergence(format!(
                "lasso at lambda {lambda:.3e} stopped with KKT residual {:.3e}",
                fit.max_kkt_residual()
            )));
        }
        Ok(fit)
    };
    let null = (null_intercept(&s), vec![0.0; p]);
    let top = solve_at(hi0, &null)?;
    if k == 0 {
        return Ok(ExactK { fit: top, exact: true });
    }
    let warm_of = |f: &LassoFit| {
        let b0 = f.intercept + f.coefficients.iter().zip(&s.mean).map(|(c, m)| c * m).sum::<f64>();
        (b0, f.std_coefficients.clone())
    };

    let mut best_below = top.clone();
    let mut hi = (hi0, top);
    let mut lo_lambda = hi0 * 1e-3;
    let mut lo = solve_at(lo_lambda, &warm_of(&hi.1))?;
    while lo.active.len() < k && lo_lambda > hi0 * 1e-9 {
        if lo.active.len() > best_below.active.len() {
            best_below = lo.clone();
        }
        lo_lambda *= 1e-2;
        lo = solve_at(lo_lambda, &warm_of(&lo))?;
    }
    if lo.active.len() == k {
        return Ok(ExactK { fit: lo, exact: true });
    }
    if lo.active.len() < k {
        if lo.active.len() > best_below.active.len() {
            best_below = lo;
        }
        return Ok(ExactK { fit: best_below, exact: false });
    }
    for _ in 0..200 {
        let mid = (hi.0.ln() + (lo_lambda.ln() - hi.0.ln()) / 2.0).exp();
        if !(mid < hi.0 && mid > lo_lambda) {
            break;
        }
        let f = solve_at(mid, &warm_of(&hi.1))?;
        let c = f.active.len();
        if c == k {
            return Ok(ExactK { fit: f, exact: true });
        }
        if c > k {
            lo_lambda = mid;
        } else {
            if c > best_below.active.len() {
                best_below = f.clone();
            }
            hi = (mid, f);
        }
    }
    if hi.1.active.len() > best_below.active.len() {
        best_below = hi.1;
    }
    Ok(ExactK { fit: best_below, exact: false })
}

// ---------------------------------------------------------------------------
// Spearman
// ---------------------------------------------------------------------------

/// Ranks starting at 1, ties sharing their average rank.
pub fn mid_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    (saa > 0.0 && sbb > 0.0).then(|| (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman rank correlation over pairs where both values are present.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::invalid("spearman inputs differ in length"));
    }
    let (a, b): (Vec<f64>, Vec<f64>) = x
        .iter()
        .zip(y)
        .filter(|(a, b)| !a.is_nan() && !b.is_nan())
        .map(|(a, b)| (*a, *b))
        .unzip();
    if a.len() < 2 {
        return Err(Error::invalid("spearman needs at least two complete pairs"));
    }
    pearson(&mid_ranks(&a), &mid_ranks(&b)).ok_or_else(|| Error::degenerate("spearman undefined for a constant vector"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    fn data(n: usize, p: usize, seed: u64) -> (FeatureMatrix, Vec<bool>) {
        let mut r = rng::stream(seed);
        let cols: Vec<Vec<f64>> = (0..p).map(|_| (0..n).map(|_| r.random::<f64>() * 2.0 - 1.0).collect()).collect();
        let y = (0..n)
            .map(|i| {
                let eta = -0.5 + cols.iter().enumerate().map(|(j, c)| c[i] * (1.0 - j as f64 * 0.4)).sum::<f64>();
                r.random::<f64>() < sigmoid(eta)
            })
            .collect();
        let names: Vec<String> = (0..p).map(|j| format!("x{j}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        (FeatureMatrix::from_named_columns(&refs, cols).unwrap(), y)
    }

    #[test]
    fn intercept_only_is_logit_of_rate() {
        let x = FeatureMatrix::from_named_columns(&["a"], vec![vec![0.0; 10]]).unwrap().select_columns(&[]);
        let y: Vec<bool> = (0..10).map(|i| i < 2).collect();
        let m = fit_logit(&x, &y).unwrap();
        assert!((m.coefficients[0] - (0.2f64 / 0.8).ln()).abs() < 1e-10);
        assert!((m.coefficients[0] + 1.3863).abs() < 1e-4);
    }

    #[test]
    fn aic_identity_and_p_range() {
        let (x, y) = data(400, 3, 1);
        let m = fit_logit(&x, &y).unwrap();
        assert!(m.converged);
        assert!((m.aic - (2.0 * 4.0 - 2.0 * m.log_likelihood)).abs() < 1e-12);
        assert!(m.p_values.iter().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn wald_p_invariant_under_rescaling() {
        let (x, y) = data(300, 2, 2);
        let m1 = fit_logit(&x, &y).unwrap();
        let scaled = FeatureMatrix::from_named_columns(
            &["x0", "x1"],
            vec![x.column(0).iter().map(|v| 7.0 * v + 3.0).collect(), x.column(1).to_vec()],
        )
        .unwrap();
        let m2 = fit_logit(&scaled, &y).unwrap();
        for k in 1..3 {
            assert!((m1.p_values[k] - m2.p_values[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn separation_and_collinearity_detected() {
        let a: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let y: Vec<bool> = (0..20).map(|i| i >= 10).collect();
        let x = FeatureMatrix::from_named_columns(&["a"], vec![a.clone()]).unwrap();
        assert!(matches!(fit_logit(&x, &y), Err(Error::Separation(_))));
        let y2: Vec<bool> = (0..20).map(|i| i % 3 == 0).collect();
        let x2 = FeatureMatrix::from_named_columns(&["a", "b"], vec![a.clone(), a.iter().map(|v| 2.0 * v).collect()]).unwrap();
        assert!(matches!(fit_logit(&x2, &y2), Err(Error::Collinear(_))));
    }

    #[test]
    fn separation_guard_ignores_column_scale() {
        let (x, y) = data(300, 2, 11);
        let tiny: Vec<Vec<f64>> = (0..2).map(|j| x.column(j).iter().map(|v| v * 1e-4).collect()).collect();
        let xt = FeatureMatrix::from_named_columns(&["a", "b"], tiny).unwrap();
        let m = fit_logit(&x, &y).unwrap();
        let mt = fit_logit(&xt, &y).unwrap();
        assert!(mt.coefficients[1].abs() > SEPARATION_BOUND);
        assert!((mt.coefficients[1] * 1e-4 - m.coefficients[1]).abs() < 1e-6);
    }

    #[test]
    fn independent_columns_drop_exact_combinations() {
        let (x, _) = data(50, 3, 12);
        let sum: Vec<f64> = x.column(0).iter().zip(x.column(1)).map(|(a, b)| a + b).collect();
        let cols = vec![x.column(0).to_vec(), x.column(1).to_vec(), sum, x.column(2).to_vec()];
        let xs = FeatureMatrix::from_named_columns(&["a", "b", "a+b", "c"], cols).unwrap();
        assert_eq!(independent_columns(&xs, &[0, 1, 2, 3]), vec![0, 1, 3]);
        assert_eq!(independent_columns(&xs, &[2, 0, 1]), vec![2, 0]);
    }

    #[test]
    fn complete_case_drops_rows() {
        let (x0, y) = data(200, 2, 3);
        let mut a = x0.column(0).to_vec();
        a[5] = f64::NAN;
        a[17] = f64::NAN;
        let x = FeatureMatrix::from_named_columns(&["x0", "x1"], vec![a, x0.column(1).to_vec()]).unwrap();
        let m = fit_logit(&x, &y).unwrap();
        assert_eq!(m.n_dropped, 2);
        assert_eq!(m.n_obs, 198);
    }

    #[test]
    fn stars_follow_legend() {
        assert_eq!(significance_stars(0.0005), "***");
        assert_eq!(significance_stars(0.005), "**");
        assert_eq!(significance_stars(0.03), "*");
        assert_eq!(significance_stars(0.07), ".");
        assert_eq!(significance_stars(0.5), "");
    }

    #[test]
    fn stepwise_aic_decreases() {
        let (x, y) = data(600, 5, 4);
        for dir in [Direction::Forward, Direction::Backward, Direction::Both] {
            let r = stepwise_select(&x, &y, dir).unwrap();
            let aics: Vec<f64> = r.trace.iter().filter(|s| s.action != "skip").map(|s| s.aic).collect();
            for w in aics.windows(2) {
                assert!(w[1] < w[0]);
            }
        }
    }

    #[test]
    fn lasso_null_threshold_and_path_ordering() {
        let (x, y) = data(500, 4, 5);
        let lmax = lambda_max(&x, &y).unwrap();
        let path = fit_lasso_path(&x, &y, &[lmax * 1.0001, lmax * 0.5, lmax * 0.01]).unwrap();
        assert!(path[0].active.is_empty());
        assert!(path[2].active.len() >= path[0].active.len());
        for f in &path {
            assert!(f.max_kkt_residual() <= KKT_TOL, "{}", f.max_kkt_residual());
        }
    }

    #[test]
    fn lasso_at_zero_matches_mle() {
        let (x, y) = data(800, 3, 6);
        let m = fit_logit(&x, &y).unwrap();
        let f = &fit_lasso_path(&x, &y, &[0.0]).unwrap()[0];
        assert!((f.intercept - m.coefficients[0]).abs() < 1e-4);
        for j in 0..3 {
            assert!((f.coefficients[j] - m.coefficients[j + 1]).abs() < 1e-4);
        }
    }

    #[test]
    fn exact_k_counts() {
        let (x, y) = data(600, 5, 7);
        for k in 0..=5 {
            let r = lasso_exact_k(&x, &y, k).unwrap();
            if r.exact {
                assert_eq!(r.fit.active.len(), k);
            } else {
                assert!(r.fit.active.len() < k);
            }
            assert!(r.fit.max_kkt_residual() <= KKT_TOL);
        }
        assert!(lasso_exact_k(&x, &y, 6).is_err());
    }

    #[test]
    fn spearman_cases() {
        let x = [1.0, 2.0, 2.0, 4.0];
        assert_eq!(spearman(&x, &[10.0, 20.0, 20.0, 40.0]).unwrap(), 1.0);
        assert_eq!(spearman(&x, &x.map(|v| -v)).unwrap(), -1.0);
        assert!(spearman(&x, &[1.0; 4]).is_err());
        assert_eq!(mid_ranks(&x), vec![1.0, 2.5, 2.5, 4.0]);
    }
}
