//! Discrimination and error-rate measures.
//!
//! AUC is the Mann-Whitney statistic: the share of (positive, negative)
//! pairs ranked correctly, with ties counted one half. It depends on scores
//! only through their ranks and does not change with class proportions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::rng;

fn class_counts(y: &[bool]) -> (usize, usize) {
    let pos = y.iter().filter(|&&v| v).count();
    (y.len() - pos, pos)
}

fn require_both(y: &[bool]) -> Result<(usize, usize)> {
    let (neg, pos) = class_counts(y);
    if neg == 0 || pos == 0 {
        return Err(Error::degenerate("both classes must be present"));
    }
    Ok((neg, pos))
}

fn check_lengths(scores: &[f64], y: &[bool]) -> Result<()> {
    if scores.len() != y.len() {
        return Err(Error::invalid(format!(
            "{} scores for {} labels",
            scores.len(),
            y.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("scores contain NaN"));
    }
    Ok(())
}

/// Groups of tied scores in descending score order, as `(positives, negatives)`.
fn tie_groups_desc(scores: &[f64], y: &[bool]) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut groups = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (mut p, mut n) = (0, 0);
        while i < order.len() && scores[order[i]] == s {
            if y[order[i]] {
                p += 1;
            } else {
                n += 1;
            }
            i += 1;
        }
        groups.push((p, n));
    }
    groups
}

/// Mann-Whitney AUC with half credit for ties.
pub fn auc(scores: &[f64], y: &[bool]) -> Result<f64> {
    check_lengths(scores, y)?;
    let (neg, pos) = require_both(y)?;
    // Count, in ascending score order, negatives strictly below each positive plus half the tied ones.
    let groups = tie_groups_desc(scores, y);
    let mut neg_below = neg as f64;
    let mut correct = 0.0;
    for (p, n) in groups {
        neg_below -= n as f64;
        correct += p as f64 * (neg_below + 0.5 * n as f64);
    }
    Ok(correct / (pos as f64 * neg as f64))
}

/// ROC points from `(0, 0)` to `(1, 1)`; tied scores form a single diagonal step.
pub fn roc_curve(scores: &[f64], y: &[bool]) -> Result<Vec<(f64, f64)>> {
    check_lengths(scores, y)?;
    let (neg, pos) = require_both(y)?;
    let mut pts = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    for (p, n) in tie_groups_desc(scores, y) {
        tp += p;
        fp += n;
        pts.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    Ok(pts)
}

/// Trapezoidal area under a piecewise-linear curve.
pub fn trapezoid_area(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub threshold: f64,
    pub true_negative: usize,
    pub false_positive: usize,
    pub false_negative: usize,
    pub true_positive: usize,
    /// Share of class-0 rows predicted 1.
    pub class0_error: f64,
    /// Share of class-1 rows predicted 0.
    pub class1_error: f64,
    pub global_error: f64,
}

/// Predicted class is `score >= threshold`.
pub fn confusion(scores: &[f64], y: &[bool], threshold: f64) -> Result<Confusion> {
    check_lengths(scores, y)?;
    let (neg, pos) = require_both(y)?;
    let (mut tn, mut fp, mut fneg, mut tp) = (0, 0, 0, 0);
    for (&s, &yi) in scores.iter().zip(y) {
        match (yi, s >= threshold) {
            (false, false) => tn += 1,
            (false, true) => fp += 1,
            (true, false) => fneg += 1,
            (true, true) => tp += 1,
        }
    }
    Ok(Confusion {
        threshold,
        true_negative: tn,
        false_positive: fp,
        false_negative: fneg,
        true_positive: tp,
        class0_error: fp as f64 / neg as f64,
        class1_error: fneg as f64 / pos as f64,
        global_error: (fp + fneg) as f64 / y.len() as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub auc: f64,
    pub roc: Vec<(f64, f64)>,
    pub confusion: Confusion,
    pub n: usize,
    pub n_positive: usize,
}

impl EvalReport {
    pub fn new(scores: &[f64], y: &[bool], threshold: f64) -> Result<Self> {
        Ok(EvalReport {
            auc: auc(scores, y)?,
            roc: roc_curve(scores, y)?,
            confusion: confusion(scores, y, threshold)?,
            n: y.len(),
            n_positive: class_counts(y).1,
        })
    }

    /// ROC points as CSV text.
    pub fn roc_csv(&self) -> String {
        let mut s = String::from("fpr,tpr\n");
        for (f, t) in &self.roc {
            s.push_str(&format!("{f},{t}\n"));
        }
        s
    }
}

/// Orientation-free AUC of one column over its unmasked (`NaN`-free) rows.
pub fn single_variable_auc(column: &[f64], y: &[bool]) -> Result<f64> {
    if column.len() != y.len() {
        return Err(Error::invalid("column and labels differ in length"));
    }
    let (vals, ys): (Vec<f64>, Vec<bool>) = column
        .iter()
        .zip(y)
        .filter(|(v, _)| !v.is_nan())
        .map(|(v, y)| (*v, *y))
        .unzip();
    if vals.is_empty() {
        return Err(Error::degenerate("column is entirely masked"));
    }
    let a = auc(&vals, &ys)?;
    Ok(a.max(1.0 - a))
}

/// Stratified fold assignment: each class is shuffled and dealt round-robin.
pub fn stratified_folds(y: &[bool], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::invalid("k_folds must be >= 2"));
    }
    if k > y.len() {
        return Err(Error::invalid(format!("{k} folds for {} rows", y.len())));
    }
    let mut rng = rng::stream(seed);
    let mut fold = vec![0; y.len()];
    let mut next = 0;
    for class in [true, false] {
        let members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        for i in rng::shuffled(&mut rng, &members) {
            fold[i] = next % k;
            next += 1;
        }
    }
    Ok(fold)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    /// `None` for folds whose held-out rows hold a single class.
    pub fold_aucs: Vec<Option<f64>>,
    pub mean_auc: Option<f64>,
}

/// K-fold cross-validated AUC.
///
/// `fit_predict(train, test)` fits on the `train` row indices and returns
/// scores for the `test` rows, in order. Folds run in parallel.
pub fn cross_validate<F>(fit_predict: F, y: &[bool], k_folds: usize, seed: u64) -> Result<CvReport>
where
    F: Fn(&[usize], &[usize]) -> Result<Vec<f64>> + Sync + Send,
{
    let fold = stratified_folds(y, k_folds, seed)?;
    let results = par::try_map_range(k_folds, |f| {
        let (test, train): (Vec<usize>, Vec<usize>) = (0..y.len()).partition(|&i| fold[i] == f);
        let yt: Vec<bool> = test.iter().map(|&i| y[i]).collect();
        let (neg, pos) = class_counts(&yt);
        if neg == 0 || pos == 0 {
            return Ok(None);
        }
        let scores = fit_predict(&train, &test)?;
        auc(&scores, &yt).map(Some)
    })?;
    let done: Vec<f64> = results.iter().flatten().copied().collect();
    let mean_auc = (!done.is_empty()).then(|| done.iter().sum::<f64>() / done.len() as f64);
    Ok(CvReport {
        fold_aucs: results,
        mean_auc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_auc(s: &[f64], y: &[bool]) -> f64 {
        let mut c = 0.0;
        let mut n = 0.0;
        for i in 0..s.len() {
            for j in 0..s.len() {
                if y[i] && !y[j] {
                    n += 1.0;
                    if s[i] > s[j] {
                        c += 1.0;
                    } else if s[i] == s[j] {
                        c += 0.5;
                    }
                }
            }
        }
        c / n
    }

    #[test]
    fn separated_and_tied() {
        let y = [false, false, true, true];
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &y).unwrap(), 1.0);
        assert_eq!(auc(&[0.3; 4], &y).unwrap(), 0.5);
    }

    #[test]
    fn six_point_case() {
        let s = [0.1, 0.4, 0.35, 0.8, 0.8, 0.7];
        let y = [false, false, true, true, false, true];
        // pairs: positives {0.35, 0.8, 0.7} vs negatives {0.1, 0.4, 0.8}
        // 0.35: 1 win; 0.8: 2 wins + 1 tie; 0.7: 2 wins -> 5.5 / 9
        let expected = 5.5 / 9.0;
        assert_eq!(brute_auc(&s, &y), expected);
        assert!((auc(&s, &y).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn roc_is_monotone_and_area_matches() {
        let s = [0.1, 0.4, 0.35, 0.8, 0.8, 0.7, 0.4];
        let y = [false, false, true, true, false, true, true];
        let roc = roc_curve(&s, &y).unwrap();
        assert_eq!(roc.first(), Some(&(0.0, 0.0)));
        assert_eq!(roc.last(), Some(&(1.0, 1.0)));
        assert!(roc.windows(2).all(|w| w[1].0 >= w[0].0 && w[1].1 >= w[0].1));
        assert!((trapezoid_area(&roc) - auc(&s, &y).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn single_class_is_an_error() {
        assert!(auc(&[0.1, 0.2], &[true, true]).is_err());
    }

    #[test]
    fn confusion_extremes() {
        let s = [0.1, 0.6, 0.3, 0.9];
        let y = [false, false, true, true];
        let all_pos = confusion(&s, &y, 0.0).unwrap();
        assert_eq!(all_pos.class0_error, 1.0);
        assert_eq!(all_pos.class1_error, 0.0);
        let none = confusion(&s, &y, 1.1).unwrap();
        assert_eq!(none.class1_error, 1.0);
        let mid = confusion(&s, &y, 0.5).unwrap();
        // global error is the prevalence-weighted mean of class errors
        let weighted = 0.5 * mid.class0_error + 0.5 * mid.class1_error;
        assert!((mid.global_error - weighted).abs() < 1e-15);
    }

    #[test]
    fn single_variable_auc_is_orientation_free() {
        let y = [false, true, false, true];
        let col = [1.0, 0.0, 1.0, 0.0];
        assert_eq!(single_variable_auc(&col, &y).unwrap(), 1.0);
        assert!(single_variable_auc(&[f64::NAN; 4], &y).is_err());
    }

    #[test]
    fn folds_partition_rows() {
        let y: Vec<bool> = (0..50).map(|i| i % 5 == 0).collect();
        let f = stratified_folds(&y, 5, 3).unwrap();
        for k in 0..5 {
            let members: Vec<usize> = (0..50).filter(|&i| f[i] == k).collect();
            assert_eq!(members.len(), 10);
            assert_eq!(members.iter().filter(|&&i| y[i]).count(), 2);
        }
    }

    #[test]
    fn leave_one_out_with_constant_predictor_skips_every_fold() {
        let y: Vec<bool> = (0..8).map(|i| i % 2 == 0).collect();
        let r = cross_validate(|_, test| Ok(vec![0.5; test.len()]), &y, 8, 1).unwrap();
        assert!(r.fold_aucs.iter().all(Option::is_none));
        assert_eq!(r.mean_auc, None);
    }
}
