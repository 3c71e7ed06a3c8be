//! Automatically built variables: raw summaries and their arithmetic interactions.
//!
//! For `p` base columns the interaction matrix has `p + 4 * p(p-1)/2`
//! columns: one column per unordered pair and operation, with the pair
//! oriented lexicographically by column name. For `p = 50` that is 4950.

use std::collections::BTreeMap;

use crate::boost::{fit_boost, BoostParams};
use crate::error::Result;
use crate::panel::{MonthlyRecord, PanelDataset};
use crate::par;

use super::matrix::{ColumnInfo, FeatureMatrix, RowId};
use super::window::{mean, monthly_from_cumulative, sample_sd, series};

const RAW_SERIES: [&str; 10] = [
    "min_bal",
    "max_bal",
    "mean_bal",
    "mean_crbal",
    "mean_dbbal",
    "tcredit",
    "tdebit",
    "int_cnviol_m",
    "rej_cnviol_m",
    "int_caviol_m",
];
const RAW_STATS: [&str; 5] = ["last", "mean", "sd", "min", "max"];

fn raw_series(w: &[MonthlyRecord]) -> [Vec<f64>; 10] {
    [
        series(w, |r| r.min_bal),
        series(w, |r| r.max_bal),
        series(w, |r| r.mean_bal),
        series(w, |r| r.mean_crbal),
        series(w, |r| r.mean_dbbal),
        series(w, |r| r.tcredit),
        series(w, |r| r.tdebit),
        monthly_from_cumulative(w, |r| r.int_cnviol as f64),
        monthly_from_cumulative(w, |r| r.rej_cnviol as f64),
        monthly_from_cumulative(w, |r| r.int_caviol),
    ]
}

/// The 50 raw summaries (10 monthly series x 5 statistics over `[t-11, t]`).
pub fn compute_def2_base(panel: &PanelDataset) -> Result<FeatureMatrix> {
    let labels = panel.labels();
    let per_row = par::map_slice(labels, |l| {
        let w = panel.window(&l.account_id, l.snapshot_month)?;
        let mut out = Vec::with_capacity(50);
        for s in raw_series(w) {
            let year = &s[12..];
            out.push(year[11]);
            out.push(mean(year));
            out.push(sample_sd(year));
            out.push(year.iter().copied().fold(f64::INFINITY, f64::min));
            out.push(year.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        }
        Some(out)
    });
    let mut rows = Vec::new();
    let mut cols = vec![Vec::new(); 50];
    for (l, r) in labels.iter().zip(per_row) {
        if let Some(vals) = r {
            rows.push(RowId {
                account_id: l.account_id.clone(),
                snapshot_month: l.snapshot_month,
            });
            for (c, v) in cols.iter_mut().zip(vals) {
                c.push(v);
            }
        }
    }
    let infos = RAW_SERIES
        .iter()
        .flat_map(|s| {
            RAW_STATS.iter().map(move |st| {
                ColumnInfo::new(
                    format!("raw_{s}_{st}"),
                    "def2:raw",
                    format!("{st} of {s} over [t-11,t]"),
                )
            })
        })
        .collect();
    FeatureMatrix::from_columns(rows, infos, cols)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ArithmeticOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl ArithmeticOp {
    pub const ALL: [ArithmeticOp; 4] = [
        ArithmeticOp::Add,
        ArithmeticOp::Sub,
        ArithmeticOp::Mul,
        ArithmeticOp::Div,
    ];

    pub fn symbol(self) -> char {
        match self {
            ArithmeticOp::Add => '+',
            ArithmeticOp::Sub => '-',
            ArithmeticOp::Mul => '*',
            ArithmeticOp::Div => '/',
        }
    }

    pub fn family(self) -> String {
        format!("def2:{}", self.symbol())
    }

    fn apply(self, a: f64, b: f64) -> f64 {
        let v = match self {
            ArithmeticOp::Add => a + b,
            ArithmeticOp::Sub => a - b,
            ArithmeticOp::Mul => a * b,
            ArithmeticOp::Div if b == 0.0 => f64::NAN,
            ArithmeticOp::Div => a / b,
        };
        if v.is_finite() {
            v
        } else {
            f64::NAN
        }
    }
}

fn is_degenerate(col: &[f64]) -> bool {
    let mut it = col.iter().filter(|v| v.is_finite());
    match it.next() {
        None => true,
        Some(first) => it.all(|v| v == first),
    }
}

/// Unordered column pairs `(i, j)` with `name_i < name_j`, in lexicographic pair order.
fn ordered_pairs(base: &FeatureMatrix) -> Vec<(usize, usize)> {
    let mut idx: Vec<usize> = (0..base.n_cols()).collect();
    idx.sort_by(|&a, &b| base.columns()[a].name.cmp(&base.columns()[b].name));
    let mut pairs = Vec::with_capacity(idx.len() * idx.len().saturating_sub(1) / 2);
    for (k, &i) in idx.iter().enumerate() {
        for &j in &idx[k + 1..] {
            pairs.push((i, j));
        }
    }
    pairs
}

/// All pairwise interactions under one operation.
pub fn interaction_family(base: &FeatureMatrix, op: ArithmeticOp) -> Result<FeatureMatrix> {
    let pairs = ordered_pairs(base);
    let cols: Vec<Vec<f64>> = par::map_slice(&pairs, |&(i, j)| {
        let (a, b) = (base.column(i), base.column(j));
        a.iter().zip(b).map(|(&x, &y)| op.apply(x, y)).collect()
    });
    let infos = pairs
        .iter()
        .zip(&cols)
        .map(|(&(i, j), col)| {
            let (a, b) = (&base.columns()[i].name, &base.columns()[j].name);
            let mut c = ColumnInfo::new(
                format!("{a}{}{b}", op.symbol()),
                op.family(),
                format!("{a} {} {b}", op.symbol()),
            );
            c.degenerate = is_degenerate(col);
            c
        })
        .collect();
    FeatureMatrix::from_columns(base.rows().to_vec(), infos, cols)
}

/// Base columns followed by the `+`, `-`, `*`, `/` families.
pub fn generate_interactions(base: &FeatureMatrix) -> Result<FeatureMatrix> {
    let mut out = base.clone();
    let flags: Vec<bool> = (0..base.n_cols()).map(|j| is_degenerate(base.column(j))).collect();
    for (c, f) in out.columns_mut().iter_mut().zip(flags) {
        c.degenerate = f;
    }
    for op in ArithmeticOp::ALL {
        out = out.hstack(&interaction_family(base, op)?)?;
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct StagedSelection {
    /// Retained columns, ordered by final importance.
    pub matrix: FeatureMatrix,
    /// Final-stage importance for every column that entered the final boosting.
    pub ranking: Vec<(String, f64)>,
    /// Columns kept from each family, in family order (raw, +, -, *, /).
    pub per_family: BTreeMap<String, Vec<String>>,
}

/// Boosting per family, keep the top `per_family_k` of each, then a final boosting on the union.
///
/// The returned matrix holds at most `final_k` columns, taken by final importance.
pub fn staged_interaction_selection(
    base: &FeatureMatrix,
    y: &[bool],
    per_family_k: usize,
    final_k: usize,
    params: &BoostParams,
) -> Result<StagedSelection> {
    let mut raw = base.clone();
    for c in raw.columns_mut() {
        c.definition = "def2:raw".into();
    }
    let mut families: Vec<(String, FeatureMatrix)> = vec![("def2:raw".into(), raw)];
    for op in ArithmeticOp::ALL {
        families.push((op.family(), interaction_family(base, op)?));
    }

    let mut per_family = BTreeMap::new();
    let mut union: Option<FeatureMatrix> = None;
    for (family, m) in families {
        let model = fit_boost(&m, y, params)?;
        let keep: Vec<String> = model
            .importance()
            .into_iter()
            .take(per_family_k)
            .map(|(n, _)| n)
            .collect();
        let chosen = m.select_columns_by_name(&keep)?;
        union = Some(match union {
            None => chosen,
            Some(u) => u.hstack(&chosen)?,
        });
        per_family.insert(family, keep);
    }
    let union = union.expect("five families");
    let final_model = fit_boost(&union, y, params)?;
    let ranking = final_model.importance();
    let retained: Vec<&str> = ranking
        .iter()
        .take(final_k)
        .map(|(n, _)| n.as_str())
        .collect();
    Ok(StagedSelection {
        matrix: union.select_columns_by_name(&retained)?,
        ranking,
        per_family,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_columns_give_six() {
        let base = FeatureMatrix::from_named_columns(&["A", "B"], vec![vec![6.0, 1.0], vec![3.0, 0.0]]).unwrap();
        let m = generate_interactions(&base).unwrap();
        assert_eq!(m.column_names(), vec!["A", "B", "A+B", "A-B", "A*B", "A/B"]);
        assert_eq!(m.get(0, 3), Some(3.0));
        assert_eq!(m.get(0, 5), Some(2.0));
        assert_eq!(m.get(1, 5), None, "division by zero is masked");
    }

    #[test]
    fn orientation_is_lexicographic() {
        let base = FeatureMatrix::from_named_columns(&["z", "a"], vec![vec![1.0], vec![4.0]]).unwrap();
        let m = interaction_family(&base, ArithmeticOp::Sub).unwrap();
        assert_eq!(m.column_names(), vec!["a-z"]);
        assert_eq!(m.get(0, 0), Some(3.0));
    }

    #[test]
    fn fifty_columns_give_4950() {
        let names: Vec<String> = (0..50).map(|i| format!("c{i:02}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let data = (0..50).map(|j| vec![j as f64 + 1.0, 2.0]).collect();
        let base = FeatureMatrix::from_named_columns(&refs, data).unwrap();
        let m = generate_interactions(&base).unwrap();
        assert_eq!(m.n_cols(), 50 + 4 * 50 * 49 / 2);
        assert_eq!(m.n_cols(), 4950);
    }

    #[test]
    fn constant_columns_are_flagged() {
        let base = FeatureMatrix::from_named_columns(&["a", "b"], vec![vec![1.0, 1.0], vec![0.0, 2.0]]).unwrap();
        let m = generate_interactions(&base).unwrap();
        assert!(m.columns()[0].degenerate);
        assert!(!m.columns()[1].degenerate);
        // a*b = [0, 2] varies; a-b varies
        assert!(!m.columns()[4].degenerate);
    }
}
