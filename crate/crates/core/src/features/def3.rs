//! Five discretized variables over the last quarter and year of the window.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{MonthlyRecord, PanelDataset};
use crate::par;

use super::matrix::{ColumnInfo, FeatureMatrix, RowId};
use super::window::{monthly_from_cumulative, ratio};

pub const DEF3_COLUMNS: [(&str, &str); 5] = [
    ("d3_crbal_sum", "sum MEAN_CRBAL over [t-2,t]: 0 if <= a, 1 if > a"),
    ("d3_violations", "S1, S2 = intended, rejected violations over [t-2,t]: 0 if S1=0, 1 if S1>0 & S2=0, 2 if S1>0 & S2>0"),
    ("d3_unpaid_loan", "unpaid loan during [t-11,t]: 0 no, 1 yes"),
    ("d3_crbal_ratio", "MEAN_CRBAL_t / MEAN_CRBAL_{t-1}: 0 if < b, 1 if >= b"),
    ("d3_relationship", "relationship years: 0 if < c, 1 if >= c"),
];

/// Class boundaries `a` (currency), `b` (ratio) and `c` (years).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Def3Thresholds {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Def3Thresholds {
    /// `a` = median three-month credit-balance sum on this panel, `b` = 0.5, `c` = 3 years.
    pub fn from_panel(panel: &PanelDataset) -> Self {
        let mut sums: Vec<f64> = panel
            .labels()
            .iter()
            .filter_map(|l| panel.window(&l.account_id, l.snapshot_month))
            .map(crbal_sum)
            .collect();
        sums.sort_by(f64::total_cmp);
        let a = match sums.len() {
            0 => 0.0,
            n if n % 2 == 1 => sums[n / 2],
            n => 0.5 * (sums[n / 2 - 1] + sums[n / 2]),
        };
        Def3Thresholds { a, b: 0.5, c: 3.0 }
    }
}

fn crbal_sum(w: &[MonthlyRecord]) -> f64 {
    w[21..].iter().map(|r| r.mean_crbal).sum()
}

pub fn compute_def3(panel: &PanelDataset, th: Def3Thresholds) -> Result<FeatureMatrix> {
    if !(th.a > 0.0) {
        return Err(Error::invalid(format!("threshold a must be positive, got {}", th.a)));
    }
    let labels = panel.labels();
    let per_row = par::map_slice(labels, |l| {
        let w = panel.window(&l.account_id, l.snapshot_month)?;
        let attrs = panel.attributes(&l.account_id)?;
        let t = l.snapshot_month;

        let crbal = if crbal_sum(w) <= th.a { 0.0 } else { 1.0 };

        let int_monthly = monthly_from_cumulative(w, |r| r.int_cnviol as f64);
        let rej_monthly = monthly_from_cumulative(w, |r| r.rej_cnviol as f64);
        let s1: f64 = int_monthly[21..].iter().sum();
        let s2: f64 = rej_monthly[21..].iter().sum();
        let viol = match (s1 > 0.0, s2 > 0.0) {
            (false, _) => 0.0,
            (true, false) => 1.0,
            (true, true) => 2.0,
        };

        let unpaid = attrs.unpaid_loan_months.range(t - 11..=t).next().is_some();

        let r = ratio(w[23].mean_crbal, w[22].mean_crbal);
        let crbal_ratio = if r.is_nan() {
            f64::NAN
        } else if r < th.b {
            0.0
        } else {
            1.0
        };

        let rel = if attrs.relationship_years < th.c { 0.0 } else { 1.0 };
        Some([crbal, viol, unpaid as u8 as f64, crbal_ratio, rel])
    });

    let mut rows = Vec::new();
    let mut cols = vec![Vec::new(); 5];
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
    let infos = DEF3_COLUMNS
        .iter()
        .map(|(n, f)| ColumnInfo::new(*n, "def3", *f))
        .collect();
    FeatureMatrix::from_columns(rows, infos, cols)
}
