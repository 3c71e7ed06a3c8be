//! Thirty continuous variables built from a 24-month window.
//!
//! Variable numbers keep historical gaps (no var2, var4, var6, var8). Rows
//! marked normalized divide by `MEAN_TCREDIT_t`, the mean monthly credits
//! over `[t-23, t]`; a zero base masks them. Cumulative violation counters
//! are differenced as stored, without adjusting for the January reset.

use crate::error::Result;
use crate::panel::{Diagnostic, Label, MonthlyRecord, PanelDataset};
use crate::par;

use super::matrix::{ColumnInfo, FeatureMatrix, RowId};
use super::sector::SectorEncoding;
use super::window::{ratio, series, NormalizationBase, WindowStats};

/// `(name, formula, normalized)` in output column order.
pub const DEF1_COLUMNS: [(&str, &str, bool); 30] = [
    ("var1", "DD MIN_BAL_t", true),
    ("var3", "DD MEAN_BAL_t", true),
    ("var5", "DD MEAN_CRBAL_t", true),
    ("var7", "DD MEAN_DBBAL_t", true),
    ("var9", "D INT_CNVIOL_t", false),
    ("var10", "D INT_CNVIOL_{t-12}", false),
    ("var11", "D REJ_CNVIOL_t", false),
    ("var12", "D REJ_CNVIOL_{t-12}", false),
    ("var13", "(D INT_CAVIOL_t - D REJ_CAVIOL_t) / D INT_CAVIOL_t", false),
    ("var14", "(D INT_CAVIOL_{t-12} - D REJ_CAVIOL_{t-12}) / D INT_CAVIOL_{t-12}", false),
    ("var15", "D (MAX_BAL - MIN_BAL)_t", true),
    ("var16", "D TCREDIT_t", true),
    ("var17", "D TCREDIT_{t-12}", true),
    ("var18", "D TDEBIT_t", true),
    ("var19", "D TDEBIT_{t-12}", true),
    ("var20", "D (TCREDIT/TDEBIT)_t", false),
    ("var21", "D (TCREDIT/TDEBIT)_{t-12}", false),
    ("var22", "sd_t(MEAN_BAL) / mean_t(MEAN_BAL)", false),
    ("var23", "sd_{t-12}(MEAN_BAL) / mean_{t-12}(MEAN_BAL)", false),
    ("var24", "sd_t(TCREDIT) / mean_t(TCREDIT)", false),
    ("var25", "sd_{t-12}(TCREDIT) / mean_{t-12}(TCREDIT)", false),
    ("var26", "MEAN_BAL_t", true),
    ("var27", "MEAN_CRBAL_t", true),
    ("var28", "MEAN_DBBAL_t", true),
    ("var31", "TCREDIT_t", true),
    ("var32", "TDEBIT_t", true),
    ("var33", "MIN_BAL_t", true),
    ("var34", "MAX_BAL_t", true),
    ("var29", "sector rank by training default rate", false),
    ("var30", "total sales", false),
];

fn column_infos() -> Vec<ColumnInfo> {
    DEF1_COLUMNS
        .iter()
        .map(|(name, formula, normalized)| {
            let mut c = ColumnInfo::new(*name, "def1", *formula);
            if *normalized {
                c.formula = format!("{formula} / MEAN_TCREDIT_t");
            }
            match *name {
                "var9" | "var10" | "var11" | "var12" | "var13" | "var14" => {
                    c.note = Some("delta of year-to-date counter taken literally across the January reset".into())
                }
                _ => {}
            }
            c
        })
        .collect()
}

/// The 28 window-derived values (everything except var29, var30), in column order.
pub(crate) fn window_values(w: &[MonthlyRecord]) -> [f64; 28] {
    let base = NormalizationBase::from_window(w);
    let s = |f: fn(&MonthlyRecord) -> f64| series(w, f);

    let min_bal = s(|r| r.min_bal);
    let max_bal = s(|r| r.max_bal);
    let mean_bal = s(|r| r.mean_bal);
    let mean_crbal = s(|r| r.mean_crbal);
    let mean_dbbal = s(|r| r.mean_dbbal);
    let tcredit = s(|r| r.tcredit);
    let tdebit = s(|r| r.tdebit);
    let int_cn = s(|r| r.int_cnviol as f64);
    let rej_cn = s(|r| r.rej_cnviol as f64);
    let int_ca = s(|r| r.int_caviol);
    let rej_ca = s(|r| r.rej_caviol);
    let spread: Vec<f64> = max_bal.iter().zip(&min_bal).map(|(a, b)| a - b).collect();
    let cr_db: Vec<f64> = tcredit.iter().zip(&tdebit).map(|(c, d)| ratio(*c, *d)).collect();

    let ws = WindowStats::new;
    let (min_bal, max_bal, mean_bal) = (ws(&min_bal), ws(&max_bal), ws(&mean_bal));
    let (mean_crbal, mean_dbbal) = (ws(&mean_crbal), ws(&mean_dbbal));
    let (tcredit, tdebit) = (ws(&tcredit), ws(&tdebit));
    let (int_cn, rej_cn, int_ca, rej_ca) = (ws(&int_cn), ws(&rej_cn), ws(&int_ca), ws(&rej_ca));
    let (spread, cr_db) = (ws(&spread), ws(&cr_db));
    let n = |x: f64| base.normalize(x);

    [
        n(min_bal.delta_delta()),
        n(mean_bal.delta_delta()),
        n(mean_crbal.delta_delta()),
        n(mean_dbbal.delta_delta()),
        int_cn.delta(),
        int_cn.delta_lagged(),
        rej_cn.delta(),
        rej_cn.delta_lagged(),
        ratio(int_ca.delta() - rej_ca.delta(), int_ca.delta()),
        ratio(int_ca.delta_lagged() - rej_ca.delta_lagged(), int_ca.delta_lagged()),
        n(spread.delta()),
        n(tcredit.delta()),
        n(tcredit.delta_lagged()),
        n(tdebit.delta()),
        n(tdebit.delta_lagged()),
        cr_db.delta(),
        cr_db.delta_lagged(),
        ratio(mean_bal.sd(), mean_bal.mean()),
        ratio(mean_bal.sd_lagged(), mean_bal.mean_lagged()),
        ratio(tcredit.sd(), tcredit.mean()),
        ratio(tcredit.sd_lagged(), tcredit.mean_lagged()),
        n(mean_bal.current()),
        n(mean_crbal.current()),
        n(mean_dbbal.current()),
        n(tcredit.current()),
        n(tdebit.current()),
        n(min_bal.current()),
        n(max_bal.current()),
    ]
}

/// Computes the 30 variables, fitting the sector encoding on this panel's labels.
pub fn compute_def1(panel: &PanelDataset) -> Result<(FeatureMatrix, SectorEncoding, Vec<Diagnostic>)> {
    let sectors: Vec<String> = panel
        .labels()
        .iter()
        .map(|l| sector_of(panel, l))
        .collect();
    let y: Vec<bool> = panel.labels().iter().map(|l| l.default).collect();
    let enc = SectorEncoding::fit(&sectors, &y)?;
    let (m, diags) = compute_def1_with(panel, &enc)?;
    Ok((m, enc, diags))
}

fn sector_of(panel: &PanelDataset, l: &Label) -> String {
    panel
        .attributes(&l.account_id)
        .map(|a| a.sector.to_string())
        .unwrap_or_default()
}

/// Computes the 30 variables using a previously fitted sector encoding (for test panels).
pub fn compute_def1_with(
    panel: &PanelDataset,
    encoding: &SectorEncoding,
) -> Result<(FeatureMatrix, Vec<Diagnostic>)> {
    let per_row = par::map_slice(panel.labels(), |l| {
        let w = panel.window(&l.account_id, l.snapshot_month)?;
        let attrs = panel.attributes(&l.account_id)?;
        let mut row = Vec::with_capacity(30);
        row.extend_from_slice(&window_values(w));
        row.push(
            encoding
                .rank(attrs.sector.name())
                .map_or(f64::NAN, |r| r as f64),
        );
        row.push(attrs.total_sales);
        Some(row)
    });
    let mut rows = Vec::new();
    let mut cols = vec![Vec::new(); 30];
    let mut diags = Vec::new();
    for (l, r) in panel.labels().iter().zip(per_row) {
        match r {
            Some(values) => {
                rows.push(RowId {
                    account_id: l.account_id.clone(),
                    snapshot_month: l.snapshot_month,
                });
                for (c, v) in cols.iter_mut().zip(values) {
                    c.push(v);
                }
            }
            None => diags.push(Diagnostic {
                account_id: l.account_id.clone(),
                snapshot_month: l.snapshot_month,
                message: "incomplete window; row skipped".into(),
            }),
        }
    }
    let m = FeatureMatrix::from_columns(rows, column_infos(), cols)?;
    Ok((m, diags))
}
