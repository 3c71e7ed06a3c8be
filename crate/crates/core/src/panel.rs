//! Monthly checking-account panels: records, firm attributes, default labels.
//!
//! Month indices are plain integers counted from the start of the panel, with
//! month 0 taken to be a January. Cumulative violation counters therefore
//! restart whenever `month_index % 12 == 0`.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs::File;
use std::io::Write;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Months of history a snapshot needs: the window `[t-23, t]`.
pub const WINDOW_MONTHS: i32 = 24;

pub const RECORD_COLUMNS: [&str; 13] = [
    "account_id",
    "month_index",
    "min_bal",
    "max_bal",
    "mean_bal",
    "mean_crbal",
    "mean_dbbal",
    "tcredit",
    "tdebit",
    "int_cnviol",
    "rej_cnviol",
    "int_caviol",
    "rej_caviol",
];
pub const ATTRIBUTE_COLUMNS: [&str; 5] = [
    "account_id",
    "sector",
    "total_sales",
    "relationship_years",
    "unpaid_loan_months",
];
pub const LABEL_COLUMNS: [&str; 3] = ["account_id", "snapshot_month", "default"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthlyRecord {
    pub account_id: String,
    pub month_index: i32,
    pub min_bal: f64,
    pub max_bal: f64,
    pub mean_bal: f64,
    pub mean_crbal: f64,
    pub mean_dbbal: f64,
    pub tcredit: f64,
    pub tdebit: f64,
    /// Intended violations since the start of the calendar year.
    pub int_cnviol: u32,
    /// Rejected violations since the start of the calendar year.
    pub rej_cnviol: u32,
    pub int_caviol: f64,
    pub rej_caviol: f64,
}

impl MonthlyRecord {
    fn check(&self) -> std::result::Result<(), String> {
        let finite = [
            self.min_bal,
            self.max_bal,
            self.mean_bal,
            self.mean_crbal,
            self.mean_dbbal,
            self.tcredit,
            self.tdebit,
            self.int_caviol,
            self.rej_caviol,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err("non-finite value".into());
        }
        if self.min_bal > self.mean_bal || self.mean_bal > self.max_bal {
            return Err(format!(
                "balances out of order: min_bal {} mean_bal {} max_bal {}",
                self.min_bal, self.mean_bal, self.max_bal
            ));
        }
        if self.tcredit < 0.0 || self.tdebit < 0.0 {
            return Err("negative tcredit/tdebit".into());
        }
        if self.rej_cnviol > self.int_cnviol {
            return Err("rej_cnviol exceeds int_cnviol".into());
        }
        if self.rej_caviol > self.int_caviol {
            return Err("rej_caviol exceeds int_caviol".into());
        }
        Ok(())
    }
}

/// Starts a new calendar year (cumulative counters reset).
pub fn is_january(month_index: i32) -> bool {
    month_index.rem_euclid(12) == 0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sector {
    Agriculture,
    Service,
    Commerce,
    Industry,
    Construction,
}

impl Sector {
    pub const ALL: [Sector; 5] = [
        Sector::Agriculture,
        Sector::Service,
        Sector::Commerce,
        Sector::Industry,
        Sector::Construction,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Sector::Agriculture => "Agriculture",
            Sector::Service => "Service",
            Sector::Commerce => "Commerce",
            Sector::Industry => "Industry",
            Sector::Construction => "Construction",
        }
    }
}

impl fmt::Display for Sector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Sector {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Sector::ALL
            .into_iter()
            .find(|sec| sec.name() == s)
            .ok_or_else(|| format!("unknown sector {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirmAttributes {
    pub account_id: String,
    pub sector: Sector,
    pub total_sales: f64,
    pub relationship_years: f64,
    pub unpaid_loan_months: BTreeSet<i32>,
}

/// Default flag for one account-snapshot: bankrupt within `(t, t+12]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Label {
    pub account_id: String,
    pub snapshot_month: i32,
    pub default: bool,
}

/// A problem found while building a panel that did not abort the load.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub account_id: String,
    pub snapshot_month: i32,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} @ {}: {}",
            self.account_id, self.snapshot_month, self.message
        )
    }
}

/// Validated, immutable panel. Records are sorted by `(account_id, month_index)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    records: Vec<MonthlyRecord>,
    index: BTreeMap<String, Range<usize>>,
    attributes: BTreeMap<String, FirmAttributes>,
    labels: Vec<Label>,
}

impl PanelDataset {
    /// Validates and assembles a panel.
    ///
    /// Record invariant violations and structural problems are errors. A
    /// label whose 24-month window is incomplete is dropped and reported in
    /// the returned diagnostics.
    pub fn new(
        mut records: Vec<MonthlyRecord>,
        attributes: Vec<FirmAttributes>,
        labels: Vec<Label>,
    ) -> Result<(Self, Vec<Diagnostic>)> {
        for (i, r) in records.iter().enumerate() {
            r.check().map_err(|message| Error::Row {
                file: "records".into(),
                row: i as u64 + 1,
                message,
            })?;
        }
        records.sort_by(|a, b| {
            a.account_id
                .cmp(&b.account_id)
                .then(a.month_index.cmp(&b.month_index))
        });
        let index = build_index(&records)?;

        let mut attr_map = BTreeMap::new();
        for a in attributes {
            if a.relationship_years < 0.0 || !a.relationship_years.is_finite() {
                return Err(Error::invalid(format!(
                    "{}: relationship_years must be >= 0",
                    a.account_id
                )));
            }
            let id = a.account_id.clone();
            if attr_map.insert(id.clone(), a).is_some() {
                return Err(Error::invalid(format!("duplicate attributes for {id}")));
            }
        }

        let mut seen = HashSet::new();
        let mut kept = Vec::with_capacity(labels.len());
        let mut diagnostics = Vec::new();
        for l in labels {
            if !seen.insert((l.account_id.clone(), l.snapshot_month)) {
                return Err(Error::invalid(format!(
                    "duplicate label for {} at month {}",
                    l.account_id, l.snapshot_month
                )));
            }
            let Some(range) = index.get(&l.account_id) else {
                return Err(Error::invalid(format!(
                    "label for {} has no matching records",
                    l.account_id
                )));
            };
            if !attr_map.contains_key(&l.account_id) {
                return Err(Error::invalid(format!(
                    "label for {} has no attributes row",
                    l.account_id
                )));
            }
            match window_in(&records[range.clone()], l.snapshot_month) {
                Some(_) => kept.push(l),
                None => diagnostics.push(Diagnostic {
                    account_id: l.account_id.clone(),
                    snapshot_month: l.snapshot_month,
                    message: "incomplete 24-month window; snapshot dropped".into(),
                }),
            }
        }
        kept.sort();
        Ok((
            PanelDataset {
                records,
                index,
                attributes: attr_map,
                labels: kept,
            },
            diagnostics,
        ))
    }

    pub fn records(&self) -> &[MonthlyRecord] {
        &self.records
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn attributes(&self, account_id: &str) -> Option<&FirmAttributes> {
        self.attributes.get(account_id)
    }

    pub fn all_attributes(&self) -> impl Iterator<Item = &FirmAttributes> {
        self.attributes.values()
    }

    /// All records of an account in month order.
    pub fn series(&self, account_id: &str) -> &[MonthlyRecord] {
        self.index
            .get(account_id)
            .map(|r| &self.records[r.clone()])
            .unwrap_or(&[])
    }

    /// The 24 records `[t-23, t]`, or `None` if any month is missing.
    pub fn window(&self, account_id: &str, snapshot_month: i32) -> Option<&[MonthlyRecord]> {
        window_in(self.series(account_id), snapshot_month)
    }

    pub fn default_rate(&self) -> f64 {
        if self.labels.is_empty() {
            return 0.0;
        }
        self.labels.iter().filter(|l| l.default).count() as f64 / self.labels.len() as f64
    }

    /// Sub-panel restricted to the given labels and the accounts they reference.
    fn restrict(&self, labels: Vec<Label>) -> PanelDataset {
        let accounts: BTreeSet<&str> = labels.iter().map(|l| l.account_id.as_str()).collect();
        let records: Vec<MonthlyRecord> = accounts
            .iter()
            .flat_map(|a| self.series(a).iter().cloned())
            .collect();
        let index = build_index(&records).expect("subset of a valid panel");
        let attributes = accounts
            .iter()
            .filter_map(|a| self.attributes.get(*a).map(|x| (a.to_string(), x.clone())))
            .collect();
        let mut labels = labels;
        labels.sort();
        PanelDataset {
            records,
            index,
            attributes,
            labels,
        }
    }
}

fn build_index(records: &[MonthlyRecord]) -> Result<BTreeMap<String, Range<usize>>> {
    let mut index: BTreeMap<String, Range<usize>> = BTreeMap::new();
    let mut start = 0;
    for i in 1..=records.len() {
        let boundary = i == records.len() || records[i].account_id != records[start].account_id;
        if !boundary {
            let (prev, cur) = (&records[i - 1], &records[i]);
            if prev.month_index == cur.month_index {
                return Err(Error::invalid(format!(
                    "duplicate record for {} at month {}",
                    cur.account_id, cur.month_index
                )));
            }
            check_cumulative(prev, cur).map_err(Error::InvalidInput)?;
            continue;
        }
        if start < records.len() {
            index.insert(records[start].account_id.clone(), start..i);
        }
        start = i;
    }
    Ok(index)
}

/// Cumulative counters must not decrease between consecutive months of one calendar year.
fn check_cumulative(prev: &MonthlyRecord, cur: &MonthlyRecord) -> std::result::Result<(), String> {
    if cur.month_index != prev.month_index + 1 || is_january(cur.month_index) {
        return Ok(());
    }
    let dec = cur.int_cnviol < prev.int_cnviol
        || cur.rej_cnviol < prev.rej_cnviol
        || cur.int_caviol < prev.int_caviol
        || cur.rej_caviol < prev.rej_caviol;
    if dec {
        Err(format!(
            "{}: cumulative violation counter decreased within a calendar year at month {}",
            cur.account_id, cur.month_index
        ))
    } else {
        Ok(())
    }
}

fn window_in(series: &[MonthlyRecord], t: i32) -> Option<&[MonthlyRecord]> {
    let first = t - (WINDOW_MONTHS - 1);
    let start = series.partition_point(|r| r.month_index < first);
    let end = start + WINDOW_MONTHS as usize;
    let w = series.get(start..end)?;
    let complete = w
        .iter()
        .enumerate()
        .all(|(k, r)| r.month_index == first + k as i32);
    if !complete {
        return None;
    }
    // re-check calendar monotonicity inside the extracted window
    if w.windows(2).any(|p| check_cumulative(&p[0], &p[1]).is_err()) {
        return None;
    }
    Some(w)
}

// ---------------------------------------------------------------------------
// File IO
// ---------------------------------------------------------------------------

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn check_header(rdr: &mut csv::Reader<File>, path: &Path, expected: &[&str]) -> Result<()> {
    let header = rdr.headers()?;
    let got: Vec<&str> = header.iter().collect();
    if got != expected {
        return Err(Error::Row {
            file: path.display().to_string(),
            row: 1,
            message: format!("expected columns {expected:?}, found {got:?}"),
        });
    }
    Ok(())
}

fn row_err(path: &Path, rec: &csv::StringRecord, message: impl Into<String>) -> Error {
    Error::Row {
        file: path.display().to_string(),
        row: rec.position().map(|p| p.line()).unwrap_or(0),
        message: message.into(),
    }
}

fn field<T: FromStr>(path: &Path, rec: &csv::StringRecord, i: usize, name: &str) -> Result<T> {
    let raw = rec.get(i).unwrap_or("");
    raw.parse()
        .map_err(|_| row_err(path, rec, format!("cannot parse {name} from {raw:?}")))
}

pub fn read_records(path: &Path) -> Result<Vec<MonthlyRecord>> {
    let mut rdr = reader(path)?;
    check_header(&mut rdr, path, &RECORD_COLUMNS)?;
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for rec in rdr.records() {
        let rec = rec?;
        let r = MonthlyRecord {
            account_id: rec.get(0).unwrap_or("").to_string(),
            month_index: field(path, &rec, 1, "month_index")?,
            min_bal: field(path, &rec, 2, "min_bal")?,
            max_bal: field(path, &rec, 3, "max_bal")?,
            mean_bal: field(path, &rec, 4, "mean_bal")?,
            mean_crbal: field(path, &rec, 5, "mean_crbal")?,
            mean_dbbal: field(path, &rec, 6, "mean_dbbal")?,
            tcredit: field(path, &rec, 7, "tcredit")?,
            tdebit: field(path, &rec, 8, "tdebit")?,
            int_cnviol: field(path, &rec, 9, "int_cnviol")?,
            rej_cnviol: field(path, &rec, 10, "rej_cnviol")?,
            int_caviol: field(path, &rec, 11, "int_caviol")?,
            rej_caviol: field(path, &rec, 12, "rej_caviol")?,
        };
        if r.account_id.is_empty() {
            return Err(row_err(path, &rec, "empty account_id"));
        }
        r.check().map_err(|m| row_err(path, &rec, m))?;
        if !seen.insert((r.account_id.clone(), r.month_index)) {
            return Err(row_err(
                path,
                &rec,
                format!("duplicate (account_id, month_index) = ({}, {})", r.account_id, r.month_index),
            ));
        }
        out.push(r);
    }
    Ok(out)
}

pub fn read_attributes(path: &Path) -> Result<Vec<FirmAttributes>> {
    let mut rdr = reader(path)?;
    check_header(&mut rdr, path, &ATTRIBUTE_COLUMNS)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let sector: Sector = rec
            .get(1)
            .unwrap_or("")
            .parse()
            .map_err(|m: String| row_err(path, &rec, m))?;
        let months = rec.get(4).unwrap_or("");
        let unpaid_loan_months = if months.is_empty() {
            BTreeSet::new()
        } else {
            months
                .split(';')
                .map(|m| {
                    m.trim()
                        .parse::<i32>()
                        .map_err(|_| row_err(path, &rec, format!("bad unpaid_loan_months {months:?}")))
                })
                .collect::<Result<_>>()?
        };
        let relationship_years: f64 = field(path, &rec, 3, "relationship_years")?;
        if relationship_years < 0.0 {
            return Err(row_err(path, &rec, "relationship_years must be >= 0"));
        }
        out.push(FirmAttributes {
            account_id: rec.get(0).unwrap_or("").to_string(),
            sector,
            total_sales: field(path, &rec, 2, "total_sales")?,
            relationship_years,
            unpaid_loan_months,
        });
    }
    Ok(out)
}

pub fn read_labels(path: &Path) -> Result<Vec<Label>> {
    let mut rdr = reader(path)?;
    check_header(&mut rdr, path, &LABEL_COLUMNS)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let default = match rec.get(2).unwrap_or("") {
            "0" => false,
            "1" => true,
            other => return Err(row_err(path, &rec, format!("default must be 0 or 1, got {other:?}"))),
        };
        out.push(Label {
            account_id: rec.get(0).unwrap_or("").to_string(),
            snapshot_month: field(path, &rec, 1, "snapshot_month")?,
            default,
        });
    }
    Ok(out)
}

/// Reads and validates the three panel files.
pub fn load_panel(
    records_path: &Path,
    attributes_path: &Path,
    labels_path: &Path,
) -> Result<(PanelDataset, Vec<Diagnostic>)> {
    let records = read_records(records_path)?;
    let attributes = read_attributes(attributes_path)?;
    let labels = read_labels(labels_path)?;
    PanelDataset::new(records, attributes, labels)
}

/// File names used by [`write_panel`] and the CLI.
pub const RECORDS_FILE: &str = "records.csv";
pub const ATTRIBUTES_FILE: &str = "attributes.csv";
pub const LABELS_FILE: &str = "labels.csv";

/// Writes the panel in normalized form. `header` lines are emitted as `# ` comments.
pub fn write_panel(panel: &PanelDataset, dir: &Path, header: &[String]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut w = writer(&dir.join(RECORDS_FILE), header)?;
    w.write_record(RECORD_COLUMNS)?;
    for r in &panel.records {
        w.write_record(&[
            r.account_id.clone(),
            r.month_index.to_string(),
            r.min_bal.to_string(),
            r.max_bal.to_string(),
            r.mean_bal.to_string(),
            r.mean_crbal.to_string(),
            r.mean_dbbal.to_string(),
            r.tcredit.to_string(),
            r.tdebit.to_string(),
            r.int_cnviol.to_string(),
            r.rej_cnviol.to_string(),
            r.int_caviol.to_string(),
            r.rej_caviol.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(dir, e))?;

    let mut w = writer(&dir.join(ATTRIBUTES_FILE), header)?;
    w.write_record(ATTRIBUTE_COLUMNS)?;
    for a in panel.attributes.values() {
        let months: Vec<String> = a.unpaid_loan_months.iter().map(|m| m.to_string()).collect();
        w.write_record(&[
            a.account_id.clone(),
            a.sector.to_string(),
            a.total_sales.to_string(),
            a.relationship_years.to_string(),
            months.join(";"),
        ])?;
    }
    w.flush().map_err(|e| Error::io(dir, e))?;

    let mut w = writer(&dir.join(LABELS_FILE), header)?;
    w.write_record(LABEL_COLUMNS)?;
    for l in &panel.labels {
        w.write_record(&[
            l.account_id.clone(),
            l.snapshot_month.to_string(),
            if l.default { "1".into() } else { "0".to_string() },
        ])?;
    }
    w.flush().map_err(|e| Error::io(dir, e))?;
    Ok(())
}

pub(crate) fn writer(path: &Path, header: &[String]) -> Result<csv::Writer<File>> {
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    for line in header {
        writeln!(file, "# {line}").map_err(|e| Error::io(path, e))?;
    }
    Ok(csv::Writer::from_writer(file))
}

/// Loads a panel from a directory written by [`write_panel`].
pub fn load_panel_dir(dir: &Path) -> Result<(PanelDataset, Vec<Diagnostic>)> {
    load_panel(
        &dir.join(RECORDS_FILE),
        &dir.join(ATTRIBUTES_FILE),
        &dir.join(LABELS_FILE),
    )
}

// ---------------------------------------------------------------------------
// Splitting
// ---------------------------------------------------------------------------

/// Snapshots at or before `boundary_month` go to training, later ones to test.
pub fn split_temporal(
    panel: &PanelDataset,
    boundary_month: i32,
) -> Result<(PanelDataset, PanelDataset)> {
    let months: BTreeSet<i32> = panel.labels.iter().map(|l| l.snapshot_month).collect();
    let (Some(&lo), Some(&hi)) = (months.first(), months.last()) else {
        return Err(Error::invalid("panel has no labeled snapshots"));
    };
    if boundary_month < lo || boundary_month >= hi {
        return Err(Error::invalid(format!(
            "boundary {boundary_month} outside snapshot range [{lo}, {hi})"
        )));
    }
    let (train, test): (Vec<Label>, Vec<Label>) = panel
        .labels
        .iter()
        .cloned()
        .partition(|l| l.snapshot_month <= boundary_month);
    Ok((panel.restrict(train), panel.restrict(test)))
}

/// Label-stratified random split. Returns `(train, test)` row indices, each sorted.
///
/// Each class contributes `round(test_fraction * class_size)` rows to the test side.
pub fn stratified_split_indices(
    y: &[bool],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "test_fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let mut rng = rng::stream(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in [false, true] {
        let members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        if members.is_empty() {
            return Err(Error::degenerate(format!(
                "class {} has no members",
                class as u8
            )));
        }
        let n_test = (test_fraction * members.len() as f64).round() as usize;
        let order = rng::shuffled(&mut rng, &members);
        test.extend_from_slice(&order[..n_test]);
        train.extend_from_slice(&order[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Random split of labeled snapshots, stratified on the default flag.
pub fn split_random(
    panel: &PanelDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(PanelDataset, PanelDataset)> {
    let y: Vec<bool> = panel.labels.iter().map(|l| l.default).collect();
    let (train, test) = stratified_split_indices(&y, test_fraction, seed)?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| panel.labels[i].clone()).collect();
    Ok((panel.restrict(pick(&train)), panel.restrict(pick(&test))))
}
