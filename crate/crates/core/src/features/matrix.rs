use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sentinel written for masked cells.
pub const MISSING: &str = "NA";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RowId {
    pub account_id: String,
    pub snapshot_month: i32,
}

/// Where a column came from. Serialized as the sidecar manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnInfo {
    pub name: String,
    /// Feature family, e.g. `def1`, `def3`, `def2:raw`, `def2:*`, `orthogonal`.
    pub definition: String,
    /// Human-readable formula identifier.
    pub formula: String,
    #[serde(default)]
    pub degenerate: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ColumnInfo {
    pub fn new(name: impl Into<String>, definition: impl Into<String>, formula: impl Into<String>) -> Self {
        ColumnInfo {
            name: name.into(),
            definition: definition.into(),
            formula: formula.into(),
            degenerate: false,
            note: None,
        }
    }
}

/// Named-column numeric matrix of firm snapshots with an explicit missing mask.
///
/// Storage is column-major. Masked cells hold `NaN`; the mask is the source of
/// truth and is kept consistent with the values on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: Vec<RowId>,
    columns: Vec<ColumnInfo>,
    data: Vec<Vec<f64>>,
    mask: Vec<Vec<bool>>,
}

impl FeatureMatrix {
    /// Builds a matrix from columns where `None` (or any non-finite value) is masked.
    pub fn from_options(
        rows: Vec<RowId>,
        columns: Vec<ColumnInfo>,
        data: Vec<Vec<Option<f64>>>,
    ) -> Result<Self> {
        let data: Vec<Vec<f64>> = data
            .into_iter()
            .map(|c| c.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect())
            .collect();
        Self::from_columns(rows, columns, data)
    }

    /// Builds a matrix from dense columns; non-finite cells become masked.
    pub fn from_columns(rows: Vec<RowId>, columns: Vec<ColumnInfo>, mut data: Vec<Vec<f64>>) -> Result<Self> {
        if columns.len() != data.len() {
            return Err(Error::invalid(format!(
                "{} column names for {} columns",
                columns.len(),
                data.len()
            )));
        }
        let mut names = HashSet::new();
        for c in &columns {
            if !names.insert(c.name.as_str()) {
                return Err(Error::invalid(format!("duplicate column name {:?}", c.name)));
            }
        }
        let mut mask = Vec::with_capacity(data.len());
        for (c, col) in columns.iter().zip(data.iter_mut()) {
            if col.len() != rows.len() {
                return Err(Error::invalid(format!(
                    "column {:?} has {} rows, expected {}",
                    c.name,
                    col.len(),
                    rows.len()
                )));
            }
            let m: Vec<bool> = col.iter().map(|v| !v.is_finite()).collect();
            for (v, &masked) in col.iter_mut().zip(&m) {
                if masked {
                    *v = f64::NAN;
                }
            }
            mask.push(m);
        }
        Ok(FeatureMatrix {
            rows,
            columns,
            data,
            mask,
        })
    }

    /// Unnamed-row convenience constructor used by tests and synthetic blocks.
    pub fn from_named_columns(names: &[&str], data: Vec<Vec<f64>>) -> Result<Self> {
        let n = data.first().map_or(0, Vec::len);
        let rows = (0..n)
            .map(|i| RowId {
                account_id: format!("r{i}"),
                snapshot_month: 0,
            })
            .collect();
        let cols = names
            .iter()
            .map(|n| ColumnInfo::new(*n, "user", *n))
            .collect();
        Self::from_columns(rows, cols, data)
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn rows(&self) -> &[RowId] {
        &self.rows
    }

    pub fn columns(&self) -> &[ColumnInfo] {
        &self.columns
    }

    pub fn columns_mut(&mut self) -> &mut [ColumnInfo] {
        &mut self.columns
    }

    pub fn column_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Dense column; masked cells are `NaN`.
    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j]
    }

    pub fn column_mask(&self, j: usize) -> &[bool] {
        &self.mask[j]
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        if self.mask[col][row] {
            None
        } else {
            Some(self.data[col][row])
        }
    }

    pub fn is_masked(&self, row: usize, col: usize) -> bool {
        self.mask[col][row]
    }

    /// Row as a dense vector (`NaN` for masked cells).
    pub fn row(&self, i: usize) -> Vec<f64> {
        self.data.iter().map(|c| c[i]).collect()
    }

    pub fn missing_fraction(&self, j: usize) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.mask[j].iter().filter(|m| **m).count() as f64 / self.rows.len() as f64
    }

    /// Rows with no masked cell.
    pub fn complete_rows(&self) -> Vec<usize> {
        (0..self.n_rows())
            .filter(|&i| self.mask.iter().all(|m| !m[i]))
            .collect()
    }

    pub fn select_columns(&self, idx: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            rows: self.rows.clone(),
            columns: idx.iter().map(|&j| self.columns[j].clone()).collect(),
            data: idx.iter().map(|&j| self.data[j].clone()).collect(),
            mask: idx.iter().map(|&j| self.mask[j].clone()).collect(),
        }
    }

    pub fn select_columns_by_name<S: AsRef<str>>(&self, names: &[S]) -> Result<FeatureMatrix> {
        let idx = names
            .iter()
            .map(|n| {
                self.column_index(n.as_ref())
                    .ok_or_else(|| Error::ColumnMismatch(format!("no column {:?}", n.as_ref())))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.select_columns(&idx))
    }

    pub fn select_rows(&self, idx: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            columns: self.columns.clone(),
            data: self
                .data
                .iter()
                .map(|c| idx.iter().map(|&i| c[i]).collect())
                .collect(),
            mask: self
                .mask
                .iter()
                .map(|c| idx.iter().map(|&i| c[i]).collect())
                .collect(),
        }
    }

    /// Appends the columns of `other`; both matrices must list the same rows in the same order.
    pub fn hstack(&self, other: &FeatureMatrix) -> Result<FeatureMatrix> {
        if self.rows != other.rows {
            return Err(Error::ColumnMismatch(
                "cannot stack matrices with different row ids".into(),
            ));
        }
        let mut columns = self.columns.clone();
        columns.extend(other.columns.iter().cloned());
        let mut data = self.data.clone();
        data.extend(other.data.iter().cloned());
        Self::from_columns(self.rows.clone(), columns, data)
    }

    /// Reorders `other`'s rows to match this matrix's row ids, then stacks.
    pub fn join(&self, other: &FeatureMatrix) -> Result<FeatureMatrix> {
        let pos: std::collections::HashMap<&RowId, usize> =
            other.rows.iter().enumerate().map(|(i, r)| (r, i)).collect();
        let idx = self
            .rows
            .iter()
            .map(|r| {
                pos.get(r).copied().ok_or_else(|| {
                    Error::ColumnMismatch(format!(
                        "row {}@{} missing from joined block",
                        r.account_id, r.snapshot_month
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        self.hstack(&other.select_rows(&idx))
    }

    pub fn ensure_same_columns(&self, names: &[String]) -> Result<()> {
        let mine = self.column_names();
        if mine.as_slice() != names {
            return Err(Error::ColumnMismatch(format!(
                "model expects {} columns {:?}..., data has {} columns",
                names.len(),
                names.iter().take(3).collect::<Vec<_>>(),
                mine.len()
            )));
        }
        Ok(())
    }

    /// Writes the matrix as CSV with `NA` for masked cells. `header` lines become `# ` comments.
    pub fn write_csv(&self, path: &Path, header: &[String]) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for line in header {
            writeln!(out, "# {line}").map_err(|e| Error::io(path, e))?;
        }
        let mut w = csv::Writer::from_writer(out);
        let mut head = vec!["account_id".to_string(), "snapshot_month".to_string()];
        head.extend(self.column_names());
        w.write_record(&head)?;
        for i in 0..self.n_rows() {
            let mut rec = vec![self.rows[i].account_id.clone(), self.rows[i].snapshot_month.to_string()];
            for j in 0..self.n_cols() {
                rec.push(match self.get(i, j) {
                    Some(v) => v.to_string(),
                    None => MISSING.to_string(),
                });
            }
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Reads a matrix written by [`FeatureMatrix::write_csv`], with column provenance from `manifest` if given.
    pub fn read_csv(path: &Path, manifest: Option<&Path>) -> Result<FeatureMatrix> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(file);
        let header: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
        if header.len() < 2 || header[0] != "account_id" || header[1] != "snapshot_month" {
            return Err(Error::Row {
                file: path.display().to_string(),
                row: 1,
                message: "expected leading columns account_id, snapshot_month".into(),
            });
        }
        let names = &header[2..];
        let mut rows = Vec::new();
        let mut data = vec![Vec::new(); names.len()];
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            let bad = |m: String| Error::Row {
                file: path.display().to_string(),
                row: line,
                message: m,
            };
            rows.push(RowId {
                account_id: rec.get(0).unwrap_or("").to_string(),
                snapshot_month: rec
                    .get(1)
                    .unwrap_or("")
                    .parse()
                    .map_err(|_| bad("bad snapshot_month".into()))?,
            });
            for (j, col) in data.iter_mut().enumerate() {
                let raw = rec.get(j + 2).unwrap_or("");
                col.push(if raw == MISSING {
                    f64::NAN
                } else {
                    raw.parse()
                        .map_err(|_| bad(format!("bad value {raw:?} in column {}", names[j])))?
                });
            }
        }
        let columns = match manifest {
            Some(m) => {
                let infos = read_manifest(m)?;
                let got: Vec<&str> = infos.iter().map(|c| c.name.as_str()).collect();
                if got != names.iter().map(String::as_str).collect::<Vec<_>>() {
                    return Err(Error::ColumnMismatch("manifest does not match header".into()));
                }
                infos
            }
            None => names
                .iter()
                .map(|n| ColumnInfo::new(n.clone(), "unknown", n.clone()))
                .collect(),
        };
        Self::from_columns(rows, columns, data)
    }

    pub fn write_manifest(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer_pretty(BufWriter::new(file), &self.columns)?;
        Ok(())
    }
}

pub fn read_manifest(path: &Path) -> Result<Vec<ColumnInfo>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_follows_non_finite_values() {
        let m = FeatureMatrix::from_named_columns(&["a", "b"], vec![vec![1.0, f64::NAN], vec![f64::INFINITY, 2.0]])
            .unwrap();
        assert_eq!(m.get(0, 0), Some(1.0));
        assert!(m.is_masked(1, 0));
        assert!(m.is_masked(0, 1));
        assert_eq!(m.complete_rows(), Vec::<usize>::new());
    }

    #[test]
    fn duplicate_names_rejected() {
        assert!(FeatureMatrix::from_named_columns(&["a", "a"], vec![vec![1.0], vec![2.0]]).is_err());
    }

    #[test]
    fn csv_round_trip_keeps_mask() {
        let dir = tempfile::tempdir().unwrap();
        let m = FeatureMatrix::from_named_columns(&["x", "y"], vec![vec![0.1, f64::NAN, -3.5], vec![1e-300, 2.0, 7.0]])
            .unwrap();
        let p = dir.path().join("m.csv");
        let mp = dir.path().join("m.json");
        m.write_csv(&p, &["seed=1".into()]).unwrap();
        m.write_manifest(&mp).unwrap();
        let back = FeatureMatrix::read_csv(&p, Some(&mp)).unwrap();
        assert_eq!(back.rows(), m.rows());
        assert_eq!(back.columns(), m.columns());
        for j in 0..2 {
            assert_eq!(back.column_mask(j), m.column_mask(j));
            for i in 0..3 {
                assert_eq!(back.get(i, j), m.get(i, j));
            }
        }
    }
}
