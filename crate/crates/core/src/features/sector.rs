//! Numeric encoding of a categorical column by class-1 rate.
//!
//! Levels are ranked `1..=L` by ascending empirical default rate. For a
//! two-class target and a concave impurity such as Gini, one of the `L-1`
//! ordered splits on the ranks is as good as the best of all
//! `2^(L-1) - 1` subset splits, so trees lose nothing by splitting on ranks.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorEncoding {
    /// Level name to rank (1-based).
    pub ranks: BTreeMap<String, usize>,
    /// Level name to empirical class-1 rate on the fitting sample.
    pub rates: BTreeMap<String, f64>,
}

impl SectorEncoding {
    pub fn fit<S: AsRef<str>>(categories: &[S], y: &[bool]) -> Result<Self> {
        if categories.len() != y.len() {
            return Err(Error::invalid("categories and labels differ in length"));
        }
        if categories.is_empty() {
            return Err(Error::degenerate("no categories to encode"));
        }
        let mut counts: BTreeMap<String, (usize, usize)> = BTreeMap::new();
        for (c, &yi) in categories.iter().zip(y) {
            let e = counts.entry(c.as_ref().to_string()).or_default();
            e.0 += 1;
            e.1 += yi as usize;
        }
        let rates: BTreeMap<String, f64> = counts
            .iter()
            .map(|(k, &(n, pos))| (k.clone(), pos as f64 / n as f64))
            .collect();
        // BTreeMap iteration is name-ordered; the stable sort keeps that order on ties.
        let mut order: Vec<(&String, f64)> = rates.iter().map(|(k, &r)| (k, r)).collect();
        order.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("finite rates"));
        let ranks = order
            .iter()
            .enumerate()
            .map(|(i, (k, _))| ((*k).clone(), i + 1))
            .collect();
        Ok(SectorEncoding { ranks, rates })
    }

    pub fn n_levels(&self) -> usize {
        self.ranks.len()
    }

    pub fn rank(&self, category: &str) -> Option<usize> {
        self.ranks.get(category).copied()
    }

    /// Encodes a column; unseen levels are `None` (masked).
    pub fn apply<S: AsRef<str>>(&self, categories: &[S]) -> Vec<Option<f64>> {
        categories
            .iter()
            .map(|c| self.rank(c.as_ref()).map(|r| r as f64))
            .collect()
    }
}

/// Fits the encoding on `(categories, y)` and returns the encoded column with the map.
pub fn encode_sector<S: AsRef<str>>(
    categories: &[S],
    y: &[bool],
) -> Result<(Vec<f64>, SectorEncoding)> {
    let enc = SectorEncoding::fit(categories, y)?;
    let col = enc
        .apply(categories)
        .into_iter()
        .map(|v| v.expect("fitted levels are known"))
        .collect();
    Ok((col, enc))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orders_by_rate_then_name() {
        let cats = ["b", "a", "c", "a", "b", "c"];
        let y = [true, false, false, true, false, false];
        let (col, enc) = encode_sector(&cats, &y).unwrap();
        // rates: a=0.5, b=0.5, c=0.0 -> c=1, then a, b by name
        assert_eq!(enc.rank("c"), Some(1));
        assert_eq!(enc.rank("a"), Some(2));
        assert_eq!(enc.rank("b"), Some(3));
        assert_eq!(col, vec![3.0, 2.0, 1.0, 2.0, 3.0, 1.0]);
    }

    #[test]
    fn single_level_is_rank_one() {
        let (col, enc) = encode_sector(&["x", "x"], &[true, false]).unwrap();
        assert_eq!(col, vec![1.0, 1.0]);
        assert_eq!(enc.n_levels(), 1);
    }

    #[test]
    fn unseen_level_is_masked() {
        let enc = SectorEncoding::fit(&["x", "y"], &[true, false]).unwrap();
        assert_eq!(enc.apply(&["y", "z"]), vec![Some(1.0), None]);
    }
}
