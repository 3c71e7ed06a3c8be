//! Synthetic account panels with planted default mechanisms.
//!
//! Each firm draws latent drivers (violation propensity, credit
//! instability, distress, size, sector, and an orthogonal component `u`).
//! Monthly series are simulated from the drivers: credit flows are a
//! lognormal firm scale times a seasonal profile with noise, the balance is
//! a mean-reverting level observed at `SUB_STEPS` points per month (credit
//! and debit balances average the observations on each side of zero), and a
//! violation is recorded whenever an observation falls below the firm's
//! overdraft limit. Distressed firms see credits and balances drift down
//! over the last 12 months before the snapshot.
//!
//! The latent risk score is `intercept + sum of weighted driver effects`.
//! Labels are `1{latent + e > tau_s}` with logistic noise `e`, where the
//! per-sector cut `tau_s` admits the expected number of defaults of the
//! sector (raised where needed so sector default rates are strictly
//! increasing in `Sector::ALL` order). The stored score is
//! `latent - tau_s`, so `P(default) = logistic(score)`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{ColumnInfo, FeatureMatrix, RowId};
use crate::panel::{self, FirmAttributes, Label, MonthlyRecord, PanelDataset, Sector};
use crate::par;
use crate::rng;

/// Balance observations per month.
pub const SUB_STEPS: usize = 20;
const SECTOR_SHARES: [f64; 5] = [0.10, 0.35, 0.25, 0.20, 0.10];
/// Latent offset per sector at unit sector weight.
const SECTOR_OFFSETS: [f64; 5] = [-0.6, -0.3, 0.0, 0.3, 0.6];
const OVERDRAFT_LIMIT: f64 = -0.3;
const INTRA_SD: f64 = 0.35;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SignalWeights {
    pub violation_intensity: f64,
    /// Applied to `|z|` of the final-year credit shift, whose sign is random.
    pub credit_instability: f64,
    pub low_current_credit: f64,
    /// Applied to minus the log-size driver: larger firms are safer.
    pub size: f64,
    pub sector: f64,
    /// Weight of the component carried by the orthogonal block; ignored without that block.
    pub orthogonal: f64,
}

impl Default for SignalWeights {
    fn default() -> Self {
        SignalWeights {
            violation_intensity: 0.8,
            credit_instability: 1.2,
            low_current_credit: 0.6,
            size: 0.3,
            sector: 1.0,
            orthogonal: 0.8,
        }
    }
}

impl SignalWeights {
    pub fn zero() -> Self {
        SignalWeights {
            violation_intensity: 0.0,
            credit_instability: 0.0,
            low_current_credit: 0.0,
            size: 0.0,
            sector: 0.0,
            orthogonal: 0.0,
        }
    }

    pub fn as_map(&self) -> BTreeMap<String, f64> {
        [
            ("violation_intensity", self.violation_intensity),
            ("credit_instability", self.credit_instability),
            ("low_current_credit", self.low_current_credit),
            ("size", self.size),
            ("sector", self.sector),
            ("orthogonal", self.orthogonal),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_firms: usize,
    pub n_months: usize,
    pub base_default_rate: f64,
    pub signal_weights: SignalWeights,
    pub orthogonal_block: bool,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_firms: 10_000,
            n_months: 36,
            base_default_rate: 0.05,
            signal_weights: SignalWeights::default(),
            orthogonal_block: false,
            seed: 1,
        }
    }
}

impl SynthConfig {
    /// The fixed configuration behind the method-comparison experiments.
    pub fn reference() -> Self {
        SynthConfig {
            n_firms: 10_000,
            n_months: 36,
            base_default_rate: 0.05,
            signal_weights: SignalWeights::default(),
            orthogonal_block: true,
            seed: 20_140_901,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base_default_rate > 0.0 && self.base_default_rate < 0.5) {
            return Err(Error::invalid(format!(
                "base_default_rate must lie in (0, 0.5), got {}",
                self.base_default_rate
            )));
        }
        if self.n_months < 36 {
            return Err(Error::invalid(format!("n_months must be >= 36, got {}", self.n_months)));
        }
        if self.n_firms < 10 {
            return Err(Error::invalid("n_firms must be >= 10"));
        }
        let w = self.signal_weights;
        let all = [
            w.violation_intensity,
            w.credit_instability,
            w.low_current_credit,
            w.size,
            w.sector,
            w.orthogonal,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("signal weights must be finite"));
        }
        Ok(())
    }

    /// Snapshot month: the last month whose 12-month label horizon fits in the panel.
    pub fn snapshot_month(&self) -> i32 {
        self.n_months as i32 - 13
    }
}

/// Standard-normal drivers of one firm (sector aside).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirmDrivers {
    pub violation: f64,
    pub instability: f64,
    pub distress: f64,
    pub size: f64,
    pub orthogonal: f64,
    pub sector: Sector,
}

impl FirmDrivers {
    fn latent(&self, w: &SignalWeights, orthogonal_on: bool) -> f64 {
        let sector_ix = Sector::ALL.iter().position(|s| *s == self.sector).unwrap_or(0);
        let mut z = w.violation_intensity * self.violation
            + w.credit_instability * self.instability.abs()
            + w.low_current_credit * self.distress
            - w.size * self.size
            + w.sector * SECTOR_OFFSETS[sector_ix];
        if orthogonal_on {
            z += w.orthogonal * self.orthogonal;
        }
        z
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub account_ids: Vec<String>,
    /// `P(default) = logistic(latent_score)`.
    pub latent_score: Vec<f64>,
    pub drivers: Vec<FirmDrivers>,
    pub coefficients: BTreeMap<String, f64>,
    pub intercept: f64,
    /// Per-sector label cut on `intercept + effects + noise`.
    pub sector_cuts: BTreeMap<String, f64>,
    pub snapshot_month: i32,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn normal(r: &mut rng::Rng) -> f64 {
    r.sample(StandardNormal)
}

fn account_id(i: usize) -> String {
    format!("A{i:07}")
}

fn cents(x: f64) -> i64 {
    (x * 100.0).round() as i64
}

fn from_cents(c: i64) -> f64 {
    c as f64 / 100.0
}

fn round2(x: f64) -> f64 {
    from_cents(cents(x))
}

struct FirmDraw {
    drivers: FirmDrivers,
    noise: f64,
    records: Vec<MonthlyRecord>,
    attributes: FirmAttributes,
}

fn draw_sector(r: &mut rng::Rng) -> Sector {
    let u: f64 = r.random();
    let mut acc = 0.0;
    for (s, share) in Sector::ALL.iter().zip(SECTOR_SHARES) {
        acc += share;
        if u < acc {
            return *s;
        }
    }
    Sector::Construction
}

fn simulate_firm(i: usize, cfg: &SynthConfig) -> FirmDraw {
    let mut r = rng::stream(rng::derive(cfg.seed, i));
    let drivers = FirmDrivers {
        violation: normal(&mut r),
        instability: normal(&mut r),
        distress: normal(&mut r),
        size: normal(&mut r),
        orthogonal: normal(&mut r),
        sector: draw_sector(&mut r),
    };
    let u: f64 = r.random_range(1e-12..1.0);
    let noise = (u / (1.0 - u)).ln();

    let id = account_id(i);
    let t = cfg.snapshot_month();
    let scale = (8.0 + 0.8 * drivers.size).exp();
    let cv = 0.12 * (0.25 * normal(&mut r)).exp();
    let amplitude = 0.15 * r.random::<f64>();
    let phase = r.random::<f64>() * std::f64::consts::TAU;
    let cushion = 0.5 - 0.35 * drivers.violation;
    let reject_p = sigmoid(-0.5 + 0.5 * drivers.violation);
    let shift = (0.8 * drivers.instability).exp();

    let mut records = Vec::with_capacity(cfg.n_months);
    let mut level = cushion;
    let (mut int_n, mut rej_n, mut int_a, mut rej_a) = (0u32, 0u32, 0i64, 0i64);
    let mut unpaid = BTreeSet::new();
    for m in 0..cfg.n_months as i32 {
        if panel::is_january(m) {
            (int_n, rej_n, int_a, rej_a) = (0, 0, 0, 0);
        }
        let ramp = ((m - (t - 12)) as f64 / 12.0).clamp(0.0, 1.0);
        let final_year = m > t - 12;
        let season = 1.0 + amplitude * (std::f64::consts::TAU * m as f64 / 12.0 + phase).sin();
        let mut credit = scale * season * (cv * normal(&mut r) - cv * cv / 2.0).exp();
        credit *= (-0.35 * drivers.distress * ramp).exp();
        if final_year {
            credit *= shift;
        }
        let target = cushion - 0.4 * drivers.distress * ramp;
        let prev = level;
        level = target + 0.6 * (level - target) + 0.15 * normal(&mut r);
        let debit = (credit - scale * (level - prev)).max(0.25 * credit);

        let (mut lo, mut hi, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
        let (mut cr, mut db, mut n_cr, mut n_db) = (0.0, 0.0, 0usize, 0usize);
        for _ in 0..SUB_STEPS {
            let b = scale * (level + INTRA_SD * normal(&mut r));
            lo = lo.min(b);
            hi = hi.max(b);
            sum += b;
            if b >= 0.0 {
                cr += b;
                n_cr += 1;
            } else {
                db -= b;
                n_db += 1;
            }
            let limit = scale * OVERDRAFT_LIMIT;
            if b < limit {
                let amount = cents(limit - b);
                int_n += 1;
                int_a += amount;
                if r.random::<f64>() < reject_p {
                    rej_n += 1;
                    rej_a += amount;
                }
            }
        }
        let k = SUB_STEPS as f64;
        if final_year && r.random::<f64>() < (0.01 * (0.8 * drivers.distress).exp()).min(0.5) {
            unpaid.insert(m);
        }
        records.push(MonthlyRecord {
            account_id: id.clone(),
            month_index: m,
            min_bal: round2(lo),
            max_bal: round2(hi),
            mean_bal: round2(sum / k).clamp(round2(lo), round2(hi)),
            mean_crbal: round2(cr / n_cr.max(1) as f64),
            mean_dbbal: round2(db / n_db.max(1) as f64),
            tcredit: round2(credit),
            tdebit: round2(debit),
            int_cnviol: int_n,
            rej_cnviol: rej_n,
            int_caviol: from_cents(int_a),
            rej_caviol: from_cents(rej_a),
        });
    }
    let attributes = FirmAttributes {
        account_id: id,
        sector: drivers.sector,
        total_sales: round2(12.0 * scale * (0.2 * normal(&mut r)).exp()),
        relationship_years: (r.random::<f64>() * 60.0).round() / 2.0,
        unpaid_loan_months: unpaid,
    };
    FirmDraw {
        drivers,
        noise,
        records,
        attributes,
    }
}

/// Intercept making the mean default probability equal `rate`.
fn calibrate_intercept(effects: &[f64], rate: f64) -> f64 {
    let mean_p = |c: f64| effects.iter().map(|e| sigmoid(c + e)).sum::<f64>() / effects.len() as f64;
    let (mut lo, mut hi) = (-50.0, 50.0);
    for _ in 0..200 {
        let mid = (lo + hi) / 2.0;
        if mean_p(mid) < rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) / 2.0
}

/// Default counts per sector, raised where needed so rates strictly increase along `Sector::ALL`.
fn sector_counts(expected: &[f64; 5], sizes: &[usize; 5]) -> Result<[usize; 5]> {
    let mut k = [0usize; 5];
    let mut prev_rate = -1.0;
    for s in 0..5 {
        if sizes[s] == 0 {
            return Err(Error::invalid(format!("no firms drawn in sector {}", Sector::ALL[s])));
        }
        let n = sizes[s];
        let mut ks = (expected[s].round() as usize).clamp(1, n - 1);
        while (ks as f64 / n as f64) <= prev_rate {
            ks += 1;
        }
        if ks >= n {
            return Err(Error::invalid(format!(
                "sector {} too small to keep default rates ordered",
                Sector::ALL[s]
            )));
        }
        prev_rate = ks as f64 / n as f64;
        k[s] = ks;
    }
    Ok(k)
}

pub fn generate_panel(config: &SynthConfig) -> Result<(PanelDataset, SynthTruth)> {
    config.validate()?;
    let n = config.n_firms;
    let draws = par::map_range(n, |i| simulate_firm(i, config));
    let w = config.signal_weights;
    let effects: Vec<f64> = draws
        .iter()
        .map(|d| d.drivers.latent(&w, config.orthogonal_block))
        .collect();
    let intercept = calibrate_intercept(&effects, config.base_default_rate);

    let sector_ix: Vec<usize> = draws
        .iter()
        .map(|d| Sector::ALL.iter().position(|s| *s == d.drivers.sector).unwrap_or(0))
        .collect();
    let mut expected = [0.0; 5];
    let mut sizes = [0usize; 5];
    for (i, &s) in sector_ix.iter().enumerate() {
        expected[s] += sigmoid(intercept + effects[i]);
        sizes[s] += 1;
    }
    let counts = sector_counts(&expected, &sizes)?;

    let mut default = vec![false; n];
    let mut cuts = [0.0; 5];
    for s in 0..5 {
        let mut members: Vec<(f64, usize)> = (0..n)
            .filter(|&i| sector_ix[i] == s)
            .map(|i| (intercept + effects[i] + draws[i].noise, i))
            .collect();
        members.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let k = counts[s];
        cuts[s] = (members[k - 1].0 + members[k].0) / 2.0;
        for &(_, i) in &members[..k] {
            default[i] = true;
        }
    }

    let t = config.snapshot_month();
    let mut records = Vec::with_capacity(n * config.n_months);
    let mut attributes = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut drivers = Vec::with_capacity(n);
    let mut account_ids = Vec::with_capacity(n);
    let mut latent_score = Vec::with_capacity(n);
    for (i, d) in draws.into_iter().enumerate() {
        let id = d.attributes.account_id.clone();
        labels.push(Label {
            account_id: id.clone(),
            snapshot_month: t,
            default: default[i],
        });
        latent_score.push(intercept + effects[i] - cuts[sector_ix[i]]);
        account_ids.push(id);
        drivers.push(d.drivers);
        records.extend(d.records);
        attributes.push(d.attributes);
    }
    let (panel, diagnostics) = PanelDataset::new(records, attributes, labels)?;
    if let Some(d) = diagnostics.first() {
        return Err(Error::invalid(format!(
            "generator produced an invalid snapshot for {}: {}",
            d.account_id, d.message
        )));
    }
    let mut coefficients = w.as_map();
    if !config.orthogonal_block {
        coefficients.insert("orthogonal".into(), 0.0);
    }
    let sector_cuts = Sector::ALL
        .iter()
        .zip(cuts)
        .map(|(s, c)| (s.to_string(), c))
        .collect();
    Ok((
        panel,
        SynthTruth {
            account_ids,
            latent_score,
            drivers,
            coefficients,
            intercept,
            sector_cuts,
            snapshot_month: t,
        },
    ))
}

/// `n_features` columns `fin1..finN`, each a noisy reading of the orthogonal driver.
///
/// Loadings fall from 0.6 to 0.15 across the block; odd-numbered columns
/// read the driver through a saturating transform.
pub fn generate_orthogonal_block(truth: &SynthTruth, n_features: usize, seed: u64) -> Result<FeatureMatrix> {
    if n_features == 0 {
        return Err(Error::invalid("n_features must be >= 1"));
    }
    let n = truth.account_ids.len();
    let loads: Vec<f64> = (0..n_features)
        .map(|j| {
            if n_features == 1 {
                0.6
            } else {
                0.6 - 0.45 * j as f64 / (n_features - 1) as f64
            }
        })
        .collect();
    let rows_vals = par::map_range(n, |i| {
        let mut r = rng::stream(rng::derive(seed, i));
        let u = truth.drivers[i].orthogonal;
        loads
            .iter()
            .enumerate()
            .map(|(j, &a)| {
                let signal = if j % 2 == 1 { u.tanh() * 1.3 } else { u };
                a * signal + (1.0 - a * a).sqrt() * normal(&mut r)
            })
            .collect::<Vec<f64>>()
    });
    let mut cols = vec![Vec::with_capacity(n); n_features];
    for row in rows_vals {
        for (c, v) in cols.iter_mut().zip(row) {
            c.push(v);
        }
    }
    let rows = truth
        .account_ids
        .iter()
        .map(|id| RowId {
            account_id: id.clone(),
            snapshot_month: truth.snapshot_month,
        })
        .collect();
    let infos = (1..=n_features)
        .map(|j| ColumnInfo::new(format!("fin{j}"), "orthogonal", "financial ratio reading of the orthogonal driver"))
        .collect();
    FeatureMatrix::from_columns(rows, infos, cols)
}

pub const TRUTH_FILE: &str = "truth.csv";

/// Writes `account_id,latent_score`.
pub fn write_truth(truth: &SynthTruth, path: &Path, header: &[String]) -> Result<()> {
    let mut w = panel::writer(path, header)?;
    w.write_record(["account_id", "latent_score"])?;
    for (id, s) in truth.account_ids.iter().zip(&truth.latent_score) {
        w.write_record([id.as_str(), &s.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
