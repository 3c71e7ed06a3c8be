//! Experiment configuration read from a TOML file.
//!
//! Every section is optional; missing keys take the defaults below. The
//! top-level `seed` drives every random stream: the generator uses `seed`,
//! the split `seed + 1`, forests `seed + 2`, boosting `seed + 3` and the
//! orthogonal block `seed + 4`.

use std::path::{Path, PathBuf};

use acctrisk::boost::{BoostParams, Loss};
use acctrisk::ensemble::{ForestParams, Sampling};
use acctrisk::features::Def3Thresholds;
use acctrisk::glm::Direction;
use acctrisk::synthgen::{SignalWeights, SynthConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out: PathBuf,
    /// Score cut-off for confusion matrices.
    pub threshold: f64,
    pub synth: SynthSection,
    pub split: SplitSection,
    pub features: FeatureSection,
    /// Any of `logit`, `rf`, `brf`, `boost`.
    pub models: Vec<ModelKind>,
    pub forest: ForestSection,
    pub boost: BoostSection,
    pub selection: SelectionSection,
    pub compare: CompareSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let reference = SynthConfig::reference();
        ExperimentConfig {
            seed: reference.seed,
            out: PathBuf::from("out"),
            threshold: 0.5,
            synth: SynthSection::default(),
            split: SplitSection::default(),
            features: FeatureSection::default(),
            models: vec![ModelKind::Logit, ModelKind::Brf, ModelKind::Boost],
            forest: ForestSection::default(),
            boost: BoostSection::default(),
            selection: SelectionSection::default(),
            compare: CompareSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub n_firms: usize,
    pub n_months: usize,
    pub base_default_rate: f64,
    pub orthogonal_block: bool,
    pub signal_weights: SignalWeights,
}

impl Default for SynthSection {
    fn default() -> Self {
        let r = SynthConfig::reference();
        SynthSection {
            n_firms: r.n_firms,
            n_months: r.n_months,
            base_default_rate: r.base_default_rate,
            orthogonal_block: r.orthogonal_block,
            signal_weights: r.signal_weights,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitKind {
    Random,
    Temporal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub kind: SplitKind,
    pub test_fraction: f64,
    /// Last training snapshot month for `temporal` splits.
    pub boundary_month: Option<i32>,
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection {
            kind: SplitKind::Random,
            test_fraction: 0.3,
            boundary_month: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSection {
    /// Columns in the orthogonal block joined for `orthogonal` and `merged`.
    pub orthogonal_columns: usize,
    /// Boundaries for the discretized set; estimated on the training panel when absent.
    pub def3: Option<Def3Thresholds>,
    /// Columns kept per interaction family before the final boosting.
    pub interactions_per_family: usize,
    /// Columns kept after the final boosting.
    pub interactions_final: usize,
    /// Training columns with a larger share of masked values are left out of logit fits.
    pub logit_max_missing: f64,
}

impl Default for FeatureSection {
    fn default() -> Self {
        FeatureSection {
            orthogonal_columns: 11,
            def3: None,
            interactions_per_family: 20,
            interactions_final: 50,
            logit_max_missing: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Logit,
    Rf,
    Brf,
    Boost,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Logit => "logit",
            ModelKind::Rf => "rf",
            ModelKind::Brf => "brf",
            ModelKind::Boost => "boost",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "logit" => Ok(ModelKind::Logit),
            "rf" => Ok(ModelKind::Rf),
            "brf" => Ok(ModelKind::Brf),
            "boost" => Ok(ModelKind::Boost),
            _ => Err(format!("unknown model {s:?}; expected logit, rf, brf or boost")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestSection {
    pub n_trees: usize,
    /// Candidate columns per split; absent means `floor(sqrt(p))`.
    pub mtry: Option<usize>,
    pub fraction: f64,
    pub min_node_size: usize,
    pub max_depth: usize,
}

impl Default for ForestSection {
    fn default() -> Self {
        let d = ForestParams::default();
        ForestSection {
            n_trees: d.n_trees,
            mtry: d.mtry,
            fraction: d.fraction,
            min_node_size: d.min_node_size,
            max_depth: d.max_depth,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoostSection {
    pub n_rounds: usize,
    pub eta: f64,
    pub max_depth: usize,
    pub subsample: f64,
    pub loss: Loss,
    pub min_child_weight: f64,
}

impl Default for BoostSection {
    fn default() -> Self {
        let d = BoostParams::default();
        BoostSection {
            n_rounds: d.n_rounds,
            eta: d.eta,
            max_depth: d.max_depth,
            subsample: d.subsample,
            loss: d.loss,
            min_child_weight: d.min_child_weight,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMethod {
    Aic,
    LassoK,
    BoostTopk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionSection {
    /// Ranking used by `def1-topK` groups.
    pub method: SelectionMethod,
    pub k: usize,
    pub direction: Direction,
}

impl Default for SelectionSection {
    fn default() -> Self {
        SelectionSection {
            method: SelectionMethod::BoostTopk,
            k: 8,
            direction: Direction::Both,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareSection {
    /// Feature groups: `def1`, `def1-topK`, `def3`, `interactions`, `orthogonal`, `merged`.
    pub groups: Vec<String>,
}

impl Default for CompareSection {
    fn default() -> Self {
        CompareSection {
            groups: vec!["def1".into(), "orthogonal".into(), "merged".into()],
        }
    }
}

/// A parsed feature-group name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Group {
    Def1,
    Def1Top(usize),
    Def3,
    Interactions,
    Orthogonal,
    Merged,
}

impl Group {
    pub fn parse(s: &str) -> CliResult<Group> {
        match s {
            "def1" => Ok(Group::Def1),
            "def3" => Ok(Group::Def3),
            "interactions" => Ok(Group::Interactions),
            "orthogonal" => Ok(Group::Orthogonal),
            "merged" => Ok(Group::Merged),
            _ => s
                .strip_prefix("def1-top")
                .and_then(|k| k.parse().ok())
                .filter(|&k| k > 0)
                .map(Group::Def1Top)
                .ok_or_else(|| CliError::config(format!("unknown feature group {s:?}"))),
        }
    }

    pub fn needs_orthogonal(self) -> bool {
        matches!(self, Group::Orthogonal | Group::Merged)
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        self.synth_config()
            .validate()
            .map_err(|e| CliError::config(format!("[synth] {e}")))?;
        if !(self.split.test_fraction > 0.0 && self.split.test_fraction < 1.0) {
            return Err(CliError::config("[split] test_fraction must lie in (0, 1)"));
        }
        if self.split.kind == SplitKind::Temporal && self.split.boundary_month.is_none() {
            return Err(CliError::config("[split] temporal split needs boundary_month"));
        }
        if self.models.is_empty() {
            return Err(CliError::config("models must name at least one model"));
        }
        self.boost_params()
            .validate()
            .map_err(|e| CliError::config(format!("[boost] {e}")))?;
        if self.forest.n_trees == 0 {
            return Err(CliError::config("[forest] n_trees must be >= 1"));
        }
        if !(self.forest.fraction > 0.0 && self.forest.fraction <= 1.0) {
            return Err(CliError::config("[forest] fraction must lie in (0, 1]"));
        }
        if self.selection.k == 0 || self.selection.k > acctrisk::features::DEF1_COLUMNS.len() {
            return Err(CliError::config(format!(
                "[selection] k = {} must lie in 1..={}",
                self.selection.k,
                acctrisk::features::DEF1_COLUMNS.len()
            )));
        }
        for g in &self.compare.groups {
            let group = Group::parse(g)?;
            if let Group::Def1Top(k) = group {
                if k > acctrisk::features::DEF1_COLUMNS.len() {
                    return Err(CliError::config(format!("group {g}: k exceeds the 30 available columns")));
                }
            }
            if group.needs_orthogonal() && !self.synth.orthogonal_block {
                return Err(CliError::config(format!(
                    "group {g} needs [synth] orthogonal_block = true"
                )));
            }
        }
        if self.features.orthogonal_columns == 0 {
            return Err(CliError::config("[features] orthogonal_columns must be >= 1"));
        }
        Ok(())
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            n_firms: self.synth.n_firms,
            n_months: self.synth.n_months,
            base_default_rate: self.synth.base_default_rate,
            signal_weights: self.synth.signal_weights,
            orthogonal_block: self.synth.orthogonal_block,
            seed: self.seed,
        }
    }

    pub fn split_seed(&self) -> u64 {
        self.seed.wrapping_add(1)
    }

    pub fn orthogonal_seed(&self) -> u64 {
        self.seed.wrapping_add(4)
    }

    pub fn forest_params(&self, balanced: bool) -> ForestParams {
        ForestParams {
            n_trees: self.forest.n_trees,
            mtry: self.forest.mtry,
            sampling: if balanced { Sampling::Balanced } else { Sampling::Uniform },
            fraction: self.forest.fraction,
            min_node_size: self.forest.min_node_size,
            max_depth: self.forest.max_depth,
            seed: self.seed.wrapping_add(2),
        }
    }

    pub fn boost_params(&self) -> BoostParams {
        BoostParams {
            n_rounds: self.boost.n_rounds,
            eta: self.boost.eta,
            max_depth: self.boost.max_depth,
            subsample: self.boost.subsample,
            loss: self.boost.loss,
            min_child_weight: self.boost.min_child_weight,
            seed: self.seed.wrapping_add(3),
        }
    }

    /// First 16 hex digits of the SHA-256 of the canonical TOML rendering, output directory excluded.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = PathBuf::new();
        let canonical = toml::to_string(&c).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        hex::encode(&digest[..8])
    }

    /// Comment lines placed at the top of every output file.
    pub fn header(&self, command: &str) -> Vec<String> {
        vec![
            format!("acctrisk {command}"),
            format!("config_hash={}", self.hash()),
            format!("seed={}", self.seed),
        ]
    }
}
