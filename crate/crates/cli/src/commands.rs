//! The subcommands. Each is a pure function of the config and its input files.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use acctrisk::boost::{fit_boost, BoostedModel};
use acctrisk::ensemble::{fit_forest, forest_importance, predict_forest, Forest};
use acctrisk::eval::{auc, EvalReport};
use acctrisk::features::{
    compute_def1, compute_def1_with, compute_def2_base, compute_def3, generate_interactions,
    staged_interaction_selection, Def3Thresholds, FeatureMatrix, RowId,
};
use acctrisk::glm::{fit_logit, independent_columns, lasso_exact_k, stepwise_select, GlmModel};
use acctrisk::panel::{
    load_panel_dir, read_labels, split_random, split_temporal, write_panel, PanelDataset,
};
use acctrisk::synthgen::{generate_orthogonal_block, generate_panel, write_truth, TRUTH_FILE};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Group, ModelKind, SelectionMethod, SplitKind};
use crate::error::{CliError, CliResult, Stage};

pub const PANEL_DIR: &str = "panel";
pub const FEATURES_DIR: &str = "features";
pub const MODELS_DIR: &str = "models";
pub const EVAL_DIR: &str = "eval";
pub const ORTHOGONAL_FILE: &str = "orthogonal.csv";

fn write_text(path: &Path, header: &[String], body: &str) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut s: String = header.iter().map(|h| format!("# {h}\n")).collect();
    s.push_str(body);
    std::fs::write(path, s).map_err(|e| CliError::io(path, e))
}

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// JSON outputs carry the same provenance as the `# ` header of text outputs.
#[derive(Debug, Serialize, Deserialize)]
pub struct Stamped<T> {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub body: T,
}

fn write_json<T: Serialize>(cfg: &ExperimentConfig, command: &str, path: &Path, body: T) -> CliResult<()> {
    let stamped = Stamped {
        command: command.to_string(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        body,
    };
    let text = serde_json::to_string_pretty(&stamped).map_err(|e| CliError::Stage {
        stage: format!("write {}", path.display()),
        source: e.into(),
    })?;
    write_text(path, &[], &(text + "\n"))
}

// ---------------------------------------------------------------------------
// Data
// ---------------------------------------------------------------------------

/// A split panel plus the orthogonal block when one was generated.
pub struct Data {
    pub train: PanelDataset,
    pub test: PanelDataset,
    pub orthogonal: Option<FeatureMatrix>,
}

fn split(cfg: &ExperimentConfig, panel: &PanelDataset) -> CliResult<(PanelDataset, PanelDataset)> {
    match cfg.split.kind {
        SplitKind::Random => split_random(panel, cfg.split.test_fraction, cfg.split_seed()).stage("split"),
        SplitKind::Temporal => {
            let b = cfg.split.boundary_month.expect("validated");
            split_temporal(panel, b).stage("split")
        }
    }
}

/// Loads `dir` when given, otherwise generates the panel described by the config.
pub fn load_data(cfg: &ExperimentConfig, dir: Option<&Path>) -> CliResult<Data> {
    let (panel, orthogonal) = match dir {
        Some(d) => {
            let (panel, _) = load_panel_dir(d).stage("load panel")?;
            let orth_path = d.join(ORTHOGONAL_FILE);
            let orth = if orth_path.exists() {
                Some(FeatureMatrix::read_csv(&orth_path, None).stage("load orthogonal block")?)
            } else {
                None
            };
            (panel, orth)
        }
        None => {
            let (panel, truth) = generate_panel(&cfg.synth_config()).stage("synth")?;
            let orth = if cfg.synth.orthogonal_block {
                Some(
                    generate_orthogonal_block(&truth, cfg.features.orthogonal_columns, cfg.orthogonal_seed())
                        .stage("synth orthogonal block")?,
                )
            } else {
                None
            };
            (panel, orth)
        }
    };
    let (train, test) = split(cfg, &panel)?;
    Ok(Data {
        train,
        test,
        orthogonal,
    })
}

/// Labels in the row order of `x`.
pub fn labels_for(x: &FeatureMatrix, labels: &HashMap<RowId, bool>) -> CliResult<Vec<bool>> {
    x.rows()
        .iter()
        .map(|r| {
            labels.get(r).copied().ok_or_else(|| {
                CliError::config(format!("no label for {}@{}", r.account_id, r.snapshot_month))
            })
        })
        .collect()
}

fn label_map(panel: &PanelDataset) -> HashMap<RowId, bool> {
    panel
        .labels()
        .iter()
        .map(|l| {
            (
                RowId {
                    account_id: l.account_id.clone(),
                    snapshot_month: l.snapshot_month,
                },
                l.default,
            )
        })
        .collect()
}

/// Train and test matrices for one feature group, with aligned labels.
pub struct GroupData {
    pub name: String,
    pub xtr: FeatureMatrix,
    pub xte: FeatureMatrix,
    pub ytr: Vec<bool>,
    pub yte: Vec<bool>,
}

fn def1_pair(data: &Data) -> CliResult<(FeatureMatrix, FeatureMatrix)> {
    let (xtr, enc, _) = compute_def1(&data.train).stage("featurize def1 (train)")?;
    let (xte, _) = compute_def1_with(&data.test, &enc).stage("featurize def1 (test)")?;
    Ok((xtr, xte))
}

fn orthogonal_pair(data: &Data, xtr: &FeatureMatrix, xte: &FeatureMatrix) -> CliResult<(FeatureMatrix, FeatureMatrix)> {
    let orth = data
        .orthogonal
        .as_ref()
        .ok_or_else(|| CliError::config("orthogonal block unavailable; set [synth] orthogonal_block = true"))?;
    Ok((
        xtr.join(orth).stage("join orthogonal block (train)")?,
        xte.join(orth).stage("join orthogonal block (test)")?,
    ))
}

pub fn build_group(cfg: &ExperimentConfig, name: &str, data: &Data) -> CliResult<GroupData> {
    let group = Group::parse(name)?;
    let ytr_panel = label_map(&data.train);
    let yte_panel = label_map(&data.test);
    let (xtr, xte) = match group {
        Group::Def1 => def1_pair(data)?,
        Group::Def1Top(k) => {
            let (xtr, xte) = def1_pair(data)?;
            let ytr = labels_for(&xtr, &ytr_panel)?;
            let names = rank_columns(cfg, cfg.selection.method, &xtr, &ytr, k)?;
            (
                xtr.select_columns_by_name(&names).stage("select columns")?,
                xte.select_columns_by_name(&names).stage("select columns")?,
            )
        }
        Group::Def3 => {
            let th = cfg
                .features
                .def3
                .unwrap_or_else(|| Def3Thresholds::from_panel(&data.train));
            (
                compute_def3(&data.train, th).stage("featurize def3 (train)")?,
                compute_def3(&data.test, th).stage("featurize def3 (test)")?,
            )
        }
        Group::Interactions => {
            let btr = compute_def2_base(&data.train).stage("featurize def2 (train)")?;
            let bte = compute_def2_base(&data.test).stage("featurize def2 (test)")?;
            let ytr = labels_for(&btr, &ytr_panel)?;
            let sel = staged_interaction_selection(
                &btr,
                &ytr,
                cfg.features.interactions_per_family,
                cfg.features.interactions_final,
                &cfg.boost_params(),
            )
            .stage("interaction selection")?;
            let names = sel.matrix.column_names();
            let te_all = generate_interactions(&bte).stage("interactions (test)")?;
            (sel.matrix, te_all.select_columns_by_name(&names).stage("interactions (test)")?)
        }
        Group::Orthogonal => {
            let (d1tr, d1te) = def1_pair(data)?;
            let (mtr, mte) = orthogonal_pair(data, &d1tr, &d1te)?;
            let fin: Vec<usize> = (d1tr.n_cols()..mtr.n_cols()).collect();
            (mtr.select_columns(&fin), mte.select_columns(&fin))
        }
        Group::Merged => {
            let (d1tr, d1te) = def1_pair(data)?;
            orthogonal_pair(data, &d1tr, &d1te)?
        }
    };
    let ytr = labels_for(&xtr, &ytr_panel)?;
    let yte = labels_for(&xte, &yte_panel)?;
    Ok(GroupData {
        name: name.to_string(),
        xtr,
        xte,
        ytr,
        yte,
    })
}

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "snake_case")]
pub enum SavedModel {
    Logit(GlmModel),
    Rf(Forest),
    Brf(Forest),
    Boost(BoostedModel),
}

impl SavedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            SavedModel::Logit(_) => ModelKind::Logit,
            SavedModel::Rf(_) => ModelKind::Rf,
            SavedModel::Brf(_) => ModelKind::Brf,
            SavedModel::Boost(_) => ModelKind::Boost,
        }
    }

    /// Class-1 scores; `NaN` where a logit covariate is masked.
    pub fn predict(&self, x: &FeatureMatrix) -> CliResult<Vec<f64>> {
        match self {
            SavedModel::Logit(m) => m.predict(x).stage("predict logit"),
            SavedModel::Rf(f) | SavedModel::Brf(f) => predict_forest(f, x).stage("predict forest"),
            SavedModel::Boost(m) => m.predict(x).stage("predict boost"),
        }
    }

    pub fn load(path: &Path) -> CliResult<SavedModel> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let s: Stamped<SavedModel> = serde_json::from_str(&text).map_err(|e| CliError::Stage {
            stage: format!("load model {}", path.display()),
            source: e.into(),
        })?;
        Ok(s.body)
    }
}

/// Columns with at most `logit_max_missing` masked training values, minus exact linear dependencies.
pub fn logit_columns(cfg: &ExperimentConfig, x: &FeatureMatrix) -> Vec<usize> {
    let cols: Vec<usize> = (0..x.n_cols())
        .filter(|&j| x.missing_fraction(j) <= cfg.features.logit_max_missing)
        .collect();
    independent_columns(x, &cols)
}

pub fn fit_model(cfg: &ExperimentConfig, kind: ModelKind, x: &FeatureMatrix, y: &[bool]) -> CliResult<SavedModel> {
    let stage = format!("train {}", kind.name());
    Ok(match kind {
        ModelKind::Logit => {
            let cols = logit_columns(cfg, x);
            SavedModel::Logit(fit_logit(&x.select_columns(&cols), y).stage(stage)?)
        }
        ModelKind::Rf => SavedModel::Rf(fit_forest(x, y, &cfg.forest_params(false)).stage(stage)?),
        ModelKind::Brf => SavedModel::Brf(fit_forest(x, y, &cfg.forest_params(true)).stage(stage)?),
        ModelKind::Boost => SavedModel::Boost(fit_boost(x, y, &cfg.boost_params()).stage(stage)?),
    })
}

/// Top `k` column names by the given ranking on `(x, y)`.
pub fn rank_columns(
    cfg: &ExperimentConfig,
    method: SelectionMethod,
    x: &FeatureMatrix,
    y: &[bool],
    k: usize,
) -> CliResult<Vec<String>> {
    if k > x.n_cols() {
        return Err(CliError::config(format!("k = {k} exceeds the {} available columns", x.n_cols())));
    }
    match method {
        SelectionMethod::BoostTopk => {
            let m = fit_boost(x, y, &cfg.boost_params()).stage("select: boost")?;
            Ok(m.importance().into_iter().take(k).map(|(n, _)| n).collect())
        }
        SelectionMethod::Aic => {
            let cols = logit_columns(cfg, x);
            let res = stepwise_select(&x.select_columns(&cols), y, cfg.selection.direction).stage("select: stepwise")?;
            let mut terms: Vec<(String, f64)> = res
                .model
                .column_names
                .iter()
                .cloned()
                .zip(res.model.z_values.iter().skip(1).map(|z| z.abs()))
                .collect();
            terms.sort_by(|a, b| b.1.total_cmp(&a.1));
            Ok(terms.into_iter().take(k).map(|(n, _)| n).collect())
        }
        SelectionMethod::LassoK => {
            let cols = logit_columns(cfg, x);
            let r = lasso_exact_k(&x.select_columns(&cols), y, k).stage("select: lasso")?;
            let mut act: Vec<(String, f64)> = r
                .fit
                .active
                .iter()
                .map(|&j| (r.fit.column_names[j].clone(), r.fit.std_coefficients[j].abs()))
                .collect();
            act.sort_by(|a, b| b.1.total_cmp(&a.1));
            Ok(act.into_iter().map(|(n, _)| n).collect())
        }
    }
}

// ---------------------------------------------------------------------------
// synth / featurize / train / evaluate
// ---------------------------------------------------------------------------

pub fn cmd_synth(cfg: &ExperimentConfig) -> CliResult<PathBuf> {
    let header = cfg.header("synth");
    let dir = cfg.out.join(PANEL_DIR);
    let (panel, truth) = generate_panel(&cfg.synth_config()).stage("synth")?;
    write_panel(&panel, &dir, &header).stage("write panel")?;
    write_truth(&truth, &dir.join(TRUTH_FILE), &header).stage("write truth")?;
    if cfg.synth.orthogonal_block {
        let orth = generate_orthogonal_block(&truth, cfg.features.orthogonal_columns, cfg.orthogonal_seed())
            .stage("synth orthogonal block")?;
        orth.write_csv(&dir.join(ORTHOGONAL_FILE), &header).stage("write orthogonal block")?;
    }
    Ok(dir)
}

fn write_labels(path: &Path, header: &[String], x: &FeatureMatrix, y: &[bool]) -> CliResult<()> {
    let mut body = String::from("account_id,snapshot_month,default\n");
    for (r, &yi) in x.rows().iter().zip(y) {
        let _ = writeln!(body, "{},{},{}", r.account_id, r.snapshot_month, yi as u8);
    }
    write_text(path, header, &body)
}

/// Paths of one group's stored train/test matrices and labels.
pub fn feature_paths(out: &Path, group: &str, side: &str) -> (PathBuf, PathBuf, PathBuf) {
    let dir = out.join(FEATURES_DIR);
    (
        dir.join(format!("{group}.{side}.csv")),
        dir.join(format!("{group}.manifest.json")),
        dir.join(format!("{group}.{side}.labels.csv")),
    )
}

pub fn cmd_featurize(cfg: &ExperimentConfig, panel_dir: Option<&Path>) -> CliResult<Vec<String>> {
    let header = cfg.header("featurize");
    let data = load_data(cfg, panel_dir)?;
    create_dir(&cfg.out.join(FEATURES_DIR))?;
    let mut written = Vec::new();
    for g in &cfg.compare.groups {
        let gd = build_group(cfg, g, &data)?;
        for (side, x, y) in [("train", &gd.xtr, &gd.ytr), ("test", &gd.xte, &gd.yte)] {
            let (data_path, manifest, labels) = feature_paths(&cfg.out, g, side);
            x.write_csv(&data_path, &header).stage("write features")?;
            x.write_manifest(&manifest).stage("write manifest")?;
            write_labels(&labels, &header, x, y)?;
        }
        written.push(g.clone());
    }
    Ok(written)
}

/// Reads a stored matrix and its labels.
pub fn read_group(data: &Path, labels: &Path) -> CliResult<(FeatureMatrix, Vec<bool>)> {
    let x = FeatureMatrix::read_csv(data, None).stage("read features")?;
    let map: HashMap<RowId, bool> = read_labels(labels)
        .stage("read labels")?
        .into_iter()
        .map(|l| {
            (
                RowId {
                    account_id: l.account_id,
                    snapshot_month: l.snapshot_month,
                },
                l.default,
            )
        })
        .collect();
    let y = labels_for(&x, &map)?;
    Ok((x, y))
}

pub fn model_path(out: &Path, group: &str, kind: ModelKind) -> PathBuf {
    out.join(MODELS_DIR).join(format!("{group}.{}.json", kind.name()))
}

pub fn cmd_train(cfg: &ExperimentConfig, group: &str, kind: ModelKind) -> CliResult<PathBuf> {
    let (data, _, labels) = feature_paths(&cfg.out, group, "train");
    let (x, y) = read_group(&data, &labels)?;
    let model = fit_model(cfg, kind, &x, &y)?;
    let path = model_path(&cfg.out, group, kind);
    write_json(cfg, "train", &path, &model)?;
    Ok(path)
}

/// Evaluation on the rows with a finite score.
pub fn evaluate_scores(cfg: &ExperimentConfig, scores: &[f64], y: &[bool]) -> CliResult<EvalReport> {
    let rows: Vec<usize> = (0..scores.len()).filter(|&i| scores[i].is_finite()).collect();
    let s: Vec<f64> = rows.iter().map(|&i| scores[i]).collect();
    let yy: Vec<bool> = rows.iter().map(|&i| y[i]).collect();
    EvalReport::new(&s, &yy, cfg.threshold).stage("evaluate")
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "model".into())
}

pub fn cmd_evaluate(cfg: &ExperimentConfig, model: &Path, data: &Path, labels: &Path) -> CliResult<EvalReport> {
    let m = SavedModel::load(model)?;
    let (x, y) = read_group(data, labels)?;
    let report = evaluate_scores(cfg, &m.predict(&x)?, &y)?;
    let dir = cfg.out.join(EVAL_DIR);
    let name = stem(model);
    write_json(cfg, "evaluate", &dir.join(format!("{name}.report.json")), &report)?;
    write_text(&dir.join(format!("{name}.roc.csv")), &cfg.header("evaluate"), &report.roc_csv())?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareCell {
    pub group: String,
    pub model: ModelKind,
    /// Resubstitution AUC on the training rows.
    pub train_auc: f64,
    /// Out-of-bag training AUC, forests only.
    pub oob_auc: Option<f64>,
    /// Boosting rounds per input column, boosting only.
    pub rounds_per_column: Option<f64>,
    pub test_auc: f64,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareGrid {
    pub groups: Vec<String>,
    pub models: Vec<ModelKind>,
    /// Row-major: `cells[g * models.len() + m]`.
    pub cells: Vec<CompareCell>,
    /// Test rows scored by every model of each group.
    pub n_eval: Vec<usize>,
}

impl CompareGrid {
    pub fn test_auc(&self, group: &str, model: ModelKind) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| c.group == group && c.model == model)
            .map(|c| c.test_auc)
    }
}

pub const COMPARE_FILE: &str = "compare_test_auc.csv";
pub const COMPARE_DETAIL_FILE: &str = "compare_detail.csv";

/// Fits every configured model on every group; all models of a group are scored on the same test rows.
pub fn cmd_compare(cfg: &ExperimentConfig, panel_dir: Option<&Path>) -> CliResult<CompareGrid> {
    let data = load_data(cfg, panel_dir)?;
    let mut cells = Vec::new();
    let mut n_eval = Vec::new();
    for g in &cfg.compare.groups {
        let gd = build_group(cfg, g, &data)?;
        let mut fitted = Vec::new();
        for &kind in &cfg.models {
            let m = fit_model(cfg, kind, &gd.xtr, &gd.ytr).map_err(|e| in_group(e, g))?;
            let oob = match &m {
                SavedModel::Rf(f) | SavedModel::Brf(f) => {
                    let o = f.oob_predictions(&gd.xtr).stage("oob predictions")?;
                    let (s, y): (Vec<f64>, Vec<bool>) =
                        o.iter().zip(&gd.ytr).filter_map(|(p, &y)| p.map(|p| (p, y))).unzip();
                    Some(auc(&s, &y).stage(format!("oob auc {g}/{}", kind.name()))?)
                }
                _ => None,
            };
            let ratio = match &m {
                SavedModel::Boost(_) => Some(cfg.boost.n_rounds as f64 / gd.xtr.n_cols() as f64),
                _ => None,
            };
            fitted.push((kind, m.predict(&gd.xtr)?, m.predict(&gd.xte)?, oob, ratio));
        }
        let rows: Vec<usize> = (0..gd.xte.n_rows())
            .filter(|&i| fitted.iter().all(|(_, _, s, _, _)| s[i].is_finite()))
            .collect();
        let yte: Vec<bool> = rows.iter().map(|&i| gd.yte[i]).collect();
        n_eval.push(rows.len());
        for (kind, str_, ste, oob_auc, rounds_per_column) in fitted {
            let test: Vec<f64> = rows.iter().map(|&i| ste[i]).collect();
            let report = EvalReport::new(&test, &yte, cfg.threshold).stage(format!("evaluate {g}/{}", kind.name()))?;
            let tr_rows: Vec<usize> = (0..str_.len()).filter(|&i| str_[i].is_finite()).collect();
            let train_auc = auc(
                &tr_rows.iter().map(|&i| str_[i]).collect::<Vec<_>>(),
                &tr_rows.iter().map(|&i| gd.ytr[i]).collect::<Vec<_>>(),
            )
            .stage(format!("train auc {g}/{}", kind.name()))?;
            cells.push(CompareCell {
                group: g.clone(),
                model: kind,
                train_auc,
                oob_auc,
                rounds_per_column,
                test_auc: report.auc,
                report,
            });
        }
    }
    let grid = CompareGrid {
        groups: cfg.compare.groups.clone(),
        models: cfg.models.clone(),
        cells,
        n_eval,
    };
    write_compare(cfg, &grid)?;
    Ok(grid)
}

fn in_group(e: CliError, group: &str) -> CliError {
    match e {
        CliError::Stage { stage, source } => CliError::Stage {
            stage: format!("{group}: {stage}"),
            source,
        },
        other => other,
    }
}

fn split_line(cfg: &ExperimentConfig) -> String {
    match cfg.split.kind {
        SplitKind::Random => format!("split=random test_fraction={}", cfg.split.test_fraction),
        SplitKind::Temporal => format!("split=temporal boundary_month={}", cfg.split.boundary_month.unwrap_or_default()),
    }
}

fn write_compare(cfg: &ExperimentConfig, grid: &CompareGrid) -> CliResult<()> {
    let mut header = cfg.header("compare");
    header.push(split_line(cfg));
    let mut s = String::from("group");
    for m in &grid.models {
        let _ = write!(s, ",{}", m.name());
    }
    s.push('\n');
    for g in &grid.groups {
        s.push_str(g);
        for &m in &grid.models {
            let _ = write!(s, ",{:.6}", grid.test_auc(g, m).unwrap_or(f64::NAN));
        }
        s.push('\n');
    }
    write_text(&cfg.out.join(COMPARE_FILE), &header, &s)?;

    let mut d = String::from(
        "group,model,n_eval,train_auc,oob_auc,rounds_per_column,test_auc,threshold,true_negative,false_positive,false_negative,true_positive,class0_error,class1_error,global_error\n",
    );
    for c in &grid.cells {
        let k = &c.report.confusion;
        let n = grid.groups.iter().position(|g| *g == c.group).map_or(0, |i| grid.n_eval[i]);
        let _ = writeln!(
            d,
            "{},{},{n},{:.6},{},{},{:.6},{},{},{},{},{},{:.6},{:.6},{:.6}",
            c.group,
            c.model.name(),
            c.train_auc,
            c.oob_auc.map(|v| format!("{v:.6}")).unwrap_or_default(),
            c.rounds_per_column.map(|v| format!("{v:.2}")).unwrap_or_default(),
            c.test_auc,
            k.threshold,
            k.true_negative,
            k.false_positive,
            k.false_negative,
            k.true_positive,
            k.class0_error,
            k.class1_error,
            k.global_error
        );
    }
    write_text(&cfg.out.join(COMPARE_DETAIL_FILE), &header, &d)
}

// ---------------------------------------------------------------------------
// select
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionTable {
    pub k: usize,
    pub boost: Vec<String>,
    pub stepwise: Vec<String>,
    pub lasso: Vec<String>,
    /// False when no penalty yields exactly `k` active slopes.
    pub lasso_exact: bool,
    /// `(a, b, |a ∩ b|)` for each pair of lists.
    pub overlaps: Vec<(String, String, usize)>,
}

pub const SELECTION_FILE: &str = "selection.csv";
pub const SELECTION_OVERLAP_FILE: &str = "selection_overlap.csv";
pub const STEPWISE_TRACE_FILE: &str = "stepwise_trace.csv";

/// Three k-variable lists on the def1 training matrix: boosting importance, stepwise AIC, lasso.
pub fn cmd_select(cfg: &ExperimentConfig, panel_dir: Option<&Path>) -> CliResult<SelectionTable> {
    let data = load_data(cfg, panel_dir)?;
    let gd = build_group(cfg, "def1", &data)?;
    let (x, y) = (&gd.xtr, &gd.ytr);
    let k = cfg.selection.k;
    if k > x.n_cols() {
        return Err(CliError::config(format!("k = {k} exceeds the {} available columns", x.n_cols())));
    }
    let boost = rank_columns(cfg, SelectionMethod::BoostTopk, x, y, k)?;
    let cols = logit_columns(cfg, x);
    let lx = x.select_columns(&cols);
    let step = stepwise_select(&lx, y, cfg.selection.direction).stage("select: stepwise")?;
    let stepwise = rank_columns(cfg, SelectionMethod::Aic, x, y, k)?;
    let exact = lasso_exact_k(&lx, y, k).stage("select: lasso")?;
    let lasso = rank_columns(cfg, SelectionMethod::LassoK, x, y, k)?;
    let lists = [("boost", &boost), ("stepwise", &stepwise), ("lasso", &lasso)];
    let mut overlaps = Vec::new();
    for a in 0..3 {
        for b in a + 1..3 {
            let sa: BTreeSet<&String> = lists[a].1.iter().collect();
            let n = lists[b].1.iter().filter(|c| sa.contains(c)).count();
            overlaps.push((lists[a].0.to_string(), lists[b].0.to_string(), n));
        }
    }
    let table = SelectionTable {
        k,
        boost,
        stepwise,
        lasso,
        lasso_exact: exact.exact,
        overlaps,
    };

    let mut header = cfg.header("select");
    header.push(split_line(cfg));
    header.push(format!("stepwise_direction={:?}", cfg.selection.direction).to_lowercase());
    let rank_of = |list: &[String], c: &str| list.iter().position(|n| n == c).map(|i| (i + 1).to_string()).unwrap_or_default();
    let mut s = String::from("variable,boost,stepwise,lasso\n");
    for c in x.column_names() {
        let _ = writeln!(
            s,
            "{c},{},{},{}",
            rank_of(&table.boost, &c),
            rank_of(&table.stepwise, &c),
            rank_of(&table.lasso, &c)
        );
    }
    write_text(&cfg.out.join(SELECTION_FILE), &header, &s)?;
    let mut o = String::from("list_a,list_b,overlap,k\n");
    for (a, b, n) in &table.overlaps {
        let _ = writeln!(o, "{a},{b},{n},{k}");
    }
    write_text(&cfg.out.join(SELECTION_OVERLAP_FILE), &header, &o)?;
    let mut t = String::from("action,column,aic,note\n");
    for r in &step.trace {
        let _ = writeln!(
            t,
            "{},{},{:.6},{}",
            r.action,
            r.column.as_deref().unwrap_or(""),
            r.aic,
            r.note.as_deref().unwrap_or("")
        );
    }
    write_text(&cfg.out.join(STEPWISE_TRACE_FILE), &header, &t)?;
    Ok(table)
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct ReportFiles {
    pub report: PathBuf,
    pub roc: PathBuf,
    /// Importance table for tree models, coefficient summary for logit.
    pub detail: PathBuf,
}

pub fn cmd_report(cfg: &ExperimentConfig, model: &Path, data: &Path, labels: &Path) -> CliResult<ReportFiles> {
    let m = SavedModel::load(model)?;
    let (x, y) = read_group(data, labels)?;
    let report = evaluate_scores(cfg, &m.predict(&x)?, &y)?;
    let header = cfg.header("report");
    let dir = cfg.out.join(EVAL_DIR);
    let name = stem(model);
    let files = ReportFiles {
        report: dir.join(format!("{name}.report.json")),
        roc: dir.join(format!("{name}.roc.csv")),
        detail: dir.join(match m.kind() {
            ModelKind::Logit => format!("{name}.summary.tsv"),
            _ => format!("{name}.importance.csv"),
        }),
    };
    write_json(cfg, "report", &files.report, &report)?;
    write_text(&files.roc, &header, &report.roc_csv())?;
    match &m {
        SavedModel::Logit(g) => g.write_summary(&files.detail, &header).stage("write summary")?,
        SavedModel::Rf(f) | SavedModel::Brf(f) => write_importance(&files.detail, &header, &forest_importance(f))?,
        SavedModel::Boost(b) => write_importance(&files.detail, &header, &b.importance())?,
    }
    Ok(files)
}

fn write_importance(path: &Path, header: &[String], imp: &[(String, f64)]) -> CliResult<()> {
    let total: f64 = imp.iter().map(|(_, v)| v).sum();
    let mut s = String::from("rank,variable,importance,share\n");
    for (i, (n, v)) in imp.iter().enumerate() {
        let share = if total > 0.0 { v / total } else { 0.0 };
        let _ = writeln!(s, "{},{n},{v},{share:.6}", i + 1);
    }
    let _ = writeln!(s, ",total,{total},1");
    write_text(path, header, &s)
}
