use std::path::{Path, PathBuf};
use std::process::Command;

use acctrisk::features::{FeatureMatrix, RowId};
use acctrisk_cli::commands::{cmd_compare, cmd_select, feature_paths};
use acctrisk_cli::config::ModelKind;
use acctrisk_cli::{CliError, ExperimentConfig};

const SMALL: &str = r#"
seed = 5
models = ["logit", "brf", "boost"]
[synth]
n_firms = 1200
[forest]
n_trees = 40
[boost]
n_rounds = 150
[compare]
groups = ["def1", "orthogonal", "merged"]
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_acctrisk"))
}

fn small(out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::parse(SMALL).unwrap();
    cfg.out = out.to_path_buf();
    cfg
}

fn files(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(dir).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

#[test]
fn compare_fills_three_by_three_grid() {
    let dir = tempfile::tempdir().unwrap();
    let grid = cmd_compare(&small(dir.path()), None).unwrap();
    assert_eq!(grid.groups.len(), 3);
    assert_eq!(grid.models, vec![ModelKind::Logit, ModelKind::Brf, ModelKind::Boost]);
    assert_eq!(grid.cells.len(), 9);
    for c in &grid.cells {
        assert!(c.test_auc > 0.0 && c.test_auc < 1.0, "{c:?}");
        assert!(c.train_auc > 0.0 && c.train_auc <= 1.0);
    }
    let text = std::fs::read_to_string(dir.path().join("compare_test_auc.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# acctrisk compare"));
    assert!(lines[1].starts_with("# config_hash="));
    assert_eq!(lines[2], "# seed=5");
    assert_eq!(lines[3], "# split=random test_fraction=0.3");
    assert_eq!(lines[4], "group,logit,brf,boost");
    assert_eq!(lines.len(), 8);
    assert!(grid.cells.iter().all(|c| c.oob_auc.is_some() == (c.model == ModelKind::Brf)));
    assert!(lines[5..].iter().all(|l| l.split(',').count() == 4));
}

#[test]
fn selection_k_above_column_count_is_rejected() {
    let err = ExperimentConfig::parse("[selection]\nk = 31\n").unwrap_err();
    assert!(matches!(err, CliError::Config(_)));
    assert_eq!(err.exit_code(), 1);

    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("k.toml");
    std::fs::write(&cfg_path, "[selection]\nk = 31\n").unwrap();
    let st = bin()
        .args(["--config", cfg_path.to_str().unwrap(), "--out"])
        .arg(dir.path())
        .arg("select")
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(1));
}

#[test]
fn selection_lists_have_k_entries() {
    let dir = tempfile::tempdir().unwrap();
    let t = cmd_select(&small(dir.path()), None).unwrap();
    assert_eq!(t.boost.len(), 8);
    assert!(t.stepwise.len() <= 8);
    assert!(t.lasso.len() <= 8);
    assert_eq!(t.overlaps.len(), 3);
    assert!(t.overlaps.iter().all(|o| o.2 <= 8));
}

#[test]
fn rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    for out in ["a", "b"] {
        let st = bin()
            .args(["--config", cfg.to_str().unwrap(), "--threads", "1", "--out"])
            .arg(dir.path().join(out))
            .arg("compare")
            .status()
            .unwrap();
        assert!(st.success());
    }
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let fa = files(&a);
    assert_eq!(fa, files(&b));
    assert!(!fa.is_empty());
    for f in fa {
        assert_eq!(std::fs::read(a.join(&f)).unwrap(), std::fs::read(b.join(&f)).unwrap(), "{f:?}");
    }
}

#[test]
fn pipeline_commands_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let out = dir.path().join("o");
    let run = |args: &[&str]| {
        bin()
            .args(["--config", cfg.to_str().unwrap(), "--out"])
            .arg(&out)
            .args(args)
            .status()
            .unwrap()
            .code()
    };
    assert_eq!(run(&["synth"]), Some(0));
    let panel = out.join("panel");
    assert_eq!(run(&["featurize", "--panel", panel.to_str().unwrap()]), Some(0));
    assert_eq!(run(&["train", "--group", "def1", "--model", "boost"]), Some(0));
    let model = out.join("models/def1.boost.json");
    assert_eq!(run(&["report", "--model", model.to_str().unwrap()]), Some(0));
    let json = std::fs::read_to_string(&model).unwrap();
    assert!(json.contains("\"config_hash\""));
    assert!(json.contains("\"seed\": 5"));
    let imp = std::fs::read_to_string(out.join("eval/def1.boost.importance.csv")).unwrap();
    assert!(imp.starts_with("# acctrisk report\n"));
    assert_eq!(run(&["train", "--group", "nosuch", "--model", "logit"]), Some(1));
}

#[test]
fn numerical_failure_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let n = 40;
    let rows: Vec<RowId> = (0..n)
        .map(|i| RowId {
            account_id: format!("A{i:02}"),
            snapshot_month: 12,
        })
        .collect();
    let y: Vec<bool> = (0..n).map(|i| i % 2 == 0).collect();
    let sep: Vec<f64> = y.iter().map(|&b| if b { 1.0 } else { -1.0 }).collect();
    let x = FeatureMatrix::from_named_columns(&["sep"], vec![sep]).unwrap();
    let x = FeatureMatrix::from_columns(rows.clone(), x.columns().to_vec(), vec![x.column(0).to_vec()]).unwrap();
    let (data, _, labels) = feature_paths(out, "sep", "train");
    std::fs::create_dir_all(data.parent().unwrap()).unwrap();
    x.write_csv(&data, &[]).unwrap();
    let mut lab = String::from("account_id,snapshot_month,default\n");
    for (r, &yi) in rows.iter().zip(&y) {
        lab.push_str(&format!("{},{},{}\n", r.account_id, r.snapshot_month, yi as u8));
    }
    std::fs::write(&labels, lab).unwrap();
    let st = bin()
        .arg("--out")
        .arg(out)
        .args(["train", "--group", "sep", "--model", "logit"])
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(2), "{}", String::from_utf8_lossy(&st.stderr));
    let st = bin()
        .arg("--out")
        .arg(out)
        .args(["train", "--group", "sep", "--model", "boost"])
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));
}

#[test]
fn unknown_config_keys_are_rejected() {
    assert!(ExperimentConfig::parse("sede = 3\n").is_err());
    assert!(ExperimentConfig::parse("[boost]\neta = 0.0\n").is_err());
    assert!(ExperimentConfig::parse("[split]\nkind = \"temporal\"\n").is_err());
    let c = ExperimentConfig::parse("seed = 9\n").unwrap();
    assert_eq!(c.boost_params().seed, 12);
    assert_eq!(c.split_seed(), 10);
    let mut d = c.clone();
    d.out = PathBuf::from("elsewhere");
    assert_eq!(c.hash(), d.hash());
    d.seed = 10;
    assert_ne!(c.hash(), d.hash());
}
