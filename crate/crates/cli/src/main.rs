use std::path::{Path, PathBuf};
use std::process::ExitCode;

use acctrisk_cli::commands::{self, feature_paths};
use acctrisk_cli::config::ModelKind;
use acctrisk_cli::{CliError, CliResult, ExperimentConfig};
use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "acctrisk", version, about = "Credit-default experiments on monthly account panels")]
struct Cli {
    /// TOML experiment config; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic panel into OUT/panel.
    Synth,
    /// Build the configured feature groups into OUT/features.
    Featurize {
        /// Panel directory; a fresh synthetic panel is used when omitted.
        #[arg(long)]
        panel: Option<PathBuf>,
    },
    /// Fit one model on a featurized group.
    Train {
        #[arg(long)]
        group: String,
        #[arg(long)]
        model: ModelKind,
    },
    /// Score a saved model on a feature matrix.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        /// Defaults to the test matrix of the model's group.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// Compare boosting, stepwise and lasso variable lists.
    Select {
        #[arg(long)]
        panel: Option<PathBuf>,
    },
    /// Test AUC of every configured model on every configured group.
    Compare {
        #[arg(long)]
        panel: Option<PathBuf>,
    },
    /// Evaluation plus importance or coefficient summary for a saved model.
    Report {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        labels: Option<PathBuf>,
    },
}

fn default_inputs(
    cfg: &ExperimentConfig,
    model: &Path,
    data: Option<PathBuf>,
    labels: Option<PathBuf>,
) -> CliResult<(PathBuf, PathBuf)> {
    if let (Some(d), Some(l)) = (&data, &labels) {
        return Ok((d.clone(), l.clone()));
    }
    let group = model
        .file_name()
        .and_then(|n| n.to_str())
        .and_then(|n| n.split('.').next())
        .ok_or_else(|| CliError::config("cannot infer the group from the model path; pass --data and --labels"))?;
    let (d, _, l) = feature_paths(&cfg.out, group, "test");
    Ok((data.unwrap_or(d), labels.unwrap_or(l)))
}

fn run(cli: Cli) -> CliResult<()> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = cli.out {
        cfg.out = o;
    }
    cfg.validate()?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| CliError::config(format!("thread pool: {e}")))?;

    match cli.command {
        Command::Synth => {
            let dir = commands::cmd_synth(&cfg)?;
            println!("panel written to {}", dir.display());
        }
        Command::Featurize { panel } => {
            for g in commands::cmd_featurize(&cfg, panel.as_deref())? {
                println!("featurized {g}");
            }
        }
        Command::Train { group, model } => {
            let path = commands::cmd_train(&cfg, &group, model)?;
            println!("model written to {}", path.display());
        }
        Command::Evaluate { model, data, labels } => {
            let (d, l) = default_inputs(&cfg, &model, data, labels)?;
            let r = commands::cmd_evaluate(&cfg, &model, &d, &l)?;
            println!("auc {:.4} on {} rows ({} defaults)", r.auc, r.n, r.n_positive);
        }
        Command::Select { panel } => {
            let t = commands::cmd_select(&cfg, panel.as_deref())?;
            println!("boost    {}", t.boost.join(" "));
            println!("stepwise {}", t.stepwise.join(" "));
            println!("lasso    {}{}", t.lasso.join(" "), if t.lasso_exact { "" } else { " (no exact-k penalty)" });
            for (a, b, n) in &t.overlaps {
                println!("{a} & {b}: {n}/{}", t.k);
            }
        }
        Command::Compare { panel } => {
            let grid = commands::cmd_compare(&cfg, panel.as_deref())?;
            print!("{:<14}", "group");
            for m in &grid.models {
                print!("{:>8}", m.name());
            }
            println!();
            for g in &grid.groups {
                print!("{g:<14}");
                for &m in &grid.models {
                    print!("{:>8.4}", grid.test_auc(g, m).unwrap_or(f64::NAN));
                }
                println!();
            }
        }
        Command::Report { model, data, labels } => {
            let (d, l) = default_inputs(&cfg, &model, data, labels)?;
            let f = commands::cmd_report(&cfg, &model, &d, &l)?;
            println!("{}\n{}\n{}", f.report.display(), f.roc.display(), f.detail.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
