use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ugaar::commands::{cmd_eval, cmd_report, cmd_synth, cmd_train, EvalSplit};
use ugaar::config::{Overrides, RunConfig};
use ugaar::AppResult;
use ugaar_core::trainer::Variant;

#[derive(Parser)]
#[command(
    name = "ugaar",
    version,
    about = "Tri-modal audio / sheet music / lyrics retrieval experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset (three feature tables and a manifest).
    Synth(Common),
    /// Fit ground truth, train one model variant and evaluate it.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        variant: Option<VariantArg>,
        /// Dataset manifest; synthetic data is generated when omitted.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on a dataset.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Score every row instead of the checkpoint's test split.
        #[arg(long)]
        all: bool,
    },
    /// Plot a training history as SVG.
    Report {
        #[arg(long)]
        history: PathBuf,
        /// Output SVG path; defaults to losses.svg next to the history.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Ugaar,
    Baseline,
    BaselineGan,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Ugaar => Variant::Ugaar,
            VariantArg::Baseline => Variant::Baseline,
            VariantArg::BaselineGan => Variant::BaselineGan,
        }
    }
}

fn load(common: &Common, extra: Overrides) -> AppResult<RunConfig> {
    let mut cfg = RunConfig::load(common.config.as_deref())?;
    cfg.apply(&Overrides {
        out_dir: common.out.clone(),
        seed: common.seed,
        ..extra
    });
    Ok(cfg)
}

fn run(cli: Cli) -> AppResult<String> {
    match cli.command {
        Command::Synth(common) => {
            let manifest = cmd_synth(&load(&common, Overrides::default())?)?;
            Ok(format!("wrote {}", manifest.display()))
        }
        Command::Train {
            common,
            variant,
            manifest,
        } => {
            let cfg = load(
                &common,
                Overrides {
                    variant: variant.map(Into::into),
                    manifest,
                    ..Default::default()
                },
            )?;
            let report = cmd_train(&cfg)?;
            Ok(format!(
                "trained {} on {}; mean R@1 {:.2}% on {} test items",
                report.model.model,
                cfg.out_dir.display(),
                report.model.mean_recall_at_1(),
                report.model.n
            ))
        }
        Command::Eval {
            common,
            checkpoint,
            manifest,
            all,
        } => {
            let cfg = load(
                &common,
                Overrides {
                    checkpoint,
                    manifest,
                    ..Default::default()
                },
            )?;
            let which = if all { EvalSplit::All } else { EvalSplit::Test };
            let report = cmd_eval(&cfg, which)?;
            Ok(format!(
                "wrote report for {} items to {}",
                report.model.n,
                cfg.out_dir.display()
            ))
        }
        Command::Report { history, out } => {
            let out = out.unwrap_or_else(|| history.with_file_name("losses.svg"));
            cmd_report(&history, &out)?;
            Ok(format!("wrote {}", out.display()))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
