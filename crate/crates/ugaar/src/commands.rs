//! The four subcommands. Each returns its main artifact so callers and tests
//! can inspect results without re-reading files.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ugaar_core::data::{synth_dataset, TripletDataset};
use ugaar_core::eval::{evaluate_all, random_baseline, RetrievalReport};
use ugaar_core::pipeline::{run_experiment, split_dataset};

use crate::artifacts::{read_history, write_history, write_report, Checkpoint, ReportFile, RANDOM_TRIALS};
use crate::config::RunConfig;
use crate::error::{AppError, AppResult};
use crate::features::{load_dataset, write_dataset};
use crate::files::{write_json, write_text};
use crate::plot::render_svg;

/// Which part of the manifest's data `eval` scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvalSplit {
    /// The test split, re-derived from the checkpoint's split ratios and seed.
    #[default]
    Test,
    /// Every row of the manifest.
    All,
}

fn random_reference(n: usize, seed: u64) -> AppResult<RetrievalReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(random_baseline(n, RANDOM_TRIALS, &mut rng)?)
}

/// Writes the three feature tables, `manifest.json` and `config.json` into
/// the configured output directory; returns the manifest path.
pub fn cmd_synth(cfg: &RunConfig) -> AppResult<PathBuf> {
    cfg.synth.validate()?;
    let data = synth_dataset(&cfg.synth)?;
    let manifest = write_dataset(&data, &cfg.out_dir)?;
    write_json(&cfg.out_dir.join("config.json"), cfg)?;
    Ok(manifest)
}

fn training_data(cfg: &RunConfig) -> AppResult<(TripletDataset, PathBuf)> {
    match &cfg.manifest {
        Some(m) => Ok((load_dataset(m)?, m.clone())),
        None => {
            let data = synth_dataset(&cfg.synth)?;
            let manifest = write_dataset(&data, &cfg.out_dir.join("data"))?;
            Ok((data, manifest))
        }
    }
}

/// Split, fit CCA, build pairs, train, evaluate on the test split.
///
/// Writes `config.json`, `cca.json`, `pairs.json`, `checkpoint.json`,
/// `history.jsonl`, `report.json` and `report.md`. Without a manifest the
/// synthetic dataset is written to `data/` first and the echoed config
/// points at it.
pub fn cmd_train(cfg: &RunConfig) -> AppResult<ReportFile> {
    cfg.validate()?;
    let out = &cfg.out_dir;
    let (data, manifest) = training_data(cfg)?;
    let echoed = RunConfig {
        manifest: Some(manifest),
        checkpoint: Some(out.join("checkpoint.json")),
        ..cfg.clone()
    };
    write_json(&out.join("config.json"), &echoed)?;

    let exp = run_experiment(&cfg.experiment, &data)?;
    write_json(&out.join("cca.json"), &exp.cca)?;
    write_json(&out.join("pairs.json"), &exp.pairs)?;
    Checkpoint {
        generator: exp.model.generator,
        discriminator: exp.model.discriminator,
        config: cfg.experiment.clone(),
        epoch: exp.history.records.len(),
    }
    .save(&out.join("checkpoint.json"))?;
    write_history(&out.join("history.jsonl"), &exp.history.records)?;

    let report = ReportFile {
        random: random_reference(exp.report.n, cfg.experiment.train.seed)?,
        model: exp.report,
    };
    write_report(out, &report)?;
    Ok(report)
}

/// Scores a checkpoint against a dataset and writes `report.json` and
/// `report.md` into the output directory.
pub fn cmd_eval(cfg: &RunConfig, which: EvalSplit) -> AppResult<ReportFile> {
    let ckpt_path = cfg.checkpoint.as_deref().ok_or_else(|| {
        AppError::Input("eval needs a checkpoint (--checkpoint or \"checkpoint\" in the config)".into())
    })?;
    let manifest = cfg
        .manifest
        .as_deref()
        .ok_or_else(|| AppError::Input("eval needs a manifest (--manifest or \"manifest\" in the config)".into()))?;
    let ckpt = Checkpoint::load(ckpt_path)?;
    let data = load_dataset(manifest)?;

    let expected = ckpt.generator.input_dims();
    let found = [data.audio().dim(), data.sheet().dim(), data.lyrics().dim()];
    if expected != found {
        return Err(AppError::Data(format!(
            "checkpoint expects audio/sheet/lyrics dims {expected:?} but the data has {found:?}"
        )));
    }
    let scored = match which {
        EvalSplit::Test => split_dataset(&ckpt.config, &data)?.test,
        EvalSplit::All => data,
    };
    if scored.is_empty() {
        return Err(AppError::Data("no items to evaluate".into()));
    }
    let model = evaluate_all(&ckpt.generator, &scored, ckpt.config.train.variant.tag())?;
    let report = ReportFile {
        random: random_reference(model.n, ckpt.config.train.seed)?,
        model,
    };
    write_report(&cfg.out_dir, &report)?;
    Ok(report)
}

/// Renders `history` into an SVG at `out`.
pub fn cmd_report(history: &Path, out: &Path) -> AppResult<()> {
    let records = read_history(history)?;
    write_text(out, &render_svg(&records)?)
}
