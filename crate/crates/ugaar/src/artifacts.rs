//! Checkpoints, training history and retrieval report files.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use ugaar_core::discriminator::DiscriminatorParams;
use ugaar_core::eval::{RetrievalReport, DIRECTIONS};
use ugaar_core::generator::GeneratorParams;
use ugaar_core::pipeline::ExperimentConfig;
use ugaar_core::trainer::EpochRecord;

use crate::error::{AppError, AppResult};
use crate::files::{read_text, to_json_string, write_text};

/// Trials averaged into the RANDOM row.
pub const RANDOM_TRIALS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub generator: GeneratorParams,
    /// Absent for the triplet baseline.
    pub discriminator: Option<DiscriminatorParams>,
    pub config: ExperimentConfig,
    pub epoch: usize,
}

impl Checkpoint {
    pub fn load(path: &Path) -> AppResult<Self> {
        let text = read_text(path)?;
        serde_json::from_str(&text).map_err(|e| AppError::Data(format!("corrupt checkpoint {}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> AppResult<()> {
        write_text(path, &to_json_string(self)?)
    }
}

pub fn format_history(records: &[EpochRecord]) -> AppResult<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).map_err(|e| AppError::Internal(e.to_string()))?);
        out.push('\n');
    }
    Ok(out)
}

pub fn write_history(path: &Path, records: &[EpochRecord]) -> AppResult<()> {
    write_text(path, &format_history(records)?)
}

pub fn parse_history(text: &str, origin: &Path) -> AppResult<Vec<EpochRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| AppError::Data(format!("{}:{}: {e}", origin.display(), i + 1)))
        })
        .collect()
}

pub fn read_history(path: &Path) -> AppResult<Vec<EpochRecord>> {
    parse_history(&read_text(path)?, path)
}

/// `report.json`: the evaluated model next to the uniform-random reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub model: RetrievalReport,
    pub random: RetrievalReport,
}

/// One block per direction in the fixed table order, each with the
/// RANDOM row followed by the model row.
pub fn render_markdown(report: &ReportFile) -> AppResult<String> {
    let mut out = String::new();
    let _ = writeln!(out, "# Retrieval results ({} test items)\n", report.model.n);
    for d in DIRECTIONS {
        let label = d.label();
        let missing = || AppError::Internal(format!("report lacks direction {label}"));
        let rows = [
            (report.random.model.as_str(), report.random.get(d).ok_or_else(missing)?),
            (report.model.model.as_str(), report.model.get(d).ok_or_else(missing)?),
        ];
        let _ = writeln!(out, "## {label}\n");
        let _ = writeln!(out, "| Model | R@1 | R@5 | R@10 | MedR | MeanR |");
        let _ = writeln!(out, "|---|---:|---:|---:|---:|---:|");
        for (name, m) in rows {
            let _ = writeln!(
                out,
                "| {name} | {:.2} | {:.2} | {:.2} | {:.1} | {:.1} |",
                m.recall_at_1, m.recall_at_5, m.recall_at_10, m.median_rank, m.mean_rank
            );
        }
        out.push('\n');
    }
    Ok(out)
}

/// Writes `report.json` and `report.md` into `dir`.
pub fn write_report(dir: &Path, report: &ReportFile) -> AppResult<()> {
    write_text(&dir.join("report.json"), &to_json_string(report)?)?;
    write_text(&dir.join("report.md"), &render_markdown(report)?)
}
