//! The JSON run configuration shared by every subcommand.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use ugaar_core::data::SynthConfig;
use ugaar_core::pipeline::ExperimentConfig;
use ugaar_core::trainer::Variant;

use crate::error::{AppError, AppResult};
use crate::files::read_text;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub synth: SynthConfig,
    pub experiment: ExperimentConfig,
    /// Dataset manifest; when absent, `train` synthesizes data from `synth`.
    pub manifest: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Checkpoint read by `eval`.
    pub checkpoint: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            synth: SynthConfig::default(),
            experiment: ExperimentConfig::default(),
            manifest: None,
            out_dir: PathBuf::from("out"),
            checkpoint: None,
        }
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub variant: Option<Variant>,
    pub manifest: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
}

impl RunConfig {
    pub fn parse(text: &str) -> AppResult<Self> {
        serde_json::from_str(text).map_err(|e| AppError::Input(format!("invalid config: {e}")))
    }

    /// Reads `path`, or returns the defaults when no path is given.
    pub fn load(path: Option<&Path>) -> AppResult<Self> {
        match path {
            Some(p) => Self::parse(&read_text(p)?).map_err(|e| AppError::Input(format!("{}: {e}", p.display()))),
            None => Ok(Self::default()),
        }
    }

    /// `seed` sets both the synthesis and the training seed.
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(d) = &o.out_dir {
            self.out_dir = d.clone();
        }
        if let Some(s) = o.seed {
            self.synth.seed = s;
            self.experiment.train.seed = s;
        }
        if let Some(v) = o.variant {
            self.experiment.train.variant = v;
        }
        if let Some(m) = &o.manifest {
            self.manifest = Some(m.clone());
        }
        if let Some(c) = &o.checkpoint {
            self.checkpoint = Some(c.clone());
        }
    }

    pub fn validate(&self) -> AppResult<()> {
        self.synth.validate()?;
        self.experiment.train.validate()?;
        Ok(())
    }
}
