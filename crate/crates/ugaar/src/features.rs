//! Feature-table text files and the dataset manifest.
//!
//! A feature table is UTF-8 text: the first line is `<n> <d>`, followed by
//! `n` lines of `<id> <v1> ... <vd>` separated by spaces.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use ugaar_core::data::{FeatureTable, Modality, TripletDataset};
use ugaar_core::numkit::DenseMatrix;

use crate::error::{AppError, AppResult, FormatError};

/// Upper bound on `n * d` for a single table.
pub const MAX_TABLE_VALUES: usize = 10_000_000;

pub fn load_feature_table(path: &Path, modality: Modality) -> Result<FeatureTable, FormatError> {
    let text = fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_feature_table(&text, path, modality)
}

pub fn parse_feature_table(text: &str, path: &Path, modality: Modality) -> Result<FeatureTable, FormatError> {
    let p = || path.to_path_buf();
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(str::parse)
        .collect::<Result<_, _>>()
        .map_err(|_| FormatError::Header {
            path: p(),
            header: header.to_string(),
        })?;
    let [n, d] = dims[..] else {
        return Err(FormatError::Header {
            path: p(),
            header: header.to_string(),
        });
    };
    if n.checked_mul(d).is_none_or(|v| v > MAX_TABLE_VALUES) {
        return Err(FormatError::Oversize {
            path: p(),
            n,
            d,
            limit: MAX_TABLE_VALUES,
        });
    }

    let mut ids = Vec::with_capacity(n);
    let mut seen = HashSet::with_capacity(n);
    let mut values = Vec::with_capacity(n * d);
    for (offset, line) in lines.enumerate() {
        let line_no = offset + 2;
        if line.trim().is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let id = tokens.next().expect("non-empty line has a token");
        let row: Vec<&str> = tokens.collect();
        if row.len() != d {
            return Err(FormatError::RowLength {
                path: p(),
                line: line_no,
                expected: d,
                found: row.len(),
            });
        }
        for token in row {
            let v: f64 = token.parse().map_err(|_| FormatError::Number {
                path: p(),
                line: line_no,
                token: token.to_string(),
            })?;
            if !v.is_finite() {
                return Err(FormatError::NonFinite {
                    path: p(),
                    line: line_no,
                    token: token.to_string(),
                });
            }
            values.push(v);
        }
        if !seen.insert(id.to_string()) {
            return Err(FormatError::DuplicateId {
                path: p(),
                line: line_no,
                id: id.to_string(),
            });
        }
        ids.push(id.to_string());
    }
    if ids.len() != n {
        return Err(FormatError::RowCount {
            path: p(),
            expected: n,
            found: ids.len(),
        });
    }
    let matrix = DenseMatrix::new(n, d, values).expect("row lengths and finiteness already checked");
    Ok(FeatureTable::new(modality, ids, matrix).expect("ids already checked unique"))
}

/// Values are written in shortest round-trip form, so loading gives back
/// the identical table.
pub fn format_feature_table(table: &FeatureTable) -> String {
    let mut out = String::with_capacity(table.len() * (table.dim() * 12 + 16));
    let _ = writeln!(out, "{} {}", table.len(), table.dim());
    for (id, row) in table.ids().iter().zip(table.vectors().iter_rows()) {
        out.push_str(id);
        for v in row {
            let _ = write!(out, " {v:e}");
        }
        out.push('\n');
    }
    out
}

pub fn write_feature_table(table: &FeatureTable, path: &Path) -> AppResult<()> {
    fs::write(path, format_feature_table(table)).map_err(|e| AppError::io("cannot write", path, e))
}

/// Paths to the three feature tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub audio: PathBuf,
    pub sheet: PathBuf,
    pub lyrics: PathBuf,
}

impl Manifest {
    pub fn path(&self, modality: Modality) -> &Path {
        match modality {
            Modality::Audio => &self.audio,
            Modality::Sheet => &self.sheet,
            Modality::Lyrics => &self.lyrics,
        }
    }
}

pub fn read_manifest(path: &Path) -> AppResult<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| AppError::io("cannot read manifest", path, e))?;
    serde_json::from_str(&text).map_err(|e| AppError::Input(format!("{}: {e}", path.display())))
}

/// Loads the three tables named by a manifest. Relative paths resolve
/// against the manifest's directory.
pub fn load_dataset(manifest_path: &Path) -> AppResult<TripletDataset> {
    let manifest = read_manifest(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut tables = Vec::with_capacity(3);
    for m in Modality::ALL {
        let p = manifest.path(m);
        let p = if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        tables.push(load_feature_table(&p, m)?);
    }
    let lyrics = tables.pop().unwrap();
    let sheet = tables.pop().unwrap();
    let audio = tables.pop().unwrap();
    Ok(TripletDataset::new(audio, sheet, lyrics)?)
}

/// Writes `audio.txt`, `sheet.txt`, `lyrics.txt` and `manifest.json`
/// into `dir`; returns the manifest path.
pub fn write_dataset(data: &TripletDataset, dir: &Path) -> AppResult<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| AppError::io("cannot create", dir, e))?;
    for m in Modality::ALL {
        write_feature_table(data.table(m), &dir.join(format!("{}.txt", m.name())))?;
    }
    let manifest = Manifest {
        audio: "audio.txt".into(),
        sheet: "sheet.txt".into(),
        lyrics: "lyrics.txt".into(),
    };
    let path = dir.join("manifest.json");
    crate::files::write_json(&path, &manifest)?;
    Ok(path)
}
