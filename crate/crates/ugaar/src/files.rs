use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{AppError, AppResult};

/// Pretty-printed JSON with a trailing newline.
pub fn to_json_string<T: Serialize>(value: &T) -> AppResult<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| AppError::Internal(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_text(path: &Path, text: &str) -> AppResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| AppError::io("cannot create", dir, e))?;
    }
    fs::write(path, text).map_err(|e| AppError::io("cannot write", path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> AppResult<()> {
    write_text(path, &to_json_string(value)?)
}

pub fn read_text(path: &Path) -> AppResult<String> {
    fs::read_to_string(path).map_err(|e| AppError::io("cannot read", path, e))
}

/// Parse failures are data errors; a missing file is an input error.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> AppResult<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| AppError::Data(format!("{}: {e}", path.display())))
}
