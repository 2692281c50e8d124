//! Flat `key = value` configuration files.
//!
//! One assignment per line; blank lines and lines starting with `#` are
//! skipped. Keys may appear only once.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigEntry {
    pub key: String,
    pub value: String,
    /// 1-based line number in the source text.
    pub line: usize,
}

pub fn parse_config(text: &str) -> Result<Vec<ConfigEntry>> {
    let mut entries: Vec<ConfigEntry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Malformed {
            line: i + 1,
            text: raw.to_string(),
        })?;
        let key = key.trim();
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(Error::Malformed {
                line: i + 1,
                text: raw.to_string(),
            });
        }
        if entries.iter().any(|e| e.key == key) {
            return Err(Error::DuplicateKey {
                key: key.to_string(),
                line: i + 1,
            });
        }
        entries.push(ConfigEntry {
            key: key.to_string(),
            value: value.trim().to_string(),
            line: i + 1,
        });
    }
    Ok(entries)
}

pub fn load_config_file(path: &Path) -> Result<Vec<ConfigEntry>> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    parse_config(&fs::read_to_string(path)?)
}

/// Renders entries in the format read by [`parse_config`].
pub fn render_config<'a>(entries: impl IntoIterator<Item = (&'a str, &'a str)>) -> String {
    entries
        .into_iter()
        .map(|(k, v)| format!("{k}={v}\n"))
        .collect()
}
