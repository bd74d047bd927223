//! Line-oriented `key = value` config files.
//!
//! The format is deliberately minimal: one assignment per line, `#` starts
//! a comment, blank lines are ignored, keys are snake_case, and list values
//! are comma-separated. Errors carry 1-based line numbers. Typed accessors
//! live here so every config consumer reports violations the same way.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// A parsed config file: key -> (line, raw value).
#[derive(Debug)]
pub(crate) struct KvFile {
    entries: BTreeMap<String, (usize, String)>,
}

impl KvFile {
    /// Parses `text`, rejecting unknown and duplicate keys.
    pub(crate) fn parse(text: &str, allowed: &[&str]) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(Error::Parse {
                    line,
                    message: format!("expected `key = value`, got {content:?}"),
                });
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if !allowed.contains(&key.as_str()) {
                return Err(Error::Parse { line, message: format!("unknown key {key:?}") });
            }
            if entries.insert(key.clone(), (line, value)).is_some() {
                return Err(Error::Parse { line, message: format!("duplicate key {key:?}") });
            }
        }
        Ok(Self { entries })
    }

    pub(crate) fn require(&self, key: &str) -> Result<(usize, &str)> {
        self.optional(key)
            .ok_or_else(|| Error::Config(format!("missing required key {key:?}")))
    }

    pub(crate) fn optional(&self, key: &str) -> Option<(usize, &str)> {
        self.entries.get(key).map(|(line, value)| (*line, value.as_str()))
    }
}

/// One scalar of type `T`, with the line number in the error.
pub(crate) fn scalar<T: std::str::FromStr>(line: usize, key: &str, raw: &str) -> Result<T> {
    raw.parse::<T>().map_err(|_| Error::Parse {
        line,
        message: format!("cannot parse {raw:?} as a value for {key:?}"),
    })
}

/// Comma-separated list of scalars, rejecting empty lists.
pub(crate) fn list<T: std::str::FromStr>(line: usize, key: &str, raw: &str) -> Result<Vec<T>> {
    let values: Result<Vec<T>> = raw.split(',').map(|tok| scalar(line, key, tok.trim())).collect();
    let values = values?;
    if values.is_empty() {
        return Err(Error::Parse { line, message: format!("list for {key:?} is empty") });
    }
    Ok(values)
}
