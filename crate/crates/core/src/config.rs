//! Flat `key = value` configuration files.
//!
//! Blank lines and `#` comments are ignored. Every key must be consumed by
//! some reader; [`KeyValues::finish`] rejects the leftovers so typos do not
//! pass silently.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::{Error, Result};

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    origin: String,
    line: usize,
}

#[derive(Debug, Clone, Default)]
pub struct KeyValues {
    entries: BTreeMap<String, Entry>,
}

impl KeyValues {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut kv = Self::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                path: origin.to_string(),
                line: i + 1,
                reason: format!("expected `key = value`, found `{line}`"),
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::Config {
                    path: origin.to_string(),
                    line: i + 1,
                    reason: "empty key".into(),
                });
            }
            if kv.entries.contains_key(key) {
                return Err(Error::Config {
                    path: origin.to_string(),
                    line: i + 1,
                    reason: format!("duplicate key `{key}`"),
                });
            }
            kv.entries.insert(
                key.to_string(),
                Entry {
                    value: value.trim().to_string(),
                    origin: origin.to_string(),
                    line: i + 1,
                },
            );
        }
        Ok(kv)
    }

    /// Sets or overrides a key, as given on the command line.
    pub fn set(&mut self, key: &str, value: &str) {
        self.entries.insert(
            key.to_string(),
            Entry {
                value: value.to_string(),
                origin: "--set".into(),
                line: 0,
            },
        );
    }

    /// Parses a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair.split_once('=').ok_or_else(|| Error::Config {
            path: "--set".into(),
            line: 0,
            reason: format!("expected key=value, found `{pair}`"),
        })?;
        self.set(k.trim(), v.trim());
        Ok(())
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    /// Removes `key` and parses its value.
    pub fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.remove(key) {
            None => Ok(None),
            Some(e) => e.value.parse::<T>().map(Some).map_err(|err| Error::Config {
                path: e.origin,
                line: e.line,
                reason: format!("key `{key}`: cannot parse `{}`: {err}", e.value),
            }),
        }
    }

    pub fn take_string(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key).map(|e| e.value)
    }

    /// Fails on the first key no reader consumed.
    pub fn finish(self) -> Result<()> {
        match self.entries.into_iter().next() {
            None => Ok(()),
            Some((key, e)) => Err(Error::Config {
                path: e.origin,
                line: e.line,
                reason: format!("unknown key `{key}`"),
            }),
        }
    }
}
