//! `key=value` text format shared by configs, manifests and checkpoints.
//!
//! One pair per line, `#` starts a comment, blank lines are ignored. Keys are
//! dotted identifiers and may appear only once.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use crate::error::{config_err, Result};

/// Ordered key/value document.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct KvDoc {
    entries: BTreeMap<String, String>,
    order: Vec<String>,
}

fn valid_key(key: &str) -> bool {
    !key.is_empty()
        && key
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-'))
}

impl KvDoc {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut doc = KvDoc::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| config_err!("line {}: expected key=value, got `{line}`", lineno + 1))?;
            let key = key.trim();
            if !valid_key(key) {
                return Err(config_err!("line {}: invalid key `{key}`", lineno + 1));
            }
            if doc.entries.contains_key(key) {
                return Err(config_err!("line {}: duplicate key `{key}`", lineno + 1));
            }
            doc.insert(key, value.trim());
        }
        Ok(doc)
    }

    /// Parses a single `key=value` override.
    pub fn parse_override(text: &str) -> Result<(String, String)> {
        let (key, value) = text
            .split_once('=')
            .ok_or_else(|| config_err!("override `{text}` is not key=value"))?;
        let key = key.trim();
        if !valid_key(key) {
            return Err(config_err!("invalid override key `{key}`"));
        }
        Ok((key.to_string(), value.trim().to_string()))
    }

    /// Inserts or replaces a value, keeping first-insertion order.
    pub fn insert(&mut self, key: impl Into<String>, value: impl Display) {
        let key = key.into();
        if !self.entries.contains_key(&key) {
            self.order.push(key.clone());
        }
        self.entries.insert(key, value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.order.iter().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.order
            .iter()
            .map(|k| (k.as_str(), self.entries[k].as_str()))
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Parses the value under `key`, if present.
    pub fn parse_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| config_err!("key `{key}`: cannot parse `{raw}`: {e}")),
        }
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: Display,
    {
        self.parse_opt(key)?
            .ok_or_else(|| config_err!("missing key `{key}`"))
    }

    /// Rejects any key not in `known`.
    pub fn reject_unknown<'a>(&self, known: impl IntoIterator<Item = &'a str>) -> Result<()> {
        let known: Vec<&str> = known.into_iter().collect();
        for key in self.keys() {
            if !known.contains(&key) {
                return Err(config_err!("unknown key `{key}`"));
            }
        }
        Ok(())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.iter() {
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
        out
    }
}

/// Parses `AxB` pairs such as `64x64`.
pub fn parse_pair(raw: &str) -> Result<(usize, usize)> {
    let (a, b) = raw
        .split_once('x')
        .ok_or_else(|| config_err!("expected HxW, got `{raw}`"))?;
    let parse = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|e| config_err!("bad dimension `{s}` in `{raw}`: {e}"))
    };
    Ok((parse(a)?, parse(b)?))
}

pub fn format_dims(dims: &[usize]) -> String {
    dims.iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("x")
}

pub fn parse_dims(raw: &str) -> Result<Vec<usize>> {
    raw.split('x')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|e| config_err!("bad dimension `{s}` in `{raw}`: {e}"))
        })
        .collect()
}
