//! Line-oriented `key = value` text with `[section]` headers.
//!
//! Keys before the first header live in the root section `""`. `#` starts a
//! comment anywhere on a line. Duplicate keys are rejected.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvDoc {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl KvDoc {
    pub fn parse(text: &str) -> Result<Self> {
        let mut doc = KvDoc::default();
        let mut current = String::new();
        doc.sections.entry(current.clone()).or_default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| {
                        Error::Config(format!("line {}: unterminated section header", lineno + 1))
                    })?
                    .trim();
                current = name.to_string();
                doc.sections.entry(current.clone()).or_default();
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
            }
            let sec = doc.sections.get_mut(&current).expect("section exists");
            if sec.insert(k.to_string(), v.to_string()).is_some() {
                return Err(Error::Config(format!(
                    "line {}: duplicate key {k}",
                    lineno + 1
                )));
            }
        }
        Ok(doc)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section)?.get(key).map(String::as_str)
    }

    pub fn parse_or<V: FromStr>(&self, section: &str, key: &str, default: V) -> Result<V> {
        match self.get(section, key) {
            None => Ok(default),
            Some(s) => s
                .parse()
                .map_err(|_| Error::Config(format!("[{section}] {key}: cannot parse {s:?}"))),
        }
    }

    pub fn section(&self, name: &str) -> Option<&BTreeMap<String, String>> {
        self.sections.get(name)
    }

    pub fn set(&mut self, section: &str, key: &str, value: impl Into<String>) {
        self.sections
            .entry(section.to_string())
            .or_default()
            .insert(key.to_string(), value.into());
    }

    /// Canonical rendering: sections and keys sorted, root section first.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for (name, sec) in &self.sections {
            if sec.is_empty() {
                continue;
            }
            if !name.is_empty() {
                let _ = writeln!(out, "[{name}]");
            }
            for (k, v) in sec {
                let _ = writeln!(out, "{k} = {v}");
            }
        }
        out
    }
}
