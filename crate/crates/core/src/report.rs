//! CSV tables with `# key: value` header comments.

use std::fmt::Write as _;

use crate::scalar::Real;

/// Shortest round-trip decimal form.
pub fn num<T: Real>(x: T) -> String {
    format!("{x:e}")
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            meta: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.meta {
            let _ = writeln!(out, "# {k}: {v}");
        }
        let _ = writeln!(out, "{}", self.columns.join(","));
        for r in &self.rows {
            let _ = writeln!(out, "{}", r.join(","));
        }
        out
    }

    /// Parses text produced by `to_csv`.
    pub fn from_csv(text: &str) -> Option<Self> {
        let mut t = Table::default();
        let mut lines = text.lines();
        for line in lines.by_ref() {
            if let Some(m) = line.strip_prefix("# ") {
                let (k, v) = m.split_once(": ")?;
                t.meta.push((k.to_string(), v.to_string()));
            } else {
                t.columns = line.split(',').map(str::to_string).collect();
                break;
            }
        }
        for line in lines {
            if !line.is_empty() {
                t.rows.push(line.split(',').map(str::to_string).collect());
            }
        }
        Some(t)
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}
