use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use fockspec::{Error, Result, REPORT_FORMAT};
use serde::Serialize;

use crate::config::Format;

/// A flat table plus `key=value` metadata written as comment lines.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self { columns: columns.to_vec(), ..Self::default() }
    }

    pub fn meta(&mut self, key: &str, value: impl Into<String>) -> &mut Self {
        self.meta.push((key.to_string(), value.into()));
        self
    }

    pub fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
    }

    pub fn render(&self, command: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# {REPORT_FORMAT}");
        let _ = writeln!(s, "# command={command}");
        for (k, v) in &self.meta {
            let _ = writeln!(s, "# {k}={}", v.replace('\n', " "));
        }
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.iter().map(|c| quote(c)).collect::<Vec<_>>().join(","));
            s.push('\n');
        }
        s
    }
}

fn quote(cell: &str) -> String {
    if cell.contains([',', '"', '\n']) {
        format!("\"{}\"", cell.replace('"', "\"\""))
    } else {
        cell.to_string()
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub struct Rendered {
    pub json: serde_json::Value,
    pub table: Table,
}

impl Rendered {
    pub fn new<T: Serialize>(report: &T, table: Table) -> Result<Self> {
        let json = serde_json::to_value(report).map_err(|e| Error::Config(format!("serialisation failed: {e}")))?;
        Ok(Self { json, table })
    }

    pub fn text(&self, command: &str, format: Format) -> Result<String> {
        match format {
            Format::Csv => Ok(self.table.render(command)),
            Format::Json => serde_json::to_string_pretty(&self.json)
                .map(|mut s| {
                    s.push('\n');
                    s
                })
                .map_err(|e| Error::Config(format!("serialisation failed: {e}"))),
        }
    }
}

pub fn emit(text: &str, out: Option<&Path>) -> std::io::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()
        }
    }
}
