//! Tabular output: CSV with a `#`-prefixed provenance header, or a JSON
//! mirror of the same content.

use std::io::{self, Write};

use serde::Serialize;

/// Version string stamped into every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub version: String,
    pub command: String,
    pub seeds: Vec<u64>,
    pub config_hash: String,
}

impl Provenance {
    pub fn new(command: impl Into<String>, seeds: Vec<u64>, config_hash: impl Into<String>) -> Self {
        Self {
            version: VERSION.to_string(),
            command: command.into(),
            seeds,
            config_hash: config_hash.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Bool(bool),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// Formats a float with `precision` significant digits in exponent form.
/// Output depends only on the value, never on the locale.
pub fn format_number(v: f64, precision: usize) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{:.*e}", precision.max(1) - 1, v)
}

impl Cell {
    fn render(&self, precision: usize) -> String {
        match self {
            Cell::Num(v) => format_number(*v, precision),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(v) => v.to_string(),
            Cell::Text(s) => {
                if s.contains([',', '"', '\n']) {
                    format!("\"{}\"", s.replace('"', "\"\""))
                } else {
                    s.clone()
                }
            }
        }
    }
}

/// A named table plus free-form `key = value` summary lines.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub summary: Vec<(String, Cell)>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            summary: Vec::new(),
        }
    }

    /// Panics if the row width differs from the column count.
    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width mismatch in table {}", self.name);
        self.rows.push(row);
    }

    pub fn summarize(&mut self, key: impl Into<String>, value: impl Into<Cell>) {
        self.summary.push((key.into(), value.into()));
    }
}

/// Writes the provenance header, the CSV body and trailing summary lines
/// (`key = value`, without a `#`).
pub fn write_csv<W: Write>(out: &mut W, prov: &Provenance, table: &Table, precision: usize) -> io::Result<()> {
    writeln!(out, "# sta {}", prov.version)?;
    writeln!(out, "# command: {}", prov.command)?;
    let seeds: Vec<String> = prov.seeds.iter().map(u64::to_string).collect();
    writeln!(out, "# seeds: {}", if seeds.is_empty() { "none".into() } else { seeds.join(" ") })?;
    writeln!(out, "# config_sha256: {}", prov.config_hash)?;
    writeln!(out, "# table: {}", table.name)?;
    writeln!(out, "{}", table.columns.join(","))?;
    for row in &table.rows {
        let cells: Vec<String> = row.iter().map(|c| c.render(precision)).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    for (k, v) in &table.summary {
        writeln!(out, "{k} = {}", v.render(precision))?;
    }
    Ok(())
}

pub fn csv_string(prov: &Provenance, table: &Table, precision: usize) -> String {
    let mut buf = Vec::new();
    write_csv(&mut buf, prov, table, precision).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("CSV output is UTF-8")
}

/// JSON-ready bundle of provenance and tables.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report<'a> {
    pub provenance: &'a Provenance,
    pub tables: &'a [Table],
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_use_fixed_significant_digits() {
        assert_eq!(format_number(1234.5678, 4), "1.235e3");
        assert_eq!(format_number(-0.000123, 2), "-1.2e-4");
        assert_eq!(format_number(0.0, 3), "0.00e0");
        assert_eq!(format_number(f64::NAN, 3), "nan");
        assert_eq!(format_number(f64::NEG_INFINITY, 3), "-inf");
    }

    #[test]
    fn csv_layout() {
        let prov = Provenance::new("sweep", vec![7, 9], "abc");
        let mut t = Table::new("fringes", &["S", "ok", "note"]);
        t.push(vec![0.5.into(), true.into(), "a,b".into()]);
        t.summarize("k", 174.0);
        let text = csv_string(&prov, &t, 3);
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# sta "));
        assert_eq!(lines[2], "# seeds: 7 9");
        assert_eq!(lines[3], "# config_sha256: abc");
        assert_eq!(lines[5], "S,ok,note");
        assert_eq!(lines[6], "5.00e-1,true,\"a,b\"");
        assert_eq!(lines[7], "k = 1.74e2");
    }

    #[test]
    #[should_panic(expected = "row width mismatch")]
    fn rejects_ragged_rows() {
        let mut t = Table::new("x", &["a", "b"]);
        t.push(vec![1.0.into()]);
    }
}
