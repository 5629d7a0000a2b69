//! Tabular output with a replay header.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use cqpolar::{Error, Result};
use serde_json::{Map, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Jsonl,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Text(String),
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format_float(*v),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(v) => Value::from(*v),
            Cell::Float(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::Text(s) => Value::from(s.as_str()),
        }
    }
}

pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Table { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Replay information written ahead of every table.
pub struct Header {
    pub version: &'static str,
    pub command: &'static str,
    pub config_hash: String,
    pub seed: u64,
}

fn io_err(e: csv::Error) -> Error {
    Error::Io(io::Error::other(e))
}

pub fn write_table(out: &mut dyn Write, header: &Header, table: &Table, format: Format) -> Result<()> {
    match format {
        Format::Csv => {
            writeln!(out, "# tool: cqpolar {}", header.version)?;
            writeln!(out, "# command: {}", header.command)?;
            writeln!(out, "# config: sha256:{}", header.config_hash)?;
            writeln!(out, "# seed: {}", header.seed)?;
            let mut w = csv::Writer::from_writer(&mut *out);
            w.write_record(&table.columns).map_err(io_err)?;
            for row in &table.rows {
                w.write_record(row.iter().map(Cell::csv)).map_err(io_err)?;
            }
            w.flush()?;
        }
        Format::Jsonl => {
            let head = serde_json::json!({
                "tool": format!("cqpolar {}", header.version),
                "command": header.command,
                "config": format!("sha256:{}", header.config_hash),
                "seed": header.seed,
            });
            writeln!(out, "{head}")?;
            for row in &table.rows {
                let obj: Map<String, Value> = table.columns.iter().map(|c| c.to_string()).zip(row.iter().map(Cell::json)).collect();
                writeln!(out, "{}", Value::Object(obj))?;
            }
        }
    }
    Ok(())
}

/// Opens `path` for writing, or stdout when absent.
pub fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// `region.csv` → `region.frontier.csv`.
pub fn sibling(path: &Path, tag: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.{tag}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{tag}"),
    };
    path.with_file_name(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0] {
            let s = format_float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            assert_eq!(s.split('e').next().unwrap().replace(['-', '.'], "").len(), 17);
        }
    }

    #[test]
    fn sibling_paths() {
        assert_eq!(sibling(Path::new("/tmp/r.csv"), "frontier"), PathBuf::from("/tmp/r.frontier.csv"));
        assert_eq!(sibling(Path::new("out"), "frontier"), PathBuf::from("out.frontier"));
    }

    #[test]
    fn csv_and_jsonl_layouts() {
        let header = Header { version: "0", command: "t", config_hash: "ab".into(), seed: 3 };
        let mut t = Table::new(vec!["i", "x", "s"]);
        t.push(vec![1usize.into(), 0.5.into(), "a b".into()]);
        let mut buf = Vec::new();
        write_table(&mut buf, &header, &t, Format::Csv).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.ends_with("i,x,s\n1,5.0000000000000000e-1,a b\n"));
        let mut buf = Vec::new();
        write_table(&mut buf, &header, &t, Format::Jsonl).unwrap();
        let lines: Vec<Value> = String::from_utf8(buf).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines[0]["seed"], 3);
        assert_eq!(lines[1]["x"], 0.5);
    }
}
