//! Reading a 2×2×2 count table from CSV, JSON or a bundled fixture name.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use ivmeasure::{fixtures, ObservedCounts};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum InputFormat {
    Csv,
    Json,
}

/// Where the counts came from, echoed in reports.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Loaded {
    pub counts: ObservedCounts,
    pub source: String,
}

pub fn load(input: &str, format: Option<InputFormat>) -> Result<Loaded> {
    if let Some(counts) = fixtures::by_name(input) {
        return Ok(Loaded { counts, source: format!("fixture {input}") });
    }
    let path = Path::new(input);
    let text = fs::read_to_string(path).with_context(|| format!("cannot read '{input}'"))?;
    let format = format.unwrap_or_else(|| {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("json") => InputFormat::Json,
            _ => InputFormat::Csv,
        }
    });
    let counts = match format {
        InputFormat::Csv => parse_csv(&text),
        InputFormat::Json => parse_json(&text),
    }
    .with_context(|| format!("in '{input}'"))?;
    Ok(Loaded { counts, source: input.to_string() })
}

/// Header `z,d,y,count`, one row per cell; absent cells are zero and lines
/// starting with `#` are skipped.
pub fn parse_csv(text: &str) -> Result<ObservedCounts> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .context("line 1: cannot read header")?
        .iter()
        .map(|h| h.to_ascii_lowercase())
        .collect();
    if header != ["z", "d", "y", "count"] {
        bail!("line 1: expected header 'z,d,y,count', found '{}'", header.join(","));
    }
    let mut counts = ObservedCounts::default();
    let mut seen = HashSet::new();
    for record in reader.records() {
        let record = record.map_err(|e| match e.position() {
            Some(p) => anyhow!("line {}: {}", p.line(), e),
            None => anyhow!("{e}"),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        let binary = |col: usize| -> Result<usize> {
            match record.get(col) {
                Some("0") => Ok(0),
                Some("1") => Ok(1),
                Some(v) => bail!("line {line}, column {}: expected 0 or 1, found '{v}'", col + 1),
                None => bail!("line {line}, column {}: missing value", col + 1),
            }
        };
        let (z, d, y) = (binary(0)?, binary(1)?, binary(2)?);
        let raw = record.get(3).ok_or_else(|| anyhow!("line {line}, column 4: missing count"))?;
        let count: u64 =
            raw.parse().map_err(|_| anyhow!("line {line}, column 4: expected a non-negative integer, found '{raw}'"))?;
        if !seen.insert((z, d, y)) {
            bail!("line {line}: cell z={z}, d={d}, y={y} appears twice");
        }
        counts.set(z, d, y, count);
    }
    Ok(counts)
}

/// Either a bare count table or any object with a `counts` member holding
/// one, such as an emitted report.
pub fn parse_json(text: &str) -> Result<ObservedCounts> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| anyhow!("line {}, column {}: {}", e.line(), e.column(), e))?;
    let table = match value.get("counts") {
        Some(inner) => inner.clone(),
        None => value,
    };
    serde_json::from_value(table).map_err(|e| anyhow!("not a count table: {e}"))
}

pub fn to_csv(counts: &ObservedCounts) -> String {
    let mut out = String::from("z,d,y,count\n");
    for z in [1, 0] {
        for d in [1, 0] {
            for y in [1, 0] {
                out.push_str(&format!("{z},{d},{y},{}\n", counts.get(z, d, y)));
            }
        }
    }
    out
}
