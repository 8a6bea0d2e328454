//! Dataset CSV: header `id,proxy_score,oracle_label`, one record per line.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use approxsel_core::{Dataset, Record};
use csv::{ReaderBuilder, Terminator, WriterBuilder};

use crate::error::{CliError, Result};

pub const HEADER: [&str; 3] = ["id", "proxy_score", "oracle_label"];

fn parse_row(fields: &csv::StringRecord) -> std::result::Result<Record, String> {
    let id: u64 = fields[0]
        .parse()
        .map_err(|_| format!("id {:?} is not a non-negative integer", &fields[0]))?;
    let proxy: f64 = fields[1]
        .parse()
        .map_err(|_| format!("proxy_score {:?} is not a number", &fields[1]))?;
    if !(0.0..=1.0).contains(&proxy) {
        return Err(format!("proxy_score {:?} outside [0, 1]", &fields[1]));
    }
    let label = match &fields[2] {
        "0" => false,
        "1" => true,
        other => return Err(format!("oracle_label {other:?} must be 0 or 1")),
    };
    Record::labeled(id, proxy, label).map_err(|e| e.to_string())
}

/// Parses a whole dataset; any malformed row rejects the file.
/// `path` only labels error messages.
pub fn parse_dataset(input: impl Read, path: &Path) -> Result<Dataset> {
    let parse_err = |line: u64, message: String| CliError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = reader.headers().map_err(|e| parse_err(1, e.to_string()))?;
    if header.iter().ne(HEADER) {
        return Err(parse_err(
            1,
            format!("header must be exactly {}", HEADER.join(",")),
        ));
    }

    let mut records = Vec::new();
    let mut seen: HashMap<u64, u64> = HashMap::new();
    for row in reader.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let record = parse_row(&row).map_err(|m| parse_err(line, m))?;
        if let Some(first) = seen.insert(record.id(), line) {
            return Err(parse_err(
                line,
                format!("duplicate id {} (first on line {first})", record.id()),
            ));
        }
        records.push(record);
    }
    if records.is_empty() {
        return Err(parse_err(1, "no records".into()));
    }
    Ok(Dataset::new(records)?)
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    parse_dataset(BufReader::new(file), path)
}

/// Writes records in dataset order. Scores use the shortest representation
/// that parses back to the same value. Unlabeled records are rejected.
pub fn write_dataset(output: impl Write, dataset: &Dataset) -> std::io::Result<()> {
    let mut w = WriterBuilder::new()
        .terminator(Terminator::Any(b'\n'))
        .from_writer(output);
    w.write_record(HEADER)?;
    for r in dataset.records() {
        let label = match r.label() {
            Some(true) => "1",
            Some(false) => "0",
            None => {
                return Err(std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("record {} has no oracle label", r.id()),
                ))
            }
        };
        w.write_record([r.id().to_string(), r.proxy().to_string(), label.to_string()])?;
    }
    w.flush()
}

pub fn save_dataset(path: &Path, dataset: &Dataset) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    write_dataset(BufWriter::new(file), dataset).map_err(|e| CliError::io(path, e))
}
