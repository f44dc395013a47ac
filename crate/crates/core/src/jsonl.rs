//! JSON-Lines readers and writers for the stream formats.
//!
//! One record per line; blank lines are skipped. Floats use serde_json's
//! shortest round-trip encoding so output is stable across platforms.

use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum JsonlError {
    #[error("line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Reads every record; the error names the 1-based line of the first bad
/// record.
pub fn read_records<T: DeserializeOwned>(reader: impl BufRead) -> Result<Vec<T>, JsonlError> {
    let mut out = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|source| JsonlError::Parse { line: k + 1, source })?;
        out.push(record);
    }
    Ok(out)
}

pub fn write_records<'a, T: Serialize + 'a>(
    mut writer: impl Write,
    records: impl IntoIterator<Item = &'a T>,
) -> Result<(), JsonlError> {
    for r in records {
        serde_json::to_writer(&mut writer, r).map_err(std::io::Error::from)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn to_string<'a, T: Serialize + 'a>(records: impl IntoIterator<Item = &'a T>) -> String {
    let mut buf = Vec::new();
    write_records(&mut buf, records).expect("in-memory write");
    String::from_utf8(buf).expect("json is utf-8")
}

pub fn from_str<T: DeserializeOwned>(text: &str) -> Result<Vec<T>, JsonlError> {
    read_records(text.as_bytes())
}
