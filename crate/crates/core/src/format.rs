//! Versioned JSON interchange helpers.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize)]
struct VersionedRef<'a, T> {
    format_version: u32,
    #[serde(flatten)]
    body: &'a T,
}

#[derive(Deserialize)]
struct Versioned<T> {
    format_version: u32,
    #[serde(flatten)]
    body: T,
}

/// Serializes `value` as pretty JSON with a leading `format_version` field.
pub fn to_versioned_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&VersionedRef {
        format_version: FORMAT_VERSION,
        body: value,
    })?;
    s.push('\n');
    Ok(s)
}

pub fn from_versioned_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let doc: Versioned<T> = serde_json::from_str(text)?;
    if doc.format_version != FORMAT_VERSION {
        return Err(Error::FormatVersion {
            found: doc.format_version,
            expected: FORMAT_VERSION,
        });
    }
    Ok(doc.body)
}

pub fn write_versioned<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = to_versioned_json(value)?;
    write_bytes(path, text.as_bytes())
}

pub fn read_versioned<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_versioned_json(&text)
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes one compact versioned JSON object per line.
pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(&VersionedRef {
            format_version: FORMAT_VERSION,
            body: r,
        })?;
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Versioned<T> = serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
            line: i + 1,
            message: e.to_string(),
        })?;
        if doc.format_version != FORMAT_VERSION {
            return Err(Error::FormatVersion {
                found: doc.format_version,
                expected: FORMAT_VERSION,
            });
        }
        out.push(doc.body);
    }
    Ok(out)
}
