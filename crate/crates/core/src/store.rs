//! Line-delimited JSON files with an optional provenance header line.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Key marking the first line of a file as a provenance header.
pub const HEADER_KEY: &str = "_provenance";

/// What produced a file and from which inputs.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub artifact: String,
    /// Input name to the SHA-256 of its file contents.
    pub inputs: BTreeMap<String, String>,
    /// SHA-256 of the resolved configuration that produced the file.
    pub config: String,
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    #[serde(rename = "_provenance")]
    provenance: Provenance,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(sha256_hex(&bytes))
}

/// Serializes records (one per line) after an optional header.
pub fn to_jsonl<T: Serialize>(records: &[T], header: Option<&Provenance>) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    if let Some(p) = header {
        serde_json::to_writer(
            &mut out,
            &HeaderLine {
                provenance: p.clone(),
            },
        )?;
        out.push(b'\n');
    }
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.push(b'\n');
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T], header: Option<&Provenance>) -> Result<()> {
    let bytes = to_jsonl(records, header)?;
    let file = fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&bytes)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path.display().to_string(), e))
}

/// Raw JSON lines of a file with their 1-based line numbers, header split off.
pub fn read_lines(path: &Path) -> Result<(Option<Provenance>, Vec<(usize, serde_json::Value)>)> {
    let file = fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut header = None;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            field: "-".into(),
            message: e.to_string(),
        })?;
        if i == 0 && value.get(HEADER_KEY).is_some() {
            let h: HeaderLine = serde_json::from_value(value).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                field: HEADER_KEY.into(),
                message: e.to_string(),
            })?;
            header = Some(h.provenance);
            continue;
        }
        rows.push((i + 1, value));
    }
    Ok((header, rows))
}

/// Reads typed records; errors name the line and, when serde reports one, the field.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<(Option<Provenance>, Vec<T>)> {
    let (header, rows) = read_lines(path)?;
    let mut out = Vec::with_capacity(rows.len());
    for (line, value) in rows {
        let rec = serde_json::from_value(value).map_err(|e| {
            let message = e.to_string();
            Error::Parse {
                path: path.to_path_buf(),
                line,
                field: field_of(&message).unwrap_or_else(|| "-".into()),
                message,
            }
        })?;
        out.push(rec);
    }
    Ok((header, out))
}

fn field_of(message: &str) -> Option<String> {
    let start = message.find('`')? + 1;
    let end = start + message[start..].find('`')?;
    Some(message[start..end].to_string())
}

/// Refuses to overwrite an existing output unless `force` is set.
pub fn check_fresh(path: &Path, force: bool) -> Result<()> {
    if path.exists() && !force {
        return Err(Error::Exists(PathBuf::from(path)));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Rec {
        a: u32,
        b: String,
    }

    #[test]
    fn round_trip_with_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.jsonl");
        let recs = vec![
            Rec { a: 1, b: "x\ny".into() },
            Rec { a: 2, b: String::new() },
        ];
        let prov = Provenance {
            artifact: "test".into(),
            inputs: [("in".to_string(), "abc".to_string())].into(),
            config: "cfg".into(),
        };
        write_jsonl(&path, &recs, Some(&prov)).unwrap();
        let (h, back): (_, Vec<Rec>) = read_jsonl(&path).unwrap();
        assert_eq!(h, Some(prov));
        assert_eq!(back, recs);
    }

    #[test]
    fn missing_field_names_line_and_field() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.jsonl");
        fs::write(&path, "{\"a\":1,\"b\":\"q\"}\n{\"a\":2}\n").unwrap();
        match read_jsonl::<Rec>(&path) {
            Err(Error::Parse { line, field, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(field, "b");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn refuses_existing_output() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x");
        check_fresh(&path, false).unwrap();
        fs::write(&path, "").unwrap();
        assert!(matches!(check_fresh(&path, false), Err(Error::Exists(_))));
        check_fresh(&path, true).unwrap();
    }
}
