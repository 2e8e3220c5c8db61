//! Machine-readable artifacts. Every artifact embeds the resolved run
//! configuration, the seed, and the tool version, so a rerun from the
//! embedded configuration reproduces it byte for byte; nothing
//! non-deterministic (timestamps, wall-clock) is ever serialized into an
//! artifact. Summaries and grids are written atomically via a temporary
//! file and rename; record streams append one JSON line per record.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

pub fn version_string() -> String {
    format!("slabsep {}", env!("CARGO_PKG_VERSION"))
}

/// Resolved invocation, embedded verbatim in every artifact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub params: serde_json::Map<String, Value>,
    pub seed: u64,
    pub threads: usize,
    pub format: String,
}

/// Envelope for a single-document artifact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Artifact<T> {
    pub schema_version: u32,
    pub version: String,
    pub config: RunConfig,
    pub data: T,
}

impl<T: Serialize> Artifact<T> {
    pub fn new(config: RunConfig, data: T) -> Self {
        Artifact {
            schema_version: SCHEMA_VERSION,
            version: version_string(),
            config,
            data,
        }
    }
}

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("dat")
    ));
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Serializes a value to pretty JSON and writes it atomically.
pub fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    atomic_write(path, &bytes)
}

/// Writes a JSONL file atomically: a meta line followed by one line per
/// record.
pub fn write_jsonl_atomic<M: Serialize, T: Serialize>(
    path: &Path,
    meta: &M,
    records: &[T],
) -> Result<()> {
    let mut buf = Vec::new();
    serde_json::to_writer(&mut buf, meta)?;
    buf.push(b'\n');
    for r in records {
        serde_json::to_writer(&mut buf, r)?;
        buf.push(b'\n');
    }
    atomic_write(path, &buf)
}

/// Appends records to an existing JSONL stream (creating it with the meta
/// line first if absent). Line-granular: a records file is resumable.
pub fn append_jsonl<M: Serialize, T: Serialize>(
    path: &Path,
    meta: &M,
    records: &[T],
) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let fresh = !path.exists();
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)?;
    let mut buf = Vec::new();
    if fresh {
        serde_json::to_writer(&mut buf, meta)?;
        buf.push(b'\n');
    }
    for r in records {
        serde_json::to_writer(&mut buf, r)?;
        buf.push(b'\n');
    }
    file.write_all(&buf)?;
    Ok(())
}

/// Reads a JSONL stream back: the meta line and the records.
pub fn read_jsonl(path: &Path) -> Result<(Value, Vec<Value>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let meta = match lines.next() {
        Some(l) => serde_json::from_str(l)?,
        None => return Err(Error::Report(format!("{}: empty stream", path.display()))),
    };
    let mut records = Vec::new();
    for l in lines {
        records.push(serde_json::from_str(l)?);
    }
    Ok((meta, records))
}

/// Canonical column order for CSV emission: the sorted union of the keys of
/// every record, independent of per-record field order.
pub fn canonical_columns(records: &[Value]) -> Vec<String> {
    let mut cols = BTreeSet::new();
    for r in records {
        if let Value::Object(map) = r {
            for k in map.keys() {
                cols.insert(k.clone());
            }
        }
    }
    cols.into_iter().collect()
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => {
            if s.contains([',', '"', '\n']) {
                format!("\"{}\"", s.replace('"', "\"\""))
            } else {
                s.clone()
            }
        }
        Value::Number(n) => n.to_string(),
        Value::Bool(b) => b.to_string(),
        other => csv_cell(&Value::String(other.to_string())),
    }
}

/// Writes records as CSV in the canonical column order, plus a JSON sidecar
/// (`<path>.meta.json`) holding the embedded configuration and column list.
pub fn write_csv_with_meta<M: Serialize>(
    path: &Path,
    meta: &M,
    records: &[Value],
) -> Result<()> {
    if records.is_empty() {
        return Err(Error::Report("refusing to emit an empty record list".into()));
    }
    let cols = canonical_columns(records);
    let mut buf = String::new();
    buf.push_str(&cols.join(","));
    buf.push('\n');
    for r in records {
        let row: Vec<String> = cols
            .iter()
            .map(|c| r.get(c).map(csv_cell).unwrap_or_default())
            .collect();
        buf.push_str(&row.join(","));
        buf.push('\n');
    }
    atomic_write(path, buf.as_bytes())?;
    let meta_path = sidecar_path(path);
    let wrapped = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "version": version_string(),
        "meta": serde_json::to_value(meta)?,
        "columns": cols,
    });
    write_json_atomic(&meta_path, &wrapped)
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Emits records in the requested format next to `base` (extension added):
/// `jsonl` and `json` are self-contained with a meta envelope; `csv` writes
/// the data file plus its JSON sidecar.
pub fn emit_records<M: Serialize>(
    base: &Path,
    meta: &M,
    records: &[Value],
    format: &str,
) -> Result<PathBuf> {
    if records.is_empty() {
        return Err(Error::Report("refusing to emit an empty record list".into()));
    }
    match format {
        "jsonl" => {
            let path = base.with_extension("jsonl");
            write_jsonl_atomic(&path, meta, records)?;
            Ok(path)
        }
        "json" => {
            let path = base.with_extension("json");
            let doc = serde_json::json!({
                "schema_version": SCHEMA_VERSION,
                "version": version_string(),
                "meta": serde_json::to_value(meta)?,
                "records": records,
            });
            write_json_atomic(&path, &doc)?;
            Ok(path)
        }
        "csv" => {
            let path = base.with_extension("csv");
            write_csv_with_meta(&path, meta, records)?;
            Ok(path)
        }
        other => Err(Error::Report(format!("unknown format {other:?}"))),
    }
}
