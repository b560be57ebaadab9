//! Line-delimited JSON persistence with versioned schema tags.
//!
//! Every persisted line type carries a `schema` field pinned to a version
//! string; readers reject lines whose tag does not match.

use serde::de::DeserializeOwned;
use serde::Serialize;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum JsonlError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
    #[error("serialization failed: {0}")]
    Serialize(serde_json::Error),
}

macro_rules! schema_tag {
    ($name:ident, $tag:literal) => {
        pub mod $name {
            pub const TAG: &str = $tag;

            pub fn serialize<S: serde::Serializer>(_: &(), s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(TAG)
            }

            pub fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> Result<(), D::Error> {
                let got = <String as serde::Deserialize>::deserialize(d)?;
                if got == TAG {
                    Ok(())
                } else {
                    Err(serde::de::Error::custom(format!(
                        "expected schema {TAG:?}, found {got:?}"
                    )))
                }
            }
        }
    };
}

schema_tag!(pool_v1, "pool/v1");
schema_tag!(sample_v1, "sample/v1");
schema_tag!(geometry_v1, "geometry/v1");
schema_tag!(scorepair_v1, "scorepair/v1");
schema_tag!(group_v1, "group/v1");

/// Reads one value per non-empty line. Errors carry 1-based line numbers.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, JsonlError> {
    let file = File::open(path)?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|source| JsonlError::Parse {
            line: idx + 1,
            source,
        })?;
        out.push(item);
    }
    Ok(out)
}

/// Writes one compact JSON value per line.
pub fn write_jsonl<T, I>(path: &Path, items: I) -> Result<(), JsonlError>
where
    T: Serialize,
    I: IntoIterator<Item = T>,
{
    let mut w = BufWriter::new(File::create(path)?);
    for item in items {
        let line = serde_json::to_string(&item).map_err(JsonlError::Serialize)?;
        w.write_all(line.as_bytes())?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads raw lines, dropping blank ones; used where byte fidelity matters.
pub fn read_lines(path: &Path) -> Result<Vec<String>, JsonlError> {
    let file = File::open(path)?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(line);
        }
    }
    Ok(out)
}

/// Writes raw lines verbatim, one per line.
pub fn write_lines(path: &Path, lines: &[String]) -> Result<(), JsonlError> {
    let mut w = BufWriter::new(File::create(path)?);
    for line in lines {
        w.write_all(line.as_bytes())?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}
