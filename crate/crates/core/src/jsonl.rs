//! Line-delimited JSON I/O.
//!
//! All pipeline file formats are one JSON record per line. Readers stream one
//! record at a time so peak memory stays independent of corpus size; writers
//! go through `serde_json::to_writer` so float formatting is the shortest
//! round-trippable form and output bytes are deterministic.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

/// Stream records of type `T` from a reader, one per non-empty line.
///
/// Yields `(line_number, record)` with 1-based line numbers; parse failures
/// surface as [`Error::Parse`] carrying the line number.
pub fn read_records<R: Read, T: DeserializeOwned>(
    reader: R,
) -> impl Iterator<Item = Result<(usize, T)>> {
    BufReader::new(reader)
        .lines()
        .enumerate()
        .filter_map(|(idx, line)| {
            let lineno = idx + 1;
            let line = match line {
                Ok(l) => l,
                Err(e) => return Some(Err(Error::Io(e))),
            };
            if line.trim().is_empty() {
                return None;
            }
            Some(parse_line(&line, lineno))
        })
}

fn parse_line<T: DeserializeOwned>(line: &str, lineno: usize) -> Result<(usize, T)> {
    let mut de = serde_json::Deserializer::from_str(line);
    match serde_path_to_error::deserialize(&mut de) {
        Ok(rec) => Ok((lineno, rec)),
        Err(e) => {
            let path = e.path().to_string();
            let message = if path == "." {
                e.inner().to_string()
            } else {
                format!("field {path}: {}", e.inner())
            };
            Err(Error::Parse {
                line: Some(lineno),
                message,
            })
        }
    }
}

/// Open `path` and stream records from it.
pub fn read_file<T: DeserializeOwned>(
    path: &Path,
) -> Result<impl Iterator<Item = Result<(usize, T)>>> {
    let file = File::open(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    Ok(read_records(file))
}

/// Collect every record from a JSONL file into memory.
pub fn read_all<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for item in read_file(path)? {
        out.push(item?.1);
    }
    Ok(out)
}

/// A buffered JSONL writer.
pub struct JsonlWriter<W: Write> {
    inner: BufWriter<W>,
}

impl JsonlWriter<File> {
    /// Create (truncating) a JSONL file at `path`.
    pub fn create(path: &Path) -> Result<Self> {
        let file =
            File::create(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
        Ok(JsonlWriter {
            inner: BufWriter::new(file),
        })
    }
}

impl<W: Write> JsonlWriter<W> {
    pub fn new(writer: W) -> Self {
        JsonlWriter {
            inner: BufWriter::new(writer),
        }
    }

    /// Serialize one record and terminate the line.
    pub fn write<T: Serialize>(&mut self, record: &T) -> Result<()> {
        serde_json::to_writer(&mut self.inner, record)
            .map_err(|e| Error::Input(format!("serialize record: {e}")))?;
        self.inner.write_all(b"\n")?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}
