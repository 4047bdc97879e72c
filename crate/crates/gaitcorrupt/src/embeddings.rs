//! Embedding files.
//!
//! Text (`.csv`): a header `identity,condition,view,sequence,v0,..,v{d-1}`
//! followed by one record per line; `sequence` may be empty.
//!
//! Binary (`.emb`): magic `GCEMB\x01`, little-endian `u32` dimension, then
//! records until EOF, each four `u16`-length-prefixed UTF-8 strings
//! (identity, condition, view, sequence) and `d` little-endian `f64`.

use std::fs;
use std::path::Path;

use gaitcorrupt_core::metrics::EmbeddingRecord;

use crate::error::{IoError, Result};

pub const BINARY_MAGIC: &[u8; 6] = b"GCEMB\x01";
const TEXT_COLUMNS: [&str; 4] = ["identity", "condition", "view", "sequence"];

fn dim_of(records: &[EmbeddingRecord], path: &Path) -> Result<usize> {
    let d = records.first().map_or(0, |r| r.vector.len());
    if records.iter().any(|r| r.vector.len() != d) {
        return Err(IoError::format(path, "records have different embedding dimensions"));
    }
    Ok(d)
}

pub fn write_text(path: &Path, records: &[EmbeddingRecord]) -> Result<()> {
    let d = dim_of(records, path)?;
    let csv_err = |source| IoError::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let header: Vec<String> =
        TEXT_COLUMNS.iter().map(|s| s.to_string()).chain((0..d).map(|i| format!("v{i}"))).collect();
    w.write_record(&header).map_err(csv_err)?;
    for r in records {
        let mut row = vec![
            r.identity.clone(),
            r.condition.clone(),
            r.view.clone(),
            r.sequence_id.clone().unwrap_or_default(),
        ];
        // `{:?}` prints the shortest string that parses back to the same f64.
        row.extend(r.vector.iter().map(|v| format!("{v:?}")));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(IoError::io(path))
}

pub fn read_text(path: &Path) -> Result<Vec<EmbeddingRecord>> {
    let csv_err = |source| IoError::Csv { path: path.to_path_buf(), source };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?.clone();
    if header.len() <= 4 || header.iter().take(4).ne(TEXT_COLUMNS) {
        return Err(IoError::format(path, "expected header identity,condition,view,sequence,v0,..."));
    }
    let d = header.len() - 4;
    let mut out = Vec::new();
    for (line, row) in r.records().enumerate() {
        let row = row.map_err(csv_err)?;
        let vector = (4..4 + d)
            .map(|i| {
                row[i].trim().parse::<f64>().map_err(|e| {
                    IoError::format(path, format!("record {}: column {}: {e}", line + 1, &header[i]))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        let mut rec = EmbeddingRecord::new(&row[0], &row[1], &row[2], vector);
        if !row[3].is_empty() {
            rec = rec.with_sequence(&row[3]);
        }
        out.push(rec);
    }
    Ok(out)
}

fn put_str(buf: &mut Vec<u8>, s: &str, path: &Path) -> Result<()> {
    let len = u16::try_from(s.len()).map_err(|_| IoError::format(path, format!("label `{s}` too long")))?;
    buf.extend_from_slice(&len.to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
    Ok(())
}

pub fn write_binary(path: &Path, records: &[EmbeddingRecord]) -> Result<()> {
    let d = dim_of(records, path)?;
    let mut buf = Vec::with_capacity(10 + records.len() * (d * 8 + 32));
    buf.extend_from_slice(BINARY_MAGIC);
    buf.extend_from_slice(&(d as u32).to_le_bytes());
    for r in records {
        for s in [&r.identity, &r.condition, &r.view] {
            put_str(&mut buf, s, path)?;
        }
        put_str(&mut buf, r.sequence_id.as_deref().unwrap_or(""), path)?;
        for v in &r.vector {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, buf).map_err(IoError::io(path))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let out = self.bytes.get(self.pos..self.pos + n)?;
        self.pos += n;
        Some(out)
    }

    fn string(&mut self) -> Option<String> {
        let len = u16::from_le_bytes(self.take(2)?.try_into().ok()?) as usize;
        String::from_utf8(self.take(len)?.to_vec()).ok()
    }
}

pub fn read_binary(path: &Path) -> Result<Vec<EmbeddingRecord>> {
    let bytes = fs::read(path).map_err(IoError::io(path))?;
    if !bytes.starts_with(BINARY_MAGIC) || bytes.len() < 10 {
        return Err(IoError::format(path, "not a binary embedding file"));
    }
    let d = u32::from_le_bytes(bytes[6..10].try_into().expect("4 bytes")) as usize;
    let mut c = Cursor { bytes: &bytes, pos: 10 };
    let mut out = Vec::new();
    while c.pos < bytes.len() {
        let truncated = || IoError::format(path, format!("record {} is truncated or malformed", out.len() + 1));
        let identity = c.string().ok_or_else(truncated)?;
        let condition = c.string().ok_or_else(truncated)?;
        let view = c.string().ok_or_else(truncated)?;
        let seq = c.string().ok_or_else(truncated)?;
        let raw = c.take(8 * d).ok_or_else(truncated)?;
        let vector = raw.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))).collect();
        let mut rec = EmbeddingRecord::new(identity, condition, view, vector);
        if !seq.is_empty() {
            rec = rec.with_sequence(seq);
        }
        out.push(rec);
    }
    Ok(out)
}

/// Picks the format from the extension: `.emb`/`.bin` binary, anything else text.
pub fn read(path: &Path) -> Result<Vec<EmbeddingRecord>> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("emb" | "bin") => read_binary(path),
        _ => read_text(path),
    }
}

pub fn write(path: &Path, records: &[EmbeddingRecord]) -> Result<()> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("emb" | "bin") => write_binary(path, records),
        _ => write_text(path, records),
    }
}
