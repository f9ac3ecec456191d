use std::io::Write;
use std::path::Path;

use super::{DatasetError, SparseDataset, SparseVec};

/// Parse LIBSVM text into a raw (not yet deduplicated) dataset.
///
/// Each non-empty line is `<label> <idx>:<val> ...` with 1-based,
/// strictly increasing indices. Labels `1`/`+1` map to 1 and `0`/`-1` map
/// to 0. Anything after `#` is ignored.
pub fn parse_libsvm(text: &str) -> Result<SparseDataset, DatasetError> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        rows.push(parse_line(line).map_err(|msg| DatasetError::Parse { line: lineno + 1, msg })?);
    }
    SparseDataset::from_rows(rows)
}

fn parse_line(line: &str) -> Result<(SparseVec, u8), String> {
    let mut tokens = line.split_whitespace();
    let label_tok = tokens.next().ok_or("missing label")?;
    let label = match label_tok.parse::<f64>() {
        Ok(1.0) => 1,
        Ok(v) if v == 0.0 || v == -1.0 => 0,
        _ => return Err(format!("invalid label {label_tok:?}")),
    };
    let mut pairs = Vec::new();
    let mut prev: Option<u32> = None;
    for tok in tokens {
        let (idx, val) = tok.split_once(':').ok_or_else(|| format!("expected idx:val, got {tok:?}"))?;
        let idx: u32 = idx.parse().map_err(|_| format!("invalid feature index {idx:?}"))?;
        if idx == 0 {
            return Err("feature indices are 1-based".into());
        }
        let val: f64 = val.parse().map_err(|_| format!("invalid feature value {val:?}"))?;
        if !val.is_finite() {
            return Err(format!("non-finite feature value {val:?}"));
        }
        if let Some(p) = prev {
            if idx <= p {
                return Err(format!("feature indices not ascending ({p} then {idx})"));
            }
        }
        prev = Some(idx);
        pairs.push((idx - 1, val));
    }
    let x = SparseVec::from_pairs(pairs).map_err(|e| e.to_string())?;
    Ok((x, label))
}

/// Read and parse a LIBSVM file (raw rows, not deduplicated).
pub fn read_libsvm(path: impl AsRef<Path>) -> Result<SparseDataset, DatasetError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| DatasetError::Io { path: path.display().to_string(), source })?;
    parse_libsvm(&text)
}

/// Write a dataset as LIBSVM text, one line per raw row (each distinct
/// sample repeated by its frequency). Values use the shortest round-trip
/// representation.
pub fn write_libsvm<W: Write>(ds: &SparseDataset, mut out: W) -> std::io::Result<()> {
    let mut line = String::new();
    for ((x, &y), &m) in ds.samples().iter().zip(ds.labels()).zip(ds.frequencies()) {
        line.clear();
        line.push_str(if y == 1 { "1" } else { "0" });
        for (i, v) in x.iter() {
            line.push_str(&format!(" {}:{:?}", i + 1, v));
        }
        line.push('\n');
        for _ in 0..m {
            out.write_all(line.as_bytes())?;
        }
    }
    Ok(())
}
