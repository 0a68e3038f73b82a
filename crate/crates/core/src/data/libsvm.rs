//! LIBSVM text format: `label idx:val idx:val ...` with 1-based indices.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::{Dataset, Example};
use crate::error::{Error, Result};

fn parse_err<T>(line: usize, message: impl Into<String>) -> Result<T> {
    Err(Error::Parse {
        line,
        message: message.into(),
    })
}

fn parse_real(token: &str, line: usize, what: &str) -> Result<f64> {
    match token.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => parse_err(line, format!("{what} `{token}` is not a finite number")),
    }
}

fn parse_line(text: &str, line: usize) -> Result<Option<Example>> {
    let body = match text.find('#') {
        Some(p) => &text[..p],
        None => text,
    };
    let mut tokens = body.split_ascii_whitespace();
    let Some(label) = tokens.next() else {
        return Ok(None);
    };
    let label = parse_real(label, line, "label")?;
    let mut features: Vec<(u32, f64)> = Vec::new();
    for tok in tokens {
        let Some((idx, val)) = tok.split_once(':') else {
            return parse_err(line, format!("token `{tok}` is not of the form idx:val"));
        };
        let idx: u64 = idx.parse().map_err(|_| Error::Parse {
            line,
            message: format!("feature index `{idx}` is not a non-negative integer"),
        })?;
        if idx < 1 {
            return parse_err(line, "feature index must be >= 1");
        }
        if idx > u32::MAX as u64 {
            return parse_err(line, format!("feature index {idx} is too large"));
        }
        let idx = (idx - 1) as u32;
        if let Some(&(prev, _)) = features.last() {
            if idx <= prev {
                return parse_err(line, format!("feature index {} does not increase", idx + 1));
            }
        }
        features.push((idx, parse_real(val, line, "feature value")?));
    }
    Ok(Some(Example { features, label }))
}

/// Reads a LIBSVM stream. Blank lines and `#` comments are skipped.
pub fn parse_libsvm<R: Read>(reader: R, name: &str) -> Result<Dataset> {
    let reader = BufReader::new(reader);
    let mut examples = Vec::new();
    for (i, line) in reader.split(b'\n').enumerate() {
        let line_no = i + 1;
        let bytes = line.map_err(|e| Error::Io(e.to_string()))?;
        let text = std::str::from_utf8(&bytes)
            .or_else(|_| parse_err(line_no, "line is not valid UTF-8"))?;
        if let Some(ex) = parse_line(text, line_no)? {
            examples.push(ex);
        }
    }
    Ok(Dataset::from_examples(name, examples))
}

pub fn parse_libsvm_str(text: &str, name: &str) -> Result<Dataset> {
    parse_libsvm(text.as_bytes(), name)
}

/// Loads a file, optionally raising its dimension to `dim_override`.
pub fn load_libsvm(path: impl AsRef<Path>, dim_override: Option<usize>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    let ds = parse_libsvm(file, &name)?;
    match dim_override {
        Some(dim) => ds.with_dim(dim),
        None => Ok(ds),
    }
}

/// Canonical serialization. Values use the shortest decimal form that
/// parses back to the same `f64`.
pub fn to_libsvm_string(ds: &Dataset) -> String {
    let mut out = String::new();
    for ex in ds.examples() {
        write!(out, "{}", ex.label).unwrap();
        for &(i, v) in &ex.features {
            write!(out, " {}:{}", i + 1, v).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn write_libsvm<W: Write>(ds: &Dataset, mut writer: W) -> std::io::Result<()> {
    writer.write_all(to_libsvm_string(ds).as_bytes())
}
