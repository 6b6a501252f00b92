//! Cloud files and batch manifests.
//!
//! Two cloud formats are read:
//!
//! * `BRD1` binary: the magic bytes `BRD1`, row count `n` and dimension `d` as
//!   little-endian `u32`, then `n·d` little-endian `f32` values in row-major order.
//! * TSV: one row per line, values separated by tabs or spaces. Blank lines and
//!   lines starting with `#` are skipped.
//!
//! The format is detected from the first four bytes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use crate::geometry::{normalize_rows, EmbeddingCloud};
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"BRD1";
const HEADER_LEN: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CloudFormat {
    BinaryF32,
    Tsv,
}

impl CloudFormat {
    pub fn detect(bytes: &[u8]) -> Self {
        if bytes.starts_with(MAGIC) {
            CloudFormat::BinaryF32
        } else {
            CloudFormat::Tsv
        }
    }
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("four bytes"))
}

pub fn decode_binary(bytes: &[u8]) -> Result<Array2<f64>> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::BadHeader(format!(
            "{} bytes is shorter than the {HEADER_LEN}-byte header",
            bytes.len()
        )));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::BadHeader("missing BRD1 magic".into()));
    }
    let n = read_u32(bytes, 4) as usize;
    let d = read_u32(bytes, 8) as usize;
    if n == 0 || d == 0 {
        return Err(Error::BadHeader(format!("empty shape ({n}, {d})")));
    }
    let expected = n
        .checked_mul(d)
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(|| Error::BadHeader(format!("shape ({n}, {d}) overflows")))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() < expected {
        return Err(Error::TruncatedPayload {
            expected,
            found: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(Error::BadHeader(format!(
            "header declares {expected} payload bytes but {} follow",
            payload.len()
        )));
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("four bytes")) as f64)
        .collect();
    Ok(Array2::from_shape_vec((n, d), values).expect("length checked above"))
}

/// Encodes `data` as BRD1. Values are narrowed to `f32`.
pub fn encode_binary(data: &Array2<f64>) -> Result<Vec<u8>> {
    let (n, d) = data.dim();
    let to_u32 = |v: usize| {
        u32::try_from(v).map_err(|_| Error::InvalidShape(format!("{v} does not fit in u32")))
    };
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * n * d);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&to_u32(n)?.to_le_bytes());
    out.extend_from_slice(&to_u32(d)?.to_le_bytes());
    for &v in data.iter() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn parse_tsv(text: &str) -> Result<Array2<f64>> {
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let before = values.len();
        for field in trimmed.split_whitespace() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("`{field}` is not a number"),
            })?;
            values.push(v);
        }
        let count = values.len() - before;
        match width {
            None => width = Some(count),
            Some(w) if w != count => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected {w} columns, found {count}"),
                })
            }
            _ => {}
        }
        rows += 1;
    }
    let width = width.ok_or_else(|| Error::Parse {
        line: 0,
        message: "no data rows".into(),
    })?;
    Ok(Array2::from_shape_vec((rows, width), values).expect("rows have equal width"))
}

pub fn format_tsv(data: &Array2<f64>) -> String {
    let mut out = String::new();
    for row in data.rows() {
        let fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&fields.join("\t"));
        out.push('\n');
    }
    out
}

pub fn read_matrix(path: &Path) -> Result<Array2<f64>> {
    let bytes = fs::read(path)?;
    match CloudFormat::detect(&bytes) {
        CloudFormat::BinaryF32 => decode_binary(&bytes),
        CloudFormat::Tsv => {
            let text = std::str::from_utf8(&bytes).map_err(|e| Error::Parse {
                line: 0,
                message: format!("not UTF-8 text: {e}"),
            })?;
            parse_tsv(text)
        }
    }
}

/// Reads a cloud file. With `normalize` false the rows are taken as already
/// unit-norm and only the shape is checked.
pub fn read_cloud(path: &Path, normalize: bool) -> Result<EmbeddingCloud> {
    let data = read_matrix(path)?;
    if normalize {
        normalize_rows(data)
    } else {
        EmbeddingCloud::from_unit_rows(data)
    }
}

pub fn write_cloud(path: &Path, data: &Array2<f64>, format: CloudFormat) -> Result<()> {
    let bytes = match format {
        CloudFormat::BinaryF32 => encode_binary(data)?,
        CloudFormat::Tsv => format_tsv(data).into_bytes(),
    };
    let mut file = fs::File::create(path)?;
    file.write_all(&bytes)?;
    Ok(())
}

/// One `x_path<TAB>y_path` pair per line; `#` comments and blank lines are
/// ignored. Relative paths resolve against the manifest's directory.
pub fn parse_manifest(text: &str, base: &Path) -> Result<Vec<(PathBuf, PathBuf)>> {
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split('\t').map(str::trim).collect();
        if fields.len() != 2 || fields.iter().any(|f| f.is_empty()) {
            return Err(Error::Parse {
                line: i + 1,
                message: "expected two tab-separated paths".into(),
            });
        }
        pairs.push((base.join(fields[0]), base.join(fields[1])));
    }
    Ok(pairs)
}

pub fn read_manifest(path: &Path) -> Result<Vec<(PathBuf, PathBuf)>> {
    let text = fs::read_to_string(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    parse_manifest(&text, base)
}
