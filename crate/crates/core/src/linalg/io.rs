//! Matrix files.
//!
//! MATF v1 layout (all little-endian):
//!
//! ```text
//! offset 0   8 bytes   magic "ORTHMAT1"
//! offset 8   u32       rows
//! offset 12  u32       cols
//! offset 16  f64 × rows·cols, row-major
//! ```
//!
//! The CSV form is one matrix row per line, comma separated.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

use super::{LinalgError, Matrix};

pub const MATF_MAGIC: &[u8; 8] = b"ORTHMAT1";
const HEADER_LEN: usize = 16;

#[derive(Debug, Error)]
pub enum MatrixIoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("not a MATF v1 file (bad magic)")]
    BadMagic,
    #[error("MATF payload has {got} bytes, expected {expected}")]
    Truncated { expected: usize, got: usize },
    #[error("CSV line {line}, column {column}: cannot parse {text:?} as a real")]
    Parse { line: usize, column: usize, text: String },
    #[error("CSV line {line} has {got} fields, expected {expected}")]
    Ragged { line: usize, expected: usize, got: usize },
    #[error("CSV contains no rows")]
    Empty,
    #[error("dimension {0} does not fit in a u32")]
    TooLarge(usize),
    #[error(transparent)]
    Matrix(#[from] LinalgError),
}

pub fn encode_matf(m: &Matrix) -> Result<Vec<u8>, MatrixIoError> {
    let rows = u32::try_from(m.rows()).map_err(|_| MatrixIoError::TooLarge(m.rows()))?;
    let cols = u32::try_from(m.cols()).map_err(|_| MatrixIoError::TooLarge(m.cols()))?;
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * m.as_slice().len());
    out.extend_from_slice(MATF_MAGIC);
    out.extend_from_slice(&rows.to_le_bytes());
    out.extend_from_slice(&cols.to_le_bytes());
    for x in m.as_slice() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_matf(bytes: &[u8]) -> Result<Matrix, MatrixIoError> {
    if bytes.len() < HEADER_LEN || &bytes[..8] != MATF_MAGIC {
        return Err(MatrixIoError::BadMagic);
    }
    let rows = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .ok_or(MatrixIoError::TooLarge(rows.max(cols)))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != expected {
        return Err(MatrixIoError::Truncated {
            expected,
            got: payload.len(),
        });
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Matrix::new(rows, cols, data)?)
}

pub fn encode_csv(m: &Matrix) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        let line: Vec<String> = m.row(i).iter().map(|x| x.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn decode_csv(text: &str) -> Result<Matrix, MatrixIoError> {
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        match cols {
            None => cols = Some(fields.len()),
            Some(c) if c != fields.len() => {
                return Err(MatrixIoError::Ragged {
                    line: idx + 1,
                    expected: c,
                    got: fields.len(),
                })
            }
            _ => {}
        }
        for (j, f) in fields.iter().enumerate() {
            let x: f64 = f.trim().parse().map_err(|_| MatrixIoError::Parse {
                line: idx + 1,
                column: j + 1,
                text: f.to_string(),
            })?;
            data.push(x);
        }
        rows += 1;
    }
    let cols = cols.ok_or(MatrixIoError::Empty)?;
    Ok(Matrix::new(rows, cols, data)?)
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> MatrixIoError + '_ {
    move |source| MatrixIoError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn write_matf(path: &Path, m: &Matrix) -> Result<(), MatrixIoError> {
    let bytes = encode_matf(m)?;
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(&bytes).map_err(io_err(path))
}

pub fn write_csv(path: &Path, m: &Matrix) -> Result<(), MatrixIoError> {
    fs::write(path, encode_csv(m)).map_err(io_err(path))
}

/// Reads a matrix, choosing MATF when the file starts with the magic bytes
/// and CSV otherwise.
pub fn read_matrix(path: &Path) -> Result<Matrix, MatrixIoError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    if bytes.starts_with(MATF_MAGIC) {
        decode_matf(&bytes)
    } else {
        let text = String::from_utf8(bytes).map_err(|_| MatrixIoError::BadMagic)?;
        decode_csv(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn matf_layout_is_bit_exact() {
        let m = Matrix::from_rows(&[&[1.0, -2.5]]);
        let bytes = encode_matf(&m).unwrap();
        assert_eq!(&bytes[..8], b"ORTHMAT1");
        assert_eq!(&bytes[8..12], &[1, 0, 0, 0]);
        assert_eq!(&bytes[12..16], &[2, 0, 0, 0]);
        assert_eq!(&bytes[16..24], &1.0f64.to_le_bytes());
        assert_eq!(&bytes[24..32], &(-2.5f64).to_le_bytes());
        assert_eq!(bytes.len(), 32);
    }

    #[test]
    fn matf_rejects_corruption() {
        let m = Matrix::identity(3);
        let mut bytes = encode_matf(&m).unwrap();
        bytes.pop();
        assert!(matches!(decode_matf(&bytes), Err(MatrixIoError::Truncated { .. })));
        bytes[0] = b'X';
        assert!(matches!(decode_matf(&bytes), Err(MatrixIoError::BadMagic)));
    }

    #[test]
    fn csv_errors_name_location() {
        let err = decode_csv("1,2\n3,x\n").unwrap_err();
        assert!(matches!(err, MatrixIoError::Parse { line: 2, column: 2, .. }));
        let err = decode_csv("1,2\n3\n").unwrap_err();
        assert!(matches!(err, MatrixIoError::Ragged { line: 2, .. }));
        assert!(matches!(decode_csv("\n"), Err(MatrixIoError::Empty)));
    }

    proptest! {
        #[test]
        fn matf_and_csv_round_trip(rows in 1usize..6, cols in 1usize..6, seed in any::<u64>()) {
            let mut rng = crate::rng::seeded(seed);
            let m = crate::rng::gaussian_matrix(&mut rng, rows, cols, 3.0);
            prop_assert_eq!(decode_matf(&encode_matf(&m).unwrap()).unwrap(), m.clone());
            prop_assert_eq!(decode_csv(&encode_csv(&m)).unwrap(), m);
        }
    }
}
