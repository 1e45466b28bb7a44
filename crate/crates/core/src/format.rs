//! Matrix file formats.
//!
//! Text (`.z4t`): a header line `z4m <rows> <cols>`, then `rows` lines of
//! exactly `cols` characters from `0123`, every line ending in `\n`.
//!
//! Binary (`.z4b`): magic `5A 34 4D 01`, rows and cols as little-endian
//! `u32`, then rows of `ceil(cols/4)` bytes each. Element `j` of a row sits
//! in bits `2*(j%4)..2*(j%4)+2` of byte `j/4`; unused bits are zero.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Z4Matrix;
use crate::z4core::Z4Digit;

pub const BINARY_MAGIC: [u8; 4] = [0x5A, 0x34, 0x4D, 0x01];
const HEADER_LEN: usize = 12;

fn format_err<T>(msg: String) -> Result<T> {
    Err(Error::Format(msg))
}

pub fn write_text(m: &Z4Matrix) -> Vec<u8> {
    let mut out = format!("z4m {} {}\n", m.rows(), m.cols()).into_bytes();
    out.reserve(m.rows() * (m.cols() + 1));
    for i in 0..m.rows() {
        out.extend((0..m.cols()).map(|j| b'0' + m.at(i, j).value()));
        out.push(b'\n');
    }
    out
}

fn parse_dim(field: Option<&str>, what: &str) -> Result<usize> {
    let Some(f) = field else {
        return format_err(format!("line 1: missing {what}"));
    };
    if f.is_empty() || !f.bytes().all(|b| b.is_ascii_digit()) {
        return format_err(format!("line 1: {what} {f:?} is not a decimal number"));
    }
    f.parse::<u32>()
        .map(|v| v as usize)
        .or_else(|_| format_err(format!("line 1: {what} {f} is out of range")))
}

pub fn read_text(data: &[u8]) -> Result<Z4Matrix> {
    let mut lines = data.split(|&b| b == b'\n');
    let header = lines.next().unwrap_or_default();
    let header = std::str::from_utf8(header)
        .or_else(|_| format_err("line 1: header is not ASCII".to_string()))?;
    let mut fields = header.split(' ');
    if fields.next() != Some("z4m") {
        return format_err(format!("line 1: expected header `z4m <rows> <cols>`, got {header:?}"));
    }
    let rows = parse_dim(fields.next(), "row count")?;
    let cols = parse_dim(fields.next(), "column count")?;
    if fields.next().is_some() {
        return format_err("line 1: trailing data after column count".to_string());
    }
    let mut m = Z4Matrix::zeros(rows, cols);
    for i in 0..rows {
        let lineno = i + 2;
        let Some(line) = lines.next() else {
            return format_err(format!("line {lineno}: missing row {i} of {rows}"));
        };
        if line.len() != cols {
            return format_err(format!(
                "line {lineno}: expected {cols} digits, found {}",
                line.len()
            ));
        }
        for (j, &c) in line.iter().enumerate() {
            if !(b'0'..=b'3').contains(&c) {
                return format_err(format!(
                    "line {lineno}, column {}: {:?} is not a digit 0-3",
                    j + 1,
                    c as char
                ));
            }
            m.put(i, j, Z4Digit::reduce((c - b'0') as u64));
        }
    }
    // The last row's newline leaves one empty piece; anything else is junk.
    match (lines.next(), lines.next()) {
        (Some([]), None) => Ok(m),
        (None, _) => format_err(format!("line {}: missing final newline", rows + 1)),
        _ => format_err(format!("line {}: unexpected data after the last row", rows + 2)),
    }
}

fn row_bytes(cols: usize) -> usize {
    cols.div_ceil(4)
}

pub fn write_binary(m: &Z4Matrix) -> Vec<u8> {
    let rb = row_bytes(m.cols());
    let mut out = Vec::with_capacity(HEADER_LEN + rb * m.rows());
    out.extend_from_slice(&BINARY_MAGIC);
    out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u32).to_le_bytes());
    for i in 0..m.rows() {
        let mut row = vec![0u8; rb];
        for j in 0..m.cols() {
            row[j / 4] |= m.at(i, j).value() << (2 * (j % 4));
        }
        out.extend_from_slice(&row);
    }
    out
}

pub fn read_binary(data: &[u8]) -> Result<Z4Matrix> {
    if data.len() < HEADER_LEN {
        return format_err(format!("byte {}: file ends inside the 12-byte header", data.len()));
    }
    if data[..4] != BINARY_MAGIC {
        let at = data.iter().zip(&BINARY_MAGIC).position(|(a, b)| a != b).unwrap_or(0);
        return format_err(format!("byte {at}: bad magic, expected 5A 34 4D 01"));
    }
    let rows = u32::from_le_bytes(data[4..8].try_into().expect("4 bytes")) as usize;
    let cols = u32::from_le_bytes(data[8..12].try_into().expect("4 bytes")) as usize;
    let rb = row_bytes(cols);
    let expected = rows
        .checked_mul(rb)
        .and_then(|b| b.checked_add(HEADER_LEN))
        .ok_or_else(|| Error::Format(format!("byte 4: {rows}x{cols} is too large")))?;
    if data.len() != expected {
        return format_err(format!(
            "byte {}: {rows}x{cols} matrix needs {expected} bytes, file has {}",
            data.len().min(expected),
            data.len()
        ));
    }
    let mut m = Z4Matrix::zeros(rows, cols);
    let used_in_last = match cols % 4 {
        0 => 8,
        r => 2 * r,
    };
    for i in 0..rows {
        let base = HEADER_LEN + i * rb;
        let row = &data[base..base + rb];
        if let Some(&last) = row.last() {
            if used_in_last < 8 && last >> used_in_last != 0 {
                return format_err(format!(
                    "byte {}: nonzero padding bits in row {i}",
                    base + rb - 1
                ));
            }
        }
        for j in 0..cols {
            m.put(i, j, Z4Digit::reduce((row[j / 4] >> (2 * (j % 4))) as u64));
        }
    }
    Ok(m)
}

/// Decodes either format, chosen by the leading magic bytes.
pub fn read_any(data: &[u8]) -> Result<Z4Matrix> {
    if data.starts_with(&BINARY_MAGIC[..3]) {
        read_binary(data)
    } else {
        read_text(data)
    }
}

pub fn read_file(path: &Path) -> Result<Z4Matrix> {
    let data = fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_any(&data).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Binary for a `.z4b` extension, text otherwise.
pub fn write_file(path: &Path, m: &Z4Matrix) -> Result<()> {
    let bytes = if path.extension().is_some_and(|e| e == "z4b") {
        write_binary(m)
    } else {
        write_text(m)
    };
    fs::write(path, bytes).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}
