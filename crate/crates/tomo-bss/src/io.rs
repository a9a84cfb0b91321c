//! Binary matrix files for bulk data exchange.
//!
//! Layout: two little-endian u64 counts (rows, then columns) followed by
//! row-major complex entries, each stored as two little-endian f64 values
//! (real, imaginary). A square matrix is read as a covariance, anything else
//! as an N×M observation stack; the format itself does not distinguish them.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{C64, CMatrix};

/// Refuse to allocate matrices beyond this many entries (~4 GiB of payload).
const MAX_ENTRIES: u64 = 1 << 28;

pub fn write_matrix(path: &Path, m: &CMatrix) -> Result<()> {
    if m.is_empty() {
        return Err(Error::invalid("refusing to write an empty matrix"));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&(m.nrows() as u64).to_le_bytes())?;
    w.write_all(&(m.ncols() as u64).to_le_bytes())?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<CMatrix> {
    let mut r = BufReader::new(File::open(path)?);
    let mut header = [0u8; 16];
    r.read_exact(&mut header)
        .map_err(|_| Error::format("file too short for the 16-byte header"))?;
    let rows = u64::from_le_bytes(header[..8].try_into().unwrap());
    let cols = u64::from_le_bytes(header[8..].try_into().unwrap());
    if rows == 0 || cols == 0 {
        return Err(Error::format("matrix header declares a zero dimension"));
    }
    let entries = rows
        .checked_mul(cols)
        .filter(|&e| e <= MAX_ENTRIES)
        .ok_or_else(|| Error::format("matrix header declares an implausible size"))?;
    let mut payload = vec![0u8; (entries * 16) as usize];
    r.read_exact(&mut payload).map_err(|_| {
        Error::format(format!(
            "file truncated: expected {rows}×{cols} complex entries"
        ))
    })?;
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(Error::format("trailing bytes after the declared matrix"));
    }
    let mut m = CMatrix::zeros(rows as usize, cols as usize);
    let mut at = 0;
    for i in 0..rows as usize {
        for j in 0..cols as usize {
            let re = f64::from_le_bytes(payload[at..at + 8].try_into().unwrap());
            let im = f64::from_le_bytes(payload[at + 8..at + 16].try_into().unwrap());
            if !re.is_finite() || !im.is_finite() {
                return Err(Error::format("non-finite entry in matrix file"));
            }
            m[(i, j)] = C64::new(re, im);
            at += 16;
        }
    }
    Ok(m)
}
