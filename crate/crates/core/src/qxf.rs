//! QXF matrix files and key=value metadata sidecars.
//!
//! QXF is the on-disk matrix format used by every command: four magic bytes
//! `QXF1`, row and column counts as unsigned 32-bit little-endian integers,
//! then the payload as row-major 64-bit little-endian floats. All values must
//! be finite. Vectors are stored as 1×n matrices.
//!
//! Sidecar metadata files hold one `key=value` pair per line, sorted by key,
//! so reruns with the same seed produce byte-identical artifacts.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::Real;

pub const MAGIC: [u8; 4] = *b"QXF1";

/// Writes a matrix in QXF format.
pub fn write_matrix<T: Real, W: Write>(mut w: W, m: &Array2<T>) -> Result<()> {
    let (rows, cols) = m.dim();
    if rows > u32::MAX as usize || cols > u32::MAX as usize {
        return Err(Error::InvalidArgument(format!(
            "matrix {rows}x{cols} exceeds the QXF u32 size limit"
        )));
    }
    w.write_all(&MAGIC)?;
    w.write_all(&(rows as u32).to_le_bytes())?;
    w.write_all(&(cols as u32).to_le_bytes())?;
    for &x in m.iter() {
        let v = x.as_f64();
        if !v.is_finite() {
            return Err(Error::NonFinite("QXF payload".into()));
        }
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Reads a matrix in QXF format.
pub fn read_matrix<T: Real, R: Read>(mut r: R) -> Result<Array2<T>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != MAGIC {
        return Err(Error::Format {
            path: "<stream>".into(),
            message: format!("bad magic {magic:?}, expected QXF1"),
        });
    }
    let mut header = [0u8; 4];
    r.read_exact(&mut header)?;
    let rows = u32::from_le_bytes(header) as usize;
    r.read_exact(&mut header)?;
    let cols = u32::from_le_bytes(header) as usize;

    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::InvalidArgument("QXF dimensions overflow".into()))?;
    let mut data = Vec::with_capacity(count);
    let mut buf = [0u8; 8];
    for _ in 0..count {
        r.read_exact(&mut buf)?;
        let v = f64::from_le_bytes(buf);
        if !v.is_finite() {
            return Err(Error::NonFinite("QXF payload".into()));
        }
        data.push(T::real(v));
    }
    Array2::from_shape_vec((rows, cols), data)
        .map_err(|e| Error::InvalidArgument(format!("QXF shape: {e}")))
}

pub fn write_matrix_path<T: Real, P: AsRef<Path>>(path: P, m: &Array2<T>) -> Result<()> {
    let file = File::create(path.as_ref())?;
    write_matrix(BufWriter::new(file), m)
}

pub fn read_matrix_path<T: Real, P: AsRef<Path>>(path: P) -> Result<Array2<T>> {
    let file = File::open(path.as_ref()).map_err(|e| Error::Format {
        path: path.as_ref().display().to_string(),
        message: e.to_string(),
    })?;
    read_matrix(BufReader::new(file)).map_err(|e| match e {
        Error::Format { message, .. } => Error::Format {
            path: path.as_ref().display().to_string(),
            message,
        },
        other => other,
    })
}

/// Writes a vector as a 1×n QXF matrix.
pub fn write_vector_path<T: Real, P: AsRef<Path>>(path: P, v: &Array1<T>) -> Result<()> {
    let m = v
        .view()
        .into_shape_with_order((1, v.len()))
        .expect("1xN reshape")
        .to_owned();
    write_matrix_path(path, &m)
}

/// Reads a 1×n or n×1 QXF matrix as a vector.
pub fn read_vector_path<T: Real, P: AsRef<Path>>(path: P) -> Result<Array1<T>> {
    let m: Array2<T> = read_matrix_path(&path)?;
    let (rows, cols) = m.dim();
    if rows != 1 && cols != 1 {
        return Err(Error::Format {
            path: path.as_ref().display().to_string(),
            message: format!("expected a vector, got {rows}x{cols}"),
        });
    }
    Ok(Array1::from_iter(m.iter().copied()))
}

/// Writes a metadata sidecar: `key=value` lines sorted by key.
pub fn write_meta<P: AsRef<Path>>(path: P, meta: &BTreeMap<String, String>) -> Result<()> {
    let mut out = String::new();
    for (k, v) in meta {
        out.push_str(k);
        out.push('=');
        out.push_str(v);
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads a metadata sidecar.
pub fn read_meta<P: AsRef<Path>>(path: P) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path.as_ref())?;
    let mut meta = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            message: format!("expected key=value, got {line:?}"),
        })?;
        meta.insert(k.to_string(), v.to_string());
    }
    Ok(meta)
}
