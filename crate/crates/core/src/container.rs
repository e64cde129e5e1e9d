//! Binary container for complex matrices.
//!
//! Layout: three little-endian `u64` (rows, cols, flags) followed by
//! `rows * cols` entries in row-major order, each stored as a
//! little-endian `f64` real part then imaginary part. `flags` is zero.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::scalar::{Cx, Real};

pub const HEADER_BYTES: usize = 24;

pub fn write_matrix<T: Real, W: Write>(mut w: W, a: ArrayView2<'_, Cx<T>>) -> Result<()> {
    w.write_all(&(a.nrows() as u64).to_le_bytes())?;
    w.write_all(&(a.ncols() as u64).to_le_bytes())?;
    w.write_all(&0u64.to_le_bytes())?;
    for z in a.iter() {
        w.write_all(&z.re.as_f64().to_le_bytes())?;
        w.write_all(&z.im.as_f64().to_le_bytes())?;
    }
    Ok(())
}

/// Writes a vector as a single-column matrix.
pub fn write_vector<T: Real, W: Write>(w: W, v: ArrayView1<'_, Cx<T>>) -> Result<()> {
    let col = v.insert_axis(ndarray::Axis(1));
    write_matrix(w, col)
}

pub fn read_matrix<R: Read>(mut r: R) -> Result<Array2<Cx<f64>>> {
    let mut word = [0u8; 8];
    let mut next = |r: &mut R| -> Result<u64> {
        r.read_exact(&mut word)?;
        Ok(u64::from_le_bytes(word))
    };
    let rows = next(&mut r)? as usize;
    let cols = next(&mut r)? as usize;
    let flags = next(&mut r)?;
    if flags != 0 {
        return Err(Error::Format(format!("unsupported container flags {flags}")));
    }
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Format("container shape overflows".into()))?;
    let mut buf = vec![0u8; count * 16];
    r.read_exact(&mut buf)?;
    let data = buf
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Cx::new(re, im)
        })
        .collect();
    Array2::from_shape_vec((rows, cols), data).map_err(|e| Error::Format(e.to_string()))
}

pub fn save_matrix<T: Real>(path: impl AsRef<Path>, a: ArrayView2<'_, Cx<T>>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_matrix(&mut w, a)?;
    w.flush()?;
    Ok(())
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<Array2<Cx<f64>>> {
    read_matrix(BufReader::new(File::open(path)?))
}
