//! Versioned binary dump format for fields and eigenfunction tables.
//!
//! Layout (little endian): magic `DFN1`, version u32, kind u8 (1 = field,
//! 2 = psi table), n_x u64, n_k u64 (0 for fields), x_min f64, x_max f64,
//! k_max f64, 32-byte provenance hash, then row-major complex128 payload.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::dft::DistortedBasis;
use crate::error::{CoreError, Result};
use crate::grid::{ComplexField, Parity, SpatialGrid};

const MAGIC: &[u8; 4] = b"DFN1";
const VERSION: u32 = 1;

pub const KIND_FIELD: u8 = 1;
pub const KIND_PSI_TABLE: u8 = 2;

struct Header {
    kind: u8,
    n_x: u64,
    n_k: u64,
    x_min: f64,
    x_max: f64,
    k_max: f64,
    hash: [u8; 32],
}

fn write_header(w: &mut impl Write, h: &Header) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[h.kind])?;
    w.write_all(&h.n_x.to_le_bytes())?;
    w.write_all(&h.n_k.to_le_bytes())?;
    w.write_all(&h.x_min.to_le_bytes())?;
    w.write_all(&h.x_max.to_le_bytes())?;
    w.write_all(&h.k_max.to_le_bytes())?;
    w.write_all(&h.hash)?;
    Ok(())
}

fn read_header(r: &mut impl Read) -> Result<Header> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CoreError::Format("bad magic".into()));
    }
    let mut v4 = [0u8; 4];
    r.read_exact(&mut v4)?;
    let version = u32::from_le_bytes(v4);
    if version != VERSION {
        return Err(CoreError::Format(format!("unsupported version {version}")));
    }
    let mut kind = [0u8; 1];
    r.read_exact(&mut kind)?;
    let mut u8b = [0u8; 8];
    let mut next_u64 = |r: &mut dyn Read| -> Result<u64> {
        r.read_exact(&mut u8b)?;
        Ok(u64::from_le_bytes(u8b))
    };
    let n_x = next_u64(r)?;
    let n_k = next_u64(r)?;
    let mut f8 = [0u8; 8];
    let mut next_f64 = |r: &mut dyn Read| -> Result<f64> {
        r.read_exact(&mut f8)?;
        Ok(f64::from_le_bytes(f8))
    };
    let x_min = next_f64(r)?;
    let x_max = next_f64(r)?;
    let k_max = next_f64(r)?;
    let mut hash = [0u8; 32];
    r.read_exact(&mut hash)?;
    Ok(Header { kind: kind[0], n_x, n_k, x_min, x_max, k_max, hash })
}

fn write_samples(w: &mut impl Write, samples: impl Iterator<Item = C64>) -> Result<()> {
    for z in samples {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    Ok(())
}

/// Write a field dump with an embedded provenance hash.
pub fn write_field(path: &Path, field: &ComplexField, hash: [u8; 32]) -> Result<()> {
    let grid = field.grid();
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_header(
        &mut w,
        &Header {
            kind: KIND_FIELD,
            n_x: grid.num_nodes() as u64,
            n_k: 0,
            x_min: grid.x_min(),
            x_max: grid.x_max(),
            k_max: 0.0,
            hash,
        },
    )?;
    write_samples(&mut w, field.samples().iter().copied())
}

/// Read a field dump onto its own grid.
pub fn read_field(path: &Path) -> Result<(ComplexField, [u8; 32])> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let h = read_header(&mut r)?;
    if h.kind != KIND_FIELD {
        return Err(CoreError::Format(format!("expected field dump, found kind {}", h.kind)));
    }
    let n = h.n_x as usize;
    if n < 2 {
        return Err(CoreError::Format("empty field dump".into()));
    }
    let grid = SpatialGrid::symmetric(h.x_max, n - 1)?;
    if (grid.x_min() - h.x_min).abs() > 1e-12 {
        return Err(CoreError::Format("asymmetric grid in dump".into()));
    }
    let mut buf = vec![0u8; 16 * n];
    r.read_exact(&mut buf)?;
    let samples: ndarray::Array1<C64> = (0..n)
        .map(|j| {
            let re = f64::from_le_bytes(buf[16 * j..16 * j + 8].try_into().unwrap());
            let im = f64::from_le_bytes(buf[16 * j + 8..16 * j + 16].try_into().unwrap());
            C64::new(re, im)
        })
        .collect();
    Ok((ComplexField::new(grid, samples, Parity::None)?, h.hash))
}

/// Resample a field onto another symmetric grid by cubic interpolation
/// (zero outside the source box).
pub fn resample(field: &ComplexField, grid: &Arc<SpatialGrid>) -> Result<ComplexField> {
    let src = field.grid();
    let samples: ndarray::Array1<C64> = grid
        .nodes()
        .iter()
        .map(|&x| {
            if x < src.x_min() || x > src.x_max() {
                C64::new(0.0, 0.0)
            } else {
                crate::diagnostics::interp_field(field, x)
            }
        })
        .collect();
    ComplexField::new(Arc::clone(grid), samples, Parity::None)
}

/// Dump the eigenfunction table `psi(x_j, k_m)` row-major over k.
pub fn write_psi_table(path: &Path, basis: &DistortedBasis, hash: [u8; 32]) -> Result<()> {
    let xg = basis.xgrid();
    let kg = basis.kgrid();
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_header(
        &mut w,
        &Header {
            kind: KIND_PSI_TABLE,
            n_x: xg.num_nodes() as u64,
            n_k: kg.len() as u64,
            x_min: xg.x_min(),
            x_max: xg.x_max(),
            k_max: kg.k_max(),
            hash,
        },
    )?;
    for m in 0..kg.len() {
        write_samples(&mut w, (0..xg.num_nodes()).map(|j| basis.psi_at(m, j)))?;
    }
    Ok(())
}

/// Read back a psi-table dump as raw rows (for reuse or inspection).
pub fn read_psi_table(path: &Path) -> Result<(usize, usize, Vec<C64>, [u8; 32])> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let h = read_header(&mut r)?;
    if h.kind != KIND_PSI_TABLE {
        return Err(CoreError::Format(format!("expected psi table, found kind {}", h.kind)));
    }
    let n_x = h.n_x as usize;
    let n_k = h.n_k as usize;
    let mut data = Vec::with_capacity(n_x * n_k);
    let mut buf = [0u8; 16];
    for _ in 0..n_x * n_k {
        r.read_exact(&mut buf)?;
        data.push(C64::new(
            f64::from_le_bytes(buf[0..8].try_into().unwrap()),
            f64::from_le_bytes(buf[8..16].try_into().unwrap()),
        ));
    }
    Ok((n_k, n_x, data, h.hash))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("field.dfn");
        let grid = SpatialGrid::symmetric(20.0, 128).unwrap();
        let field = ComplexField::from_fn(&grid, Parity::None, |x| C64::new(x.sin(), x.cos()))
            .unwrap();
        let hash = [7u8; 32];
        write_field(&path, &field, hash).unwrap();
        let (back, h) = read_field(&path).unwrap();
        assert_eq!(h, hash);
        assert_eq!(back.grid().num_nodes(), 129);
        for j in 0..129 {
            assert_eq!(back.samples()[j], field.samples()[j]);
        }
    }

    #[test]
    fn rejects_corrupted_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.dfn");
        std::fs::write(&path, b"NOPE additional garbage").unwrap();
        assert!(read_field(&path).is_err());
    }
}
