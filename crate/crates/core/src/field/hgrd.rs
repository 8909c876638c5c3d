//! `HGRD` grid files.
//!
//! Layout: 16-byte header (`b"HGRD"`, little-endian `u32` version, 8 zero
//! bytes), then `u32` dimension `d`, `u32` resolution `r`, `u32` components `c`,
//! then `c·r^d` little-endian `f64` values, row-major with axis 0 slowest and the
//! component index fastest.

use std::io::{Read, Write};
use std::path::Path;

use super::grid::{ScalarGrid, VectorGrid};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"HGRD";
pub const VERSION: u32 = 1;

fn write_raw(mut w: impl Write, dim: usize, res: usize, comps: usize, values: impl Iterator<Item = f64>) -> Result<()> {
    let mut header = [0u8; 16];
    header[..4].copy_from_slice(MAGIC);
    header[4..8].copy_from_slice(&VERSION.to_le_bytes());
    w.write_all(&header)?;
    for v in [dim, res, comps] {
        w.write_all(&(v as u32).to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(comps * res.pow(dim as u32) * 8);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

struct RawGrid {
    dim: usize,
    res: usize,
    comps: usize,
    values: Vec<f64>,
}

fn read_raw(mut r: impl Read) -> Result<RawGrid> {
    let mut header = [0u8; 28];
    r.read_exact(&mut header).map_err(|_| Error::Format("truncated HGRD header".into()))?;
    if &header[..4] != MAGIC {
        return Err(Error::Format("bad HGRD magic".into()));
    }
    let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap()) as usize;
    if word(4) as u32 != VERSION {
        return Err(Error::Format(format!("unsupported HGRD version {}", word(4))));
    }
    let (dim, res, comps) = (word(16), word(20), word(24));
    if !(dim == 2 || dim == 3) || res < 2 || comps == 0 {
        return Err(Error::Format(format!("bad HGRD shape d={dim} r={res} c={comps}")));
    }
    let count = comps * res.pow(dim as u32);
    let mut bytes = vec![0u8; count * 8];
    r.read_exact(&mut bytes).map_err(|_| Error::Format("truncated HGRD payload".into()))?;
    let values = bytes.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
    Ok(RawGrid { dim, res, comps, values })
}

impl ScalarGrid {
    pub fn write_hgrd(&self, w: impl Write) -> Result<()> {
        write_raw(w, self.dim(), self.res(), 1, self.values().iter().copied())
    }

    pub fn read_hgrd(r: impl Read) -> Result<Self> {
        let raw = read_raw(r)?;
        if raw.comps != 1 {
            return Err(Error::Format(format!("expected a scalar grid, found {} components", raw.comps)));
        }
        ScalarGrid::from_values(raw.dim, raw.res, raw.values)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_hgrd(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_hgrd(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

impl VectorGrid {
    pub fn write_hgrd(&self, w: impl Write) -> Result<()> {
        let comps = self.components();
        let values = (0..self.cells()).flat_map(|i| comps.iter().map(move |c| c[i]));
        write_raw(w, self.dim(), self.res(), self.dim(), values)
    }

    pub fn read_hgrd(r: impl Read) -> Result<Self> {
        let raw = read_raw(r)?;
        if raw.comps != raw.dim {
            return Err(Error::Format(format!(
                "expected {} components, found {}",
                raw.dim, raw.comps
            )));
        }
        let comps = (0..raw.comps)
            .map(|c| raw.values.iter().skip(c).step_by(raw.comps).copied().collect())
            .collect();
        VectorGrid::from_components(raw.dim, raw.res, comps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let g = ScalarGrid::from_fn(2, 2, |p| p[0]).unwrap();
        let mut buf = Vec::new();
        g.write_hgrd(&mut buf).unwrap();
        assert_eq!(buf.len(), 16 + 12 + 4 * 8);
        assert_eq!(&buf[..4], b"HGRD");
        assert_eq!(&buf[16..28], &[2, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0]);
        assert_eq!(f64::from_le_bytes(buf[28..36].try_into().unwrap()), 0.25);
    }

    #[test]
    fn vector_components_are_interleaved() {
        let q = VectorGrid::from_fn(2, 2, |p| vec![p[0], -p[1]]).unwrap();
        let mut buf = Vec::new();
        q.write_hgrd(&mut buf).unwrap();
        let second = f64::from_le_bytes(buf[36..44].try_into().unwrap());
        assert_eq!(second, -0.25);
        assert_eq!(VectorGrid::read_hgrd(&buf[..]).unwrap(), q);
    }

    #[test]
    fn rejects_garbage() {
        assert!(ScalarGrid::read_hgrd(&b"NOPE"[..]).is_err());
        let g = ScalarGrid::zeros(3, 4).unwrap();
        let mut buf = Vec::new();
        g.write_hgrd(&mut buf).unwrap();
        buf.truncate(buf.len() - 1);
        assert!(matches!(ScalarGrid::read_hgrd(&buf[..]), Err(Error::Format(_))));
    }

    proptest! {
        #[test]
        fn roundtrip(values in proptest::collection::vec(-1e6f64..1e6, 64)) {
            let g = ScalarGrid::from_values(3, 4, values).unwrap();
            let mut buf = Vec::new();
            g.write_hgrd(&mut buf).unwrap();
            prop_assert_eq!(ScalarGrid::read_hgrd(&buf[..]).unwrap(), g);
        }
    }
}
