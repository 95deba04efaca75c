//! Structured-grid binary field dumps.
//!
//! Layout, all little-endian:
//!
//! ```text
//! b"WGED1"                      magic, 5 bytes
//! u64 nx, u64 ny, u64 nz        grid dims
//! f64 x0 x1 y0 y1 z0 z1         bounding box
//! u32 components
//! u8 complex flag (0 or 1)
//! f64 payload                   row-major [ix][iy][iz][component][re, im]
//! ```
//!
//! Sample points are cell centers of the box. A plain-text sidecar `<file>.txt` names the
//! components.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::C64;

pub const MAGIC: &[u8; 5] = b"WGED1";
const HEADER_LEN: usize = 5 + 3 * 8 + 6 * 8 + 4 + 1;

#[derive(Debug, Clone, PartialEq)]
pub struct FieldDump {
    pub dims: [usize; 3],
    /// `[x0, x1, y0, y1, z0, z1]`
    pub bbox: [f64; 6],
    pub components: usize,
    pub complex: bool,
    pub data: Vec<f64>,
}

impl FieldDump {
    pub fn zeros(dims: [usize; 3], bbox: [f64; 6], components: usize, complex: bool) -> Result<Self> {
        let d = FieldDump { dims, bbox, components, complex, data: Vec::new() };
        let n = d.expected_len()?;
        Ok(FieldDump { data: vec![0.0; n], ..d })
    }

    fn expected_len(&self) -> Result<usize> {
        if self.dims.iter().any(|&n| n == 0) || self.components == 0 {
            return Err(Error::Shape("field dump needs non-empty dims and components".into()));
        }
        if !self.bbox.iter().all(|v| v.is_finite()) || self.bbox[1] < self.bbox[0] || self.bbox[3] < self.bbox[2] || self.bbox[5] < self.bbox[4] {
            return Err(Error::Shape(format!("invalid bounding box {:?}", self.bbox)));
        }
        Ok(self.dims.iter().product::<usize>() * self.components * if self.complex { 2 } else { 1 })
    }

    /// Cell-center coordinates of grid point `(i, j, k)`.
    pub fn point(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        let c = |a: usize, n: usize, lo: f64, hi: f64| lo + (hi - lo) * (a as f64 + 0.5) / n as f64;
        [
            c(i, self.dims[0], self.bbox[0], self.bbox[1]),
            c(j, self.dims[1], self.bbox[2], self.bbox[3]),
            c(k, self.dims[2], self.bbox[4], self.bbox[5]),
        ]
    }

    /// Evaluates `f` at every point; real dumps keep the real part.
    pub fn fill(&mut self, f: impl Fn([f64; 3]) -> Vec<C64> + Sync) {
        use rayon::prelude::*;
        let [nx, ny, nz] = self.dims;
        let stride = self.components * if self.complex { 2 } else { 1 };
        let complex = self.complex;
        let points: Vec<[f64; 3]> = (0..nx * ny * nz).map(|idx| self.point(idx / (ny * nz), (idx / nz) % ny, idx % nz)).collect();
        self.data.par_chunks_mut(stride).zip(points.par_iter()).for_each(|(chunk, x)| {
            for (c, v) in f(*x).iter().enumerate().take(chunk.len()) {
                if complex {
                    chunk[2 * c] = v.re;
                    chunk[2 * c + 1] = v.im;
                } else {
                    chunk[c] = v.re;
                }
            }
        });
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        if self.data.len() != self.expected_len()? {
            return Err(Error::Shape(format!("payload has {} values, dims require {}", self.data.len(), self.expected_len()?)));
        }
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * self.data.len());
        out.extend_from_slice(MAGIC);
        for n in self.dims {
            out.extend_from_slice(&(n as u64).to_le_bytes());
        }
        for v in self.bbox {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&(self.components as u32).to_le_bytes());
        out.push(self.complex as u8);
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self> {
        if b.len() < HEADER_LEN || &b[..5] != MAGIC {
            return Err(Error::Shape("not a WGED1 field dump".into()));
        }
        let u64_at = |o: usize| u64::from_le_bytes(b[o..o + 8].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(b[o..o + 8].try_into().unwrap());
        let dims = [u64_at(5) as usize, u64_at(13) as usize, u64_at(21) as usize];
        let bbox: [f64; 6] = std::array::from_fn(|i| f64_at(29 + 8 * i));
        let components = u32::from_le_bytes(b[77..81].try_into().unwrap()) as usize;
        let complex = match b[81] {
            0 => false,
            1 => true,
            f => return Err(Error::Shape(format!("complex flag must be 0 or 1, got {f}"))),
        };
        let d = FieldDump { dims, bbox, components, complex, data: Vec::new() };
        let n = d.expected_len()?;
        if b.len() != HEADER_LEN + 8 * n {
            return Err(Error::Shape(format!("payload is {} bytes, header requires {}", b.len() - HEADER_LEN, 8 * n)));
        }
        let data = b[HEADER_LEN..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(FieldDump { data, ..d })
    }

    pub fn sidecar_path(path: &Path) -> PathBuf {
        let mut s = path.as_os_str().to_owned();
        s.push(".txt");
        PathBuf::from(s)
    }

    /// Writes the binary file and its sidecar.
    pub fn write(&self, path: &Path, names: &[&str], description: &str) -> Result<()> {
        if names.len() != self.components {
            return Err(Error::Shape(format!("{} component names for {} components", names.len(), self.components)));
        }
        fs::File::create(path)?.write_all(&self.to_bytes()?)?;
        let mut s = format!("format WGED1\n{description}\n");
        s += &format!("dims {} {} {}\n", self.dims[0], self.dims[1], self.dims[2]);
        s += &format!("bbox {} {} {} {} {} {}\n", self.bbox[0], self.bbox[1], self.bbox[2], self.bbox[3], self.bbox[4], self.bbox[5]);
        s += &format!("components {}\ncomplex {}\n", self.components, self.complex as u8);
        s += "order row-major ix iy iz component";
        s += if self.complex { " re-im\n" } else { "\n" };
        s += "points cell centers\n";
        for (i, n) in names.iter().enumerate() {
            s += &format!("component {i} {n}\n");
        }
        fs::write(Self::sidecar_path(path), s)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    pub fn get(&self, i: usize, j: usize, k: usize, c: usize) -> C64 {
        let stride = if self.complex { 2 } else { 1 };
        let idx = (((i * self.dims[1] + j) * self.dims[2] + k) * self.components + c) * stride;
        if self.complex {
            C64::new(self.data[idx], self.data[idx + 1])
        } else {
            C64::new(self.data[idx], 0.0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_exact() {
        let mut d = FieldDump::zeros([2, 1, 3], [0.0, 1.0, -1.0, 1.0, 0.0, 5.0], 2, true).unwrap();
        d.data[0] = 1.5;
        let b = d.to_bytes().unwrap();
        assert_eq!(b.len(), 82 + 2 * 3 * 2 * 2 * 8);
        assert_eq!(&b[..5], b"WGED1");
        assert_eq!(u64::from_le_bytes(b[5..13].try_into().unwrap()), 2);
        assert_eq!(f64::from_le_bytes(b[45..53].try_into().unwrap()), -1.0);
        assert_eq!(b[81], 1);
        assert_eq!(f64::from_le_bytes(b[82..90].try_into().unwrap()), 1.5);
    }

    #[test]
    fn rejects_truncated_payload() {
        let d = FieldDump::zeros([2, 2, 2], [0.0, 1.0, 0.0, 1.0, 0.0, 1.0], 1, false).unwrap();
        let b = d.to_bytes().unwrap();
        assert!(FieldDump::from_bytes(&b[..b.len() - 1]).is_err());
        assert!(FieldDump::from_bytes(b"WGED2").is_err());
    }
}
