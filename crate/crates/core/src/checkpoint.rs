//! `ILCM` model checkpoints.
//!
//! Layout (all integers little-endian `u32`):
//!
//! ```text
//! "ILCM" | version | descriptor_len | descriptor (UTF-8) | tensor_count
//! per tensor: name_len | name | rank | dims[rank] | data (f32 LE, row-major)
//! ```
//!
//! Tensors appear in the order documented by the owning model. A JSON
//! sidecar (`<file>.json`) carries hyperparameters and the seed.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"ILCM";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn from_f64(name: &str, shape: &[usize], data: &[f64]) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor {
            name: name.to_string(),
            shape: shape.to_vec(),
            data: data.iter().map(|&x| x as f32).collect(),
        }
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&x| x as f64).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub descriptor: String,
    pub tensors: Vec<Tensor>,
}

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Format(format!("{v} does not fit in u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn put_str(out: &mut Vec<u8>, s: &str) -> Result<()> {
    put_u32(out, s.len())?;
    out.extend_from_slice(s.as_bytes());
    Ok(())
}

pub(crate) struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Cursor { buf, pos: 0 }
    }

    pub(crate) fn at_end(&self) -> bool {
        self.pos == self.buf.len()
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Format("truncated binary file".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub(crate) fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    pub(crate) fn string(&mut self) -> Result<String> {
        let n = self.u32()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Format("invalid UTF-8 in binary file".into()))
    }

    pub(crate) fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| Error::Format("tensor too large".into()))?)?;
        Ok(bytes.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect())
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, VERSION as usize)?;
        put_str(&mut out, &self.descriptor)?;
        put_u32(&mut out, self.tensors.len())?;
        for t in &self.tensors {
            put_str(&mut out, &t.name)?;
            put_u32(&mut out, t.shape.len())?;
            for &d in &t.shape {
                put_u32(&mut out, d)?;
            }
            for x in &t.data {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut cur = Cursor::new(buf);
        if cur.take(4)? != MAGIC {
            return Err(Error::Format("not an ILCM checkpoint".into()));
        }
        let version = cur.u32()?;
        if version != VERSION as usize {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let descriptor = cur.string()?;
        let count = cur.u32()?;
        let mut tensors = Vec::with_capacity(count.min(64));
        for _ in 0..count {
            let name = cur.string()?;
            let rank = cur.u32()?;
            let shape = (0..rank).map(|_| cur.u32()).collect::<Result<Vec<_>>>()?;
            let data = cur.f32s(shape.iter().product())?;
            tensors.push(Tensor { name, shape, data });
        }
        if !cur.at_end() {
            return Err(Error::Format("trailing bytes after checkpoint".into()));
        }
        Ok(Checkpoint { descriptor, tensors })
    }

    pub fn save(&self, path: impl AsRef<Path>, sidecar: &serde_json::Value) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()?).map_err(Error::io(path))?;
        let side = sidecar_path(path);
        let text = serde_json::to_string_pretty(sidecar)?;
        fs::write(&side, text + "\n").map_err(Error::io(&side))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Self, serde_json::Value)> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(Error::io(path))?;
        let ckpt = Self::from_bytes(&bytes)?;
        let side = sidecar_path(path);
        let text = fs::read_to_string(&side).map_err(Error::io(&side))?;
        Ok((ckpt, serde_json::from_str(&text)?))
    }

    /// Removes and returns the named tensor, checking its shape.
    pub fn take(&mut self, name: &str, shape: &[usize]) -> Result<Vec<f64>> {
        let pos = self
            .tensors
            .iter()
            .position(|t| t.name == name)
            .ok_or_else(|| Error::Format(format!("checkpoint lacks tensor {name:?}")))?;
        let t = self.tensors.remove(pos);
        if t.shape != shape {
            return Err(Error::Format(format!("tensor {name:?} has shape {:?}, expected {shape:?}", t.shape)));
        }
        Ok(t.to_f64())
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_truncation() {
        let ckpt = Checkpoint {
            descriptor: "mlp2".into(),
            tensors: vec![
                Tensor::from_f64("w1", &[2, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.5]),
                Tensor::from_f64("b1", &[2], &[-1.0, 0.25]),
            ],
        };
        let bytes = ckpt.to_bytes().unwrap();
        assert_eq!(&bytes[..4], b"ILCM");
        assert_eq!(Checkpoint::from_bytes(&bytes).unwrap(), ckpt);
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Checkpoint::from_bytes(&bad).is_err());
    }

    #[test]
    fn take_checks_shape() {
        let mut ckpt = Checkpoint {
            descriptor: "x".into(),
            tensors: vec![Tensor::from_f64("a", &[2], &[1.0, 2.0])],
        };
        assert!(ckpt.clone().take("a", &[3]).is_err());
        assert!(ckpt.clone().take("b", &[2]).is_err());
        assert_eq!(ckpt.take("a", &[2]).unwrap(), vec![1.0, 2.0]);
    }
}
