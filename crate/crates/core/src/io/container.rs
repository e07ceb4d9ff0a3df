//! Named-tensor container.
//!
//! Byte layout (all integers little-endian):
//!
//! ```text
//! magic    4 bytes  "DUNT"
//! version  u16      1
//! count    u32      number of records
//! record   repeated `count` times:
//!   name_len u16, name (UTF-8)
//!   dtype    u8     0 = real f64, 1 = complex f64 (re, im interleaved)
//!   ndim     u8
//!   dims     ndim x u64
//!   payload  product(dims) x element size, f64 little-endian
//! ```

use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{DType, Tensor};

pub const MAGIC: &[u8; 4] = b"DUNT";
pub const VERSION: u16 = 1;

fn dtype_code(d: DType) -> u8 {
    match d {
        DType::Real => 0,
        DType::Complex => 1,
    }
}

/// Ordered list of uniquely named tensors.
#[derive(Clone, Debug, Default)]
pub struct TensorContainer {
    records: Vec<(String, Tensor)>,
}

impl TensorContainer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds or replaces `name`.
    pub fn insert(&mut self, name: impl Into<String>, tensor: &Tensor) -> Result<()> {
        let name = name.into();
        if name.is_empty() || name.len() > u16::MAX as usize {
            return Err(Error::invalid(
                "container",
                format!("bad record name length {}", name.len()),
            ));
        }
        if tensor.shape().len() > u8::MAX as usize {
            return Err(Error::invalid(
                "container",
                format!("`{name}` has too many dimensions"),
            ));
        }
        let t = tensor.detach();
        match self.records.iter_mut().find(|(n, _)| *n == name) {
            Some(slot) => slot.1 = t,
            None => self.records.push((name, t)),
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.records.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    /// Like [`TensorContainer::get`] but a missing record is an error.
    pub fn require(&self, name: &str) -> Result<&Tensor> {
        self.get(name)
            .ok_or_else(|| Error::invalid("container", format!("missing record `{name}`")))
    }

    pub fn records(&self) -> &[(String, Tensor)] {
        &self.records
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(|(n, _)| n.as_str())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.records.len() as u32).to_le_bytes());
        for (name, t) in &self.records {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(dtype_code(t.dtype()));
            out.push(t.shape().len() as u8);
            for &d in t.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// Parses a container; `origin` only labels errors.
    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        let mut r = Reader {
            bytes,
            pos: 0,
            origin,
        };
        if r.take(4)? != MAGIC {
            return Err(Error::format(origin, "not a tensor container (bad magic)"));
        }
        let version = r.u16()?;
        if version != VERSION {
            return Err(Error::format(
                origin,
                format!("unsupported container version {version}"),
            ));
        }
        let count = r.u32()?;
        let mut c = TensorContainer::new();
        for _ in 0..count {
            let len = r.u16()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| Error::format(origin, "record name is not UTF-8"))?
                .to_string();
            let dtype = match r.u8()? {
                0 => DType::Real,
                1 => DType::Complex,
                code => {
                    return Err(Error::format(
                        origin,
                        format!("`{name}`: unknown dtype code {code}"),
                    ))
                }
            };
            let ndim = r.u8()? as usize;
            let mut shape = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                shape.push(
                    usize::try_from(r.u64()?).map_err(|_| Error::format(origin, "dimension overflow"))?,
                );
            }
            let count = shape
                .iter()
                .try_fold(dtype.width(), |acc: usize, &d| acc.checked_mul(d))
                .filter(|n| n.checked_mul(8).is_some_and(|b| b <= r.remaining()))
                .ok_or_else(|| Error::format(origin, format!("`{name}`: payload exceeds file size")))?;
            let data: Vec<f64> = r
                .take(count * 8)?
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                .collect();
            let t = match dtype {
                DType::Real => Tensor::real(&shape, data)?,
                DType::Complex => Tensor::complex(&shape, data)?,
            };
            if c.get(&name).is_some() {
                return Err(Error::format(origin, format!("duplicate record `{name}`")));
            }
            c.records.push((name, t));
        }
        if r.remaining() != 0 {
            return Err(Error::format(origin, format!("{} trailing bytes", r.remaining())));
        }
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    origin: &'a Path,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(Error::format(self.origin, "unexpected end of file"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
