//! Named-tensor container and its binary format.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "MNWT" | u32 version = 1 | u32 count
//! per tensor: u16 name_len | name (ASCII) | u8 dtype = 0 (f32) | u8 rank
//!             | u32 dims[rank] | f32 data (row-major)
//! u32 CRC-32 (IEEE) of every preceding byte
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::{Tensor, MAX_RANK};

pub const MAGIC: &[u8; 4] = b"MNWT";
pub const VERSION: u32 = 1;
const DTYPE_F32: u8 = 0;

/// Tensors keyed by name, iterated in name order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightStore {
    tensors: BTreeMap<String, Tensor>,
}

fn check_name(name: &str) -> Result<()> {
    if name.is_empty() || !name.is_ascii() || name.len() > u16::MAX as usize {
        return Err(Error::Format(format!("invalid tensor name {name:?}")));
    }
    Ok(())
}

impl WeightStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts or replaces `name`, returning the previous tensor.
    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<Option<Tensor>> {
        let name = name.into();
        check_name(&name)?;
        Ok(self.tensors.insert(name, tensor))
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    /// Looks up `name` and checks its extents.
    pub fn require(&self, name: &str, dims: &[usize]) -> Result<&Tensor> {
        let t = self
            .tensors
            .get(name)
            .ok_or_else(|| Error::Lookup(format!("tensor {name:?} is missing")))?;
        if t.dims() != dims {
            return Err(Error::Lookup(format!(
                "tensor {name:?} has shape {:?}, expected {dims:?}",
                t.dims()
            )));
        }
        Ok(t)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Copies every tensor of `other` into `self`, replacing clashes.
    pub fn merge(&mut self, other: &WeightStore) {
        for (k, v) in &other.tensors {
            self.tensors.insert(k.clone(), v.clone());
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(DTYPE_F32);
            out.push(t.rank() as u8);
            for &d in t.dims() {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for &v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(Error::Format("bad magic, expected MNWT".into()));
        }
        if bytes.len() < 16 {
            return Err(Error::Format("truncated weight file".into()));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
        let actual = crc32fast::hash(body);
        if stored != actual {
            return Err(Error::Format(format!(
                "CRC mismatch: stored {stored:08x}, computed {actual:08x}"
            )));
        }
        let mut cur = Cursor { bytes: body, pos: 4 };
        let version = cur.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let count = cur.u32()?;
        let mut store = WeightStore::new();
        for _ in 0..count {
            let len = cur.u16()? as usize;
            let name = std::str::from_utf8(cur.take(len)?)
                .map_err(|_| Error::Format("tensor name is not ASCII".into()))?
                .to_string();
            check_name(&name)?;
            let dtype = cur.u8()?;
            if dtype != DTYPE_F32 {
                return Err(Error::Format(format!("tensor {name:?}: unknown dtype {dtype}")));
            }
            let rank = cur.u8()? as usize;
            if rank == 0 || rank > MAX_RANK {
                return Err(Error::Format(format!("tensor {name:?}: rank {rank}")));
            }
            let dims = (0..rank)
                .map(|_| cur.u32().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let numel = dims
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .filter(|&n| n <= cur.remaining() / 4)
                .ok_or_else(|| Error::Format(format!("tensor {name:?}: payload truncated")))?;
            let data = cur
                .take(numel * 4)?
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
                .collect();
            let tensor = Tensor::from_vec(&dims, data).map_err(|e| Error::Format(format!("tensor {name:?}: {e}")))?;
            if store.tensors.insert(name.clone(), tensor).is_some() {
                return Err(Error::Format(format!("duplicate tensor name {name:?}")));
            }
        }
        if cur.remaining() != 0 {
            return Err(Error::Format(format!("{} trailing bytes", cur.remaining())));
        }
        Ok(store)
    }

    pub fn save(&self, mut sink: impl Write) -> Result<()> {
        sink.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(mut source: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        source.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn save_file(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(Error::Format("truncated weight file".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}
