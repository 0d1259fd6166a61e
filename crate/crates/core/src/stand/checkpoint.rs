//! Binary container shared by every detector.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      8 bytes  "TSADCKPT"
//! version    u32
//! kind       u32 length + UTF-8
//! config     u32 length + UTF-8 JSON
//! count      u32
//! per tensor:
//!   name     u32 length + UTF-8
//!   rows     u64
//!   cols     u64
//!   payload  rows*cols f64, row-major
//! ```

use std::io::{Read, Write};
use std::path::Path;

use crate::ndcore::Matrix;
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"TSADCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub version: u32,
    pub kind: String,
    pub config_json: String,
    pub tensors: Vec<(String, Matrix)>,
}

fn put_str<W: Write>(w: &mut W, s: &str) -> Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn get_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|e| Error::Checkpoint(format!("truncated checkpoint: {e}")))?;
    Ok(u32::from_le_bytes(b))
}

fn get_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)
        .map_err(|e| Error::Checkpoint(format!("truncated checkpoint: {e}")))?;
    Ok(u64::from_le_bytes(b))
}

fn get_str<R: Read>(r: &mut R) -> Result<String> {
    let n = get_u32(r)? as usize;
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Checkpoint(format!("truncated checkpoint: {e}")))?;
    String::from_utf8(buf).map_err(|_| Error::Checkpoint("string field is not UTF-8".into()))
}

impl Checkpoint {
    pub fn new(
        kind: impl Into<String>,
        config_json: String,
        tensors: Vec<(String, Matrix)>,
    ) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            kind: kind.into(),
            config_json,
            tensors,
        }
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&self.version.to_le_bytes())?;
        put_str(&mut w, &self.kind)?;
        put_str(&mut w, &self.config_json)?;
        w.write_all(&(self.tensors.len() as u32).to_le_bytes())?;
        for (name, m) in &self.tensors {
            put_str(&mut w, name)?;
            w.write_all(&(m.rows() as u64).to_le_bytes())?;
            w.write_all(&(m.cols() as u64).to_le_bytes())?;
            for v in m.as_slice() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)
            .map_err(|_| Error::Checkpoint("file too short for header".into()))?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("bad magic; not a checkpoint file".into()));
        }
        let version = get_u32(&mut r)?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let kind = get_str(&mut r)?;
        let config_json = get_str(&mut r)?;
        let count = get_u32(&mut r)? as usize;
        let mut tensors = Vec::with_capacity(count);
        for _ in 0..count {
            let name = get_str(&mut r)?;
            let rows = get_u64(&mut r)? as usize;
            let cols = get_u64(&mut r)? as usize;
            let n = rows
                .checked_mul(cols)
                .ok_or_else(|| Error::Checkpoint(format!("tensor {name} too large")))?;
            let mut bytes = vec![0u8; n * 8];
            r.read_exact(&mut bytes)
                .map_err(|_| Error::Checkpoint(format!("truncated payload for {name}")))?;
            let values = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            tensors.push((name, Matrix::from_vec(rows, cols, values)?));
        }
        Ok(Self {
            version,
            kind,
            config_json,
            tensors,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(f))
    }

    pub fn tensor(&self, name: &str) -> Result<&Matrix> {
        self.tensors
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, m)| m)
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")))
    }
}
