//! Binary tensor archive used for checkpoints.
//!
//! Little-endian layout: magic `RLLG`, format version `u32`, tensor count
//! `u32`, then per tensor a `u16` name length, the UTF-8 name, a `u8` rank,
//! `rank` dims as `u32` and the `f32` payload. Tensors are ordered
//! lexicographically by name. A trailing `u64` carries the training RNG state.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::numkit::Tensor;

pub const MAGIC: [u8; 4] = *b"RLLG";
pub const FORMAT_VERSION: u32 = 1;

/// Named tensors plus the RNG word.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorArchive {
    pub tensors: BTreeMap<String, Tensor>,
    pub rng_state: u64,
}

impl TensorArchive {
    pub fn encode(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            let bytes = name.as_bytes();
            let len = u16::try_from(bytes.len())
                .map_err(|_| Error::CheckpointMalformed(format!("tensor name too long: {name}")))?;
            let rank = u8::try_from(t.dims().len())
                .map_err(|_| Error::CheckpointMalformed(format!("rank too large: {name}")))?;
            out.extend_from_slice(&len.to_le_bytes());
            out.extend_from_slice(bytes);
            out.push(rank);
            for &d in t.dims() {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for &v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out.extend_from_slice(&self.rng_state.to_le_bytes());
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic: [u8; 4] = r.take(4, "magic")?.try_into().expect("4 bytes");
        if magic != MAGIC {
            return Err(Error::CheckpointMagic { found: magic });
        }
        let version = r.u32("version")?;
        if version != FORMAT_VERSION {
            return Err(Error::CheckpointVersion {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let count = r.u32("tensor count")?;
        let mut tensors = BTreeMap::new();
        let mut previous: Option<String> = None;
        for _ in 0..count {
            let len = r.u16("name length")? as usize;
            let name = std::str::from_utf8(r.take(len, "tensor name")?)
                .map_err(|_| Error::CheckpointMalformed("tensor name is not UTF-8".into()))?
                .to_string();
            if previous.as_ref().is_some_and(|p| *p >= name) {
                return Err(Error::CheckpointMalformed(format!("tensor {name} out of order")));
            }
            let rank = r.take(1, "rank")?[0] as usize;
            let dims: Vec<usize> = (0..rank).map(|_| r.u32("dims").map(|d| d as usize)).collect::<Result<_>>()?;
            let n: usize = dims.iter().product();
            let payload = r.take(n.checked_mul(4).ok_or(Error::CheckpointTruncated { what: "payload" })?, "payload")?;
            let data = payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            let t = Tensor::from_vec(&dims, data).map_err(|e| Error::CheckpointMalformed(format!("{name}: {e}")))?;
            previous = Some(name.clone());
            tensors.insert(name, t);
        }
        let rng_state = u64::from_le_bytes(r.take(8, "rng state")?.try_into().expect("8 bytes"));
        if r.pos != bytes.len() {
            return Err(Error::CheckpointMalformed(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Self { tensors, rng_state })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or(Error::CheckpointTruncated { what })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self, what: &'static str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self, what: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }
}

/// Stores raw bytes as a rank-1 tensor of byte values (each exact in `f32`).
pub fn bytes_to_tensor(bytes: &[u8]) -> Tensor {
    let data: Vec<f32> = if bytes.is_empty() { vec![0.0] } else { bytes.iter().map(|&b| b as f32).collect() };
    let n = data.len();
    Tensor::from_vec(&[n], data).expect("non-empty")
}

pub fn tensor_to_bytes(t: &Tensor) -> Result<Vec<u8>> {
    t.data()
        .iter()
        .map(|&v| {
            if v.fract() == 0.0 && (0.0..=255.0).contains(&v) {
                Ok(v as u8)
            } else {
                Err(Error::CheckpointMalformed(format!("byte tensor holds {v}")))
            }
        })
        .collect()
}
