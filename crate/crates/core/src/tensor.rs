//! Portable tensor container: one JSON header line, then raw little-endian
//! payload in row-major order.
//!
//! Two payload dtypes exist: `f32` (4-byte reals) and `c64` (complex values
//! stored as two 8-byte doubles, re then im). Complex data round-trips
//! bit-exactly, which the spatial-response cache relies on. Every file
//! written here carries a `payload_sha256` entry in its metadata; readers
//! verify it, so a tampered or truncated file is rejected instead of
//! silently propagating.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde_json::{Map, Value};

use crate::error::{MrfError, Result};
use crate::util::sha256_hex;

pub const MAGIC: &str = "MRFTENSOR";
pub const VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32,
    C64,
}

impl Dtype {
    pub fn size_bytes(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::C64 => 16,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Dtype::F32 => "f32",
            Dtype::C64 => "c64",
        }
    }

    fn from_name(s: &str) -> Result<Self> {
        match s {
            "f32" => Ok(Dtype::F32),
            "c64" => Ok(Dtype::C64),
            other => Err(MrfError::format(format!("unknown dtype '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Payload {
    F32(Vec<f32>),
    C64(Vec<Complex64>),
}

impl Payload {
    pub fn dtype(&self) -> Dtype {
        match self {
            Payload::F32(_) => Dtype::F32,
            Payload::C64(_) => Dtype::C64,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Payload::F32(v) => v.len(),
            Payload::C64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn to_bytes(&self) -> Vec<u8> {
        match self {
            Payload::F32(v) => {
                let mut out = Vec::with_capacity(v.len() * 4);
                for x in v {
                    out.extend_from_slice(&x.to_le_bytes());
                }
                out
            }
            Payload::C64(v) => {
                let mut out = Vec::with_capacity(v.len() * 16);
                for z in v {
                    out.extend_from_slice(&z.re.to_le_bytes());
                    out.extend_from_slice(&z.im.to_le_bytes());
                }
                out
            }
        }
    }

    fn from_bytes(dtype: Dtype, bytes: &[u8]) -> Payload {
        match dtype {
            Dtype::F32 => Payload::F32(
                bytes
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            ),
            Dtype::C64 => Payload::C64(
                bytes
                    .chunks_exact(16)
                    .map(|c| {
                        Complex64::new(
                            f64::from_le_bytes(c[0..8].try_into().unwrap()),
                            f64::from_le_bytes(c[8..16].try_into().unwrap()),
                        )
                    })
                    .collect(),
            ),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TensorFile {
    pub shape: Vec<usize>,
    pub meta: Map<String, Value>,
    pub payload: Payload,
}

impl TensorFile {
    pub fn new_f32(shape: Vec<usize>, data: Vec<f32>, meta: Map<String, Value>) -> Result<Self> {
        check_shape(&shape, data.len())?;
        Ok(TensorFile {
            shape,
            meta,
            payload: Payload::F32(data),
        })
    }

    pub fn new_c64(
        shape: Vec<usize>,
        data: Vec<Complex64>,
        meta: Map<String, Value>,
    ) -> Result<Self> {
        check_shape(&shape, data.len())?;
        Ok(TensorFile {
            shape,
            meta,
            payload: Payload::C64(data),
        })
    }

    pub fn f32_data(&self) -> Result<&[f32]> {
        match &self.payload {
            Payload::F32(v) => Ok(v),
            Payload::C64(_) => Err(MrfError::format("expected f32 payload, found c64")),
        }
    }

    pub fn c64_data(&self) -> Result<&[Complex64]> {
        match &self.payload {
            Payload::C64(v) => Ok(v),
            Payload::F32(_) => Err(MrfError::format("expected c64 payload, found f32")),
        }
    }

    pub fn meta_str(&self, key: &str) -> Result<&str> {
        self.meta
            .get(key)
            .and_then(Value::as_str)
            .ok_or_else(|| MrfError::format(format!("missing or non-string meta key '{key}'")))
    }

    pub fn meta_u64(&self, key: &str) -> Result<u64> {
        self.meta
            .get(key)
            .and_then(Value::as_u64)
            .ok_or_else(|| MrfError::format(format!("missing or non-integer meta key '{key}'")))
    }

    pub fn meta_f64(&self, key: &str) -> Result<f64> {
        self.meta
            .get(key)
            .and_then(Value::as_f64)
            .ok_or_else(|| MrfError::format(format!("missing or non-number meta key '{key}'")))
    }

    /// Serialize to header line + payload bytes, inserting the payload hash.
    pub fn encode(&self) -> Vec<u8> {
        let payload = self.payload.to_bytes();
        let mut meta = self.meta.clone();
        meta.insert(
            "payload_sha256".to_string(),
            Value::String(sha256_hex(&payload)),
        );
        let header = serde_json::json!({
            "magic": MAGIC,
            "version": VERSION,
            "dtype": self.payload.dtype().name(),
            "shape": self.shape,
            "meta": meta,
        });
        let mut out = serde_json::to_string(&header).expect("header serializes").into_bytes();
        out.push(b'\n');
        out.extend_from_slice(&payload);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let newline = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| MrfError::format("missing header newline"))?;
        let header: Value = serde_json::from_slice(&bytes[..newline])
            .map_err(|e| MrfError::format(format!("malformed header json: {e}")))?;
        let magic = header.get("magic").and_then(Value::as_str).unwrap_or("");
        if magic != MAGIC {
            return Err(MrfError::format(format!("bad magic '{magic}'")));
        }
        let version = header.get("version").and_then(Value::as_u64).unwrap_or(0);
        if version != VERSION {
            return Err(MrfError::format(format!("unsupported version {version}")));
        }
        let dtype = Dtype::from_name(
            header
                .get("dtype")
                .and_then(Value::as_str)
                .ok_or_else(|| MrfError::format("missing dtype"))?,
        )?;
        let shape: Vec<usize> = header
            .get("shape")
            .and_then(Value::as_array)
            .ok_or_else(|| MrfError::format("missing shape"))?
            .iter()
            .map(|v| {
                v.as_u64()
                    .map(|n| n as usize)
                    .ok_or_else(|| MrfError::format("non-integer shape entry"))
            })
            .collect::<Result<_>>()?;
        let meta = header
            .get("meta")
            .and_then(Value::as_object)
            .cloned()
            .unwrap_or_default();

        let payload_bytes = &bytes[newline + 1..];
        let expected_len: usize = shape.iter().product::<usize>() * dtype.size_bytes();
        if payload_bytes.len() != expected_len {
            return Err(MrfError::format(format!(
                "payload length {} does not match shape (expected {expected_len} bytes)",
                payload_bytes.len()
            )));
        }
        if let Some(stored) = meta.get("payload_sha256").and_then(Value::as_str) {
            let actual = sha256_hex(payload_bytes);
            if stored != actual {
                return Err(MrfError::format(
                    "payload hash mismatch: file is corrupt or tampered",
                ));
            }
        }
        Ok(TensorFile {
            shape,
            meta,
            payload: Payload::from_bytes(dtype, payload_bytes),
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(&self.encode())?;
        w.flush()?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let mut bytes = Vec::new();
        BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
        Self::decode(&bytes)
    }
}

fn check_shape(shape: &[usize], len: usize) -> Result<()> {
    let product: usize = shape.iter().product();
    if product != len {
        return Err(MrfError::invalid(format!(
            "shape {shape:?} implies {product} elements, got {len}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_payload_tamper() {
        let t = TensorFile::new_f32(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0], Map::new()).unwrap();
        let mut bytes = t.encode();
        let n = bytes.len();
        bytes[n - 1] ^= 0x01;
        let err = TensorFile::decode(&bytes).unwrap_err();
        assert!(matches!(err, MrfError::Format(_)));
    }

    #[test]
    fn rejects_shape_mismatch() {
        assert!(TensorFile::new_f32(vec![3], vec![1.0], Map::new()).is_err());
    }

    #[test]
    fn rejects_bad_magic() {
        let t = TensorFile::new_f32(vec![1], vec![0.5], Map::new()).unwrap();
        let mut bytes = t.encode();
        bytes[2] = b'X';
        assert!(TensorFile::decode(&bytes).is_err());
    }

    proptest! {
        #[test]
        fn c64_round_trip_is_bit_exact(values in proptest::collection::vec((any::<f64>(), any::<f64>()), 1..64)) {
            let data: Vec<Complex64> = values.iter().map(|&(re, im)| Complex64::new(re, im)).collect();
            let t = TensorFile::new_c64(vec![data.len()], data.clone(), Map::new()).unwrap();
            let back = TensorFile::decode(&t.encode()).unwrap();
            let out = back.c64_data().unwrap();
            for (a, b) in data.iter().zip(out) {
                prop_assert_eq!(a.re.to_bits(), b.re.to_bits());
                prop_assert_eq!(a.im.to_bits(), b.im.to_bits());
            }
        }

        #[test]
        fn f32_round_trip_is_bit_exact(data in proptest::collection::vec(any::<f32>(), 1..64)) {
            let t = TensorFile::new_f32(vec![data.len()], data.clone(), Map::new()).unwrap();
            let back = TensorFile::decode(&t.encode()).unwrap();
            let out = back.f32_data().unwrap();
            for (a, b) in data.iter().zip(out) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
