//! Named-tensor checkpoint container.
//!
//! Little-endian layout: magic `PUW1`, u32 tensor count, then per tensor a
//! u16 name length, the UTF-8 name bytes, a u8 rank, u32 dimensions, and the
//! float32 data. In-memory tensors are f64; serialization rounds once to
//! f32, which is also what keeps checkpoint files compact.

use std::fs;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::tensor::Tensor;

const MAGIC: &[u8; 4] = b"PUW1";

/// An ordered bundle of named tensors; order is part of the byte format, so
/// two checkpoints of the same model compare byte-for-byte.
#[derive(Debug, Clone, Default)]
pub struct ModelCheckpoint {
    pub tensors: Vec<(String, Tensor)>,
}

impl ModelCheckpoint {
    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
    }

    pub fn push(&mut self, name: impl Into<String>, tensor: Tensor) {
        self.tensors.push((name.into(), tensor));
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, tensor) in &self.tensors {
            let name_bytes = name.as_bytes();
            buf.extend_from_slice(&(name_bytes.len() as u16).to_le_bytes());
            buf.extend_from_slice(name_bytes);
            buf.push(tensor.shape().len() as u8);
            for &d in tensor.shape() {
                buf.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for &v in tensor.data() {
                buf.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        fs::write(path, &buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<ModelCheckpoint> {
        if !path.exists() {
            return Err(Error::MissingCheckpoint {
                path: path.to_path_buf(),
            });
        }
        let mut bytes = Vec::new();
        fs::File::open(path)
            .map_err(|e| Error::io(path, e))?
            .read_to_end(&mut bytes)
            .map_err(|e| Error::io(path, e))?;
        let fail = |detail: &str| Error::Format {
            path: path.to_path_buf(),
            detail: detail.to_string(),
        };
        if bytes.len() < 8 || &bytes[0..4] != MAGIC {
            return Err(fail("missing PUW1 magic"));
        }
        let count = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let mut off = 8usize;
        let mut tensors = Vec::with_capacity(count);
        for _ in 0..count {
            if off + 2 > bytes.len() {
                return Err(fail("truncated name length"));
            }
            let name_len = u16::from_le_bytes(bytes[off..off + 2].try_into().unwrap()) as usize;
            off += 2;
            if off + name_len > bytes.len() {
                return Err(fail("truncated name"));
            }
            let name = std::str::from_utf8(&bytes[off..off + name_len])
                .map_err(|_| fail("name is not UTF-8"))?
                .to_string();
            off += name_len;
            if off >= bytes.len() {
                return Err(fail("truncated rank"));
            }
            let rank = bytes[off] as usize;
            off += 1;
            if off + 4 * rank > bytes.len() {
                return Err(fail("truncated dimensions"));
            }
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as usize);
                off += 4;
            }
            let n: usize = shape.iter().product();
            if off + 4 * n > bytes.len() {
                return Err(fail("truncated tensor data"));
            }
            let data = bytes[off..off + 4 * n]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect();
            off += 4 * n;
            tensors.push((name, Tensor::from_vec(&shape, data)?));
        }
        Ok(ModelCheckpoint { tensors })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_names_shapes_and_f32_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.puw");
        let mut ckpt = ModelCheckpoint::default();
        ckpt.push(
            "layer.weight",
            Tensor::from_vec(&[2, 1, 1, 1], vec![0.25, -3.5]).unwrap(),
        );
        ckpt.push("layer.bias", Tensor::from_vec(&[2], vec![0.1, 0.2]).unwrap());
        ckpt.save(&path).unwrap();
        let back = ModelCheckpoint::load(&path).unwrap();
        assert_eq!(back.tensors.len(), 2);
        assert_eq!(back.get("layer.weight").unwrap().shape(), &[2, 1, 1, 1]);
        assert_eq!(back.get("layer.weight").unwrap().data(), &[0.25, -3.5]);
        // f32 rounding applies exactly once.
        assert_eq!(
            back.get("layer.bias").unwrap().data()[0],
            0.1f32 as f64
        );
    }

    #[test]
    fn missing_file_is_a_distinct_error() {
        let err = ModelCheckpoint::load(Path::new("/nonexistent/model.puw")).unwrap_err();
        assert!(matches!(err, Error::MissingCheckpoint { .. }));
    }

    #[test]
    fn header_bytes_are_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.puw");
        let mut ckpt = ModelCheckpoint::default();
        ckpt.push("ab", Tensor::from_vec(&[1], vec![1.0]).unwrap());
        ckpt.save(&path).unwrap();
        let bytes = fs::read(&path).unwrap();
        let expected = [
            b'P', b'U', b'W', b'1', 1, 0, 0, 0, // magic + count
            2, 0, b'a', b'b', // name
            1, 1, 0, 0, 0, // rank + dim
            0x00, 0x00, 0x80, 0x3f, // 1.0f32
        ];
        assert_eq!(bytes, expected);
    }
}
