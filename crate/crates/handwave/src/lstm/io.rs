//! Versioned binary model container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic      6 bytes  b"HWLSTM"
//! version    u16      currently 1
//! tau        u32
//! hidden     u32
//! layers     u32
//! classes    u32
//! tensors    u32      tensor count
//! per tensor:
//!   name_len u16, name bytes (UTF-8)
//!   ndim     u8, dims u32 x ndim
//!   data     f64 x prod(dims), row-major
//! checksum   u64      FNV-1a over every preceding byte
//! ```

use std::fs;
use std::path::Path;

use super::{LstmModel, ModelDims, TensorSet};
use crate::{Error, Result};

const MAGIC: &[u8; 6] = b"HWLSTM";
const VERSION: u16 = 1;

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Serializes a model into the container format.
pub fn model_to_bytes(model: &LstmModel) -> Vec<u8> {
    let dims = model.dims();
    let tensors = model.params().named_tensors();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for v in [dims.tau, dims.hidden, dims.layers, dims.classes] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, shape, data) in tensors {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(shape.len() as u8);
        for d in &shape {
            out.extend_from_slice(&(*d as u32).to_le_bytes());
        }
        for v in data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let checksum = fnv1a64(&out);
    out.extend_from_slice(&checksum.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::ModelFormat("truncated model payload".into()));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
}

/// Deserializes and validates a model container: magic, version, checksum,
/// tensor names and shapes must all match.
pub fn model_from_bytes(bytes: &[u8]) -> Result<LstmModel> {
    if bytes.len() < MAGIC.len() + 2 + 8 {
        return Err(Error::ModelFormat("payload shorter than header".into()));
    }
    let (body, checksum_bytes) = bytes.split_at(bytes.len() - 8);
    let stored = u64::from_le_bytes(checksum_bytes.try_into().unwrap());
    let computed = fnv1a64(body);
    if stored != computed {
        return Err(Error::ModelFormat(format!(
            "checksum mismatch: stored {stored:016x}, computed {computed:016x}"
        )));
    }

    let mut r = Reader { bytes: body, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(Error::ModelFormat("bad magic".into()));
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(Error::ModelFormat(format!(
            "unsupported format version {version}, expected {VERSION}"
        )));
    }
    let dims = ModelDims {
        tau: r.u32()? as usize,
        hidden: r.u32()? as usize,
        layers: r.u32()? as usize,
        classes: r.u32()? as usize,
    };
    dims.validate().map_err(|e| Error::ModelFormat(e.to_string()))?;
    let tensor_count = r.u32()? as usize;

    let mut params = TensorSet::zeros(&dims);
    let expected = params.named_tensors();
    if tensor_count != expected.len() {
        return Err(Error::ModelFormat(format!(
            "expected {} tensors, found {tensor_count}",
            expected.len()
        )));
    }
    let expected_meta: Vec<(String, Vec<usize>)> = expected
        .iter()
        .map(|(name, shape, _)| (name.clone(), shape.clone()))
        .collect();

    let mut loaded: Vec<Vec<f64>> = Vec::with_capacity(tensor_count);
    for (name, shape) in &expected_meta {
        let name_len = r.u16()? as usize;
        let got_name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| Error::ModelFormat("tensor name is not UTF-8".into()))?;
        if got_name != name {
            return Err(Error::ModelFormat(format!(
                "tensor order mismatch: expected `{name}`, found `{got_name}`"
            )));
        }
        let ndim = r.u8()? as usize;
        if ndim != shape.len() {
            return Err(Error::ModelFormat(format!(
                "tensor `{name}`: expected {} dims, found {ndim}",
                shape.len()
            )));
        }
        let mut got_shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            got_shape.push(r.u32()? as usize);
        }
        if &got_shape != shape {
            return Err(Error::ModelFormat(format!(
                "tensor `{name}`: expected shape {shape:?}, found {got_shape:?}"
            )));
        }
        let len: usize = shape.iter().product();
        let raw = r.take(len * 8)?;
        let data: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        loaded.push(data);
    }
    if r.pos != body.len() {
        return Err(Error::ModelFormat("trailing bytes after tensors".into()));
    }

    for (slice, data) in params.tensor_slices_mut().into_iter().zip(&loaded) {
        slice.copy_from_slice(data);
    }
    LstmModel::from_parts(dims, params)
}

pub fn save_model(model: &LstmModel, path: &Path) -> Result<()> {
    fs::write(path, model_to_bytes(model))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<LstmModel> {
    let bytes = fs::read(path)?;
    model_from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::FeatureVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample_model() -> LstmModel {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        LstmModel::init(
            ModelDims { tau: 6, hidden: 3, layers: 2, classes: 3 },
            0.08,
            true,
            &mut rng,
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let model = sample_model();
        let bytes = model_to_bytes(&model);
        let loaded = model_from_bytes(&bytes).unwrap();
        assert_eq!(loaded, model);
        assert_eq!(model_to_bytes(&loaded), bytes);
    }

    #[test]
    fn every_corrupted_byte_is_detected() {
        let model = sample_model();
        let bytes = model_to_bytes(&model);
        for pos in (0..bytes.len()).step_by(37) {
            let mut corrupted = bytes.clone();
            corrupted[pos] ^= 0x40;
            assert!(
                model_from_bytes(&corrupted).is_err(),
                "corruption at byte {pos} went unnoticed"
            );
        }
    }

    #[test]
    fn truncation_is_detected() {
        let bytes = model_to_bytes(&sample_model());
        assert!(model_from_bytes(&bytes[..bytes.len() - 9]).is_err());
        assert!(model_from_bytes(&bytes[..4]).is_err());
    }

    #[test]
    fn loaded_model_guards_input_shape() {
        let model = sample_model();
        let loaded = model_from_bytes(&model_to_bytes(&model)).unwrap();
        let wrong = FeatureVector::new(vec![0.0; 5], 5).unwrap();
        assert!(loaded.forward(&wrong).is_err());
        let right = FeatureVector::new(vec![0.0; 6], 6).unwrap();
        assert!(loaded.forward(&right).is_ok());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        let model = sample_model();
        save_model(&model, &path).unwrap();
        assert_eq!(load_model(&path).unwrap(), model);
    }
}
