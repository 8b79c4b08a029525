//! Single-file containers: embedding batches (`EMBD`) and encoder
//! parameters (`PARM`). Both start with `BRPG`, `u32` version and a 4-byte
//! kind tag.
//!
//! ```text
//! EMBD: u32 n, u32 d, f64 temperature, n·d f64 z_brep, n·d f64 z_text
//! PARM: u64 seed, u32 D, u32 tensor_count, then per tensor:
//!       u32 name_len, name (UTF-8), u32 ndim, ndim × u32 dims, f32 values
//! ```
//!
//! Embeddings keep full `f64` precision because gradient checks run in
//! double precision. Parameters are stored as `f32`; initialization only
//! produces `f32`-representable values, and the writer rejects anything else.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::bytes::{ByteReader, ByteWriter};
use super::{io_err, DatasetError, FORMAT_VERSION, MAGIC};
use crate::align::EmbeddingBatch;
use crate::encoder::{init_encoder, EncoderParams};

const EMBEDDING_TAG: &[u8; 4] = b"EMBD";
const PARAMS_TAG: &[u8; 4] = b"PARM";

fn header(w: &mut ByteWriter, tag: &[u8; 4]) {
    w.bytes(MAGIC);
    w.u32(FORMAT_VERSION);
    w.bytes(tag);
}

fn check_header(r: &mut ByteReader, tag: &[u8; 4]) -> Result<(), DatasetError> {
    if r.take(4)? != MAGIC {
        return Err(DatasetError::Magic);
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(DatasetError::Version {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let found = r.take(4)?;
    if found != tag {
        return Err(DatasetError::Corrupt(format!(
            "container kind {:?}, expected {:?}",
            String::from_utf8_lossy(found),
            String::from_utf8_lossy(tag)
        )));
    }
    Ok(())
}

fn dim(v: usize, what: &str) -> Result<u32, DatasetError> {
    u32::try_from(v).map_err(|_| DatasetError::Corrupt(format!("{what} {v} exceeds u32")))
}

pub fn encode_embedding_batch(batch: &EmbeddingBatch) -> Result<Vec<u8>, DatasetError> {
    if batch.z_brep.dim() != batch.z_text.dim() {
        return Err(DatasetError::Corrupt(format!(
            "z_brep {:?} and z_text {:?} differ in shape",
            batch.z_brep.dim(),
            batch.z_text.dim()
        )));
    }
    let (n, d) = batch.z_brep.dim();
    let mut w = ByteWriter::default();
    header(&mut w, EMBEDDING_TAG);
    w.u32(dim(n, "batch size")?);
    w.u32(dim(d, "embedding width")?);
    w.f64s([batch.temperature].iter());
    w.f64s(batch.z_brep.iter());
    w.f64s(batch.z_text.iter());
    Ok(w.buf)
}

pub fn decode_embedding_batch(bytes: &[u8]) -> Result<EmbeddingBatch, DatasetError> {
    let mut r = ByteReader::new(bytes, "embedding batch");
    check_header(&mut r, EMBEDDING_TAG)?;
    let n = r.u32()? as usize;
    let d = r.u32()? as usize;
    let temperature = r.f64s(1)?[0];
    let len = n
        .checked_mul(d)
        .ok_or_else(|| DatasetError::Corrupt("batch size overflow".into()))?;
    let z_brep = Array2::from_shape_vec((n, d), r.f64s(len)?).expect("sized");
    let z_text = Array2::from_shape_vec((n, d), r.f64s(len)?).expect("sized");
    r.finish()?;
    Ok(EmbeddingBatch {
        z_brep,
        z_text,
        temperature,
    })
}

pub fn encode_params(params: &EncoderParams) -> Result<Vec<u8>, DatasetError> {
    let tensors = params.tensors();
    let mut w = ByteWriter::default();
    header(&mut w, PARAMS_TAG);
    w.u64(params.seed);
    w.u32(dim(params.d, "projection width")?);
    w.u32(dim(tensors.len(), "tensor count")?);
    for (name, t) in &tensors {
        w.u32(dim(name.len(), "name length")?);
        w.bytes(name.as_bytes());
        w.u32(dim(t.ndim(), "rank")?);
        for &s in t.shape() {
            w.u32(dim(s, "dimension")?);
        }
        for &v in t.iter() {
            let narrow = v as f32;
            if f64::from(narrow) != v && !v.is_nan() {
                return Err(DatasetError::NotF32 {
                    tensor: name.clone(),
                    value: v,
                });
            }
            w.f32s([narrow].iter());
        }
    }
    Ok(w.buf)
}

/// Rebuild parameters: the structure comes from `(seed, D)` in the header,
/// every tensor is then overwritten from the file. Names, order and shapes
/// must match exactly.
pub fn decode_params(bytes: &[u8]) -> Result<EncoderParams, DatasetError> {
    let mut r = ByteReader::new(bytes, "encoder params");
    check_header(&mut r, PARAMS_TAG)?;
    let seed = r.u64()?;
    let d = r.u32()? as usize;
    let count = r.u32()? as usize;
    let mut params =
        init_encoder(seed, d).map_err(|e| DatasetError::Corrupt(format!("params header: {e}")))?;
    let mut slots = params.tensors_mut();
    if slots.len() != count {
        return Err(DatasetError::Corrupt(format!(
            "{count} tensors stored, {} expected",
            slots.len()
        )));
    }
    for (name, slot) in slots.iter_mut() {
        let len = r.u32()? as usize;
        let stored = String::from_utf8(r.take(len)?.to_vec())
            .map_err(|_| DatasetError::Corrupt("tensor name is not UTF-8".into()))?;
        if &stored != name {
            return Err(DatasetError::Corrupt(format!(
                "tensor {stored:?} where {name:?} was expected"
            )));
        }
        let ndim = r.u32()? as usize;
        let shape = (0..ndim)
            .map(|_| r.u32().map(|v| v as usize))
            .collect::<Result<Vec<_>, _>>()?;
        if shape != slot.shape() {
            return Err(DatasetError::Corrupt(format!(
                "tensor {name}: shape {shape:?}, expected {:?}",
                slot.shape()
            )));
        }
        let values = r.f32s(slot.len())?;
        for (dst, v) in slot.iter_mut().zip(values) {
            *dst = f64::from(v);
        }
    }
    r.finish()?;
    drop(slots);
    Ok(params)
}

pub fn write_embedding_batch(batch: &EmbeddingBatch, path: &Path) -> Result<(), DatasetError> {
    fs::write(path, encode_embedding_batch(batch)?).map_err(io_err(path))
}

pub fn read_embedding_batch(path: &Path) -> Result<EmbeddingBatch, DatasetError> {
    decode_embedding_batch(&fs::read(path).map_err(io_err(path))?)
}

pub fn write_params(params: &EncoderParams, path: &Path) -> Result<(), DatasetError> {
    fs::write(path, encode_params(params)?).map_err(io_err(path))
}

pub fn read_params(path: &Path) -> Result<EncoderParams, DatasetError> {
    decode_params(&fs::read(path).map_err(io_err(path))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn embedding_batch_round_trips_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut draw = || Array2::from_shape_simple_fn((3, 5), || rng.random_range(-1.0..1.0));
        let b = EmbeddingBatch {
            z_brep: draw(),
            z_text: draw(),
            temperature: 0.07,
        };
        let bytes = encode_embedding_batch(&b).unwrap();
        let back = decode_embedding_batch(&bytes).unwrap();
        assert_eq!(back, b);
        assert_eq!(encode_embedding_batch(&back).unwrap(), bytes);
    }

    #[test]
    fn params_round_trip_bitwise() {
        let p = init_encoder(11, 24).unwrap();
        let bytes = encode_params(&p).unwrap();
        let back = decode_params(&bytes).unwrap();
        assert_eq!(back, p);
        assert_eq!(encode_params(&back).unwrap(), bytes);
    }

    #[test]
    fn params_are_restored_from_bytes_not_seed() {
        let mut p = init_encoder(11, 4).unwrap();
        p.clip.bias[0] = 0.25;
        let back = decode_params(&encode_params(&p).unwrap()).unwrap();
        assert_eq!(back.clip.bias[0], 0.25);
    }

    #[test]
    fn non_f32_params_are_rejected() {
        let mut p = init_encoder(11, 4).unwrap();
        p.pool_v[3] = 0.1;
        assert!(matches!(encode_params(&p), Err(DatasetError::NotF32 { .. })));
    }

    #[test]
    fn wrong_kind_and_truncation_are_reported() {
        let p = init_encoder(1, 4).unwrap();
        let bytes = encode_params(&p).unwrap();
        assert!(matches!(decode_embedding_batch(&bytes), Err(DatasetError::Corrupt(_))));
        assert!(matches!(
            decode_params(&bytes[..bytes.len() - 1]),
            Err(DatasetError::Truncated(_))
        ));
    }
}
