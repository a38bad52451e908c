//! Checkpoint container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      8 bytes  "PDEPCKPT"
//! version    u32      1
//! width      u32      byte width of the scalar the model was trained in (4 or 8)
//! config     u64 length + UTF-8 JSON of CalConfig
//! vocab      u64 length + UTF-8 vocab text
//! count      u32      number of matrices
//! matrices   count × (u32 rows, u32 cols, rows·cols f64 values)
//! ```
//!
//! Values are stored as f64 regardless of `width`, so f32 and f64 models
//! both reload bit-exactly. Matrices follow [`ModelParams::leaves`] order.

use std::path::Path;

use crate::error::{Error, Result};
use crate::model::config::CalConfig;
use crate::model::params::ModelParams;
use crate::model::predict::CalModel;
use crate::model::vocab::Vocab;
use crate::numkit::Matrix;
use crate::scalar::Scalar;

const MAGIC: &[u8; 8] = b"PDEPCKPT";
const VERSION: u32 = 1;

pub fn encode_checkpoint<T: Scalar>(model: &CalModel<T>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(std::mem::size_of::<T>() as u32).to_le_bytes());
    let config = serde_json::to_vec(&model.config).expect("config serializes");
    out.extend_from_slice(&(config.len() as u64).to_le_bytes());
    out.extend_from_slice(&config);
    let vocab = model.vocab.to_text().into_bytes();
    out.extend_from_slice(&(vocab.len() as u64).to_le_bytes());
    out.extend_from_slice(&vocab);
    let leaves = model.params.leaves();
    out.extend_from_slice(&(leaves.len() as u32).to_le_bytes());
    for m in leaves {
        out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
        out.extend_from_slice(&(m.cols() as u32).to_le_bytes());
        for v in m.data() {
            out.extend_from_slice(&v.as_f64().to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Input(format!("checkpoint truncated at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn blob(&mut self) -> Result<&'a [u8]> {
        let n = self.u64()? as usize;
        self.take(n)
    }
}

pub fn decode_checkpoint<T: Scalar>(bytes: &[u8]) -> Result<CalModel<T>> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Input("not a checkpoint (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Input(format!("unsupported checkpoint version {version}")));
    }
    let _width = r.u32()?;
    let config: CalConfig =
        serde_json::from_slice(r.blob()?).map_err(|e| Error::Input(format!("checkpoint config: {e}")))?;
    config.validate()?;
    let vocab_text = std::str::from_utf8(r.blob()?).map_err(|e| Error::Input(format!("checkpoint vocab: {e}")))?;
    let vocab = Vocab::from_text(vocab_text)?;

    let mut params: ModelParams<Matrix<T>> = ModelParams::init(&config, vocab.len(), 0)?;
    let count = r.u32()? as usize;
    let mut slots = params.leaves_mut();
    if count != slots.len() {
        return Err(Error::Input(format!(
            "checkpoint holds {count} matrices, config implies {}",
            slots.len()
        )));
    }
    for slot in slots.iter_mut() {
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        if (rows, cols) != slot.shape() {
            return Err(Error::shape("checkpoint matrix", slot.shape(), (rows, cols)));
        }
        let data = (0..rows * cols)
            .map(|_| r.f64().map(T::from_f64_lossy))
            .collect::<Result<Vec<T>>>()?;
        **slot = Matrix::from_vec(rows, cols, data)?;
    }
    drop(slots);
    if r.pos != bytes.len() {
        return Err(Error::Input("trailing bytes after checkpoint".into()));
    }
    if !params.is_finite() {
        return Err(Error::Numeric("checkpoint holds non-finite weights".into()));
    }
    Ok(CalModel { config, vocab, params })
}

pub fn save_checkpoint<T: Scalar>(path: &Path, model: &CalModel<T>) -> Result<()> {
    std::fs::write(path, encode_checkpoint(model)).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<CalModel<T>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    decode_checkpoint(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::vocab::build_vocab;

    fn tiny() -> CalConfig {
        CalConfig {
            embed_dim: 8,
            context_heads: 2,
            cross_heads: 2,
            self_heads: 2,
            ffn_width: 16,
            max_seq_len: 16,
            segment_overlap: 4,
            ..CalConfig::default()
        }
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let vocab = build_vocab(&["RRCSetupRequest establishmentCause ue-Identity"], 1).unwrap();
        let model: CalModel<f64> = CalModel::new(tiny(), vocab, 3).unwrap();
        let bytes = encode_checkpoint(&model);
        let back: CalModel<f64> = decode_checkpoint(&bytes).unwrap();
        assert_eq!(back, model);
        assert_eq!(encode_checkpoint(&back), bytes);
    }

    #[test]
    fn f32_roundtrip() {
        let vocab = build_vocab(&["a b"], 1).unwrap();
        let model: CalModel<f32> = CalModel::new(tiny(), vocab, 3).unwrap();
        let back: CalModel<f32> = decode_checkpoint(&encode_checkpoint(&model)).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn corrupt_inputs_rejected() {
        let vocab = build_vocab(&["a b"], 1).unwrap();
        let model: CalModel<f64> = CalModel::new(tiny(), vocab, 3).unwrap();
        let bytes = encode_checkpoint(&model);
        assert!(decode_checkpoint::<f64>(&bytes[..bytes.len() - 3]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_checkpoint::<f64>(&bad).is_err());
        let mut long = bytes;
        long.push(0);
        assert!(decode_checkpoint::<f64>(&long).is_err());
    }
}
