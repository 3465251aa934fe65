//! Model checkpoints: an opaque binary with the head parameters and encoder
//! configuration, plus a small JSON sidecar written next to it
//! (`<path>.json`).

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::encoder::{TinyEncoder, TinyEncoderConfig};
use super::head::ClassifierHead;
use super::{ModelError, ModelVariant, RelationModel};
use crate::models::encoder::SequenceEncoder;

const MAGIC: &[u8; 4] = b"CGM1";

/// Sidecar schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub d: usize,
    pub variant: ModelVariant,
    pub encoder_id: String,
    pub seed: u64,
    #[serde(rename = "L")]
    pub max_len: usize,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    PathBuf::from(format!("{}.json", path.display()))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ModelError + '_ {
    move |source| ModelError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn save_model(model: &RelationModel, path: impl AsRef<Path>) -> Result<(), ModelError> {
    let path = path.as_ref();
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MAGIC);
    let cfg = &model.encoder.config;
    let push_u32 = |buf: &mut Vec<u8>, v: usize| buf.extend_from_slice(&(v as u32).to_le_bytes());
    push_u32(&mut buf, 1); // version
    buf.push(match model.variant {
        ModelVariant::Pairwise => 0,
        ModelVariant::Contextual => 1,
    });
    buf.extend_from_slice(&model.seed.to_le_bytes());
    push_u32(&mut buf, cfg.hidden);
    push_u32(&mut buf, cfg.layers);
    push_u32(&mut buf, cfg.feedforward);
    push_u32(&mut buf, cfg.vocab);
    push_u32(&mut buf, cfg.max_len);
    push_u32(&mut buf, model.head.input_dim);
    push_u32(&mut buf, model.head.hidden_dim);
    let params = model.head.flat_params();
    buf.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for p in params {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    let mut file = fs::File::create(path).map_err(io_err(path))?;
    file.write_all(&buf).map_err(io_err(path))?;

    let meta = CheckpointMeta {
        d: cfg.hidden,
        variant: model.variant,
        encoder_id: model.encoder.encoder_id(),
        seed: model.seed,
        max_len: cfg.max_len,
    };
    let side = sidecar_path(path);
    fs::write(&side, serde_json::to_string_pretty(&meta).expect("meta serializes"))
        .map_err(io_err(&side))?;
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        if self.pos + n > self.buf.len() {
            return Err(ModelError::BadCheckpoint("truncated file".into()));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }
    fn u32(&mut self) -> Result<usize, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
    fn u64(&mut self) -> Result<u64, ModelError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn u8(&mut self) -> Result<u8, ModelError> {
        Ok(self.take(1)?[0])
    }
    fn f64(&mut self) -> Result<f64, ModelError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn load_model(path: impl AsRef<Path>) -> Result<RelationModel, ModelError> {
    let path = path.as_ref();
    let mut raw = Vec::new();
    fs::File::open(path)
        .map_err(io_err(path))?
        .read_to_end(&mut raw)
        .map_err(io_err(path))?;
    let mut cur = Cursor { buf: &raw, pos: 0 };
    if cur.take(4)? != MAGIC {
        return Err(ModelError::BadCheckpoint("bad magic".into()));
    }
    let version = cur.u32()?;
    if version != 1 {
        return Err(ModelError::BadCheckpoint(format!(
            "unsupported version {version}"
        )));
    }
    let variant = match cur.u8()? {
        0 => ModelVariant::Pairwise,
        1 => ModelVariant::Contextual,
        other => {
            return Err(ModelError::BadCheckpoint(format!(
                "unknown variant byte {other}"
            )))
        }
    };
    let seed = cur.u64()?;
    let config = TinyEncoderConfig {
        hidden: cur.u32()?,
        layers: cur.u32()?,
        feedforward: cur.u32()?,
        vocab: cur.u32()?,
        max_len: cur.u32()?,
        seed,
    };
    let input_dim = cur.u32()?;
    let hidden_dim = cur.u32()?;
    let count = cur.u64()? as usize;
    let mut params = Vec::with_capacity(count);
    for _ in 0..count {
        params.push(cur.f64()?);
    }

    let encoder = TinyEncoder::with_config(config);
    let mut head = ClassifierHead::new(input_dim, hidden_dim, 0);
    if head.param_count() != count {
        return Err(ModelError::BadCheckpoint(format!(
            "parameter count {count} does not match head {}x{}",
            input_dim, hidden_dim
        )));
    }
    head.set_flat_params(&params);
    Ok(RelationModel {
        variant,
        encoder,
        head,
        seed,
    })
}
