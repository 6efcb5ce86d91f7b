//! `RSM1` model container:
//!
//! ```text
//! b"RSM1"
//! u64 LE  header length
//! header  JSON {"spec": ModelSpec, "meta": TrainingMeta, "norm": InputNorm}
//! for each parameterized layer, in order:
//!   u64 LE  byte length of weights, then weights as f32 LE
//!   u64 LE  byte length of bias,    then bias as f32 LE
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{InputNorm, LayerParams, Params, TrainedModel, TrainingMeta};
use super::spec::ModelSpec;
use super::NeuralError;

pub const MAGIC: &[u8; 4] = b"RSM1";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    spec: ModelSpec,
    meta: TrainingMeta,
    norm: InputNorm,
}

pub fn to_bytes(model: &TrainedModel) -> Vec<u8> {
    let header = serde_json::to_vec(&Header {
        spec: model.spec().clone(),
        meta: model.meta.clone(),
        norm: model.norm().clone(),
    })
    .expect("model header serializes");
    let mut out = Vec::with_capacity(16 + header.len() + model.params().len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    let sizes = model.spec().param_sizes().expect("validated spec");
    for (layer, (w, _)) in model.params().layers.iter().zip(sizes) {
        if w == 0 {
            continue;
        }
        for blob in [&layer.weights, &layer.bias] {
            out.extend_from_slice(&((blob.len() * 4) as u64).to_le_bytes());
            for v in blob {
                out.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
    }
    out
}

pub fn from_bytes(bytes: &[u8]) -> Result<TrainedModel, NeuralError> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4)? != MAGIC {
        return Err(NeuralError::Format("missing RSM1 magic".into()));
    }
    let header_len = cur.u64()? as usize;
    let header: Header =
        serde_json::from_slice(cur.take(header_len)?).map_err(|e| NeuralError::Format(format!("header: {e}")))?;
    header.spec.validate()?;
    let mut layers = Vec::new();
    for (w, b) in header.spec.param_sizes()? {
        if w == 0 {
            layers.push(LayerParams::default());
            continue;
        }
        let weights = cur.blob(w)?;
        let bias = cur.blob(b)?;
        layers.push(LayerParams { weights, bias });
    }
    if cur.pos != bytes.len() {
        return Err(NeuralError::Format(format!("{} trailing bytes", bytes.len() - cur.pos)));
    }
    TrainedModel::new(header.spec, Params { layers }, header.meta)?.with_norm(header.norm)
}

pub fn save(model: &TrainedModel, path: impl AsRef<Path>) -> Result<(), NeuralError> {
    std::fs::write(path, to_bytes(model))?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<TrainedModel, NeuralError> {
    from_bytes(&std::fs::read(path)?)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NeuralError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| NeuralError::Format("truncated model file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64, NeuralError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn blob(&mut self, count: usize) -> Result<Vec<f64>, NeuralError> {
        let len = self.u64()? as usize;
        if len != count * 4 {
            return Err(NeuralError::Format(format!("blob of {len} bytes, expected {}", count * 4)));
        }
        Ok(self.take(len)?.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64).collect())
    }
}
