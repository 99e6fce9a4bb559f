//! RVCK checkpoint container: versioned binary file holding the trainable
//! parameters, optimizer state, step counter, the training config (embedded
//! as JSON so inference tools can rebuild the model), and the config hash.

use std::fs;
use std::path::Path;

use crate::compute::{OptimizerState, Tensor};
use crate::error::{io_err, Error, Result};
use crate::model::VcModel;
use crate::trainer::TrainConfig;

const MAGIC: &[u8; 4] = b"RVCK";
const VERSION: u32 = 1;

/// Deserialized checkpoint, not yet bound to a model.
pub struct Checkpoint {
    pub config_hash: [u8; 32],
    pub step: u64,
    pub config_json: String,
    pub learning_rate: f64,
    pub optimizer_step: u64,
    pub params: Vec<(String, Tensor<f32>)>,
    pub moments: Vec<(Vec<f32>, Vec<f32>)>,
}

pub fn save_checkpoint(
    model: &VcModel,
    optimizer: &OptimizerState,
    step: u64,
    config: &TrainConfig,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let config_json = config.to_json()?;
    let hash = config.content_hash()?;

    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&hash);
    out.extend_from_slice(&step.to_le_bytes());
    out.extend_from_slice(&(config_json.len() as u32).to_le_bytes());
    out.extend_from_slice(config_json.as_bytes());
    out.extend_from_slice(&optimizer.learning_rate.to_le_bytes());
    out.extend_from_slice(&optimizer.step.to_le_bytes());
    out.extend_from_slice(&(model.store.len() as u32).to_le_bytes());
    for p in model.store.iter() {
        let name = p.name.as_bytes();
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name);
        out.push(p.value.shape().len() as u8);
        for &d in p.value.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in p.value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    for (i, _) in model.store.iter().enumerate() {
        let (m, v) = optimizer.moments(i);
        for &x in m {
            out.extend_from_slice(&x.to_le_bytes());
        }
        for &x in v {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    fs::write(path, out).map_err(io_err(path))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Format {
                path: Some(self.path.to_path_buf()),
                message: format!("truncated checkpoint at offset {}", self.pos),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
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
    fn f32_vec(&mut self, n: usize) -> Result<Vec<f32>> {
        Ok(self
            .take(n * 4)?
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect())
    }
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(io_err(path))?;
    let mut r = Reader { bytes: &bytes, pos: 0, path };
    let fmt = |message: String| Error::Format { path: Some(path.to_path_buf()), message };

    if r.take(4)? != MAGIC {
        return Err(fmt("missing RVCK magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Incompatible(format!(
            "checkpoint format version {version}, this build reads {VERSION}"
        )));
    }
    let mut config_hash = [0u8; 32];
    config_hash.copy_from_slice(r.take(32)?);
    let step = r.u64()?;
    let config_len = r.u32()? as usize;
    let config_json = String::from_utf8(r.take(config_len)?.to_vec())
        .map_err(|_| fmt("config block is not utf-8".into()))?;
    let learning_rate = r.f64()?;
    let optimizer_step = r.u64()?;
    let n_params = r.u32()? as usize;

    let mut params = Vec::with_capacity(n_params);
    for _ in 0..n_params {
        let name_len = r.u16()? as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec())
            .map_err(|_| fmt("parameter name is not utf-8".into()))?;
        let ndims = r.take(1)?[0] as usize;
        let mut shape = Vec::with_capacity(ndims);
        for _ in 0..ndims {
            shape.push(r.u32()? as usize);
        }
        let numel: usize = shape.iter().product();
        let data = r.f32_vec(numel)?;
        params.push((name, Tensor::new(shape, data)?));
    }
    let mut moments = Vec::with_capacity(n_params);
    for (_, t) in &params {
        let m = r.f32_vec(t.len())?;
        let v = r.f32_vec(t.len())?;
        moments.push((m, v));
    }
    if r.pos != bytes.len() {
        return Err(fmt(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(Checkpoint {
        config_hash,
        step,
        config_json,
        learning_rate,
        optimizer_step,
        params,
        moments,
    })
}

impl Checkpoint {
    pub fn config(&self) -> Result<TrainConfig> {
        TrainConfig::from_json(&self.config_json)
    }

    /// Overwrite a freshly built model's parameters with the stored values
    /// and rebuild the optimizer state. `force` skips the config-hash check.
    pub fn install(&self, model: &mut VcModel, config: &TrainConfig, force: bool) -> Result<(OptimizerState, u64)> {
        let expected = config.content_hash()?;
        if !force && expected != self.config_hash {
            return Err(Error::Incompatible(
                "checkpoint was written under a different config (hash mismatch); \
                 pass force to override"
                    .into(),
            ));
        }
        if self.params.len() != model.store.len() {
            return Err(Error::Incompatible(format!(
                "checkpoint has {} parameters, model has {}",
                self.params.len(),
                model.store.len()
            )));
        }
        for (i, (name, tensor)) in self.params.iter().enumerate() {
            let p = model.store.get_mut(crate::compute::ParamId::from_index(i));
            if &p.name != name {
                return Err(Error::Incompatible(format!(
                    "parameter order mismatch: expected {}, found {name}",
                    p.name
                )));
            }
            if p.value.shape() != tensor.shape() {
                return Err(Error::Incompatible(format!(
                    "parameter {name}: checkpoint shape {:?}, model shape {:?}",
                    tensor.shape(),
                    p.value.shape()
                )));
            }
            p.value = tensor.clone();
        }
        let mut optimizer = OptimizerState::new(self.learning_rate, &model.store)?;
        optimizer.step = self.optimizer_step;
        for (i, (m, v)) in self.moments.iter().enumerate() {
            optimizer.restore_moments(i, m.clone(), v.clone());
        }
        Ok((optimizer, self.step))
    }
}
