//! RVF1 feature container: magic "RVF1", little-endian u32 rows/cols header,
//! then rows·cols little-endian f32 values. Used for dumping and loading
//! precomputed content or mel features.

use std::fs;
use std::path::Path;

use crate::compute::Tensor;
use crate::error::{io_err, Error, Result};

const MAGIC: &[u8; 4] = b"RVF1";

pub fn save_matrix(matrix: &Tensor<f32>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if matrix.shape().len() != 2 {
        return Err(Error::Argument(format!(
            "RVF1 stores 2-D matrices, got shape {:?}",
            matrix.shape()
        )));
    }
    let (rows, cols) = (matrix.shape()[0] as u32, matrix.shape()[1] as u32);
    let mut out = Vec::with_capacity(12 + matrix.len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&rows.to_le_bytes());
    out.extend_from_slice(&cols.to_le_bytes());
    for &v in matrix.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, out).map_err(io_err(path))
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<Tensor<f32>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(io_err(path))?;
    let fmt = |message: String| Error::Format { path: Some(path.to_path_buf()), message };
    if bytes.len() < 12 {
        return Err(fmt("file too short for an RVF1 header".into()));
    }
    if &bytes[0..4] != MAGIC {
        return Err(fmt("missing RVF1 magic".into()));
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let expected = 12 + rows * cols * 4;
    if bytes.len() != expected {
        return Err(fmt(format!(
            "payload truncated: header implies {expected} bytes, file has {}",
            bytes.len()
        )));
    }
    let data: Vec<f32> = bytes[12..]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    Tensor::new(vec![rows, cols], data)
}
