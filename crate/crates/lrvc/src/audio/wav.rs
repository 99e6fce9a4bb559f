//! Minimal RIFF/WAVE reader and writer for 16-bit PCM mono files.

use std::fs;
use std::path::Path;

use crate::audio::AudioSegment;
use crate::error::{io_err, Error, Result};

fn format_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Format { path: Some(path.to_path_buf()), message: message.into() }
}

/// Write a segment as 16-bit PCM mono WAV.
pub fn save_wav(segment: &AudioSegment, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let n = segment.len();
    let data_bytes = (n * 2) as u32;
    let sample_rate = segment.sample_rate();
    let byte_rate = sample_rate * 2;

    let mut out = Vec::with_capacity(44 + n * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_bytes).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&byte_rate.to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes()); // bits per sample
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_bytes.to_le_bytes());
    for &s in segment.samples() {
        let q = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    fs::write(path, out).map_err(io_err(path))
}

/// Read a 16-bit PCM mono WAV. Rejects anything else, naming the field.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioSegment> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(io_err(path))?;
    if bytes.len() < 12 {
        return Err(format_err(path, "file too short for a RIFF header"));
    }
    if &bytes[0..4] != b"RIFF" {
        return Err(format_err(path, "missing RIFF magic"));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(format_err(path, "missing WAVE form type"));
    }

    let mut pos = 12;
    let mut fmt: Option<(u16, u16, u32, u16)> = None; // (tag, channels, rate, bits)
    let mut data: Option<&[u8]> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body_start = pos + 8;
        if body_start + size > bytes.len() {
            return Err(format_err(
                path,
                format!("chunk {:?} overruns file", String::from_utf8_lossy(id)),
            ));
        }
        let body = &bytes[body_start..body_start + size];
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(format_err(path, "fmt chunk shorter than 16 bytes"));
                }
                let tag = u16::from_le_bytes(body[0..2].try_into().unwrap());
                let channels = u16::from_le_bytes(body[2..4].try_into().unwrap());
                let rate = u32::from_le_bytes(body[4..8].try_into().unwrap());
                let bits = u16::from_le_bytes(body[14..16].try_into().unwrap());
                fmt = Some((tag, channels, rate, bits));
            }
            b"data" => data = Some(body),
            _ => {}
        }
        pos = body_start + size + (size & 1); // chunks are word-aligned
    }

    let (tag, channels, rate, bits) =
        fmt.ok_or_else(|| format_err(path, "missing fmt chunk"))?;
    if tag != 1 {
        return Err(format_err(path, format!("format tag {tag} is not PCM (1)")));
    }
    if channels != 1 {
        return Err(format_err(
            path,
            format!("channel count {channels} unsupported, expected mono"),
        ));
    }
    if bits != 16 {
        return Err(format_err(
            path,
            format!("bits_per_sample {bits} unsupported, expected 16"),
        ));
    }
    let data = data.ok_or_else(|| format_err(path, "missing data chunk"))?;
    if data.is_empty() {
        return Err(format_err(path, "data chunk is empty"));
    }
    if data.len() % 2 != 0 {
        return Err(format_err(path, "data chunk length is odd"));
    }
    let samples: Vec<f32> = data
        .chunks_exact(2)
        .map(|b| (i16::from_le_bytes([b[0], b[1]]) as f32 / 32767.0).clamp(-1.0, 1.0))
        .collect();
    AudioSegment::new(samples, rate)
}
