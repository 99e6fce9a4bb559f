//! Audio I/O, sample-rate conversion, mel analysis, Griffin-Lim synthesis,
//! and pitch estimation.

mod griffin_lim;
mod mel;
mod pitch;
mod resample;
mod rvf;
mod wav;

pub use griffin_lim::griffin_lim;
pub use mel::{mel_filterbank, mel_spectrogram, MelConfig};
pub use pitch::estimate_f0;
pub use resample::{decimate, upsample2};
pub use rvf::{load_matrix, save_matrix};
pub use wav::{load_wav, save_wav};

use crate::compute::Tensor;
use crate::error::{Error, Result};

/// Master corpus rate; decimated views feed the two model paths.
pub const RATE_MASTER: u32 = 48_000;
/// Mel / vocoder path rate.
pub const RATE_MEL: u32 = 24_000;
/// Content-encoder path rate.
pub const RATE_CONTENT: u32 = 16_000;
/// Mel hop in samples at 24 kHz.
pub const MEL_HOP: usize = 300;
/// Mel band count.
pub const MEL_BANDS: usize = 80;

/// Mono sample buffer in [−1, 1] with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioSegment {
    samples: Vec<f32>,
    sample_rate: u32,
}

impl AudioSegment {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Argument("audio segment must be non-empty".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::Argument("audio segment contains non-finite samples".into()));
        }
        Ok(AudioSegment { samples, sample_rate })
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Peak-normalize into [−1, 1] scaled to `peak` (no-op on silence).
    pub fn normalize_peak(&mut self, peak: f32) {
        let max = self.samples.iter().fold(0.0f32, |a, &s| a.max(s.abs()));
        if max > 0.0 {
            let g = peak / max;
            for s in &mut self.samples {
                *s *= g;
            }
        }
    }

    /// Copy out `len` samples starting at `offset`.
    pub fn slice(&self, offset: usize, len: usize) -> Result<AudioSegment> {
        if offset + len > self.samples.len() {
            return Err(Error::Argument(format!(
                "slice [{offset}, {}) out of range for {} samples",
                offset + len,
                self.samples.len()
            )));
        }
        AudioSegment::new(self.samples[offset..offset + len].to_vec(), self.sample_rate)
    }
}

/// T×d matrix of log-mel features at the vocoder frame rate.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFrames {
    frames: Tensor<f32>,
    pub hop: usize,
    pub sample_rate: u32,
}

impl MelFrames {
    pub fn new(frames: Tensor<f32>) -> Result<Self> {
        if frames.shape().len() != 2 {
            return Err(Error::Shape(format!(
                "mel frames must be 2-D, got {:?}",
                frames.shape()
            )));
        }
        if !frames.all_finite() {
            return Err(Error::Internal("mel frames contain non-finite values".into()));
        }
        Ok(MelFrames { frames, hop: MEL_HOP, sample_rate: RATE_MEL })
    }

    pub fn num_frames(&self) -> usize {
        self.frames.shape()[0]
    }

    pub fn num_bands(&self) -> usize {
        self.frames.shape()[1]
    }

    pub fn tensor(&self) -> &Tensor<f32> {
        &self.frames
    }

    pub fn into_tensor(self) -> Tensor<f32> {
        self.frames
    }
}
