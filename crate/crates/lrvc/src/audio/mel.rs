//! Log-mel analysis: 2048-point FFT over 1200-sample Hann windows with hop
//! 300, 80 triangular bands from 80 Hz to 7.6 kHz, natural-log compressed.

use num_complex::Complex;
use rustfft::FftPlanner;

use crate::audio::{AudioSegment, MelFrames, MEL_BANDS, MEL_HOP, RATE_MEL};
use crate::compute::{Real, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct MelConfig {
    pub fft_size: usize,
    pub win_length: usize,
    pub hop: usize,
    pub bands: usize,
    pub fmin_hz: f64,
    pub fmax_hz: f64,
    pub sample_rate: u32,
    /// Power floor before the log.
    pub floor: f64,
}

impl Default for MelConfig {
    fn default() -> Self {
        MelConfig {
            fft_size: 2048,
            win_length: 1200,
            hop: MEL_HOP,
            bands: MEL_BANDS,
            fmin_hz: 80.0,
            fmax_hz: 7600.0,
            sample_rate: RATE_MEL,
            floor: 1e-10,
        }
    }
}

impl MelConfig {
    pub fn num_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn log_floor(&self) -> f32 {
        (self.floor as f32).ln()
    }
}

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filterbank as a [bands × bins] matrix, peaks at 1.
pub fn mel_filterbank(cfg: &MelConfig) -> Tensor<f32> {
    let bins = cfg.num_bins();
    let mel_lo = hz_to_mel(cfg.fmin_hz);
    let mel_hi = hz_to_mel(cfg.fmax_hz);
    // band edges: bands + 2 mel-spaced points
    let edges: Vec<f64> = (0..cfg.bands + 2)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (cfg.bands + 1) as f64))
        .collect();
    let hz_per_bin = cfg.sample_rate as f64 / cfg.fft_size as f64;
    let mut fb = vec![0.0f32; cfg.bands * bins];
    for m in 0..cfg.bands {
        let (lo, center, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        for bin in 0..bins {
            let f = bin as f64 * hz_per_bin;
            let w = if f >= lo && f <= center {
                (f - lo) / (center - lo)
            } else if f > center && f <= hi {
                (hi - f) / (hi - center)
            } else {
                0.0
            };
            fb[m * bins + bin] = w as f32;
        }
    }
    Tensor::new(vec![cfg.bands, bins], fb).expect("filterbank shape")
}

pub(crate) fn hann_window(n: usize) -> Vec<f32> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (std::f32::consts::TAU * i as f32 / n as f32).cos())
        .collect()
}

/// Magnitude-and-phase STFT: frame t covers samples
/// [t·hop − (win−hop)/2, … + win), zero-padded outside the signal.
/// Returns frames × (fft/2+1) complex bins; frame count = len/hop.
pub(crate) fn stft(samples: &[f32], cfg: &MelConfig) -> Vec<Vec<Complex<f32>>> {
    let n_frames = samples.len() / cfg.hop;
    let window = hann_window(cfg.win_length);
    let lead = (cfg.win_length - cfg.hop) / 2;
    let mut planner = FftPlanner::<f32>::new();
    let fft = planner.plan_fft_forward(cfg.fft_size);
    let bins = cfg.num_bins();

    let mut out = Vec::with_capacity(n_frames);
    let mut buf = vec![Complex::new(0.0f32, 0.0); cfg.fft_size];
    for t in 0..n_frames {
        for c in buf.iter_mut() {
            *c = Complex::new(0.0, 0.0);
        }
        let start = (t * cfg.hop) as isize - lead as isize;
        for (i, &w) in window.iter().enumerate() {
            let idx = start + i as isize;
            if idx >= 0 && (idx as usize) < samples.len() {
                buf[i] = Complex::new(samples[idx as usize] * w, 0.0);
            }
        }
        fft.process(&mut buf);
        out.push(buf[..bins].to_vec());
    }
    out
}

/// Weighted overlap-add inverse of `stft`, trimmed to frames·hop samples.
pub(crate) fn istft(frames: &[Vec<Complex<f32>>], cfg: &MelConfig) -> Vec<f32> {
    let n_frames = frames.len();
    let out_len = n_frames * cfg.hop;
    let window = hann_window(cfg.win_length);
    let lead = (cfg.win_length - cfg.hop) / 2;
    let mut planner = FftPlanner::<f32>::new();
    let ifft = planner.plan_fft_inverse(cfg.fft_size);
    let bins = cfg.num_bins();

    let mut acc = vec![0.0f64; out_len];
    let mut wsum = vec![0.0f64; out_len];
    let mut buf = vec![Complex::new(0.0f32, 0.0); cfg.fft_size];
    for (t, frame) in frames.iter().enumerate() {
        // rebuild the Hermitian spectrum
        for c in buf.iter_mut() {
            *c = Complex::new(0.0, 0.0);
        }
        buf[..bins].copy_from_slice(frame);
        for k in 1..bins - 1 {
            buf[cfg.fft_size - k] = frame[k].conj();
        }
        ifft.process(&mut buf);
        let scale = 1.0 / cfg.fft_size as f32;
        let start = (t * cfg.hop) as isize - lead as isize;
        for (i, &w) in window.iter().enumerate() {
            let idx = start + i as isize;
            if idx >= 0 && (idx as usize) < out_len {
                acc[idx as usize] += (buf[i].re * scale * w) as f64;
                wsum[idx as usize] += (w * w) as f64;
            }
        }
    }
    acc.iter()
        .zip(&wsum)
        .map(|(&a, &w)| if w > 1e-8 { (a / w) as f32 } else { 0.0 })
        .collect()
}

/// Log-mel features of a 24 kHz segment whose length is a multiple of the
/// hop; yields exactly len/hop frames.
pub fn mel_spectrogram(segment: &AudioSegment) -> Result<MelFrames> {
    mel_spectrogram_cfg(segment, &MelConfig::default())
}

pub fn mel_spectrogram_cfg(segment: &AudioSegment, cfg: &MelConfig) -> Result<MelFrames> {
    if segment.sample_rate() != cfg.sample_rate {
        return Err(Error::Argument(format!(
            "mel_spectrogram expects {} Hz input, got {}",
            cfg.sample_rate,
            segment.sample_rate()
        )));
    }
    if segment.len() % cfg.hop != 0 {
        return Err(Error::Argument(format!(
            "segment length {} not divisible by hop {}",
            segment.len(),
            cfg.hop
        )));
    }
    let spec = stft(segment.samples(), cfg);
    let fb = mel_filterbank(cfg);
    let bins = cfg.num_bins();
    let n_frames = spec.len();

    // power spectrum rows, then project through the filterbank
    let mut power = vec![0.0f32; n_frames * bins];
    for (t, frame) in spec.iter().enumerate() {
        for (k, c) in frame.iter().enumerate() {
            power[t * bins + k] = c.norm_sqr();
        }
    }
    let mut mel = vec![0.0f32; n_frames * cfg.bands];
    // mel = power [T×bins] @ fbᵀ [bins×bands]
    f32::gemm_strided(
        n_frames,
        bins,
        cfg.bands,
        1.0,
        &power,
        bins as isize,
        1,
        fb.data(),
        1,
        bins as isize,
        0.0,
        &mut mel,
    );
    let floor = cfg.floor as f32;
    for v in &mut mel {
        *v = v.max(floor).ln();
    }
    MelFrames::new(Tensor::new(vec![n_frames, cfg.bands], mel)?)
}
