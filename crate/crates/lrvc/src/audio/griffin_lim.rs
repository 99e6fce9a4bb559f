//! Griffin-Lim phase reconstruction from log-mel features. Stands in for a
//! neural vocoder: mel power is lifted to the linear spectrum through the
//! filterbank pseudo-inverse (clamped non-negative), then phase is recovered
//! by iterative STFT consistency.

use num_complex::Complex;

use crate::audio::mel::{istft, mel_filterbank, stft, MelConfig};
use crate::audio::{AudioSegment, MelFrames};
use crate::error::{Error, Result};

/// Solve G x = b for symmetric positive-definite G via Cholesky (in f64).
fn cholesky_factor(g: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = g[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(Error::Internal(
                        "mel Gram matrix is not positive definite".into(),
                    ));
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    Ok(l)
}

fn cholesky_solve(l: &[f64], n: usize, b: &mut [f64]) {
    // forward: L y = b
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i * n + k] * b[k];
        }
        b[i] = sum / l[i * n + i];
    }
    // backward: Lᵀ x = y
    for i in (0..n).rev() {
        let mut sum = b[i];
        for k in i + 1..n {
            sum -= l[k * n + i] * b[k];
        }
        b[i] = sum / l[i * n + i];
    }
}

/// Mel power [T×bands] → linear power [T×bins] via the pseudo-inverse of the
/// filterbank, clamped at zero.
fn mel_power_to_linear(mel_power: &[f32], n_frames: usize, cfg: &MelConfig) -> Result<Vec<f32>> {
    let fb = mel_filterbank(cfg);
    let bands = cfg.bands;
    let bins = cfg.num_bins();
    let fb64: Vec<f64> = fb.data().iter().map(|&x| x as f64).collect();

    // G = FB FBᵀ + ridge
    let mut g = vec![0.0f64; bands * bands];
    for i in 0..bands {
        for j in 0..=i {
            let mut s = 0.0;
            for k in 0..bins {
                s += fb64[i * bins + k] * fb64[j * bins + k];
            }
            g[i * bands + j] = s;
            g[j * bands + i] = s;
        }
    }
    for i in 0..bands {
        g[i * bands + i] += 1e-8;
    }
    let l = cholesky_factor(&g, bands)?;

    let mut linear = vec![0.0f32; n_frames * bins];
    let mut y = vec![0.0f64; bands];
    for t in 0..n_frames {
        for (yi, &m) in y.iter_mut().zip(&mel_power[t * bands..(t + 1) * bands]) {
            *yi = m as f64;
        }
        cholesky_solve(&l, bands, &mut y);
        let row = &mut linear[t * bins..(t + 1) * bins];
        for (k, r) in row.iter_mut().enumerate() {
            let mut s = 0.0;
            for (m, &yi) in y.iter().enumerate() {
                s += fb64[m * bins + k] * yi;
            }
            *r = s.max(0.0) as f32;
        }
    }
    Ok(linear)
}

/// Reconstruct 24 kHz audio from mel frames; output length is frames·hop.
/// Deterministic: the phase estimate starts at zero.
pub fn griffin_lim(mel: &MelFrames, iterations: usize) -> Result<AudioSegment> {
    griffin_lim_cfg(mel, iterations, &MelConfig::default())
}

pub fn griffin_lim_cfg(
    mel: &MelFrames,
    iterations: usize,
    cfg: &MelConfig,
) -> Result<AudioSegment> {
    let n_frames = mel.num_frames();
    if mel.num_bands() != cfg.bands {
        return Err(Error::Argument(format!(
            "mel has {} bands, config expects {}",
            mel.num_bands(),
            cfg.bands
        )));
    }
    let bins = cfg.num_bins();
    let mel_power: Vec<f32> = mel.tensor().data().iter().map(|&v| v.exp()).collect();
    let linear_power = mel_power_to_linear(&mel_power, n_frames, cfg)?;
    let magnitude: Vec<f32> = linear_power.iter().map(|&p| p.sqrt()).collect();

    // zero-phase start
    let mut spec: Vec<Vec<Complex<f32>>> = (0..n_frames)
        .map(|t| {
            (0..bins)
                .map(|k| Complex::new(magnitude[t * bins + k], 0.0))
                .collect()
        })
        .collect();

    for _ in 0..iterations {
        let x = istft(&spec, cfg);
        let est = stft(&x, cfg);
        for (t, frame) in spec.iter_mut().enumerate() {
            for (k, c) in frame.iter_mut().enumerate() {
                let e = est[t][k];
                let norm = e.norm();
                let phase = if norm > 1e-12 { e / norm } else { Complex::new(1.0, 0.0) };
                *c = phase * magnitude[t * bins + k];
            }
        }
    }
    let mut x = istft(&spec, cfg);
    for s in &mut x {
        *s = s.clamp(-1.0, 1.0);
    }
    AudioSegment::new(x, cfg.sample_rate)
}
