//! Autocorrelation pitch tracking: normalized FFT autocorrelation per frame,
//! octave-error guard, median aggregation over voiced frames.

use num_complex::Complex;
use rustfft::FftPlanner;

use crate::audio::AudioSegment;
use crate::error::{Error, Result};

const F0_MIN_HZ: f64 = 60.0;
const F0_MAX_HZ: f64 = 400.0;
const FRAME_SECS: f64 = 0.04;
const HOP_SECS: f64 = 0.01;
/// Normalized autocorrelation required to call a frame voiced.
const VOICING_THRESHOLD: f64 = 0.5;
/// A shorter-lag peak at least this fraction of the best peak wins,
/// preventing octave-down errors on harmonic-rich sources.
const SUBHARMONIC_GUARD: f64 = 0.85;
/// Frames quieter than this fraction of the loudest frame are unvoiced.
const ENERGY_GATE: f64 = 0.04;

/// Median F0 over voiced frames, or `None` when fewer than 10% of frames
/// are voiced. Scale-invariant: all decisions use normalized quantities.
pub fn estimate_f0(segment: &AudioSegment) -> Result<Option<f64>> {
    let fs = segment.sample_rate() as f64;
    if segment.duration_secs() < 0.5 {
        return Err(Error::Argument(format!(
            "estimate_f0 needs ≥ 0.5 s of audio, got {:.3} s",
            segment.duration_secs()
        )));
    }
    let frame_len = (fs * FRAME_SECS) as usize;
    let hop = (fs * HOP_SECS) as usize;
    let lag_min = (fs / F0_MAX_HZ).floor() as usize;
    let lag_max = (fs / F0_MIN_HZ).ceil() as usize;
    let fft_size = (frame_len + lag_max + 1).next_power_of_two();

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(fft_size);
    let ifft = planner.plan_fft_inverse(fft_size);

    let samples = segment.samples();
    let n_frames = if samples.len() >= frame_len {
        (samples.len() - frame_len) / hop + 1
    } else {
        0
    };

    // frame RMS for the relative energy gate
    let mut rms = Vec::with_capacity(n_frames);
    for t in 0..n_frames {
        let frame = &samples[t * hop..t * hop + frame_len];
        let e: f64 = frame.iter().map(|&s| (s as f64).powi(2)).sum();
        rms.push((e / frame_len as f64).sqrt());
    }
    let max_rms = rms.iter().cloned().fold(0.0f64, f64::max);

    let mut voiced_f0 = Vec::new();
    let mut buf = vec![Complex::new(0.0f64, 0.0); fft_size];
    for t in 0..n_frames {
        if max_rms <= 0.0 || rms[t] < ENERGY_GATE * max_rms {
            continue;
        }
        let frame = &samples[t * hop..t * hop + frame_len];
        let mean: f64 = frame.iter().map(|&s| s as f64).sum::<f64>() / frame_len as f64;
        for c in buf.iter_mut() {
            *c = Complex::new(0.0, 0.0);
        }
        for (i, &s) in frame.iter().enumerate() {
            buf[i] = Complex::new(s as f64 - mean, 0.0);
        }
        fft.process(&mut buf);
        for c in buf.iter_mut() {
            *c = Complex::new(c.norm_sqr(), 0.0);
        }
        ifft.process(&mut buf);
        let r0 = buf[0].re / fft_size as f64;
        if r0 <= 1e-12 {
            continue;
        }
        let autocorr: Vec<f64> = (0..=lag_max.min(fft_size - 1))
            .map(|l| buf[l].re / fft_size as f64 / r0)
            .collect();

        // best peak in the admissible range
        let mut best_lag = 0usize;
        let mut best_val = f64::MIN;
        for lag in lag_min..=lag_max.min(autocorr.len() - 2) {
            if autocorr[lag] > autocorr[lag - 1]
                && autocorr[lag] >= autocorr[lag + 1]
                && autocorr[lag] > best_val
            {
                best_val = autocorr[lag];
                best_lag = lag;
            }
        }
        if best_lag == 0 || best_val < VOICING_THRESHOLD {
            continue;
        }
        // prefer the smallest lag whose peak is nearly as strong
        let mut chosen = best_lag;
        for lag in lag_min..best_lag {
            if lag + 1 < autocorr.len()
                && autocorr[lag] > autocorr[lag - 1]
                && autocorr[lag] >= autocorr[lag + 1]
                && autocorr[lag] >= SUBHARMONIC_GUARD * best_val
            {
                chosen = lag;
                break;
            }
        }
        // parabolic refinement around the chosen peak
        let lag_refined = if chosen > 0 && chosen + 1 < autocorr.len() {
            let (a, b, c) = (autocorr[chosen - 1], autocorr[chosen], autocorr[chosen + 1]);
            let denom = a - 2.0 * b + c;
            if denom.abs() > 1e-12 {
                chosen as f64 + 0.5 * (a - c) / denom
            } else {
                chosen as f64
            }
        } else {
            chosen as f64
        };
        voiced_f0.push(fs / lag_refined);
    }

    if n_frames == 0 || (voiced_f0.len() as f64) < 0.10 * n_frames as f64 {
        return Ok(None);
    }
    voiced_f0.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(Some(voiced_f0[voiced_f0.len() / 2]))
}
