//! Integer-factor sample-rate conversion with windowed-sinc anti-alias
//! filtering. decimate(×2) maps 48 kHz → 24 kHz, decimate(×3) → 16 kHz.

use crate::audio::AudioSegment;
use crate::error::{Error, Result};

const TAPS: usize = 191; // odd → linear phase, integer group delay

/// Hamming-windowed sinc low-pass. `cutoff` is in cycles/sample; taps are
/// normalized so the DC gain equals `dc_gain`.
fn lowpass_taps(cutoff: f64, dc_gain: f64) -> Vec<f64> {
    let m = (TAPS - 1) as f64 / 2.0;
    let mut taps: Vec<f64> = (0..TAPS)
        .map(|i| {
            let x = i as f64 - m;
            let sinc = if x == 0.0 {
                2.0 * cutoff
            } else {
                (std::f64::consts::TAU * cutoff * x).sin() / (std::f64::consts::PI * x)
            };
            let window =
                0.54 - 0.46 * (std::f64::consts::TAU * i as f64 / (TAPS - 1) as f64).cos();
            sinc * window
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t *= dc_gain / sum;
    }
    taps
}

/// Low-pass below the new Nyquist, then keep every `factor`-th sample.
pub fn decimate(segment: &AudioSegment, factor: usize) -> Result<AudioSegment> {
    if factor != 2 && factor != 3 {
        return Err(Error::Argument(format!(
            "decimation factor {factor} unsupported (expected 2 or 3)"
        )));
    }
    if segment.sample_rate() as usize % factor != 0 {
        return Err(Error::Argument(format!(
            "sample rate {} not divisible by factor {factor}",
            segment.sample_rate()
        )));
    }
    if segment.len() % factor != 0 {
        return Err(Error::Argument(format!(
            "segment length {} not divisible by factor {factor}",
            segment.len()
        )));
    }
    let taps = lowpass_taps(0.45 / factor as f64, 1.0);
    let mid = (TAPS - 1) / 2;
    let x = segment.samples();
    let out_len = x.len() / factor;
    let mut out = Vec::with_capacity(out_len);
    for j in 0..out_len {
        let center = j * factor;
        let mut acc = 0.0f64;
        for (i, &h) in taps.iter().enumerate() {
            let idx = center as isize - mid as isize + i as isize;
            if idx >= 0 && (idx as usize) < x.len() {
                acc += h * x[idx as usize] as f64;
            }
        }
        out.push(acc as f32);
    }
    AudioSegment::new(out, segment.sample_rate() / factor as u32)
}

/// Zero-stuff by 2 and interpolate with a half-band low-pass.
pub fn upsample2(segment: &AudioSegment) -> Result<AudioSegment> {
    let taps = lowpass_taps(0.225, 2.0);
    let mid = (TAPS - 1) / 2;
    let x = segment.samples();
    let out_len = x.len() * 2;
    let mut out = vec![0.0f32; out_len];
    for (j, o) in out.iter_mut().enumerate() {
        // only even positions of the zero-stuffed signal carry samples
        let mut acc = 0.0f64;
        let lo = j as isize - mid as isize;
        for (i, &h) in taps.iter().enumerate() {
            let idx = lo + i as isize;
            if idx >= 0 && idx % 2 == 0 {
                let src = (idx / 2) as usize;
                if src < x.len() {
                    acc += h * x[src] as f64;
                }
            }
        }
        *o = acc as f32;
    }
    AudioSegment::new(out, segment.sample_rate() * 2)
}
