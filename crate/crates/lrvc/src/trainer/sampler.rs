//! Same-utterance pair sampling. Crop offsets are drawn on a 1/8000 s grid,
//! the coarsest grid that lands on integer sample positions at both 16 kHz
//! and 24 kHz, so the two rate views of a crop stay aligned.

use rand::RngExt;
use rand_chacha::ChaCha20Rng;

use crate::audio::{AudioSegment, RATE_CONTENT, RATE_MEL};
use crate::error::{Error, Result};
use crate::synthdata::ManifestRow;

/// Offset grid frequency: gcd(16000, 24000).
pub const TICK_HZ: u64 = 8000;

/// An utterance loaded at both model rates.
#[derive(Debug, Clone)]
pub struct Utterance {
    pub row: ManifestRow,
    pub wav16: AudioSegment,
    pub wav24: AudioSegment,
}

impl Utterance {
    pub fn duration_secs(&self) -> f64 {
        self.wav16.duration_secs()
    }
}

/// One crop materialized at both rates.
#[derive(Debug, Clone)]
pub struct DualRateSegment {
    pub wav16: AudioSegment,
    pub wav24: AudioSegment,
}

/// Offset in grid ticks for a crop of `segment_seconds`, drawn uniformly.
pub fn draw_offset_ticks(
    utterance: &Utterance,
    segment_seconds: f64,
    rng: &mut ChaCha20Rng,
) -> Result<u64> {
    let duration = utterance.duration_secs();
    if duration < 2.5 {
        return Err(Error::Data(format!(
            "utterance {} is {duration:.3} s, pair sampling needs ≥ 2.5 s",
            utterance.row.utterance_id
        )));
    }
    if duration < segment_seconds {
        return Err(Error::Data(format!(
            "utterance {} is shorter than the {segment_seconds} s segment policy",
            utterance.row.utterance_id
        )));
    }
    let max_tick = ((duration - segment_seconds) * TICK_HZ as f64).floor() as u64;
    Ok(rng.random_range(0..=max_tick))
}

pub fn crop_at(utterance: &Utterance, tick: u64, segment_seconds: f64) -> Result<DualRateSegment> {
    let off16 = tick as usize * (RATE_CONTENT as usize / TICK_HZ as usize);
    let off24 = tick as usize * (RATE_MEL as usize / TICK_HZ as usize);
    let len16 = (segment_seconds * RATE_CONTENT as f64).round() as usize;
    let len24 = (segment_seconds * RATE_MEL as f64).round() as usize;
    Ok(DualRateSegment {
        wav16: utterance.wav16.slice(off16, len16)?,
        wav24: utterance.wav24.slice(off24, len24)?,
    })
}

/// Two independent uniformly random crops of the same utterance, each at
/// both rates. Crops may overlap.
pub fn sample_pair(
    utterance: &Utterance,
    segment_seconds: f64,
    rng: &mut ChaCha20Rng,
) -> Result<(DualRateSegment, DualRateSegment)> {
    let tick_u = draw_offset_ticks(utterance, segment_seconds, rng)?;
    let tick_v = draw_offset_ticks(utterance, segment_seconds, rng)?;
    Ok((
        crop_at(utterance, tick_u, segment_seconds)?,
        crop_at(utterance, tick_v, segment_seconds)?,
    ))
}

/// Deterministic center crop (validation and evaluation).
pub fn center_crop(utterance: &Utterance, segment_seconds: f64) -> Result<DualRateSegment> {
    let duration = utterance.duration_secs();
    if duration < segment_seconds {
        return Err(Error::Data(format!(
            "utterance {} is shorter than the {segment_seconds} s segment policy",
            utterance.row.utterance_id
        )));
    }
    let tick = ((duration - segment_seconds) / 2.0 * TICK_HZ as f64).floor() as u64;
    crop_at(utterance, tick, segment_seconds)
}
