//! Parametric synthetic-speaker corpus. Speaker identity (F0, spectral tilt,
//! formant shift) and linguistic content (formant-target sequences) are
//! separable by construction, so voice transfer is measurable against ground
//! truth without human raters.

mod corpus;

pub use corpus::{build_corpus, CorpusManifest, ManifestRow, Split};

use rand::RngExt;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::audio::{AudioSegment, RATE_MASTER};
use crate::error::Result;

/// Deterministically derive a child seed from a parent seed and a tag.
pub(crate) fn child_seed(seed: u64, tag: u64) -> u64 {
    // splitmix64 step
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A synthetic speaker: pitch, pitch stability, vocal-tract scaling, timbre.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerProfile {
    pub speaker_id: usize,
    /// Fundamental frequency in [80, 300] Hz.
    pub base_f0: f64,
    /// Per-pulse period perturbation as a fraction.
    pub f0_jitter: f64,
    /// Multiplier on script formant targets, in [0.8, 1.25].
    pub formant_shift: f64,
    /// Spectral tilt in dB/octave (negative = darker voice).
    pub spectral_tilt: f64,
}

/// Deterministic profile from a seed; satisfies the per-profile invariants
/// but not pairwise separation (the corpus builder enforces that).
pub fn generate_speaker(speaker_id: usize, seed: u64) -> SpeakerProfile {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    SpeakerProfile {
        speaker_id,
        base_f0: rng.random_range(80.0..=300.0),
        // sizable per-pulse jitter keeps the mean pitch (visible to the
        // speaker path through mel) informative while making instantaneous
        // pulse timing (visible to the content path) a poor pitch cue
        f0_jitter: rng.random_range(0.03..=0.06),
        formant_shift: rng.random_range(0.8..=1.25),
        spectral_tilt: rng.random_range(-9.0..=-1.0),
    }
}

/// One pseudo-phoneme: a formant-target triple held for a duration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptToken {
    pub formants_hz: [f64; 3],
    pub duration_ms: u32,
    pub silent: bool,
}

/// Token sequence describing the linguistic content of one utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceScript {
    pub tokens: Vec<ScriptToken>,
}

impl UtteranceScript {
    pub fn total_ms(&self) -> u32 {
        self.tokens.iter().map(|t| t.duration_ms).sum()
    }

    pub fn total_samples(&self, sample_rate: u32) -> usize {
        self.total_ms() as usize * sample_rate as usize / 1000
    }
}

const VOWELS: [[f64; 3]; 6] = [
    [730.0, 1090.0, 2440.0],
    [530.0, 1840.0, 2480.0],
    [270.0, 2290.0, 3010.0],
    [570.0, 840.0, 2410.0],
    [300.0, 870.0, 2240.0],
    [500.0, 1500.0, 2500.0],
];

/// Random script: ≥ 8 tokens, ≥ 2.6 s total, occasional internal silences.
pub fn generate_script(seed: u64) -> UtteranceScript {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut tokens = Vec::new();
    let mut total_ms = 0u32;
    while tokens.len() < 8 || total_ms < 2600 {
        let silent = !tokens.is_empty() && tokens.len() >= 2 && rng.random_bool(0.12);
        let token = if silent {
            ScriptToken {
                formants_hz: VOWELS[5],
                duration_ms: rng.random_range(100..=160),
                silent: true,
            }
        } else {
            let base = VOWELS[rng.random_range(0..VOWELS.len())];
            let formants_hz = [
                base[0] * rng.random_range(0.95..=1.05),
                base[1] * rng.random_range(0.95..=1.05),
                base[2] * rng.random_range(0.95..=1.05),
            ];
            ScriptToken {
                formants_hz,
                duration_ms: rng.random_range(200..=340),
                silent: false,
            }
        };
        total_ms += token.duration_ms;
        tokens.push(token);
    }
    // keep the tail voiced so utterances never end in silence
    if tokens.last().is_some_and(|t| t.silent) {
        tokens.last_mut().unwrap().silent = false;
    }
    UtteranceScript { tokens }
}

/// Two-pole resonator with unity DC gain (cascade element of the vocal
/// tract filter). Pole radius is fixed by the bandwidth; the center
/// frequency may vary per sample without destabilizing it.
struct Resonator {
    r: f64,
    y1: f64,
    y2: f64,
}

impl Resonator {
    fn new(bandwidth_hz: f64, fs: f64) -> Self {
        Resonator { r: (-std::f64::consts::PI * bandwidth_hz / fs).exp(), y1: 0.0, y2: 0.0 }
    }

    fn step(&mut self, x: f64, freq_hz: f64, fs: f64) -> f64 {
        let theta = std::f64::consts::TAU * freq_hz / fs;
        let b = 2.0 * self.r * theta.cos();
        let c = -self.r * self.r;
        let a = 1.0 - b - c;
        let y = a * x + b * self.y1 + c * self.y2;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

/// Source-filter synthesis at 48 kHz: a jittered glottal pulse train drives
/// three formant resonators at script targets scaled by the profile, shaped
/// by a tilt filter, with energy dips at token boundaries.
pub fn synthesize_utterance(
    profile: &SpeakerProfile,
    script: &UtteranceScript,
    seed: u64,
) -> Result<AudioSegment> {
    let fs = RATE_MASTER as f64;
    let n = script.total_samples(RATE_MASTER);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);

    // glottal source: decaying-exponential pulses at jittered pitch periods
    let mut source = vec![0.0f64; n];
    let mut t = 0.0f64;
    while (t as usize) < n {
        let start = t as usize;
        for k in 0..48usize.min(n - start) {
            source[start + k] += (-(k as f64) / 10.0).exp();
        }
        let jitter: f64 = rng.random_range(-1.0..=1.0) * profile.f0_jitter;
        t += fs / profile.base_f0 * (1.0 + jitter);
    }

    // per-sample formant targets with a 30 ms blend across token boundaries
    let blend = (0.03 * fs) as usize;
    let mut boundaries = Vec::with_capacity(script.tokens.len() + 1);
    let mut acc = 0usize;
    boundaries.push(0);
    for tok in &script.tokens {
        acc += tok.duration_ms as usize * RATE_MASTER as usize / 1000;
        boundaries.push(acc);
    }

    let mut resonators = [
        Resonator::new(80.0, fs),
        Resonator::new(120.0, fs),
        Resonator::new(160.0, fs),
    ];
    // tilt: one-pole lowpass, steeper tilt → lower cutoff
    let tilt_cutoff = 6000.0 * 10f64.powf(profile.spectral_tilt / 10.0);
    let tilt_a = (-std::f64::consts::TAU * tilt_cutoff / fs).exp();
    let mut tilt_y = 0.0f64;

    let dip_len = (0.015 * fs) as usize; // 15 ms each side of a boundary

    let mut out = vec![0.0f32; n];
    let mut token_idx = 0usize;
    for i in 0..n {
        while token_idx + 1 < script.tokens.len() && i >= boundaries[token_idx + 1] {
            token_idx += 1;
        }
        let tok = &script.tokens[token_idx];
        let tok_start = boundaries[token_idx];
        let into = i - tok_start;

        // formants: blend from the previous token over the first 30 ms
        let mut formants = [0.0f64; 3];
        for (f, slot) in formants.iter_mut().enumerate() {
            let target = tok.formants_hz[f] * profile.formant_shift;
            *slot = if token_idx > 0 && into < blend {
                let prev = script.tokens[token_idx - 1].formants_hz[f] * profile.formant_shift;
                let a = into as f64 / blend as f64;
                prev * (1.0 - a) + target * a
            } else {
                target
            };
        }

        let mut x = source[i];
        for (f, res) in resonators.iter_mut().enumerate() {
            x = res.step(x, formants[f], fs);
        }
        tilt_y = (1.0 - tilt_a) * x + tilt_a * tilt_y;
        let mut y = tilt_y;

        // amplitude envelope: silence tokens go to zero, boundaries dip
        let mut amp = if tok.silent { 0.0 } else { 1.0 };
        let ramp = |k: usize| 0.5 - 0.5 * (std::f64::consts::PI * k as f64 / dip_len as f64).cos();
        let tok_len = boundaries[token_idx + 1] - tok_start;
        if into < dip_len {
            let edge = ramp(into); // 0 → 1
            amp *= if tok.silent { 0.0 } else { 0.05 + 0.95 * edge };
        } else if tok_len - 1 - into < dip_len && token_idx + 1 < script.tokens.len() {
            let edge = ramp(tok_len - 1 - into);
            amp *= if tok.silent { 0.0 } else { 0.05 + 0.95 * edge };
        }
        y *= amp;
        out[i] = y as f32;
    }

    let mut seg = AudioSegment::new(out, RATE_MASTER)?;
    seg.normalize_peak(0.9);
    Ok(seg)
}
