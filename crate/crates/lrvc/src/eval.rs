//! Inference-time conversion and desk-scale proxy metrics: own-encoder
//! cosine similarity and F0-transfer ground truth in place of an external
//! speaker-verification service, and content-frame distance in place of an
//! ASR character error rate.

use std::path::Path;

use rayon::prelude::*;

use serde::{Deserialize, Serialize};

use crate::audio::{
    decimate, estimate_f0, griffin_lim, load_wav, mel_spectrogram, upsample2, AudioSegment,
    MelFrames, MEL_HOP, RATE_CONTENT, RATE_MASTER, RATE_MEL,
};
use crate::decoder::resample_length;
use crate::error::{Error, Result};
use crate::model::VcModel;
use crate::synthdata::{CorpusManifest, Split};
use crate::trainer::{center_crop, Utterance};

/// Cosine similarity of two equal-length vectors; 0 for degenerate inputs.
pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum();
    let na: f64 = a.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
    if na < 1e-12 || nb < 1e-12 {
        return 0.0;
    }
    dot / (na * nb)
}

/// Bring a segment to `rate` using the integer-factor resamplers.
/// Supported: 48 kHz → {24, 16}, 24 kHz → 16 kHz, and identity.
pub fn to_rate(segment: &AudioSegment, rate: u32) -> Result<AudioSegment> {
    match (segment.sample_rate(), rate) {
        (a, b) if a == b => Ok(segment.clone()),
        (RATE_MASTER, RATE_MEL) => decimate(segment, 2),
        (RATE_MASTER, RATE_CONTENT) => decimate(segment, 3),
        (RATE_MEL, RATE_CONTENT) => decimate(&upsample2(segment)?, 3),
        (from, to) => Err(Error::Argument(format!(
            "cannot resample {from} Hz to {to} Hz (supported: 48k→24k/16k, 24k→16k)"
        ))),
    }
}

/// Converted utterance plus everything needed to score it.
#[derive(Debug, Clone)]
pub struct ConversionResult {
    pub source_id: String,
    pub target_id: String,
    pub mel: MelFrames,
    pub audio: AudioSegment,
}

/// Zero-shot conversion: content of `source`, voice of `target`.
/// `source` must be at 16 kHz (or reducible to it), `target` at 24 kHz.
/// Inputs are trimmed to the longest policy-compatible length.
pub fn convert(
    model: &VcModel,
    source: &AudioSegment,
    target: &AudioSegment,
    gl_iterations: usize,
) -> Result<ConversionResult> {
    let source16 = to_rate(source, RATE_CONTENT)?;
    let target24 = to_rate(target, RATE_MEL)?;

    // content length must yield T_inp divisible by p
    let spec = model.decoder.spec;
    let block = 320 * spec.p;
    let keep16 = source16.len() / block * block;
    if keep16 == 0 {
        return Err(Error::Argument(format!(
            "source too short: need ≥ {block} samples at 16 kHz"
        )));
    }
    let source16 = source16.slice(0, keep16)?;
    let keep24 = target24.len() / MEL_HOP * MEL_HOP;
    if keep24 == 0 {
        return Err(Error::Argument("target shorter than one mel hop".into()));
    }
    let target24 = target24.slice(0, keep24)?;

    let content = model.encode_content(&source16)?;
    let target_mel = mel_spectrogram(&target24)?;
    let embedding = model.embed_mel(&target_mel)?;
    let mel = model.decode_with_embedding(&content, &embedding)?;
    debug_assert_eq!(mel.num_frames(), resample_length(content.num_frames(), &spec)?);
    let audio = griffin_lim(&mel, gl_iterations)?;
    Ok(ConversionResult {
        source_id: String::new(),
        target_id: String::new(),
        mel,
        audio,
    })
}

/// Own-encoder cosine between the speaker embeddings of two 24 kHz signals.
pub fn speaker_similarity(
    model: &VcModel,
    converted: &AudioSegment,
    target: &AudioSegment,
) -> Result<f64> {
    let mel_a = mel_spectrogram(&trim_to_hop(to_rate(converted, RATE_MEL)?)?)?;
    let mel_b = mel_spectrogram(&trim_to_hop(to_rate(target, RATE_MEL)?)?)?;
    let ea = model.embed_mel(&mel_a)?;
    let eb = model.embed_mel(&mel_b)?;
    Ok(cosine(ea.data(), eb.data()))
}

fn trim_to_hop(seg: AudioSegment) -> Result<AudioSegment> {
    let keep = seg.len() / MEL_HOP * MEL_HOP;
    seg.slice(0, keep)
}

/// Mean per-frame L2 between the content frames of two signals of equal
/// duration; the second signal is brought to 16 kHz first.
pub fn content_distance(
    model: &VcModel,
    source: &AudioSegment,
    converted: &AudioSegment,
) -> Result<f64> {
    let src_secs = source.duration_secs();
    let conv_secs = converted.duration_secs();
    if (src_secs - conv_secs).abs() > 1e-9 {
        return Err(Error::Argument(format!(
            "content_distance needs equal durations, got {src_secs:.4} s vs {conv_secs:.4} s"
        )));
    }
    let a = model.encode_content(&to_rate(source, RATE_CONTENT)?)?;
    let b = model.encode_content(&to_rate(converted, RATE_CONTENT)?)?;
    let (ta, tb) = (a.tensor(), b.tensor());
    let frames = ta.shape()[0];
    let dim = ta.shape()[1];
    let mut total = 0.0f64;
    for t in 0..frames {
        let mut sq = 0.0f64;
        for c in 0..dim {
            let d = ta.data()[t * dim + c] as f64 - tb.data()[t * dim + c] as f64;
            sq += d * d;
        }
        total += sq.sqrt();
    }
    Ok(total / frames as f64)
}

/// Within-speaker vs between-speaker embedding spread over a corpus split
/// (per-dimension scaling so values are comparable across d_s).
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct VarianceReport {
    pub intra_var: f64,
    pub inter_var: f64,
    /// intra/inter; 0 when both collapse to a point.
    pub ratio: f64,
}

pub fn embedding_variance_report(
    embeddings: &[(usize, Vec<f32>)], // (speaker_id, embedding)
) -> Result<VarianceReport> {
    let mut speakers: Vec<usize> = embeddings.iter().map(|(s, _)| *s).collect();
    speakers.sort_unstable();
    speakers.dedup();
    if speakers.len() < 2 {
        return Err(Error::Argument(format!(
            "variance report needs ≥ 2 speakers, got {}",
            speakers.len()
        )));
    }
    let d = embeddings[0].1.len();
    let mut centroids = Vec::with_capacity(speakers.len());
    let mut intra = 0.0f64;
    for &spk in &speakers {
        let members: Vec<&Vec<f32>> = embeddings
            .iter()
            .filter(|(s, _)| *s == spk)
            .map(|(_, e)| e)
            .collect();
        if members.len() < 2 {
            return Err(Error::Argument(format!(
                "variance report needs ≥ 2 utterances per speaker, speaker {spk} has {}",
                members.len()
            )));
        }
        let mut centroid = vec![0.0f64; d];
        for e in &members {
            for (c, &v) in centroid.iter_mut().zip(e.iter()) {
                *c += v as f64;
            }
        }
        for c in &mut centroid {
            *c /= members.len() as f64;
        }
        let spread: f64 = members
            .iter()
            .map(|e| {
                e.iter()
                    .zip(&centroid)
                    .map(|(&v, &c)| (v as f64 - c).powi(2))
                    .sum::<f64>()
            })
            .sum::<f64>()
            / members.len() as f64
            / d as f64;
        intra += spread;
        centroids.push(centroid);
    }
    let intra = intra / speakers.len() as f64;

    let mut global = vec![0.0f64; d];
    for c in &centroids {
        for (g, &v) in global.iter_mut().zip(c.iter()) {
            *g += v;
        }
    }
    for g in &mut global {
        *g /= centroids.len() as f64;
    }
    let inter: f64 = centroids
        .iter()
        .map(|c| c.iter().zip(&global).map(|(&v, &g)| (v - g).powi(2)).sum::<f64>())
        .sum::<f64>()
        / centroids.len() as f64
        / d as f64;

    let ratio = if inter < 1e-12 {
        if intra < 1e-12 { 0.0 } else { f64::INFINITY }
    } else {
        intra / inter
    };
    Ok(VarianceReport { intra_var: intra, inter_var: inter, ratio })
}

/// Per-pair metric record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairMetric {
    pub source_id: String,
    pub target_id: String,
    pub source_speaker: usize,
    pub target_speaker: usize,
    /// Cosine between converted-mel and target-mel speaker embeddings.
    pub speaker_similarity: f64,
    pub f0_source: Option<f64>,
    pub f0_target: Option<f64>,
    pub f0_converted: Option<f64>,
    /// Converted F0 strictly closer to the target's than the source's.
    pub f0_transferred: bool,
    pub content_distance: f64,
    /// Same metric through self-reconstruction (vocoder + model floor).
    pub self_reconstruction_distance: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricReport {
    pub checkpoint_step: u64,
    pub mode: String,
    pub seed: u64,
    pub n_pairs: usize,
    /// Always true: pairs are drawn from held-out speakers only.
    pub zero_shot: bool,
    pub eval_speakers: Vec<usize>,
    pub pairs: Vec<PairMetric>,
    pub mean_speaker_similarity: f64,
    pub mismatched_speaker_similarity: f64,
    pub f0_transfer_rate: f64,
    pub mean_content_distance: f64,
    pub mean_self_reconstruction_distance: f64,
    pub variance: VarianceReport,
}

impl MetricReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::Internal(format!("report serialization: {e}")))
    }

    pub fn summary(&self) -> String {
        format!(
            "pairs: {}\nzero-shot speakers: {:?}\nmean speaker similarity (matched): {:.4}\n\
             mean speaker similarity (mismatched): {:.4}\nf0 transfer rate: {:.3}\n\
             mean content distance: {:.4}\nself-reconstruction floor: {:.4}\n\
             embedding variance intra/inter/ratio: {:.5} / {:.5} / {:.4}",
            self.n_pairs,
            self.eval_speakers,
            self.mean_speaker_similarity,
            self.mismatched_speaker_similarity,
            self.f0_transfer_rate,
            self.mean_content_distance,
            self.mean_self_reconstruction_distance,
            self.variance.intra_var,
            self.variance.inter_var,
            self.variance.ratio
        )
    }
}

pub struct EvalOptions {
    pub n_pairs: usize,
    pub seed: u64,
    pub gl_iterations: usize,
    pub segment_seconds: f64,
    /// Restrict evaluation to these speakers (must all be held out).
    pub speaker_filter: Option<Vec<usize>>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            n_pairs: 50,
            seed: 0,
            gl_iterations: 40,
            segment_seconds: 2.0,
            speaker_filter: None,
        }
    }
}

/// Zero-shot evaluation protocol: conversion pairs are drawn only from
/// held-out (validation + test) speakers, with source and target speakers
/// always different.
pub fn evaluate(
    model: &VcModel,
    manifest: &CorpusManifest,
    checkpoint_step: u64,
    mode: &str,
    opts: &EvalOptions,
) -> Result<MetricReport> {
    use rand::RngExt;
    use rand_chacha::rand_core::SeedableRng;

    let train_speakers = manifest.split_speakers(Split::Train);
    let mut eval_speakers: Vec<usize> = manifest
        .split_speakers(Split::Val)
        .into_iter()
        .chain(manifest.split_speakers(Split::Test))
        .collect();
    eval_speakers.sort_unstable();
    eval_speakers.dedup();

    if let Some(filter) = &opts.speaker_filter {
        for s in filter {
            if train_speakers.contains(s) {
                return Err(Error::Argument(format!(
                    "speaker {s} is in the training split; zero-shot evaluation \
                     only accepts held-out speakers"
                )));
            }
            if !eval_speakers.contains(s) {
                return Err(Error::Argument(format!("speaker {s} not found in held-out splits")));
            }
        }
        eval_speakers.retain(|s| filter.contains(s));
    }
    if eval_speakers.len() < 2 {
        return Err(Error::Argument(format!(
            "zero-shot evaluation needs ≥ 2 held-out speakers, got {}",
            eval_speakers.len()
        )));
    }

    let rows: Vec<_> = manifest
        .rows
        .iter()
        .filter(|r| eval_speakers.contains(&r.speaker_id))
        .collect();
    let utterances: Result<Vec<Utterance>> = rows
        .par_iter()
        .map(|row| {
            Ok(Utterance {
                row: (*row).clone(),
                wav16: load_wav(manifest.root.join(&row.wav16))?,
                wav24: load_wav(manifest.root.join(&row.wav24))?,
            })
        })
        .collect();
    let utterances = utterances?;

    // deterministic pair list
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(crate::synthdata::child_seed(opts.seed, 0xEA1));
    let mut pair_indices = Vec::with_capacity(opts.n_pairs);
    let mut guard = 0usize;
    while pair_indices.len() < opts.n_pairs {
        let a = rng.random_range(0..utterances.len());
        let b = rng.random_range(0..utterances.len());
        if utterances[a].row.speaker_id != utterances[b].row.speaker_id {
            pair_indices.push((a, b));
        }
        guard += 1;
        if guard > opts.n_pairs * 1000 {
            return Err(Error::Internal("pair sampling failed to find cross-speaker pairs".into()));
        }
    }

    let pairs: Result<Vec<PairMetric>> = pair_indices
        .par_iter()
        .map(|&(ai, bi)| {
            let src = &utterances[ai];
            let tgt = &utterances[bi];
            let src_crop = center_crop(src, opts.segment_seconds)?;
            let tgt_crop = center_crop(tgt, opts.segment_seconds)?;

            let content = model.encode_content(&src_crop.wav16)?;
            let src_mel = mel_spectrogram(&src_crop.wav24)?;
            let tgt_mel = mel_spectrogram(&tgt_crop.wav24)?;
            let s_target = model.embed_mel(&tgt_mel)?;
            let s_source = model.embed_mel(&src_mel)?;

            let mel_converted = model.decode_with_embedding(&content, &s_target)?;
            let mel_self = model.decode_with_embedding(&content, &s_source)?;

            // embedding-level similarity avoids penalizing vocoder artifacts
            let e_converted = model.embed_mel(&mel_converted)?;
            let similarity = cosine(e_converted.data(), s_target.data());

            let audio_converted = griffin_lim(&mel_converted, opts.gl_iterations)?;
            let audio_self = griffin_lim(&mel_self, opts.gl_iterations)?;

            let f0_source = estimate_f0(&src_crop.wav24)?;
            let f0_target = estimate_f0(&tgt_crop.wav24)?;
            let f0_converted = estimate_f0(&audio_converted)?;
            let f0_transferred = match (f0_source, f0_target, f0_converted) {
                (Some(fs), Some(ft), Some(fc)) => (fc - ft).abs() < (fc - fs).abs(),
                _ => false,
            };

            let content_dist = content_distance(model, &src_crop.wav16, &audio_converted)?;
            let self_dist = content_distance(model, &src_crop.wav16, &audio_self)?;

            Ok(PairMetric {
                source_id: src.row.utterance_id.clone(),
                target_id: tgt.row.utterance_id.clone(),
                source_speaker: src.row.speaker_id,
                target_speaker: tgt.row.speaker_id,
                speaker_similarity: similarity,
                f0_source,
                f0_target,
                f0_converted,
                f0_transferred,
                content_distance: content_dist,
                self_reconstruction_distance: self_dist,
            })
        })
        .collect();
    let pairs = pairs?;

    // mismatched-pair baseline: converted embedding vs a rotated target
    let mismatched: Result<Vec<f64>> = pair_indices
        .par_iter()
        .enumerate()
        .map(|(i, &(ai, _))| {
            let src = &utterances[ai];
            let other = &utterances[pair_indices[(i + 1) % pair_indices.len()].0];
            let src_crop = center_crop(src, opts.segment_seconds)?;
            let other_crop = center_crop(other, opts.segment_seconds)?;
            let ea = model.embed_mel(&mel_spectrogram(&src_crop.wav24)?)?;
            let eb = model.embed_mel(&mel_spectrogram(&other_crop.wav24)?)?;
            Ok(cosine(ea.data(), eb.data()))
        })
        .collect();
    let mismatched = mismatched?;

    // variance over all held-out utterances (center crops)
    let embeddings: Result<Vec<(usize, Vec<f32>)>> = utterances
        .par_iter()
        .map(|utt| {
            let crop = center_crop(utt, opts.segment_seconds)?;
            let e = model.embed_mel(&mel_spectrogram(&crop.wav24)?)?;
            Ok((utt.row.speaker_id, e.data().to_vec()))
        })
        .collect();
    let variance = embedding_variance_report(&embeddings?)?;

    let n = pairs.len() as f64;
    let mean_similarity = pairs.iter().map(|p| p.speaker_similarity).sum::<f64>() / n;
    let f0_rate = pairs.iter().filter(|p| p.f0_transferred).count() as f64 / n;
    let mean_content = pairs.iter().map(|p| p.content_distance).sum::<f64>() / n;
    let mean_self = pairs.iter().map(|p| p.self_reconstruction_distance).sum::<f64>() / n;
    let mean_mismatched = mismatched.iter().sum::<f64>() / mismatched.len() as f64;

    Ok(MetricReport {
        checkpoint_step,
        mode: mode.to_string(),
        seed: opts.seed,
        n_pairs: pairs.len(),
        zero_shot: true,
        eval_speakers,
        pairs,
        mean_speaker_similarity: mean_similarity,
        mismatched_speaker_similarity: mean_mismatched,
        f0_transfer_rate: f0_rate,
        mean_content_distance: mean_content,
        mean_self_reconstruction_distance: mean_self,
        variance,
    })
}

/// Convenience: evaluate straight from checkpoint + corpus paths.
pub fn evaluate_checkpoint(
    ckpt_path: &Path,
    corpus_dir: &Path,
    opts: &EvalOptions,
) -> Result<MetricReport> {
    let (model, config, step) = crate::trainer::load_model(ckpt_path)?;
    let manifest = CorpusManifest::load(corpus_dir)?;
    evaluate(&model, &manifest, step, &config.mode.to_string(), opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_basics() {
        assert!((cosine(&[1.0, 0.0], &[1.0, 0.0]) - 1.0).abs() < 1e-12);
        assert!((cosine(&[1.0, 0.0], &[0.0, 1.0])).abs() < 1e-12);
        assert!((cosine(&[1.0, 2.0], &[2.0, 4.0]) - 1.0).abs() < 1e-9);
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 1.0]), 0.0);
        // symmetry
        let (a, b) = ([0.3f32, -1.2, 0.7], [1.1f32, 0.2, -0.4]);
        assert_eq!(cosine(&a, &b), cosine(&b, &a));
    }

    #[test]
    fn variance_report_degenerate_and_two_cluster_cases() {
        // all embeddings identical → everything zero
        let same = vec![
            (0usize, vec![1.0f32, 2.0]),
            (0, vec![1.0, 2.0]),
            (1, vec![1.0, 2.0]),
            (1, vec![1.0, 2.0]),
        ];
        let r = embedding_variance_report(&same).unwrap();
        assert_eq!((r.intra_var, r.inter_var, r.ratio), (0.0, 0.0, 0.0));

        // two tight clusters distance d apart: intra ≈ 0,
        // inter = (d/2)² per-dimension scaled
        let d = 3.0f32;
        let clusters = vec![
            (0usize, vec![0.0f32, 0.0]),
            (0, vec![0.0, 0.0]),
            (1, vec![d, 0.0]),
            (1, vec![d, 0.0]),
        ];
        let r = embedding_variance_report(&clusters).unwrap();
        assert!(r.intra_var < 1e-12);
        let expected_inter = (d as f64 / 2.0).powi(2) / 2.0; // per-dim scaling over d_s=2
        assert!((r.inter_var - expected_inter).abs() < 1e-9, "{}", r.inter_var);
    }

    #[test]
    fn variance_report_rejects_degenerate_splits() {
        let one_speaker = vec![(0usize, vec![1.0f32]), (0, vec![2.0])];
        assert!(matches!(
            embedding_variance_report(&one_speaker),
            Err(Error::Argument(_))
        ));
        let one_utt = vec![(0usize, vec![1.0f32]), (1, vec![2.0])];
        assert!(matches!(
            embedding_variance_report(&one_utt),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn content_distance_requires_equal_durations() {
        let model = VcModel::new(crate::model::ModelConfig {
            d_s: 8,
            spk_conv_layers: 1,
            spk_fc_layers: 1,
            spk_hidden: 8,
            dec_conv_layers: 3,
            dec_hidden: 8,
            content_channels: 8,
            num_speakers: 2,
            ..Default::default()
        }, 1)
        .unwrap();
        let a = AudioSegment::new(vec![0.1; 32_000], RATE_CONTENT).unwrap();
        let b = AudioSegment::new(vec![0.1; 24_000], RATE_CONTENT).unwrap();
        assert!(matches!(
            content_distance(&model, &a, &b),
            Err(Error::Argument(_))
        ));
    }
}
