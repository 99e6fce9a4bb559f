//! The complete voice-conversion model: frozen content encoder, trainable
//! speaker encoder with projection head, and the length-resampling decoder,
//! plus the per-pair training graph over all loss modes.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::audio::{MelFrames, MEL_BANDS};
use crate::compute::{NodeId, ParamStore, Real, Tape, Tensor};
use crate::content::{ContentEncoder, ContentFrames, CONTENT_DIM};
use crate::decoder::{Decoder, ResampleSpec};
use crate::error::{Error, Result};
use crate::losses::{
    loss_cycle, loss_self_diff, loss_self_same, loss_speaker, LossBreakdown, LossMode, LossWeights,
};
use crate::speaker::SpeakerEncoder;
use crate::synthdata::child_seed;

/// Architecture hyperparameters. Defaults follow the full-scale recipe
/// (12-layer stacks, hidden 128); desk runs shrink the stacks through the
/// training config.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub d_c: usize,
    pub d_s: usize,
    pub mel_bands: usize,
    pub kernel: usize,
    pub spk_conv_layers: usize,
    pub spk_fc_layers: usize,
    pub spk_hidden: usize,
    pub dec_conv_layers: usize,
    pub dec_hidden: usize,
    pub resample_p: usize,
    pub resample_q: usize,
    pub content_channels: usize,
    pub content_seed: u64,
    /// Training-speaker count (projection head width).
    pub num_speakers: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d_c: CONTENT_DIM,
            d_s: 128,
            mel_bands: MEL_BANDS,
            kernel: 5,
            spk_conv_layers: 12,
            spk_fc_layers: 12,
            spk_hidden: 128,
            dec_conv_layers: 12,
            dec_hidden: 128,
            resample_p: 5,
            resample_q: 8,
            content_channels: 32,
            content_seed: 7001,
            num_speakers: 6,
        }
    }
}

impl ModelConfig {
    pub fn resample_spec(&self) -> Result<ResampleSpec> {
        ResampleSpec::new(self.resample_p, self.resample_q)
    }

    /// Miniature config for exhaustive gradient checking: 2 layers per
    /// stack, d_c=8, d_s=4, small synthetic feature dims.
    pub fn miniature() -> Self {
        ModelConfig {
            d_c: 8,
            d_s: 4,
            mel_bands: 6,
            kernel: 5,
            spk_conv_layers: 2,
            spk_fc_layers: 2,
            spk_hidden: 8,
            dec_conv_layers: 2,
            dec_hidden: 8,
            resample_p: 5,
            resample_q: 8,
            content_channels: 4,
            content_seed: 7001,
            num_speakers: 3,
        }
    }
}

/// Forward-pass call counters, used to verify mode exclusivity (e.g. the
/// projection head is never touched in self-same mode).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ForwardCounters {
    pub speaker_encoder_calls: usize,
    pub decoder_calls: usize,
    pub projection_calls: usize,
}

/// One training example: features of two 2 s crops of the same utterance
/// (v = u in self-same mode) plus the training-speaker class index.
#[derive(Debug, Clone)]
pub struct PairExample {
    pub content_u: Tensor<f32>,
    pub content_v: Tensor<f32>,
    pub mel_u: Tensor<f32>,
    pub mel_v: Tensor<f32>,
    pub speaker_label: usize,
}

/// Result of building the pair loss graph on a tape.
pub struct PairForward {
    pub total: NodeId,
    pub breakdown: LossBreakdown,
    pub counters: ForwardCounters,
}

pub struct VcModel {
    pub config: ModelConfig,
    pub content: ContentEncoder,
    pub speaker: SpeakerEncoder,
    pub decoder: Decoder,
    pub store: ParamStore,
}

impl VcModel {
    /// Build with deterministic initialization from `init_seed`. Parameter
    /// creation order (speaker stack, projection, decoder stack) is the
    /// canonical checkpoint order.
    pub fn new(config: ModelConfig, init_seed: u64) -> Result<Self> {
        let spec = config.resample_spec()?;
        let mut store = ParamStore::new();
        let mut rng = ChaCha20Rng::seed_from_u64(child_seed(init_seed, 0xA11));
        let speaker = SpeakerEncoder::new(
            &mut store,
            &mut rng,
            config.mel_bands,
            config.spk_conv_layers,
            config.spk_fc_layers,
            config.spk_hidden,
            config.kernel,
            config.d_s,
            config.num_speakers,
        )?;
        let decoder = Decoder::new(
            &mut store,
            &mut rng,
            config.d_c,
            config.d_s,
            config.mel_bands,
            config.dec_conv_layers,
            config.dec_hidden,
            config.kernel,
            spec,
        )?;
        let content = ContentEncoder::new(config.content_seed, config.content_channels);
        Ok(VcModel { config, content, speaker, decoder, store })
    }

    /// Encode 16 kHz audio through the frozen content encoder.
    pub fn encode_content(&self, segment: &crate::audio::AudioSegment) -> Result<ContentFrames> {
        if self.config.d_c != CONTENT_DIM {
            return Err(Error::Config(format!(
                "model d_c={} cannot consume {CONTENT_DIM}-dim encoder output",
                self.config.d_c
            )));
        }
        self.content.encode(segment)
    }

    /// Build the full loss graph for one example under `mode`.
    pub fn pair_loss<T: Real>(
        &self,
        tape: &mut Tape<T>,
        bindings: &[NodeId],
        example_content_u: &Tensor<T>,
        example_content_v: &Tensor<T>,
        mel_u: &Tensor<T>,
        mel_v: &Tensor<T>,
        speaker_label: usize,
        mode: LossMode,
        weights: &LossWeights,
    ) -> Result<PairForward> {
        let mut counters = ForwardCounters::default();
        let c_u = tape.leaf(example_content_u.clone());
        let x_u = tape.leaf(mel_u.clone());

        let read = |tape: &Tape<T>, node: NodeId| -> Result<f64> {
            Ok(Real::to_f64(tape.value(node).item()?))
        };

        if !mode.uses_pairs() {
            let s = self.speaker.encode(tape, bindings, x_u)?;
            counters.speaker_encoder_calls += 1;
            let x_hat = self.decoder.decode(tape, bindings, c_u, s)?;
            counters.decoder_calls += 1;
            let total = loss_self_same(tape, x_u, x_hat)?;
            let mut breakdown = LossBreakdown::zeros(*weights);
            breakdown.self_same = read(tape, total)?;
            breakdown.total = breakdown.self_same;
            return Ok(PairForward { total, breakdown, counters });
        }

        let c_v = tape.leaf(example_content_v.clone());
        let x_v = tape.leaf(mel_v.clone());

        let s_u = self.speaker.encode(tape, bindings, x_u)?;
        let s_v = self.speaker.encode(tape, bindings, x_v)?;
        counters.speaker_encoder_calls += 2;
        // cross-reconstruction: each crop is rebuilt with the other's
        // speaker embedding
        let x_hat_u = self.decoder.decode(tape, bindings, c_u, s_v)?;
        let x_hat_v = self.decoder.decode(tape, bindings, c_v, s_u)?;
        counters.decoder_calls += 2;

        let base = loss_self_diff(tape, x_u, x_v, x_hat_u, x_hat_v)?;
        let mut breakdown = LossBreakdown::zeros(*weights);
        breakdown.self_diff = read(tape, base)?;
        let mut terms = vec![base];

        if mode.cycle_enabled() {
            let s_u2 = self.speaker.encode(tape, bindings, x_hat_u)?;
            let s_v2 = self.speaker.encode(tape, bindings, x_hat_v)?;
            counters.speaker_encoder_calls += 2;
            let cycle = loss_cycle(tape, s_u, s_v, s_u2, s_v2)?;
            breakdown.cycle = read(tape, cycle)?;
            terms.push(tape.scale(cycle, weights.lambda_cycle));
        }
        if mode.speaker_enabled() {
            let logits_u = self.speaker.project(tape, bindings, s_u)?;
            let logits_v = self.speaker.project(tape, bindings, s_v)?;
            counters.projection_calls += 2;
            let speaker = loss_speaker(tape, logits_u, logits_v, speaker_label)?;
            breakdown.speaker = read(tape, speaker)?;
            terms.push(tape.scale(speaker, weights.lambda_speaker));
        }
        let total = if terms.len() == 1 { terms[0] } else { tape.sum_scalars(&terms)? };
        breakdown.total = read(tape, total)?;
        Ok(PairForward { total, breakdown, counters })
    }

    /// Self-reconstruction loss of one example (validation metric; no
    /// gradients needed).
    pub fn self_reconstruction_loss(&self, content: &Tensor<f32>, mel: &Tensor<f32>) -> Result<f64> {
        let mut tape = Tape::<f32>::new();
        let bindings = self.store.bind(&mut tape);
        let c = tape.leaf(content.clone());
        let x = tape.leaf(mel.clone());
        let s = self.speaker.encode(&mut tape, &bindings, x)?;
        let x_hat = self.decoder.decode(&mut tape, &bindings, c, s)?;
        let loss = loss_self_same(&mut tape, x, x_hat)?;
        Ok(tape.value(loss).item()? as f64)
    }

    /// Inference: speaker embedding of mel frames.
    pub fn embed_mel(&self, mel: &MelFrames) -> Result<Tensor<f32>> {
        self.embed_mel_tensor(mel.tensor())
    }

    pub fn embed_mel_tensor(&self, mel: &Tensor<f32>) -> Result<Tensor<f32>> {
        let mut tape = Tape::<f32>::new();
        let bindings = self.store.bind(&mut tape);
        let x = tape.leaf(mel.clone());
        let s = self.speaker.encode(&mut tape, &bindings, x)?;
        Ok(tape.value(s).clone())
    }

    /// Inference: decode content frames with a given speaker embedding.
    pub fn decode_with_embedding(
        &self,
        content: &ContentFrames,
        embedding: &Tensor<f32>,
    ) -> Result<MelFrames> {
        let mut tape = Tape::<f32>::new();
        let bindings = self.store.bind(&mut tape);
        let c = tape.leaf(content.tensor().clone());
        let s = tape.leaf(embedding.clone());
        let mel = self.decoder.decode(&mut tape, &bindings, c, s)?;
        MelFrames::new(tape.value(mel).clone())
    }
}
