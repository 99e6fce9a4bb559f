//! Training: config, batch assembly from the pair sampler, the step loop
//! with deterministic per-step RNG streams (resumable mid-run), validation
//! by self-reconstruction loss, and checkpoint persistence.

mod checkpoint;
mod sampler;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use sampler::{center_crop, crop_at, draw_offset_ticks, sample_pair, DualRateSegment, Utterance};

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::RngExt;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::audio::{load_wav, mel_spectrogram};
use crate::compute::{OptimizerState, Tape, Tensor};
use crate::error::{io_err, Error, Result};
use crate::losses::{LossBreakdown, LossMode, LossWeights};
use crate::model::{ForwardCounters, ModelConfig, PairExample, VcModel};
use crate::synthdata::{child_seed, CorpusManifest, Split};

/// Full training configuration; the TOML config file mirrors these fields.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub mode: LossMode,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub steps: u64,
    pub segment_seconds: f64,
    pub seed: u64,
    pub lambda_cycle: f64,
    pub lambda_speaker: f64,
    pub corpus_dir: PathBuf,
    pub validation_interval: u64,
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mode: LossMode::SelfDiffBoth,
            batch_size: 16,
            learning_rate: 5e-4,
            steps: 3000,
            segment_seconds: 2.0,
            seed: 1,
            lambda_cycle: 1.0,
            lambda_speaker: 1.0,
            corpus_dir: PathBuf::from("corpus"),
            validation_interval: 200,
            model: ModelConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn weights(&self) -> LossWeights {
        LossWeights { lambda_cycle: self.lambda_cycle, lambda_speaker: self.lambda_speaker }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 1 {
            return Err(Error::Config("batch_size must be ≥ 1".into()));
        }
        if self.steps < 1 {
            return Err(Error::Config("steps must be ≥ 1".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::Config("learning_rate must be > 0".into()));
        }
        if self.validation_interval < 1 {
            return Err(Error::Config("validation_interval must be ≥ 1".into()));
        }
        let spec = self.model.resample_spec()?;
        // segment policy: whole samples at both rates, whole frames on both
        // paths, and a resampled length that divides exactly
        let s16 = self.segment_seconds * 16_000.0;
        let s24 = self.segment_seconds * 24_000.0;
        if s16.fract() != 0.0 || s24.fract() != 0.0 {
            return Err(Error::Config(format!(
                "segment_seconds {} is not sample-aligned at 16/24 kHz",
                self.segment_seconds
            )));
        }
        let (s16, s24) = (s16 as usize, s24 as usize);
        if s16 % 320 != 0 {
            return Err(Error::Config(format!(
                "segment gives {s16} samples at 16 kHz, not divisible by the 320× stride"
            )));
        }
        if s24 % 300 != 0 {
            return Err(Error::Config(format!(
                "segment gives {s24} samples at 24 kHz, not divisible by hop 300"
            )));
        }
        let t_inp = s16 / 320;
        if (t_inp * spec.q) % spec.p != 0 {
            return Err(Error::Config(format!(
                "T_inp={t_inp} × q={} not divisible by p={}",
                spec.q, spec.p
            )));
        }
        if t_inp * spec.q / spec.p != s24 / 300 {
            return Err(Error::Config(format!(
                "decoder output length {} disagrees with mel frame count {}",
                t_inp * spec.q / spec.p,
                s24 / 300
            )));
        }
        Ok(())
    }

    pub fn from_toml_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let config: TrainConfig = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Internal(format!("config to toml: {e}")))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Internal(format!("config to json: {e}")))
    }

    pub fn from_json(json: &str) -> Result<Self> {
        serde_json::from_str(json).map_err(|e| Error::Config(format!("embedded config: {e}")))
    }

    /// Hash over everything that determines checkpoint compatibility: model
    /// structure, mode, weights, optimizer settings, seed. Run-length fields
    /// (steps, validation_interval) are excluded so a checkpoint can be
    /// resumed with a longer horizon, and the corpus path is excluded so
    /// corpora can move between machines.
    pub fn content_hash(&self) -> Result<[u8; 32]> {
        let mut reduced = self.clone();
        reduced.corpus_dir = PathBuf::new();
        reduced.steps = 0;
        reduced.validation_interval = 0;
        let json = reduced.to_json()?;
        let mut hasher = Sha256::new();
        hasher.update(json.as_bytes());
        Ok(hasher.finalize().into())
    }
}

/// Everything `train` leaves on disk.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub best_step: u64,
    pub best_val_loss: f64,
    pub final_val_loss: f64,
    pub best_checkpoint: PathBuf,
    pub final_checkpoint: PathBuf,
    pub log_path: PathBuf,
}

/// Load every utterance of a split at both rates.
pub fn load_split(manifest: &CorpusManifest, split: Split) -> Result<Vec<Utterance>> {
    manifest
        .split_rows(split)
        .into_par_iter()
        .map(|row| {
            Ok(Utterance {
                row: row.clone(),
                wav16: load_wav(manifest.root.join(&row.wav16))?,
                wav24: load_wav(manifest.root.join(&row.wav24))?,
            })
        })
        .collect()
}

/// Extract model-ready features from one dual-rate crop.
fn features_of(model: &VcModel, seg: &DualRateSegment) -> Result<(Tensor<f32>, Tensor<f32>)> {
    let content = model.encode_content(&seg.wav16)?;
    let mel = mel_spectrogram(&seg.wav24)?;
    Ok((content.tensor().clone(), mel.into_tensor()))
}

/// Assemble one batch: draw (utterance, crop pair) per item with the step
/// RNG, then extract features in parallel. In self-same mode the second
/// crop is replaced by the first (v := u), so only the pairing differs
/// between modes.
fn assemble_batch(
    model: &VcModel,
    train_set: &[Utterance],
    speaker_class: &dyn Fn(usize) -> Option<usize>,
    config: &TrainConfig,
    rng: &mut ChaCha20Rng,
) -> Result<Vec<PairExample>> {
    struct Draw {
        utt_index: usize,
        tick_u: u64,
        tick_v: u64,
        label: usize,
    }
    let mut draws = Vec::with_capacity(config.batch_size);
    for _ in 0..config.batch_size {
        let utt_index = rng.random_range(0..train_set.len());
        let utt = &train_set[utt_index];
        let tick_u = draw_offset_ticks(utt, config.segment_seconds, rng)?;
        let tick_v = draw_offset_ticks(utt, config.segment_seconds, rng)?;
        let label = speaker_class(utt.row.speaker_id).ok_or_else(|| {
            Error::Internal(format!("speaker {} missing from class map", utt.row.speaker_id))
        })?;
        draws.push(Draw { utt_index, tick_u, tick_v, label });
    }
    draws
        .into_par_iter()
        .map(|d| {
            let utt = &train_set[d.utt_index];
            let crop_u = crop_at(utt, d.tick_u, config.segment_seconds)?;
            let (content_u, mel_u) = features_of(model, &crop_u)?;
            let (content_v, mel_v) = if config.mode.uses_pairs() {
                let crop_v = crop_at(utt, d.tick_v, config.segment_seconds)?;
                features_of(model, &crop_v)?
            } else {
                (content_u.clone(), mel_u.clone())
            };
            Ok(PairExample {
                content_u,
                content_v,
                mel_u,
                mel_v,
                speaker_label: d.label,
            })
        })
        .collect()
}

/// One optimizer step over a batch: per-item forward/backward in parallel,
/// gradients reduced in item order (deterministic), then the update.
pub fn train_step(
    model: &mut VcModel,
    optimizer: &mut OptimizerState,
    batch: &[PairExample],
    config: &TrainConfig,
) -> Result<(LossBreakdown, ForwardCounters)> {
    if batch.is_empty() {
        return Err(Error::Internal("empty batch".into()));
    }
    let weights = config.weights();
    let results: Result<Vec<(LossBreakdown, ForwardCounters, Vec<Vec<f32>>)>> = batch
        .par_iter()
        .map(|example| {
            let mut tape = Tape::<f32>::new();
            let bindings = model.store.bind(&mut tape);
            let out = model.pair_loss(
                &mut tape,
                &bindings,
                &example.content_u,
                &example.content_v,
                &example.mel_u,
                &example.mel_v,
                example.speaker_label,
                config.mode,
                &weights,
            )?;
            if !out.breakdown.total.is_finite() {
                return Err(Error::Training(format!(
                    "non-finite loss: {:?}",
                    out.breakdown
                )));
            }
            tape.backward(out.total)?;
            let grads: Vec<Vec<f32>> = bindings
                .iter()
                .zip(model.store.iter())
                .map(|(&b, p)| match tape.grad(b) {
                    Some(g) => g.to_vec(),
                    None => vec![0.0; p.value.len()],
                })
                .collect();
            Ok((out.breakdown, out.counters, grads))
        })
        .collect();
    let results = results?;

    model.store.zero_grads();
    let scale = 1.0 / batch.len() as f32;
    for (_, _, grads) in &results {
        for (i, g) in grads.iter().enumerate() {
            let p = model.store.get_mut(crate::compute::ParamId::from_index(i));
            for (dst, &src) in p.grad.data_mut().iter_mut().zip(g) {
                *dst += src * scale;
            }
        }
    }
    optimizer.apply(&mut model.store)?;
    model.store.zero_grads();

    let breakdowns: Vec<LossBreakdown> = results.iter().map(|(b, _, _)| *b).collect();
    let mut counters = ForwardCounters::default();
    for (_, c, _) in &results {
        counters.speaker_encoder_calls += c.speaker_encoder_calls;
        counters.decoder_calls += c.decoder_calls;
        counters.projection_calls += c.projection_calls;
    }
    Ok((LossBreakdown::mean(&breakdowns).expect("non-empty batch"), counters))
}

/// Mean self-reconstruction loss over the validation features.
fn validation_loss(model: &VcModel, features: &[(Tensor<f32>, Tensor<f32>)]) -> Result<f64> {
    let losses: Result<Vec<f64>> = features
        .par_iter()
        .map(|(content, mel)| model.self_reconstruction_loss(content, mel))
        .collect();
    let losses = losses?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

/// Run (or resume) a training job. Writes `loss_log.tsv`, `best.rvck`, and
/// `final.rvck` under `out_dir`. Per-step RNG streams are derived from
/// (seed, step), so a resumed run reproduces the uninterrupted trajectory.
pub fn train(config: &TrainConfig, out_dir: &Path, resume: Option<&Path>) -> Result<TrainOutcome> {
    config.validate()?;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;

    let manifest = CorpusManifest::load(&config.corpus_dir)?;
    let train_set = load_split(&manifest, Split::Train)?;
    if train_set.is_empty() {
        return Err(Error::Data("corpus has no training utterances".into()));
    }
    let train_speakers = manifest.split_speakers(Split::Train);
    if config.model.num_speakers != train_speakers.len() {
        return Err(Error::Config(format!(
            "model.num_speakers={} but the corpus has {} training speakers",
            config.model.num_speakers,
            train_speakers.len()
        )));
    }
    let class_of = move |speaker_id: usize| train_speakers.iter().position(|&s| s == speaker_id);

    let mut model = VcModel::new(config.model.clone(), config.seed)?;
    let mut optimizer = OptimizerState::new(config.learning_rate, &model.store)?;
    let mut start_step = 0u64;
    if let Some(ckpt_path) = resume {
        let ckpt = load_checkpoint(ckpt_path)?;
        let (opt, step) = ckpt.install(&mut model, config, false)?;
        optimizer = opt;
        start_step = step;
        if start_step >= config.steps {
            return Err(Error::Config(format!(
                "checkpoint is already at step {start_step}, config stops at {}",
                config.steps
            )));
        }
    }

    // validation features: deterministic center crops, extracted once
    let val_set = load_split(&manifest, Split::Val)?;
    if val_set.is_empty() {
        return Err(Error::Data("corpus has no validation utterances".into()));
    }
    let val_features: Result<Vec<(Tensor<f32>, Tensor<f32>)>> = val_set
        .par_iter()
        .map(|utt| features_of(&model, &center_crop(utt, config.segment_seconds)?))
        .collect();
    let val_features = val_features?;

    let log_path = out_dir.join("loss_log.tsv");
    let mut log = if resume.is_some() && log_path.exists() {
        fs::OpenOptions::new()
            .append(true)
            .open(&log_path)
            .map_err(io_err(&log_path))?
    } else {
        let mut f = fs::File::create(&log_path).map_err(io_err(&log_path))?;
        f.write_all(b"# step\tself_same\tself_diff\tcycle\tspeaker\ttotal\n")
            .map_err(io_err(&log_path))?;
        f
    };

    let best_path = out_dir.join("best.rvck");
    let final_path = out_dir.join("final.rvck");
    let mut best_val = f64::INFINITY;
    let mut best_step = 0u64;
    let mut last_val = f64::INFINITY;

    for step in start_step + 1..=config.steps {
        let mut rng = ChaCha20Rng::seed_from_u64(child_seed(config.seed, 0x5E9 ^ step));
        let batch = assemble_batch(&model, &train_set, &class_of, config, &mut rng)?;
        let (breakdown, _) = train_step(&mut model, &mut optimizer, &batch, config)
            .map_err(|e| match e {
                Error::Training(msg) => Error::Training(format!("step {step}: {msg}")),
                other => other,
            })?;
        writeln!(
            log,
            "{step}\t{}\t{}\t{}\t{}\t{}",
            breakdown.self_same, breakdown.self_diff, breakdown.cycle, breakdown.speaker, breakdown.total
        )
        .map_err(io_err(&log_path))?;

        if step % config.validation_interval == 0 || step == config.steps {
            let val = validation_loss(&model, &val_features)?;
            last_val = val;
            writeln!(log, "#val\t{step}\t{val}").map_err(io_err(&log_path))?;
            if val < best_val {
                best_val = val;
                best_step = step;
                save_checkpoint(&model, &optimizer, step, config, &best_path)?;
            }
        }
    }
    save_checkpoint(&model, &optimizer, config.steps, config, &final_path)?;

    Ok(TrainOutcome {
        best_step,
        best_val_loss: best_val,
        final_val_loss: last_val,
        best_checkpoint: best_path,
        final_checkpoint: final_path,
        log_path,
    })
}

/// Load a checkpoint and rebuild its model for inference.
pub fn load_model(ckpt_path: &Path) -> Result<(VcModel, TrainConfig, u64)> {
    let ckpt = load_checkpoint(ckpt_path)?;
    let config = ckpt.config()?;
    let mut model = VcModel::new(config.model.clone(), config.seed)?;
    let (_opt, step) = ckpt.install(&mut model, &config, false)?;
    Ok((model, config, step))
}
