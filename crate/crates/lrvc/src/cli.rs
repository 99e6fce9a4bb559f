//! Command-line interface: corpus generation, training, conversion,
//! evaluation, and gradient verification.

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};

use clap::{Parser, Subcommand, ValueEnum};
use rand::RngExt;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::audio::{load_wav, save_matrix, save_wav};
use crate::compute::{grad_check, GradCheckOptions, GradCheckReport, ParamStore, Tensor};
use crate::error::{io_err, Error, Result};
use crate::eval::{convert, EvalOptions};
use crate::losses::LossWeights;
use crate::model::{ModelConfig, VcModel};
use crate::synthdata::build_corpus;
use crate::trainer::{load_model, train, TrainConfig};

#[derive(Parser, Debug)]
#[command(
    name = "lrvc",
    version,
    about = "Zero-shot voice conversion with a length-resampling decoder"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic parametric-speaker corpus
    GenData {
        /// Number of speakers (≥ 2)
        #[arg(long, default_value_t = 8)]
        speakers: usize,
        /// Utterances per speaker
        #[arg(long, default_value_t = 20)]
        utterances: usize,
        /// Output corpus directory
        #[arg(long)]
        out: PathBuf,
        /// Generation seed
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Train a model from a TOML config file
    Train {
        /// Path to the training config (TOML)
        #[arg(long)]
        config: PathBuf,
        /// Output directory for checkpoints and the loss log
        #[arg(long)]
        out: PathBuf,
        /// Resume from an existing checkpoint
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Convert: speak the source's content in the target's voice
    Convert {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Source WAV (16-bit PCM mono at 16/24/48 kHz)
        #[arg(long)]
        source: PathBuf,
        /// Target-voice WAV (24 or 48 kHz)
        #[arg(long)]
        target: PathBuf,
        /// Output WAV path (24 kHz)
        #[arg(long)]
        out: PathBuf,
        /// Optional RVF1 dump of the converted mel frames
        #[arg(long)]
        mel_out: Option<PathBuf>,
        /// Griffin-Lim iterations
        #[arg(long, default_value_t = 60)]
        gl_iterations: usize,
    },
    /// Zero-shot metric report over held-out speakers
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Corpus directory (with manifest.tsv)
        #[arg(long)]
        corpus: PathBuf,
        /// Number of conversion pairs
        #[arg(long, default_value_t = 50)]
        pairs: usize,
        /// Report output path (JSON)
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Restrict to these held-out speaker ids
        #[arg(long, value_delimiter = ',')]
        speakers: Option<Vec<usize>>,
        #[arg(long, default_value_t = 40)]
        gl_iterations: usize,
    },
    /// Verify reverse-mode gradients against central differences
    GradCheck {
        #[arg(long, value_enum, default_value_t = GradCheckScope::Ops)]
        scope: GradCheckScope,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum GradCheckScope {
    /// Every differentiable op on random small inputs
    Ops,
    /// The full pair loss on a miniature model config
    Model,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData { speakers, utterances, out, seed } => {
            let manifest = build_corpus(speakers, utterances, seed, &out)?;
            println!(
                "wrote {} utterances for {speakers} speakers to {}",
                manifest.rows.len(),
                out.display()
            );
            Ok(())
        }
        Command::Train { config, out, resume } => {
            let config = TrainConfig::from_toml_file(&config)?;
            let outcome = train(&config, &out, resume.as_deref())?;
            println!(
                "trained {} steps (mode {}); best val {} at step {}; final val {}",
                config.steps, config.mode, outcome.best_val_loss, outcome.best_step,
                outcome.final_val_loss
            );
            println!("best: {}", outcome.best_checkpoint.display());
            println!("final: {}", outcome.final_checkpoint.display());
            Ok(())
        }
        Command::Convert { checkpoint, source, target, out, mel_out, gl_iterations } => {
            let (model, _, _) = load_model(&checkpoint)?;
            let source_audio = load_wav(&source)?;
            let target_audio = load_wav(&target)?;
            let result = convert(&model, &source_audio, &target_audio, gl_iterations)?;
            save_wav(&result.audio, &out)?;
            if let Some(mel_path) = mel_out {
                save_matrix(result.mel.tensor(), &mel_path)?;
            }
            println!(
                "converted {} frames → {} ({:.2} s)",
                result.mel.num_frames(),
                out.display(),
                result.audio.duration_secs()
            );
            Ok(())
        }
        Command::Evaluate { checkpoint, corpus, pairs, out, seed, speakers, gl_iterations } => {
            let opts = EvalOptions {
                n_pairs: pairs,
                seed,
                gl_iterations,
                speaker_filter: speakers,
                ..Default::default()
            };
            let report = crate::eval::evaluate_checkpoint(&checkpoint, &corpus, &opts)?;
            std::fs::write(&out, report.to_json()?).map_err(io_err(&out))?;
            println!("{}", report.summary());
            println!("report: {}", out.display());
            Ok(())
        }
        Command::GradCheck { scope, seed } => {
            let tolerance = 1e-3;
            let reports = match scope {
                GradCheckScope::Ops => op_gradcheck_suite(seed)?,
                GradCheckScope::Model => model_gradcheck_suite(seed)?,
            };
            let mut all_pass = true;
            for (name, report) in &reports {
                let pass = report.passes(tolerance);
                all_pass &= pass;
                println!(
                    "{name}\tmax_rel_error={:.3e}\tchecked={}\t{}",
                    report.max_rel_error,
                    report.entries_checked,
                    if pass { "PASS" } else { "FAIL" }
                );
            }
            if !all_pass {
                return Err(Error::Training(format!(
                    "gradient check failed at tolerance {tolerance}"
                )));
            }
            Ok(())
        }
    }
}

fn randn(shape: Vec<usize>, rng: &mut ChaCha20Rng) -> Tensor<f32> {
    let n: usize = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0f32..1.0)).collect()).expect("shape")
}

/// Per-op finite-difference checks on random small inputs.
pub fn op_gradcheck_suite(seed: u64) -> Result<Vec<(String, GradCheckReport)>> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let opts = GradCheckOptions { seed, ..Default::default() };
    let mut reports = Vec::new();

    {
        let mut store = ParamStore::new();
        store.insert("input", randn(vec![10, 4], &mut rng))?;
        store.insert("weight", randn(vec![5, 4, 3], &mut rng))?;
        store.insert("bias", randn(vec![3], &mut rng))?;
        let report = grad_check(
            &store,
            |tape, b| {
                let y = tape.conv1d(b[0], b[1], b[2], 2, 2)?;
                let zero = tape.leaf(Tensor::zeros(vec![5, 3]));
                tape.l2_distance(y, zero)
            },
            opts,
        )?;
        reports.push(("conv1d".to_string(), report));
    }
    {
        let mut store = ParamStore::new();
        store.insert("input", randn(vec![6, 5], &mut rng))?;
        store.insert("weight", randn(vec![5, 3], &mut rng))?;
        store.insert("bias", randn(vec![3], &mut rng))?;
        let report = grad_check(
            &store,
            |tape, b| {
                let y = tape.linear(b[0], b[1], b[2])?;
                let r = tape.relu(y);
                let zero = tape.leaf(Tensor::zeros(vec![6, 3]));
                tape.l2_distance(r, zero)
            },
            opts,
        )?;
        reports.push(("linear+relu".to_string(), report));
    }
    {
        let mut store = ParamStore::new();
        store.insert("logits", randn(vec![8], &mut rng))?;
        let report = grad_check(&store, |tape, b| tape.softmax_cross_entropy(b[0], 5), opts)?;
        reports.push(("softmax_cross_entropy".to_string(), report));
    }
    {
        let mut store = ParamStore::new();
        store.insert("a", randn(vec![7, 3], &mut rng))?;
        store.insert("b", randn(vec![7, 3], &mut rng))?;
        let report = grad_check(&store, |tape, b| tape.l2_distance(b[0], b[1]), opts)?;
        reports.push(("l2_distance".to_string(), report));
    }
    {
        let mut store = ParamStore::new();
        store.insert("input", randn(vec![6, 8], &mut rng))?;
        let report = grad_check(
            &store,
            |tape, b| {
                let s = tape.pixel_shuffle_1d(b[0], 2)?;
                let p = tape.avg_pool_1d(s, 3)?;
                let m = tape.mean_over_time(p)?;
                let zero = tape.leaf(Tensor::zeros(vec![4]));
                tape.l2_distance(m, zero)
            },
            opts,
        )?;
        reports.push(("pixel_shuffle+avg_pool+mean".to_string(), report));
    }
    {
        let mut store = ParamStore::new();
        store.insert("seq", randn(vec![5, 4], &mut rng))?;
        store.insert("vec", randn(vec![3], &mut rng))?;
        let report = grad_check(
            &store,
            |tape, b| {
                let fused = tape.concat_broadcast(b[0], b[1])?;
                let m = tape.mean_over_time(fused)?;
                let zero = tape.leaf(Tensor::zeros(vec![7]));
                tape.l2_distance(m, zero)
            },
            opts,
        )?;
        reports.push(("concat_broadcast".to_string(), report));
    }

    // negative-control hook: make the analytic pass see a different function
    // than the finite-difference passes, which must be caught as a failure
    if std::env::var("LRVC_GRADCHECK_CORRUPT").as_deref() == Ok("1") {
        let mut store = ParamStore::new();
        store.insert("p", randn(vec![6], &mut rng))?;
        let calls = AtomicUsize::new(0);
        let report = grad_check(
            &store,
            move |tape, b| {
                let zero = tape.leaf(Tensor::zeros(vec![6]));
                let d = tape.l2_distance(b[0], zero)?;
                let factor = if calls.fetch_add(1, Ordering::SeqCst) == 0 { 2.0 } else { 1.0 };
                Ok(tape.scale(d, factor))
            },
            opts,
        )?;
        reports.push(("corrupted-gradient-control".to_string(), report));
    }
    Ok(reports)
}

/// Finite-difference check of the full pair loss on the miniature config.
pub fn model_gradcheck_suite(seed: u64) -> Result<Vec<(String, GradCheckReport)>> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let config = ModelConfig::miniature();
    let model = VcModel::new(config.clone(), seed)?;
    let t_inp = 10;
    let t_out = t_inp * config.resample_q / config.resample_p;
    let content_u = randn(vec![t_inp, config.d_c], &mut rng);
    let content_v = randn(vec![t_inp, config.d_c], &mut rng);
    let mel_u = randn(vec![t_out, config.mel_bands], &mut rng);
    let mel_v = randn(vec![t_out, config.mel_bands], &mut rng);

    let report = grad_check(
        &model.store,
        |tape, bindings| {
            let out = model.pair_loss(
                tape,
                bindings,
                &content_u.cast(),
                &content_v.cast(),
                &mel_u.cast(),
                &mel_v.cast(),
                1,
                crate::losses::LossMode::SelfDiffBoth,
                &LossWeights::default(),
            )?;
            Ok(out.total)
        },
        GradCheckOptions { seed, max_entries: 1500, ..Default::default() },
    )?;
    Ok(vec![("pair_loss[self-diff+both, miniature]".to_string(), report)])
}
