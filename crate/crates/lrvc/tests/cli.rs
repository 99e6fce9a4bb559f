//! End-to-end CLI behavior: exit codes, idempotent outputs, subcommand
//! wiring over a tiny corpus and a tiny model.

use std::path::Path;
use std::process::{Command, Output};

fn lrvc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lrvc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn lrvc_env(args: &[&str], key: &str, value: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lrvc"))
        .args(args)
        .env(key, value)
        .output()
        .expect("binary runs")
}

fn write_tiny_config(path: &Path, corpus: &Path, mode: &str, steps: u64, seed: u64) {
    let text = format!(
        r#"mode = "{mode}"
batch_size = 2
learning_rate = 5e-4
steps = {steps}
segment_seconds = 2.0
seed = {seed}
lambda_cycle = 1.0
lambda_speaker = 1.0
corpus_dir = "{}"
validation_interval = 4

[model]
d_s = 8
spk_conv_layers = 2
spk_fc_layers = 2
spk_hidden = 12
dec_conv_layers = 3
dec_hidden = 12
content_channels = 8
num_speakers = 2
"#,
        corpus.display()
    );
    std::fs::write(path, text).unwrap();
}

#[test]
fn help_exits_zero_on_every_subcommand() {
    for sub in ["gen-data", "train", "convert", "evaluate", "grad-check"] {
        let out = lrvc(&[sub, "--help"]);
        assert!(out.status.success(), "{sub} --help failed");
        let text = String::from_utf8_lossy(&out.stdout);
        assert!(text.contains("--"), "{sub} help lists flags");
    }
    assert!(lrvc(&["--help"]).status.success());
}

#[test]
fn unknown_subcommand_and_flag_exit_nonzero_with_usage() {
    let out = lrvc(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    let out = lrvc(&["gen-data", "--bogus-flag", "1"]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8_lossy(&out.stderr);
    assert!(text.to_lowercase().contains("usage") || text.contains("--help"));
}

#[test]
fn gen_data_is_deterministic_and_validates_speaker_count() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let run = |out: &Path| {
        lrvc(&[
            "gen-data",
            "--speakers",
            "2",
            "--utterances",
            "2",
            "--seed",
            "9",
            "--out",
            out.to_str().unwrap(),
        ])
    };
    assert!(run(&a).status.success());
    assert!(run(&b).status.success());
    let ma = std::fs::read(a.join("manifest.tsv")).unwrap();
    let mb = std::fs::read(b.join("manifest.tsv")).unwrap();
    assert_eq!(ma, mb, "same seed → identical manifest bytes");

    let out = lrvc(&["gen-data", "--speakers", "1", "--out", dir.path().join("c").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "K=1 must fail");
}

#[test]
fn full_pipeline_train_convert_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    // 4 speakers → 2 train / 1 val / 1 test
    let out = lrvc(&[
        "gen-data",
        "--speakers",
        "4",
        "--utterances",
        "2",
        "--seed",
        "5",
        "--out",
        corpus.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let config_path = dir.path().join("train.toml");
    write_tiny_config(&config_path, &corpus, "self-diff+both", 6, 3);
    let run_dir = dir.path().join("run");
    let out = lrvc(&[
        "train",
        "--config",
        config_path.to_str().unwrap(),
        "--out",
        run_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let ckpt = run_dir.join("final.rvck");
    assert!(ckpt.exists());
    assert!(run_dir.join("best.rvck").exists());
    assert!(run_dir.join("loss_log.tsv").exists());

    // resume continues the log numbering
    write_tiny_config(&config_path, &corpus, "self-diff+both", 9, 3);
    let out = lrvc(&[
        "train",
        "--config",
        config_path.to_str().unwrap(),
        "--out",
        run_dir.to_str().unwrap(),
        "--resume",
        ckpt.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let log = std::fs::read_to_string(run_dir.join("loss_log.tsv")).unwrap();
    let steps: Vec<&str> = log
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split('\t').next().unwrap())
        .collect();
    assert_eq!(steps, (1..=9).map(|s| s.to_string()).collect::<Vec<_>>().iter().map(|s| s.as_str()).collect::<Vec<_>>());

    // convert an unseen pair (source = test speaker, target = val speaker)
    let converted = dir.path().join("converted.wav");
    let mel_dump = dir.path().join("converted.rvf");
    let out = lrvc(&[
        "convert",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--source",
        corpus.join("wav48/spk03_utt000.wav").to_str().unwrap(),
        "--target",
        corpus.join("wav48/spk02_utt001.wav").to_str().unwrap(),
        "--out",
        converted.to_str().unwrap(),
        "--mel-out",
        mel_dump.to_str().unwrap(),
        "--gl-iterations",
        "4",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(converted.exists() && mel_dump.exists());
    // idempotent: converting again yields identical bytes
    let first = std::fs::read(&converted).unwrap();
    let out = lrvc(&[
        "convert",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--source",
        corpus.join("wav48/spk03_utt000.wav").to_str().unwrap(),
        "--target",
        corpus.join("wav48/spk02_utt001.wav").to_str().unwrap(),
        "--out",
        converted.to_str().unwrap(),
        "--gl-iterations",
        "4",
    ]);
    assert!(out.status.success());
    assert_eq!(first, std::fs::read(&converted).unwrap());
    // output duration tracks the source duration within one hop
    let src = lrvc::audio::load_wav(corpus.join("wav48/spk03_utt000.wav")).unwrap();
    let conv = lrvc::audio::load_wav(&converted).unwrap();
    let src_secs = src.duration_secs();
    let conv_secs = conv.duration_secs();
    assert!(
        (src_secs - conv_secs).abs() <= 0.1 + 300.0 / 24_000.0,
        "source {src_secs:.3} s vs converted {conv_secs:.3} s"
    );

    // missing checkpoint file exits 1
    let out = lrvc(&[
        "convert",
        "--checkpoint",
        dir.path().join("nope.rvck").to_str().unwrap(),
        "--source",
        corpus.join("wav48/spk03_utt000.wav").to_str().unwrap(),
        "--target",
        corpus.join("wav48/spk02_utt001.wav").to_str().unwrap(),
        "--out",
        converted.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));

    // evaluate: deterministic report over held-out speakers
    let report_a = dir.path().join("report_a.json");
    let report_b = dir.path().join("report_b.json");
    for report in [&report_a, &report_b] {
        let out = lrvc(&[
            "evaluate",
            "--checkpoint",
            ckpt.to_str().unwrap(),
            "--corpus",
            corpus.to_str().unwrap(),
            "--pairs",
            "4",
            "--seed",
            "11",
            "--gl-iterations",
            "4",
            "--out",
            report.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = std::fs::read(&report_a).unwrap();
    let b = std::fs::read(&report_b).unwrap();
    assert_eq!(a, b, "identical seeds → identical report bytes");
    let parsed: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(parsed["n_pairs"], 4);
    assert_eq!(parsed["zero_shot"], true);

    // requesting a training-split speaker violates the zero-shot protocol
    let out = lrvc(&[
        "evaluate",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--corpus",
        corpus.to_str().unwrap(),
        "--pairs",
        "2",
        "--speakers",
        "0,2",
        "--out",
        dir.path().join("bad.json").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("training split"));

    // malformed config key named in the error
    let bad_config = dir.path().join("bad.toml");
    std::fs::write(&bad_config, "mode = \"self-same\"\nbatch_siz = 2\n").unwrap();
    let out = lrvc(&[
        "train",
        "--config",
        bad_config.to_str().unwrap(),
        "--out",
        dir.path().join("nope").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("batch_siz"));
}

#[test]
fn grad_check_ops_pass_and_corruption_hook_fails() {
    let out = lrvc(&["grad-check", "--scope", "ops", "--seed", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("conv1d") && text.contains("PASS"));

    // same seed → identical report bytes
    let again = lrvc(&["grad-check", "--scope", "ops", "--seed", "1"]);
    assert_eq!(out.stdout, again.stdout);

    // negative control: a wrong gradient must be caught and exit nonzero
    let corrupted = lrvc_env(
        &["grad-check", "--scope", "ops", "--seed", "1"],
        "LRVC_GRADCHECK_CORRUPT",
        "1",
    );
    assert_eq!(corrupted.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&corrupted.stdout).contains("FAIL"));
}
