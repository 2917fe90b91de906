//! Subcommand surface: flags, exit codes, and the promise that pipeline
//! artifacts are individually consumable by the standalone subcommands.

use std::path::Path;
use std::process::Command;

use bmtl::toy::{generate_reversal, ToySpec};

fn bmtl(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_bmtl"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).to_string(),
        String::from_utf8_lossy(&out.stderr).to_string(),
    )
}

#[test]
fn help_exits_zero() {
    let (code, stdout, _) = bmtl(&["--help"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("subcommands"));
    let (code, stdout, _) = bmtl(&["score", "--help"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("--hyp"));
}

#[test]
fn usage_errors_exit_one() {
    let (code, _, stderr) = bmtl(&["warp"]);
    assert_eq!(code, 1);
    assert!(stderr.contains("unknown subcommand"));

    let (code, _, stderr) = bmtl(&["score", "--hyp"]);
    assert_eq!(code, 1);
    assert!(stderr.contains("needs a value"));

    let (code, _, stderr) = bmtl(&["score", "--hyp", "a", "--ref", "b", "--x", "1"]);
    assert_eq!(code, 1);
    assert!(stderr.contains("--x"));

    let (code, _, stderr) = bmtl(&["score", "--hyp", "a"]);
    assert_eq!(code, 1);
    assert!(stderr.contains("--ref"));
}

#[test]
fn score_self_is_100() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("h.txt");
    std::fs::write(&f, "The cat sat.\nBirds fly!\n").unwrap();
    let (code, stdout, _) = bmtl(&["score", "--hyp", f.to_str().unwrap(), "--ref", f.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(stdout.starts_with("BLEU = 100.00"), "{stdout}");
}

#[test]
fn missing_input_exits_two() {
    let (code, _, stderr) = bmtl(&["score", "--hyp", "/no/such/file", "--ref", "/no/such/file"]);
    assert_eq!(code, 2, "{stderr}");
}

#[test]
fn bad_config_key_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "mystery = 1\n").unwrap();
    let (code, _, stderr) = bmtl(&["params", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(stderr.contains("mystery") || stderr.contains("missing required"), "{stderr}");
}

#[test]
fn preprocess_and_subword_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw.txt");
    std::fs::write(&raw, "The low lower lowest!\nLow east west.\n").unwrap();
    let toks = dir.path().join("toks.txt");
    let tc = dir.path().join("model.tc");
    let (code, _, stderr) = bmtl(&[
        "preprocess",
        "--input",
        raw.to_str().unwrap(),
        "--output",
        toks.to_str().unwrap(),
        "--train-truecaser",
        tc.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{stderr}");
    let text = std::fs::read_to_string(&toks).unwrap();
    assert!(text.contains("low lower lowest !"), "{text}");
    assert!(tc.is_file());
    assert!(dir.path().join("toks.txt.manifest").is_file());

    let merges = dir.path().join("x.merges");
    let vocab = dir.path().join("x.vocab");
    let (code, _, stderr) = bmtl(&[
        "subword-train",
        "--input",
        toks.to_str().unwrap(),
        "--vocab-size",
        "60",
        "--merges-out",
        merges.to_str().unwrap(),
        "--vocab-out",
        vocab.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{stderr}");

    let seg = dir.path().join("seg.txt");
    let (code, _, stderr) = bmtl(&[
        "subword-apply",
        "--merges",
        merges.to_str().unwrap(),
        "--vocab",
        vocab.to_str().unwrap(),
        "--input",
        toks.to_str().unwrap(),
        "--output",
        seg.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{stderr}");
    let seg_text = std::fs::read_to_string(&seg).unwrap();
    assert_eq!(seg_text.lines().count(), 2);
    assert!(seg_text.contains("</w>"), "{seg_text}");
}

#[test]
fn params_reports_reduction() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    std::fs::write(
        &cfg,
        "train_src=a\ntrain_tgt=a\ndev_src=a\ndev_tgt=a\ntest_src=a\ntest_tgt=a\nout_dir=o\n",
    )
    .unwrap();
    let (code, stdout, stderr) = bmtl(&["params", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.contains("total\t"), "{stdout}");
    assert!(stdout.contains("reduction\t"), "{stdout}");
}

fn write_toy_config(dir: &Path) -> std::path::PathBuf {
    let spec = ToySpec {
        n_train: 60,
        n_dev: 15,
        n_test: 15,
        vocab_words: 18,
        max_words: 4,
        ..ToySpec::default()
    };
    generate_reversal(&spec).write_files(dir).unwrap();
    let cfg = dir.join("toy.cfg");
    std::fs::write(
        &cfg,
        "train_src=train.src\ntrain_tgt=train.tgt\ndev_src=dev.src\ndev_tgt=dev.tgt\n\
         test_src=test.src\ntest_tgt=test.tgt\nout_dir=out\n\
         source_budget=60\ndecoder_budgets=40,60\n\
         embed_dim=16\nenc_hidden=16\nenc_layers=1\ndec_hidden=24\ndropout=0.1\n\
         learning_rate=0.002\nbatch_size=16\nmax_updates=40\neval_every=20\npatience=5\nseed=3\n\
         baselines=false\n",
    )
    .unwrap();
    cfg
}

#[test]
fn pipeline_artifacts_feed_standalone_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_toy_config(dir.path());
    let (code, stdout, stderr) = bmtl(&["pipeline", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.contains("bmtl.combined_bleu="), "{stdout}");

    let out = dir.path().join("out");
    let ckpt = out.join("model/bmtl.ckpt");
    let test_src = out.join("processed/test.src");

    // standalone translate reproduces the pipeline's hypothesis file
    let hyp2 = dir.path().join("re.txt");
    let (code, _, stderr) = bmtl(&[
        "translate",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--decoder",
        "bpe40",
        "--input",
        test_src.to_str().unwrap(),
        "--output",
        hyp2.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{stderr}");
    let pipeline_hyp = std::fs::read_to_string(out.join("hyp/test.bpe40.txt")).unwrap();
    let standalone_hyp = std::fs::read_to_string(&hyp2).unwrap();
    assert_eq!(pipeline_hyp, standalone_hyp);

    // standalone combine over the pipeline's per-decoder hypotheses
    let combined2 = dir.path().join("comb.txt");
    let hyps = format!(
        "{},{}",
        out.join("hyp/test.bpe40.txt").display(),
        out.join("hyp/test.bpe60.txt").display()
    );
    let (code, _, stderr) = bmtl(&[
        "combine",
        "--hyps",
        &hyps,
        "--output",
        combined2.to_str().unwrap(),
        "--lm",
        out.join("lm/target.lm").to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{stderr}");
    let combined_pipeline = std::fs::read_to_string(out.join("hyp/test.combined.txt")).unwrap();
    let combined_standalone = std::fs::read_to_string(&combined2).unwrap();
    assert_eq!(combined_pipeline, combined_standalone);

    // standalone score agrees with the report
    let (code, stdout, _) = bmtl(&[
        "score",
        "--hyp",
        out.join("hyp/test.combined.detok.txt").to_str().unwrap(),
        "--ref",
        dir.path().join("test.tgt").to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(stdout.starts_with("BLEU = "), "{stdout}");

    // tampered vocabulary file trips the checkpoint hash gate
    let vocab_path = out.join("subword/src.vocab");
    let mut vocab_text = std::fs::read_to_string(&vocab_path).unwrap();
    vocab_text.push_str("zzz\t9999\n");
    std::fs::write(&vocab_path, vocab_text).unwrap();
    let (code, _, stderr) = bmtl(&[
        "translate",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--decoder",
        "bpe40",
        "--input",
        test_src.to_str().unwrap(),
        "--output",
        hyp2.to_str().unwrap(),
    ]);
    assert_eq!(code, 2, "{stderr}");
    assert!(stderr.contains("hash mismatch"), "{stderr}");
}
