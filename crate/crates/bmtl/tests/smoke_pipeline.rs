use bmtl::config::ExperimentConfig;
use bmtl::toy::{generate_reversal, ToySpec};

#[test]
fn pipeline_produces_consumable_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let spec = ToySpec {
        n_train: 80,
        n_dev: 20,
        n_test: 20,
        vocab_words: 20,
        max_words: 5,
        ..ToySpec::default()
    };
    generate_reversal(&spec).write_files(dir.path()).unwrap();
    let cfg_text = "\
train_src=train.src\ntrain_tgt=train.tgt\ndev_src=dev.src\ndev_tgt=dev.tgt\n\
test_src=test.src\ntest_tgt=test.tgt\nout_dir=out\n\
source_budget=70\ndecoder_budgets=40,70\n\
embed_dim=16\nenc_hidden=16\nenc_layers=1\ndec_hidden=24\ndropout=0.1\n\
learning_rate=0.002\nbatch_size=16\nmax_updates=60\neval_every=30\npatience=5\nseed=3\n";
    std::fs::write(dir.path().join("toy.cfg"), cfg_text).unwrap();
    let cfg = ExperimentConfig::parse_file(&dir.path().join("toy.cfg")).unwrap();
    let report = bmtl::pipeline::run_pipeline(&cfg).unwrap();

    let layout = bmtl::pipeline::Layout::new(&cfg.out_dir);
    for p in [
        layout.processed("train", "src"),
        layout.src_merges(),
        layout.src_vocab(),
        layout.checkpoint("bmtl"),
        layout.train_log("bmtl"),
        layout.hypothesis("bpe40"),
        layout.hypothesis("combined"),
        layout.lm(),
        layout.report(),
        layout.manifest(),
    ] {
        assert!(p.is_file(), "missing artifact {}", p.display());
    }
    assert!(report.baseline.is_some());
    assert_eq!(report.multitask.decoders.len(), 2);

    // hypothesis files line up with the test corpus
    let hyp = std::fs::read_to_string(layout.hypothesis("combined")).unwrap();
    assert_eq!(hyp.lines().count(), 20);
}
