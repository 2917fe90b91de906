//! Trains a small shared-encoder multitask model on the synthetic
//! reversal task and prints the loss curve and dev BLEU per decoder.
//! Takes around a minute on one core.
//!
//! ```bash
//! cargo run -p bmtl --example train_toy
//! ```

use bmtl::config::ExperimentConfig;
use bmtl::pipeline::{stage_preprocess, stage_subword, stage_train, Layout};
use bmtl::toy::{generate_reversal, ToySpec};

fn main() {
    let dir = tempfile_dir();
    let spec = ToySpec { n_train: 120, n_dev: 30, n_test: 30, ..ToySpec::default() };
    generate_reversal(&spec).write_files(&dir).expect("writable tempdir");

    let cfg_text = "\
train_src=train.src\ntrain_tgt=train.tgt\ndev_src=dev.src\ndev_tgt=dev.tgt\n\
test_src=test.src\ntest_tgt=test.tgt\nout_dir=out\n\
source_budget=90\ndecoder_budgets=40,60,90\n\
embed_dim=24\nenc_hidden=24\nenc_layers=1\ndec_hidden=48\ndropout=0.1\n\
learning_rate=0.002\nbatch_size=32\nmax_updates=400\neval_every=50\npatience=4\nseed=5\n";
    let cfg = ExperimentConfig::parse_str(cfg_text, &dir).expect("valid config");
    let layout = Layout::new(&cfg.out_dir);

    let pre = stage_preprocess(&cfg, &layout).expect("preprocess");
    let sub = stage_subword(&cfg, &layout, &pre).expect("subword learning");
    println!(
        "vocabularies: source {} | decoders {:?}",
        sub.src.vocab.size(),
        sub.decoders.iter().map(|d| d.vocab.size()).collect::<Vec<_>>()
    );

    let trained = stage_train(&cfg, &layout, &pre, &sub, &cfg.decoder_budgets.clone(), "bmtl")
        .expect("training");
    println!("trained {} updates", trained.outcome.updates);
    for (u, loss) in trained.outcome.loss_log.iter().step_by(50) {
        println!("  update {u:>4}  combined loss {loss:.4}");
    }
    println!("dev BLEU trajectory:");
    for (u, name, bleu) in &trained.outcome.eval_log {
        println!("  update {u:>4}  {name:<6} {bleu:6.2}");
    }
    println!("best dev BLEU: {:?}", trained.outcome.best_bleu);
}

fn tempfile_dir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("bmtl-train-toy-{}", std::process::id()));
    std::fs::create_dir_all(&dir).expect("tempdir");
    dir
}
