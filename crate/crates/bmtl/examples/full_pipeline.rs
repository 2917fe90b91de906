//! The whole experiment on a small synthetic corpus: preprocess, learn
//! subword ladders, train the multitask model and its single-task
//! baselines, translate, combine, and score. A couple of minutes on one
//! core.
//!
//! ```bash
//! cargo run -p bmtl --example full_pipeline
//! ```

use bmtl::config::ExperimentConfig;
use bmtl::pipeline::run_pipeline;
use bmtl::toy::{generate_reversal, ToySpec};

fn main() {
    let dir = std::env::temp_dir().join(format!("bmtl-pipeline-{}", std::process::id()));
    std::fs::create_dir_all(&dir).expect("tempdir");
    let spec = ToySpec { n_train: 120, n_dev: 30, n_test: 30, ..ToySpec::default() };
    generate_reversal(&spec).write_files(&dir).expect("corpus files");

    // combination settings mirror data/toy/toy.cfg: monotone merge plus a
    // word bonus, because synthetic text gives the LM no n-gram structure
    let cfg_text = "\
train_src=train.src\ntrain_tgt=train.tgt\ndev_src=dev.src\ndev_tgt=dev.tgt\n\
test_src=test.src\ntest_tgt=test.tgt\nout_dir=out\n\
source_budget=90\ndecoder_budgets=40,60,90\n\
embed_dim=24\nenc_hidden=24\nenc_layers=1\ndec_hidden=48\ndropout=0.1\n\
learning_rate=0.002\nbatch_size=32\nmax_updates=350\neval_every=50\npatience=4\nseed=5\n\
comb_radius=0\ncomb_w_len=2.5\n";
    let cfg = ExperimentConfig::parse_str(cfg_text, &dir).expect("valid config");

    let report = run_pipeline(&cfg).expect("pipeline");
    print!("{}", report.to_text());
    println!("artifacts under {}", cfg.out_dir.display());
}
