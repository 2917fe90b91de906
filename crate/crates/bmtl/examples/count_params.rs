//! Trainable-parameter accounting for the reference configuration: one
//! shared encoder with three decoders versus three single-task models.
//!
//! ```bash
//! cargo run -p bmtl --example count_params
//! ```

use bmtl::model::{count_parameters, DecoderSpec, ModelConfig};

fn millions(n: u64) -> f64 {
    n as f64 / 1e6
}

fn main() {
    let config = ModelConfig::baseline(
        10_000,
        vec![
            DecoderSpec { name: "bpe300".into(), vocab_size: 300 },
            DecoderSpec { name: "bpe1k".into(), vocab_size: 1_000 },
            DecoderSpec { name: "bpe10k".into(), vocab_size: 10_000 },
        ],
    );
    let counts = count_parameters(&config);
    println!("source embedding  {:>12}  ({:.2}M)", counts.source_embedding, millions(counts.source_embedding));
    println!("encoder           {:>12}  ({:.2}M)", counts.encoder, millions(counts.encoder));
    for (name, c) in &counts.decoders {
        println!("decoder {name:<9} {:>12}  ({:.2}M)", c, millions(*c));
    }
    println!("multitask total   {:>12}  ({:.2}M)", counts.total, millions(counts.total));

    let baseline_sum = counts.baseline_sum();
    println!("baseline sum      {:>12}  ({:.2}M)", baseline_sum, millions(baseline_sum));
    println!(
        "difference = (K-1) x shared block: {} = 2 x {}",
        baseline_sum - counts.total,
        counts.shared()
    );
    println!("parameter reduction: {:.1}%", 100.0 * counts.reduction_ratio());
}
