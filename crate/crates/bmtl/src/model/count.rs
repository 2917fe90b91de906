//! Closed-form trainable-parameter accounting.
//!
//! The interesting quantity is structural: a multitask model with K
//! decoders shares one encoder and one source embedding, so K single-task
//! baselines cost exactly (K-1) extra copies of that shared block.

use crate::model::ModelConfig;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParameterCounts {
    pub source_embedding: u64,
    pub encoder: u64,
    /// Per-decoder totals in config order.
    pub decoders: Vec<(String, u64)>,
    pub total: u64,
}

impl ParameterCounts {
    /// Encoder plus source embedding: the block shared across decoders.
    pub fn shared(&self) -> u64 {
        self.source_embedding + self.encoder
    }

    /// Total of K independently trained single-task models covering the
    /// same decoders: each repeats the shared block.
    pub fn baseline_sum(&self) -> u64 {
        self.decoders
            .iter()
            .map(|(_, d)| self.shared() + d)
            .sum()
    }

    /// 1 - multitask/baselines, in [0, 1).
    pub fn reduction_ratio(&self) -> f64 {
        1.0 - self.total as f64 / self.baseline_sum() as f64
    }
}

/// z, r, and candidate gates, each with input, recurrent, and bias parts.
fn gru(input: u64, hidden: u64) -> u64 {
    3 * (hidden * input + hidden * hidden + hidden)
}

fn encoder_count(config: &ModelConfig) -> u64 {
    let h = config.enc_hidden as u64;
    let mut total = 0;
    for layer in 0..config.enc_layers {
        let input = if layer == 0 { config.embed_dim as u64 } else { 2 * h };
        total += 2 * gru(input, h);
    }
    total
}

fn decoder_count(config: &ModelConfig, vocab: u64) -> u64 {
    let e = config.embed_dim as u64;
    let d = config.dec_hidden as u64;
    let ctx = config.enc_out() as u64;
    let a = config.att_dim() as u64;
    let embedding = vocab * e;
    let recurrences = gru(e, d) + gru(ctx, d);
    let attention = a * d + a * ctx + a;
    let init = d * ctx + d;
    let output = e * d + e * ctx + e * e + vocab * e;
    embedding + recurrences + attention + init + output
}

pub fn count_parameters(config: &ModelConfig) -> ParameterCounts {
    let source_embedding = (config.src_vocab_size * config.embed_dim) as u64;
    let encoder = encoder_count(config);
    let decoders: Vec<(String, u64)> = config
        .decoders
        .iter()
        .map(|d| (d.name.clone(), decoder_count(config, d.vocab_size as u64)))
        .collect();
    let total = source_embedding + encoder + decoders.iter().map(|(_, c)| c).sum::<u64>();
    ParameterCounts { source_embedding, encoder, decoders, total }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{allocate, DecoderSpec};

    fn config(k: usize) -> ModelConfig {
        ModelConfig {
            embed_dim: 4,
            enc_hidden: 3,
            enc_layers: 2,
            dec_hidden: 5,
            dropout: 0.0,
            src_vocab_size: 10,
            decoders: (0..k)
                .map(|i| DecoderSpec { name: format!("g{i}"), vocab_size: 7 + 2 * i })
                .collect(),
        }
    }

    #[test]
    fn embedding_count_is_vocab_times_dim() {
        let counts = count_parameters(&config(1));
        assert_eq!(counts.source_embedding, 40);
    }

    #[test]
    fn closed_form_matches_allocated_store() {
        let cfg = config(3);
        let counts = count_parameters(&cfg);
        let store = allocate::<f32>(&cfg, 1).unwrap();

        let sum_prefix = |prefix: &str| -> u64 {
            store
                .iter()
                .filter(|p| p.name.starts_with(prefix))
                .map(|p| p.value.len() as u64)
                .sum()
        };
        assert_eq!(counts.source_embedding, sum_prefix("src_emb"));
        assert_eq!(counts.encoder, sum_prefix("enc."));
        for (name, c) in &counts.decoders {
            assert_eq!(*c, sum_prefix(&format!("dec.{name}.")), "decoder {name}");
        }
        assert_eq!(counts.total, store.total_entries() as u64);
    }

    #[test]
    fn baselines_exceed_multitask_by_shared_copies() {
        let cfg = config(3);
        let counts = count_parameters(&cfg);
        let mut baseline_sum = 0;
        for spec in &cfg.decoders {
            let single = cfg.single_task(&spec.name).unwrap();
            baseline_sum += count_parameters(&single).total;
        }
        assert_eq!(baseline_sum, counts.baseline_sum());
        assert_eq!(baseline_sum - counts.total, 2 * counts.shared());
    }

    #[test]
    fn reference_config_reduction_is_large() {
        // source at 10K, decoders at 300/1K/10K
        let cfg = ModelConfig::baseline(
            10_000,
            vec![
                DecoderSpec { name: "bpe300".into(), vocab_size: 300 },
                DecoderSpec { name: "bpe1k".into(), vocab_size: 1_000 },
                DecoderSpec { name: "bpe10k".into(), vocab_size: 10_000 },
            ],
        );
        let counts = count_parameters(&cfg);
        assert!(counts.total > 60_000_000 && counts.total < 90_000_000);
        assert!(counts.reduction_ratio() >= 0.15, "{}", counts.reduction_ratio());
    }
}
