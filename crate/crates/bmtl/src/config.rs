//! Experiment configuration: flat key=value files with `#` comments.
//!
//! Relative paths resolve against the config file's directory, so a config
//! can travel with its data. Unknown keys are errors; every hyperparameter
//! has the reference default and may be omitted.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::{DecoderSpec, ModelConfig};
use crate::nn::AdamConfig;
use crate::training::{LossMode, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub train_src: PathBuf,
    pub train_tgt: PathBuf,
    pub dev_src: PathBuf,
    pub dev_tgt: PathBuf,
    pub test_src: PathBuf,
    pub test_tgt: PathBuf,
    pub out_dir: PathBuf,

    pub source_budget: usize,
    pub decoder_budgets: Vec<usize>,

    pub embed_dim: usize,
    pub enc_hidden: usize,
    pub enc_layers: usize,
    pub dec_hidden: usize,
    pub dropout: f64,

    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub clip_norm: f64,
    pub max_updates: u64,
    pub eval_every: u64,
    pub patience: usize,
    pub max_len: usize,
    pub loss_mode: LossMode,
    pub lr_decay: f64,
    pub seed: u64,

    pub beam_size: usize,
    pub length_alpha: f64,
    pub max_len_factor: usize,
    pub max_len_offset: usize,

    pub comb_beam: usize,
    pub comb_radius: usize,
    pub comb_w_lm: f64,
    pub comb_w_sys: f64,
    pub comb_w_len: f64,
    pub lm_order: usize,
    pub lm_lambdas: Vec<f64>,

    /// Train the matching single-task baselines inside `pipeline`.
    pub baselines: bool,
}

impl ExperimentConfig {
    /// Reference defaults with all paths empty; parse() fills paths in.
    fn defaults() -> Self {
        ExperimentConfig {
            train_src: PathBuf::new(),
            train_tgt: PathBuf::new(),
            dev_src: PathBuf::new(),
            dev_tgt: PathBuf::new(),
            test_src: PathBuf::new(),
            test_tgt: PathBuf::new(),
            out_dir: PathBuf::new(),
            source_budget: 10_000,
            decoder_budgets: vec![300, 1_000, 10_000],
            embed_dim: 512,
            enc_hidden: 512,
            enc_layers: 2,
            dec_hidden: 1024,
            dropout: 0.1,
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 32,
            clip_norm: 1.0,
            max_updates: 3000,
            eval_every: 100,
            patience: 5,
            max_len: 100,
            loss_mode: LossMode::Mean,
            lr_decay: 1.0,
            seed: 1,
            beam_size: 4,
            length_alpha: 1.0,
            max_len_factor: 3,
            max_len_offset: 10,
            comb_beam: 32,
            comb_radius: 3,
            comb_w_lm: 1.0,
            comb_w_sys: 1.0,
            comb_w_len: 0.0,
            lm_order: 3,
            lm_lambdas: crate::combine::default_lambdas(),
            baselines: true,
        }
    }

    pub fn parse_file(path: &Path) -> Result<ExperimentConfig> {
        let text = crate::textpipe::read_utf8(path)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse_str(&text, base)
    }

    pub fn parse_str(text: &str, base_dir: &Path) -> Result<ExperimentConfig> {
        let mut cfg = Self::defaults();
        let mut seen: HashSet<String> = HashSet::new();
        let mut required: HashSet<&str> = [
            "train_src", "train_tgt", "dev_src", "dev_tgt", "test_src", "test_tgt", "out_dir",
        ]
        .into_iter()
        .collect();

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key=value, got {raw:?}", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("duplicate key {key}")));
            }
            required.remove(key);
            apply_key(&mut cfg, key, value, base_dir)?;
        }
        if !required.is_empty() {
            let mut missing: Vec<&str> = required.into_iter().collect();
            missing.sort_unstable();
            return Err(Error::Config(format!("missing required keys: {}", missing.join(", "))));
        }
        cfg.validate_values()?;
        Ok(cfg)
    }

    /// Range/consistency checks that need no filesystem access.
    pub fn validate_values(&self) -> Result<()> {
        if self.decoder_budgets.is_empty() {
            return Err(Error::Config("decoder_budgets must name at least one granularity".into()));
        }
        for (name, v) in [
            ("source_budget", self.source_budget),
            ("embed_dim", self.embed_dim),
            ("enc_hidden", self.enc_hidden),
            ("enc_layers", self.enc_layers),
            ("dec_hidden", self.dec_hidden),
            ("batch_size", self.batch_size),
            ("beam_size", self.beam_size),
            ("comb_beam", self.comb_beam),
            ("lm_order", self.lm_order),
            ("max_len", self.max_len),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.decoder_budgets.iter().any(|&b| b == 0) {
            return Err(Error::Config("decoder_budgets must be positive".into()));
        }
        if self.lm_lambdas.len() != self.lm_order + 1 {
            return Err(Error::Config(format!(
                "lm_lambdas needs {} weights for lm_order {}",
                self.lm_order + 1,
                self.lm_order
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config("dropout must be in [0, 1)".into()));
        }
        Ok(())
    }

    /// File-existence checks for subcommands that read the corpora.
    pub fn validate_inputs(&self) -> Result<()> {
        for (name, path) in [
            ("train_src", &self.train_src),
            ("train_tgt", &self.train_tgt),
            ("dev_src", &self.dev_src),
            ("dev_tgt", &self.dev_tgt),
            ("test_src", &self.test_src),
            ("test_tgt", &self.test_tgt),
        ] {
            if !path.is_file() {
                return Err(Error::Config(format!("{name}: no such file {}", path.display())));
            }
        }
        Ok(())
    }

    pub fn decoder_name(budget: usize) -> String {
        format!("bpe{budget}")
    }

    /// Model shape once vocabulary sizes are known (source first, then one
    /// per decoder budget in config order).
    pub fn model_config(&self, src_vocab_size: usize, decoder_vocab_sizes: &[usize]) -> ModelConfig {
        ModelConfig {
            embed_dim: self.embed_dim,
            enc_hidden: self.enc_hidden,
            enc_layers: self.enc_layers,
            dec_hidden: self.dec_hidden,
            dropout: self.dropout,
            src_vocab_size,
            decoders: self
                .decoder_budgets
                .iter()
                .zip(decoder_vocab_sizes)
                .map(|(&b, &v)| DecoderSpec { name: Self::decoder_name(b), vocab_size: v })
                .collect(),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            clip_norm: self.clip_norm,
            max_updates: self.max_updates,
            eval_every: self.eval_every,
            patience: self.patience,
            loss_mode: self.loss_mode,
            lr_decay: self.lr_decay,
            seed: self.seed,
        }
    }

    pub fn adam_config(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }

    pub fn search_params(&self) -> crate::decoding::SearchParams {
        crate::decoding::SearchParams {
            beam_size: self.beam_size,
            length_alpha: self.length_alpha,
            max_len_factor: self.max_len_factor,
            max_len_offset: self.max_len_offset,
        }
    }

    pub fn combine_params(&self) -> crate::combine::CombineParams {
        crate::combine::CombineParams {
            beam_size: self.comb_beam,
            radius: self.comb_radius,
            w_lm: self.comb_w_lm,
            w_sys: self.comb_w_sys,
            w_len: self.comb_w_len,
        }
    }
}

fn parse_as<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(|part| parse_as(key, part.trim()))
        .collect()
}

fn apply_key(cfg: &mut ExperimentConfig, key: &str, value: &str, base: &Path) -> Result<()> {
    let path = |v: &str| -> PathBuf {
        let p = PathBuf::from(v);
        if p.is_absolute() {
            p
        } else {
            base.join(p)
        }
    };
    match key {
        "train_src" => cfg.train_src = path(value),
        "train_tgt" => cfg.train_tgt = path(value),
        "dev_src" => cfg.dev_src = path(value),
        "dev_tgt" => cfg.dev_tgt = path(value),
        "test_src" => cfg.test_src = path(value),
        "test_tgt" => cfg.test_tgt = path(value),
        "out_dir" => cfg.out_dir = path(value),
        "source_budget" => cfg.source_budget = parse_as(key, value)?,
        "decoder_budgets" => cfg.decoder_budgets = parse_list(key, value)?,
        "embed_dim" => cfg.embed_dim = parse_as(key, value)?,
        "enc_hidden" => cfg.enc_hidden = parse_as(key, value)?,
        "enc_layers" => cfg.enc_layers = parse_as(key, value)?,
        "dec_hidden" => cfg.dec_hidden = parse_as(key, value)?,
        "dropout" => cfg.dropout = parse_as(key, value)?,
        "learning_rate" => cfg.learning_rate = parse_as(key, value)?,
        "beta1" => cfg.beta1 = parse_as(key, value)?,
        "beta2" => cfg.beta2 = parse_as(key, value)?,
        "epsilon" => cfg.epsilon = parse_as(key, value)?,
        "batch_size" => cfg.batch_size = parse_as(key, value)?,
        "clip_norm" => cfg.clip_norm = parse_as(key, value)?,
        "max_updates" => cfg.max_updates = parse_as(key, value)?,
        "eval_every" => cfg.eval_every = parse_as(key, value)?,
        "patience" => cfg.patience = parse_as(key, value)?,
        "max_len" => cfg.max_len = parse_as(key, value)?,
        "loss_mode" => {
            cfg.loss_mode = match value {
                "mean" => LossMode::Mean,
                "sum" => LossMode::Sum,
                other => {
                    return Err(Error::Config(format!(
                        "loss_mode: expected mean or sum, got {other:?}"
                    )))
                }
            }
        }
        "lr_decay" => cfg.lr_decay = parse_as(key, value)?,
        "seed" => cfg.seed = parse_as(key, value)?,
        "beam_size" => cfg.beam_size = parse_as(key, value)?,
        "length_alpha" => cfg.length_alpha = parse_as(key, value)?,
        "max_len_factor" => cfg.max_len_factor = parse_as(key, value)?,
        "max_len_offset" => cfg.max_len_offset = parse_as(key, value)?,
        "comb_beam" => cfg.comb_beam = parse_as(key, value)?,
        "comb_radius" => cfg.comb_radius = parse_as(key, value)?,
        "comb_w_lm" => cfg.comb_w_lm = parse_as(key, value)?,
        "comb_w_sys" => cfg.comb_w_sys = parse_as(key, value)?,
        "comb_w_len" => cfg.comb_w_len = parse_as(key, value)?,
        "lm_order" => cfg.lm_order = parse_as(key, value)?,
        "lm_lambdas" => cfg.lm_lambdas = parse_list(key, value)?,
        "baselines" => {
            cfg.baselines = match value {
                "true" | "1" | "yes" => true,
                "false" | "0" | "no" => false,
                other => {
                    return Err(Error::Config(format!(
                        "baselines: expected true or false, got {other:?}"
                    )))
                }
            }
        }
        unknown => return Err(Error::Config(format!("unknown key {unknown}"))),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
train_src = data/train.src
train_tgt = data/train.tgt
dev_src = data/dev.src
dev_tgt = data/dev.tgt
test_src = data/test.src
test_tgt = data/test.tgt
out_dir = out
";

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = ExperimentConfig::parse_str(MINIMAL, Path::new("/base")).unwrap();
        assert_eq!(cfg.embed_dim, 512);
        assert_eq!(cfg.dec_hidden, 1024);
        assert_eq!(cfg.batch_size, 32);
        assert!((cfg.learning_rate - 1e-4).abs() < 1e-18);
        assert!((cfg.dropout - 0.1).abs() < 1e-12);
        assert!((cfg.clip_norm - 1.0).abs() < 1e-12);
        assert_eq!(cfg.decoder_budgets, vec![300, 1000, 10000]);
        assert_eq!(cfg.train_src, PathBuf::from("/base/data/train.src"));
        assert_eq!(cfg.out_dir, PathBuf::from("/base/out"));
    }

    #[test]
    fn comments_and_overrides() {
        let text = format!("{MINIMAL}# a comment\ndecoder_budgets = 40, 60, 90\nseed=7\n");
        let cfg = ExperimentConfig::parse_str(&text, Path::new(".")).unwrap();
        assert_eq!(cfg.decoder_budgets, vec![40, 60, 90]);
        assert_eq!(cfg.seed, 7);
    }

    #[test]
    fn unknown_key_is_named() {
        let text = format!("{MINIMAL}mystery = 1\n");
        match ExperimentConfig::parse_str(&text, Path::new(".")) {
            Err(Error::Config(msg)) => assert!(msg.contains("mystery"), "{msg}"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn missing_required_keys_are_listed() {
        match ExperimentConfig::parse_str("seed = 3\n", Path::new(".")) {
            Err(Error::Config(msg)) => {
                assert!(msg.contains("train_src"), "{msg}");
                assert!(msg.contains("out_dir"), "{msg}");
            }
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_key_rejected() {
        let text = format!("{MINIMAL}seed = 1\nseed = 2\n");
        assert!(ExperimentConfig::parse_str(&text, Path::new(".")).is_err());
    }

    #[test]
    fn bad_values_are_named() {
        for bad in ["batch_size = zero", "loss_mode = median", "lm_lambdas = 0.5,0.5"] {
            let text = format!("{MINIMAL}{bad}\n");
            let err = ExperimentConfig::parse_str(&text, Path::new(".")).unwrap_err();
            let key = bad.split(' ').next().unwrap();
            assert!(err.to_string().contains(key), "{err} should name {key}");
        }
    }
}
