//! End-to-end experiment driver: preprocess, learn subwords, train the
//! multitask model (and optionally its single-task baselines), translate
//! the test set with every decoder, combine the hypotheses, and score
//! everything. Every stage writes its artifacts under the configured
//! output directory in the same formats the standalone subcommands use,
//! so intermediate files are individually reusable.

use std::path::{Path, PathBuf};

use crate::bleu::corpus_bleu;
use crate::combine::{combine_line, train_lm, HypothesisSet, NGramLM};
use crate::config::ExperimentConfig;
use crate::decoding::{translate_corpus, write_hypothesis_file, Translation};
use crate::error::{Error, Result};
use crate::model::{allocate, count_parameters, ModelConfig};
use crate::nn::{AdamState, ParameterStore};
use crate::rng::substream;
use crate::subword::{learn_bpe, word_frequencies, MergeTable, SubwordVocabulary};
use crate::textpipe::{
    apply_truecase, detokenize, detruecase, normalize_text, read_corpus,
    train_truecaser, TruecaseModel,
};
use crate::training::{
    encode_corpus, load_checkpoint, save_checkpoint, AssetRef, DevSet, EarlyStopper,
    SubwordAssets, TrainOutcome,
};

/// Canonical artifact locations under the output directory.
pub struct Layout {
    pub out_dir: PathBuf,
}

impl Layout {
    pub fn new(out_dir: &Path) -> Layout {
        Layout { out_dir: out_dir.to_path_buf() }
    }

    pub fn processed(&self, split: &str, side: &str) -> PathBuf {
        self.out_dir.join("processed").join(format!("{split}.{side}"))
    }

    pub fn truecase_model(&self, side: &str) -> PathBuf {
        self.out_dir.join("processed").join(format!("truecase.{side}"))
    }

    pub fn src_merges(&self) -> PathBuf {
        self.out_dir.join("subword").join("src.merges")
    }

    pub fn src_vocab(&self) -> PathBuf {
        self.out_dir.join("subword").join("src.vocab")
    }

    pub fn dec_merges(&self, name: &str) -> PathBuf {
        self.out_dir.join("subword").join(format!("dec-{name}.merges"))
    }

    pub fn dec_vocab(&self, name: &str) -> PathBuf {
        self.out_dir.join("subword").join(format!("dec-{name}.vocab"))
    }

    pub fn checkpoint(&self, model: &str) -> PathBuf {
        self.out_dir.join("model").join(format!("{model}.ckpt"))
    }

    pub fn train_log(&self, model: &str) -> PathBuf {
        self.out_dir.join("model").join(format!("{model}.log"))
    }

    pub fn hypothesis(&self, tag: &str) -> PathBuf {
        self.out_dir.join("hyp").join(format!("test.{tag}.txt"))
    }

    pub fn hypothesis_detok(&self, tag: &str) -> PathBuf {
        self.out_dir.join("hyp").join(format!("test.{tag}.detok.txt"))
    }

    pub fn lm(&self) -> PathBuf {
        self.out_dir.join("lm").join("target.lm")
    }

    pub fn report(&self) -> PathBuf {
        self.out_dir.join("report.txt")
    }

    pub fn manifest(&self) -> PathBuf {
        self.out_dir.join("run.manifest")
    }
}

/// Tokenized, truecased corpora plus the raw normalized references used
/// for scoring.
pub struct Preprocessed {
    pub train_src: Vec<Vec<String>>,
    pub train_tgt: Vec<Vec<String>>,
    pub dev_src: Vec<Vec<String>>,
    pub dev_tgt_refs: Vec<String>,
    pub test_src: Vec<Vec<String>>,
    pub test_tgt_refs: Vec<String>,
}

pub fn write_tokenized(path: &Path, sentences: &[Vec<String>]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let text: String = sentences.iter().map(|s| format!("{}\n", s.join(" "))).collect();
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_tokenized(path: &Path) -> Result<Vec<Vec<String>>> {
    let text = crate::textpipe::read_utf8(path)?;
    Ok(text
        .lines()
        .map(|l| l.split_whitespace().map(str::to_string).collect())
        .collect())
}

fn normalized_lines(path: &Path) -> Result<Vec<String>> {
    let text = crate::textpipe::read_utf8(path)?;
    Ok(text.lines().map(normalize_text).collect())
}

/// Normalize + tokenize + truecase all six corpora; truecasers are
/// trained on the training split of each side.
pub fn stage_preprocess(cfg: &ExperimentConfig, layout: &Layout) -> Result<Preprocessed> {
    cfg.validate_inputs()?;
    let tokenized = |path: &Path| -> Result<Vec<Vec<String>>> {
        Ok(read_corpus(path)?.into_iter().map(|r| r.tokens).collect())
    };
    let train_src_raw = tokenized(&cfg.train_src)?;
    let train_tgt_raw = tokenized(&cfg.train_tgt)?;
    if train_src_raw.len() != train_tgt_raw.len() {
        return Err(Error::Mismatch(format!(
            "train corpora disagree: {} source lines, {} target lines",
            train_src_raw.len(),
            train_tgt_raw.len()
        )));
    }
    let tc_src = train_truecaser(&train_src_raw)?;
    let tc_tgt = train_truecaser(&train_tgt_raw)?;
    tc_src.save(&with_parent(&layout.truecase_model("src"))?)?;
    tc_tgt.save(&layout.truecase_model("tgt"))?;

    let apply_all = |corpus: Vec<Vec<String>>, model: &TruecaseModel| -> Vec<Vec<String>> {
        corpus.into_iter().map(|s| apply_truecase(model, &s)).collect()
    };
    let train_src = apply_all(train_src_raw, &tc_src);
    let train_tgt = apply_all(train_tgt_raw, &tc_tgt);
    let dev_src = apply_all(tokenized(&cfg.dev_src)?, &tc_src);
    let dev_tgt = apply_all(tokenized(&cfg.dev_tgt)?, &tc_tgt);
    let test_src = apply_all(tokenized(&cfg.test_src)?, &tc_src);
    let test_tgt = apply_all(tokenized(&cfg.test_tgt)?, &tc_tgt);

    write_tokenized(&layout.processed("train", "src"), &train_src)?;
    write_tokenized(&layout.processed("train", "tgt"), &train_tgt)?;
    write_tokenized(&layout.processed("dev", "src"), &dev_src)?;
    write_tokenized(&layout.processed("dev", "tgt"), &dev_tgt)?;
    write_tokenized(&layout.processed("test", "src"), &test_src)?;
    write_tokenized(&layout.processed("test", "tgt"), &test_tgt)?;

    Ok(Preprocessed {
        train_src,
        train_tgt,
        dev_src,
        dev_tgt_refs: normalized_lines(&cfg.dev_tgt)?,
        test_src,
        test_tgt_refs: normalized_lines(&cfg.test_tgt)?,
    })
}

fn with_parent(path: &Path) -> Result<PathBuf> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    Ok(path.to_path_buf())
}

pub struct SubwordStage {
    pub src: SubwordAssets,
    /// One per decoder budget, config order.
    pub decoders: Vec<SubwordAssets>,
}

pub fn stage_subword(
    cfg: &ExperimentConfig,
    layout: &Layout,
    pre: &Preprocessed,
) -> Result<SubwordStage> {
    let src_freqs = word_frequencies(&pre.train_src);
    let (src_table, src_vocab) = learn_bpe(&src_freqs, cfg.source_budget)?;
    src_table.save(&with_parent(&layout.src_merges())?)?;
    src_vocab.save(&layout.src_vocab())?;

    let tgt_freqs = word_frequencies(&pre.train_tgt);
    let mut decoders = Vec::with_capacity(cfg.decoder_budgets.len());
    for &budget in &cfg.decoder_budgets {
        let name = ExperimentConfig::decoder_name(budget);
        let (table, vocab) = learn_bpe(&tgt_freqs, budget)?;
        table.save(&layout.dec_merges(&name))?;
        vocab.save(&layout.dec_vocab(&name))?;
        decoders.push(SubwordAssets { table, vocab });
    }
    Ok(SubwordStage { src: SubwordAssets { table: src_table, vocab: src_vocab }, decoders })
}

pub fn load_subword(cfg: &ExperimentConfig, layout: &Layout) -> Result<SubwordStage> {
    let src = SubwordAssets {
        table: MergeTable::load(&layout.src_merges())?,
        vocab: SubwordVocabulary::load(&layout.src_vocab())?,
    };
    let mut decoders = Vec::new();
    for &budget in &cfg.decoder_budgets {
        let name = ExperimentConfig::decoder_name(budget);
        decoders.push(SubwordAssets {
            table: MergeTable::load(&layout.dec_merges(&name))?,
            vocab: SubwordVocabulary::load(&layout.dec_vocab(&name))?,
        });
    }
    Ok(SubwordStage { src, decoders })
}

/// Path of `target` relative to `base_dir` (both need not exist).
fn relpath(base_dir: &Path, target: &Path) -> PathBuf {
    let base: Vec<_> = base_dir.components().collect();
    let tgt: Vec<_> = target.components().collect();
    let common = base.iter().zip(&tgt).take_while(|(a, b)| a == b).count();
    let mut out = PathBuf::new();
    for _ in common..base.len() {
        out.push("..");
    }
    for c in &tgt[common..] {
        out.push(c);
    }
    out
}

fn asset_refs(
    layout: &Layout,
    ckpt_path: &Path,
    decoder_names: &[String],
) -> Result<Vec<AssetRef>> {
    let ckpt_dir = ckpt_path.parent().unwrap_or_else(|| Path::new("."));
    let mut files = vec![
        ("src.merges".to_string(), layout.src_merges()),
        ("src.vocab".to_string(), layout.src_vocab()),
    ];
    for name in decoder_names {
        files.push((format!("dec.{name}.merges"), layout.dec_merges(name)));
        files.push((format!("dec.{name}.vocab"), layout.dec_vocab(name)));
    }
    files
        .into_iter()
        .map(|(name, path)| {
            Ok(AssetRef {
                name,
                path: relpath(ckpt_dir, &path),
                hash: crate::training::checkpoint::hash_file(&path)?,
            })
        })
        .collect()
}

pub struct TrainedModel {
    pub model_config: ModelConfig,
    pub store: ParameterStore<f32>,
    pub outcome: TrainOutcome,
}

/// Trains one model (multitask or single-task) and writes its checkpoint
/// and training log.
pub fn stage_train(
    cfg: &ExperimentConfig,
    layout: &Layout,
    pre: &Preprocessed,
    sub: &SubwordStage,
    budgets: &[usize],
    model_tag: &str,
) -> Result<TrainedModel> {
    let indices: Vec<usize> = budgets
        .iter()
        .map(|b| {
            cfg.decoder_budgets
                .iter()
                .position(|x| x == b)
                .ok_or_else(|| Error::Config(format!("budget {b} not in decoder_budgets")))
        })
        .collect::<Result<Vec<_>>>()?;
    let dec_assets: Vec<SubwordAssets> =
        indices.iter().map(|&i| sub.decoders[i].clone()).collect();

    let model_config = ModelConfig {
        embed_dim: cfg.embed_dim,
        enc_hidden: cfg.enc_hidden,
        enc_layers: cfg.enc_layers,
        dec_hidden: cfg.dec_hidden,
        dropout: cfg.dropout,
        src_vocab_size: sub.src.vocab.size(),
        decoders: indices
            .iter()
            .map(|&i| crate::model::DecoderSpec {
                name: ExperimentConfig::decoder_name(cfg.decoder_budgets[i]),
                vocab_size: sub.decoders[i].vocab.size(),
            })
            .collect(),
    };

    let (corpus, dropped) = encode_corpus(
        &pre.train_src,
        &pre.train_tgt,
        &sub.src,
        &dec_assets,
        cfg.max_len,
    )?;
    if dropped > 0 {
        eprintln!("{model_tag}: dropped {dropped} pairs over {} subwords", cfg.max_len);
    }
    let dev = DevSet { sources: pre.dev_src.clone(), references: pre.dev_tgt_refs.clone() };

    let mut store = allocate::<f32>(&model_config, substream(cfg.seed, "init", 0))?;
    let mut adam = AdamState::new(&store, cfg.adam_config());
    let tcfg = cfg.train_config();
    let mut stopper = EarlyStopper::new(tcfg.patience);
    let outcome = crate::training::train_loop(
        &model_config,
        &mut store,
        &mut adam,
        &corpus,
        Some((&dev, &sub.src, &dec_assets)),
        &tcfg,
        0,
        &mut stopper,
    )?;

    let ckpt_path = with_parent(&layout.checkpoint(model_tag))?;
    let decoder_names: Vec<String> =
        model_config.decoders.iter().map(|d| d.name.clone()).collect();
    let assets = asset_refs(layout, &ckpt_path, &decoder_names)?;
    save_checkpoint(
        &ckpt_path,
        &model_config,
        &store,
        &adam,
        outcome.updates,
        &outcome.best_bleu,
        &stopper,
        &assets,
    )?;
    std::fs::write(layout.train_log(model_tag), outcome.log_text())?;
    Ok(TrainedModel { model_config, store, outcome })
}

/// Loads a checkpoint, verifies its asset hashes, and returns the model
/// with its subword assets resolved from the referenced files.
pub fn load_model(
    ckpt_path: &Path,
) -> Result<(ModelConfig, ParameterStore<f32>, SubwordAssets, Vec<SubwordAssets>)> {
    let (meta, store, _adam) = load_checkpoint::<f32>(ckpt_path)?;
    let dir = ckpt_path.parent().unwrap_or_else(|| Path::new("."));
    meta.verify_assets(dir)?;
    let find = |name: &str| -> Result<PathBuf> {
        meta.assets
            .iter()
            .find(|a| a.name == name)
            .map(|a| dir.join(&a.path))
            .ok_or_else(|| Error::Config(format!("checkpoint lists no asset {name}")))
    };
    let src = SubwordAssets {
        table: MergeTable::load(&find("src.merges")?)?,
        vocab: SubwordVocabulary::load(&find("src.vocab")?)?,
    };
    let mut dec_assets = Vec::new();
    for d in &meta.config.decoders {
        dec_assets.push(SubwordAssets {
            table: MergeTable::load(&find(&format!("dec.{}.merges", d.name))?)?,
            vocab: SubwordVocabulary::load(&find(&format!("dec.{}.vocab", d.name))?)?,
        });
    }
    Ok((meta.config, store, src, dec_assets))
}

fn detok_lines(translations: &[Translation]) -> Vec<String> {
    translations
        .iter()
        .map(|t| detokenize(&detruecase(&t.words)))
        .collect()
}

/// Per-decoder results of one trained system.
#[derive(Debug, Clone)]
pub struct DecoderOutcome {
    pub name: String,
    pub dev_best: f64,
    pub test_bleu: f64,
    pub iters_to_best: u64,
    pub iters_to_95: u64,
}

#[derive(Debug, Clone)]
pub struct SystemReport {
    pub decoders: Vec<DecoderOutcome>,
    pub combined_bleu: f64,
    pub total_params: u64,
    pub updates: u64,
}

#[derive(Debug, Clone)]
pub struct PipelineReport {
    pub multitask: SystemReport,
    pub baseline: Option<SystemReport>,
    /// 1 - multitask params / summed baseline params.
    pub reduction_ratio: Option<f64>,
}

impl PipelineReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let system = |out: &mut String, tag: &str, s: &SystemReport| {
            out.push_str(&format!("{tag}.params={}\n", s.total_params));
            out.push_str(&format!("{tag}.updates={}\n", s.updates));
            for d in &s.decoders {
                out.push_str(&format!("{tag}.{}.dev_best={:.2}\n", d.name, d.dev_best));
                out.push_str(&format!("{tag}.{}.test_bleu={:.2}\n", d.name, d.test_bleu));
                out.push_str(&format!(
                    "{tag}.{}.iters_to_best={}\n",
                    d.name, d.iters_to_best
                ));
                out.push_str(&format!("{tag}.{}.iters_to_95={}\n", d.name, d.iters_to_95));
            }
            out.push_str(&format!("{tag}.combined_bleu={:.2}\n", s.combined_bleu));
        };
        system(&mut out, "bmtl", &self.multitask);
        if let Some(base) = &self.baseline {
            system(&mut out, "baseline", base);
        }
        if let Some(r) = self.reduction_ratio {
            out.push_str(&format!("param_reduction={:.4}\n", r));
        }
        out
    }
}

fn iteration_marks(eval_log: &[(u64, String, f64)], decoder: &str) -> (f64, u64, u64) {
    let points: Vec<(u64, f64)> = eval_log
        .iter()
        .filter(|(_, name, _)| name == decoder)
        .map(|(u, _, b)| (*u, *b))
        .collect();
    let best = points.iter().map(|(_, b)| *b).fold(0.0f64, f64::max);
    let to_best = points
        .iter()
        .find(|(_, b)| *b >= best)
        .map_or(0, |(u, _)| *u);
    let to_95 = points
        .iter()
        .find(|(_, b)| *b >= 0.95 * best)
        .map_or(0, |(u, _)| *u);
    (best, to_best, to_95)
}

fn score_system(
    cfg: &ExperimentConfig,
    layout: &Layout,
    pre: &Preprocessed,
    sub_assets: (&SubwordAssets, &[SubwordAssets]),
    trained: &TrainedModel,
    tag_prefix: &str,
    lm: &NGramLM,
) -> Result<SystemReport> {
    let (src_assets, dec_assets) = sub_assets;
    let params = cfg.search_params();
    let mut decoders = Vec::new();
    let mut hyp_words_per_decoder: Vec<Vec<Vec<String>>> = Vec::new();

    for (i, spec) in trained.model_config.decoders.iter().enumerate() {
        let translations = translate_corpus(
            &trained.model_config,
            &trained.store,
            &spec.name,
            &pre.test_src,
            &src_assets.table,
            &src_assets.vocab,
            &dec_assets[i].vocab,
            &params,
        )?;
        let tag = if tag_prefix.is_empty() {
            spec.name.clone()
        } else {
            format!("{tag_prefix}{}", spec.name)
        };
        write_hypothesis_file(
            &with_parent(&layout.hypothesis(&tag))?,
            &translations,
            Some(&layout.hypothesis(&tag).with_extension("scores")),
        )?;
        let detok = detok_lines(&translations);
        std::fs::write(
            layout.hypothesis_detok(&tag),
            detok.iter().map(|l| format!("{l}\n")).collect::<String>(),
        )?;
        let report = corpus_bleu(&detok, &pre.test_tgt_refs)?;
        let (dev_best, iters_to_best, iters_to_95) =
            iteration_marks(&trained.outcome.eval_log, &spec.name);
        decoders.push(DecoderOutcome {
            name: spec.name.clone(),
            dev_best,
            test_bleu: report.bleu,
            iters_to_best,
            iters_to_95,
        });
        hyp_words_per_decoder.push(translations.into_iter().map(|t| t.words).collect());
    }

    // combine the decoders' hypotheses line by line
    let comb_params = cfg.combine_params();
    let n_lines = pre.test_src.len();
    let mut combined_words = Vec::with_capacity(n_lines);
    for line in 0..n_lines {
        let systems: Vec<Vec<String>> = hyp_words_per_decoder
            .iter()
            .map(|h| h[line].clone())
            .collect();
        let set = HypothesisSet::new(systems, None)?;
        combined_words.push(combine_line(&set, lm, &comb_params)?.words);
    }
    let comb_tag = if tag_prefix.is_empty() { "combined".to_string() } else { format!("{tag_prefix}combined") };
    write_tokenized(&layout.hypothesis(&comb_tag), &combined_words)?;
    let combined_detok: Vec<String> = combined_words
        .iter()
        .map(|w| detokenize(&detruecase(w)))
        .collect();
    std::fs::write(
        layout.hypothesis_detok(&comb_tag),
        combined_detok.iter().map(|l| format!("{l}\n")).collect::<String>(),
    )?;
    let combined_bleu = corpus_bleu(&combined_detok, &pre.test_tgt_refs)?.bleu;

    Ok(SystemReport {
        decoders,
        combined_bleu,
        total_params: count_parameters(&trained.model_config).total,
        updates: trained.outcome.updates,
    })
}

fn write_manifest(cfg: &ExperimentConfig, layout: &Layout) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("tool=bmtl {}\n", env!("CARGO_PKG_VERSION")));
    out.push_str("subcommand=pipeline\n");
    out.push_str(&format!("seed={}\n", cfg.seed));
    for (name, path) in [
        ("train_src", &cfg.train_src),
        ("train_tgt", &cfg.train_tgt),
        ("dev_src", &cfg.dev_src),
        ("dev_tgt", &cfg.dev_tgt),
        ("test_src", &cfg.test_src),
        ("test_tgt", &cfg.test_tgt),
    ] {
        out.push_str(&format!("input.{name}={}\n", path.display()));
        out.push_str(&format!(
            "hash.{name}={:016x}\n",
            crate::training::checkpoint::hash_file(path)?
        ));
    }
    std::fs::write(with_parent(&layout.manifest())?, out)?;
    Ok(())
}

/// The full experiment. Returns the report also written to report.txt.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<PipelineReport> {
    let layout = Layout::new(&cfg.out_dir);
    let pre = stage_preprocess(cfg, &layout)?;
    let sub = stage_subword(cfg, &layout, &pre)?;

    let bmtl = stage_train(cfg, &layout, &pre, &sub, &cfg.decoder_budgets.clone(), "bmtl")?;

    let lm = train_lm(&pre.train_tgt, cfg.lm_order, &cfg.lm_lambdas)?;
    lm.save(&with_parent(&layout.lm())?)?;

    let dec_refs: Vec<SubwordAssets> = sub.decoders.clone();
    let multitask = score_system(cfg, &layout, &pre, (&sub.src, &dec_refs), &bmtl, "", &lm)?;

    let baseline = if cfg.baselines {
        let mut outcomes = Vec::new();
        let mut all_decoders = Vec::new();
        let mut updates_total = 0;
        let mut params_total = 0u64;
        let mut per_decoder_words: Vec<Vec<Vec<String>>> = Vec::new();
        for &budget in &cfg.decoder_budgets {
            let tag = format!("base-{}", ExperimentConfig::decoder_name(budget));
            let trained = stage_train(cfg, &layout, &pre, &sub, &[budget], &tag)?;
            let idx = cfg.decoder_budgets.iter().position(|&b| b == budget).expect("own budget");
            let single_assets = vec![sub.decoders[idx].clone()];
            let report = score_system(
                cfg,
                &layout,
                &pre,
                (&sub.src, &single_assets),
                &trained,
                "base-",
                &lm,
            )?;
            params_total += report.total_params;
            updates_total = updates_total.max(report.updates);
            all_decoders.extend(report.decoders.clone());
            // reload this system's hypotheses for the cross-system combo
            let tag = format!("base-{}", ExperimentConfig::decoder_name(budget));
            per_decoder_words.push(read_tokenized(&layout.hypothesis(&tag))?);
            outcomes.push(trained);
        }
        // combination across the independently trained baselines
        let comb_params = cfg.combine_params();
        let mut combined_words = Vec::new();
        for line in 0..pre.test_src.len() {
            let systems: Vec<Vec<String>> =
                per_decoder_words.iter().map(|h| h[line].clone()).collect();
            let set = HypothesisSet::new(systems, None)?;
            combined_words.push(combine_line(&set, &lm, &comb_params)?.words);
        }
        write_tokenized(&layout.hypothesis("base-combined"), &combined_words)?;
        let combined_detok: Vec<String> =
            combined_words.iter().map(|w| detokenize(&detruecase(w))).collect();
        std::fs::write(
            layout.hypothesis_detok("base-combined"),
            combined_detok.iter().map(|l| format!("{l}\n")).collect::<String>(),
        )?;
        let combined_bleu = corpus_bleu(&combined_detok, &pre.test_tgt_refs)?.bleu;
        Some(SystemReport {
            decoders: all_decoders,
            combined_bleu,
            total_params: params_total,
            updates: updates_total,
        })
    } else {
        None
    };

    let reduction_ratio = baseline
        .as_ref()
        .map(|b| 1.0 - multitask.total_params as f64 / b.total_params as f64);
    let report = PipelineReport { multitask, baseline, reduction_ratio };
    std::fs::write(with_parent(&layout.report())?, report.to_text())?;
    write_manifest(cfg, &layout)?;
    Ok(report)
}
