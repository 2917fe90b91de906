//! Subcommand front-end.
//!
//! Exit codes: 0 success, 1 usage error, 2 validation error, 3 runtime
//! failure. Every artifact-producing subcommand writes a `.manifest`
//! key=value file next to its primary output recording inputs, content
//! hashes, seed, and the tool version.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use crate::combine::{combine_line, default_lambdas, train_lm, CombineParams, HypothesisSet, NGramLM};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::model::count_parameters;
use crate::pipeline::{self, Layout};
use crate::subword::{learn_bpe, segment_word, word_frequencies, MergeTable, SubwordVocabulary};
use crate::textpipe::{apply_truecase, read_corpus, train_truecaser, TruecaseModel};

const USAGE: &str = "\
usage: bmtl <subcommand> [flags]

subcommands:
  preprocess     normalize, tokenize, and truecase a corpus
  subword-train  learn a merge table and vocabulary at a budget
  subword-apply  segment a tokenized corpus into subword units
  train          train the multitask model described by a config
  translate      decode a corpus with one decoder of a checkpoint
  combine        merge aligned hypothesis files into one output
  score          corpus BLEU of a hypothesis file against references
  params         parameter-count breakdown for a config
  pipeline       run every stage end to end and write a report

run `bmtl <subcommand> --help` for flags.";

pub fn run(args: &[String]) -> i32 {
    let Some(sub) = args.first() else {
        eprintln!("{USAGE}");
        return 1;
    };
    if sub == "--help" || sub == "-h" || sub == "help" {
        println!("{USAGE}");
        return 0;
    }
    let rest = &args[1..];
    let outcome = match sub.as_str() {
        "preprocess" => dispatch(rest, PREPROCESS_SPEC, cmd_preprocess),
        "subword-train" => dispatch(rest, SUBWORD_TRAIN_SPEC, cmd_subword_train),
        "subword-apply" => dispatch(rest, SUBWORD_APPLY_SPEC, cmd_subword_apply),
        "train" => dispatch(rest, TRAIN_SPEC, cmd_train),
        "translate" => dispatch(rest, TRANSLATE_SPEC, cmd_translate),
        "combine" => dispatch(rest, COMBINE_SPEC, cmd_combine),
        "score" => dispatch(rest, SCORE_SPEC, cmd_score),
        "params" => dispatch(rest, PARAMS_SPEC, cmd_params),
        "pipeline" => dispatch(rest, PIPELINE_SPEC, cmd_pipeline),
        other => {
            eprintln!("bmtl: unknown subcommand {other:?}\n{USAGE}");
            return 1;
        }
    };
    match outcome {
        Outcome::Ok => 0,
        Outcome::Usage(msg) => {
            eprintln!("bmtl {sub}: {msg}");
            1
        }
        Outcome::Failed(err) => {
            eprintln!("bmtl {sub}: {err}");
            exit_code_for(&err)
        }
    }
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Config(_)
        | Error::HashMismatch { .. }
        | Error::BudgetTooSmall { .. }
        | Error::VersionMismatch { .. }
        | Error::Truncated(_)
        | Error::Format { .. }
        | Error::Decoding { .. }
        | Error::Mismatch(_)
        | Error::EmptyCorpus(_)
        | Error::UnknownDecoder(_) => 2,
        Error::Io(e) if e.kind() == std::io::ErrorKind::NotFound => 2,
        _ => 3,
    }
}

enum Outcome {
    Ok,
    Usage(String),
    Failed(Error),
}

struct FlagSpec {
    usage: &'static str,
    required: &'static [&'static str],
    optional: &'static [&'static str],
}

type Flags = HashMap<String, String>;

fn dispatch(args: &[String], spec: &FlagSpec, body: fn(&Flags) -> Result<()>) -> Outcome {
    if args.iter().any(|a| a == "--help" || a == "-h") {
        println!("{}", spec.usage);
        return Outcome::Ok;
    }
    let mut flags = Flags::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let Some(name) = arg.strip_prefix("--") else {
            return Outcome::Usage(format!("unexpected argument {arg:?}"));
        };
        if !spec.required.contains(&name) && !spec.optional.contains(&name) {
            return Outcome::Usage(format!("unknown flag --{name}"));
        }
        let Some(value) = it.next() else {
            return Outcome::Usage(format!("flag --{name} needs a value"));
        };
        if flags.insert(name.to_string(), value.clone()).is_some() {
            return Outcome::Usage(format!("flag --{name} given twice"));
        }
    }
    for name in spec.required {
        if !flags.contains_key(*name) {
            return Outcome::Usage(format!("missing required flag --{name}"));
        }
    }
    match body(&flags) {
        Ok(()) => Outcome::Ok,
        Err(e) => Outcome::Failed(e),
    }
}

fn path_of(flags: &Flags, name: &str) -> PathBuf {
    PathBuf::from(&flags[name])
}

fn parse_flag<T: std::str::FromStr>(flags: &Flags, name: &str, default: T) -> Result<T> {
    match flags.get(name) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|_| Error::Config(format!("--{name}: cannot parse {v:?}"))),
    }
}

fn write_manifest(primary_output: &Path, subcommand: &str, inputs: &[(&str, &Path)], seed: Option<u64>) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("tool=bmtl {}\n", env!("CARGO_PKG_VERSION")));
    out.push_str(&format!("subcommand={subcommand}\n"));
    if let Some(seed) = seed {
        out.push_str(&format!("seed={seed}\n"));
    }
    for (name, path) in inputs {
        out.push_str(&format!("input.{name}={}\n", path.display()));
        out.push_str(&format!(
            "hash.{name}={:016x}\n",
            crate::training::checkpoint::hash_file(path)?
        ));
    }
    let manifest = primary_output.with_extension(format!(
        "{}manifest",
        primary_output
            .extension()
            .map(|e| format!("{}.", e.to_string_lossy()))
            .unwrap_or_default()
    ));
    std::fs::write(manifest, out)?;
    Ok(())
}

const PREPROCESS_SPEC: &FlagSpec = &FlagSpec {
    usage: "usage: bmtl preprocess --input RAW --output TOKENIZED \
            [--train-truecaser MODEL_OUT] [--apply-truecaser MODEL_IN]",
    required: &["input", "output"],
    optional: &["train-truecaser", "apply-truecaser"],
};

fn cmd_preprocess(flags: &Flags) -> Result<()> {
    let input = path_of(flags, "input");
    let output = path_of(flags, "output");
    if flags.contains_key("train-truecaser") && flags.contains_key("apply-truecaser") {
        return Err(Error::Config(
            "--train-truecaser and --apply-truecaser are mutually exclusive".into(),
        ));
    }
    let corpus: Vec<Vec<String>> = read_corpus(&input)?.into_iter().map(|r| r.tokens).collect();
    let model = if let Some(out) = flags.get("train-truecaser") {
        let model = train_truecaser(&corpus)?;
        model.save(Path::new(out))?;
        Some(model)
    } else if let Some(path) = flags.get("apply-truecaser") {
        Some(TruecaseModel::load(Path::new(path))?)
    } else {
        None
    };
    let processed: Vec<Vec<String>> = match &model {
        Some(m) => corpus.iter().map(|s| apply_truecase(m, s)).collect(),
        None => corpus,
    };
    pipeline::write_tokenized(&output, &processed)?;
    write_manifest(&output, "preprocess", &[("input", &input)], None)
}

const SUBWORD_TRAIN_SPEC: &FlagSpec = &FlagSpec {
    usage: "usage: bmtl subword-train --input TOKENIZED --vocab-size N \
            --merges-out FILE --vocab-out FILE",
    required: &["input", "vocab-size", "merges-out", "vocab-out"],
    optional: &[],
};

fn cmd_subword_train(flags: &Flags) -> Result<()> {
    let input = path_of(flags, "input");
    let budget: usize = parse_flag(flags, "vocab-size", 0)?;
    let corpus = pipeline::read_tokenized(&input)?;
    let freqs = word_frequencies(&corpus);
    let (table, vocab) = learn_bpe(&freqs, budget)?;
    let merges_out = path_of(flags, "merges-out");
    table.save(&merges_out)?;
    vocab.save(&path_of(flags, "vocab-out"))?;
    write_manifest(&merges_out, "subword-train", &[("input", &input)], None)
}

const SUBWORD_APPLY_SPEC: &FlagSpec = &FlagSpec {
    usage: "usage: bmtl subword-apply --merges FILE --input TOKENIZED --output SEGMENTED \
            [--vocab FILE]",
    required: &["merges", "input", "output"],
    optional: &["vocab"],
};

fn cmd_subword_apply(flags: &Flags) -> Result<()> {
    let merges = path_of(flags, "merges");
    let input = path_of(flags, "input");
    let table = MergeTable::load(&merges)?;
    let vocab = flags
        .get("vocab")
        .map(|v| SubwordVocabulary::load(Path::new(v)))
        .transpose()?;
    let corpus = pipeline::read_tokenized(&input)?;
    let mut out = String::new();
    for sentence in &corpus {
        let mut units = Vec::new();
        for word in sentence {
            for sym in segment_word(&table, word) {
                match &vocab {
                    Some(v) if v.id(&sym).is_none() => units.push(crate::subword::UNK_TOKEN.to_string()),
                    _ => units.push(sym),
                }
            }
        }
        out.push_str(&units.join(" "));
        out.push('\n');
    }
    let output = path_of(flags, "output");
    std::fs::write(&output, out)?;
    write_manifest(&output, "subword-apply", &[("input", &input), ("merges", &merges)], None)
}

const TRAIN_SPEC: &FlagSpec = &FlagSpec {
    usage: "usage: bmtl train --config FILE\n\
            expects `bmtl preprocess`-style artifacts under <out_dir>/processed and\n\
            subword assets under <out_dir>/subword (the pipeline subcommand creates both)",
    required: &["config"],
    optional: &[],
};

fn cmd_train(flags: &Flags) -> Result<()> {
    let cfg = ExperimentConfig::parse_file(&path_of(flags, "config"))?;
    let layout = Layout::new(&cfg.out_dir);
    for path in [layout.processed("train", "src"), layout.src_merges()] {
        if !path.is_file() {
            return Err(Error::Config(format!(
                "missing artifact {}; run `bmtl pipeline` or the preprocess/subword-train steps first",
                path.display()
            )));
        }
    }
    let pre = load_preprocessed(&cfg, &layout)?;
    let sub = pipeline::load_subword(&cfg, &layout)?;
    let trained =
        pipeline::stage_train(&cfg, &layout, &pre, &sub, &cfg.decoder_budgets.clone(), "bmtl")?;
    println!(
        "trained {} updates; best dev BLEU: {}",
        trained.outcome.updates,
        trained
            .outcome
            .best_bleu
            .iter()
            .map(|(n, b)| format!("{n}={b:.2}"))
            .collect::<Vec<_>>()
            .join(" ")
    );
    write_manifest(
        &layout.checkpoint("bmtl"),
        "train",
        &[("train_src", &cfg.train_src), ("train_tgt", &cfg.train_tgt)],
        Some(cfg.seed),
    )
}

fn load_preprocessed(cfg: &ExperimentConfig, layout: &Layout) -> Result<pipeline::Preprocessed> {
    let norm = |path: &Path| -> Result<Vec<String>> {
        Ok(crate::textpipe::read_utf8(path)?
            .lines()
            .map(crate::textpipe::normalize_text)
            .collect())
    };
    Ok(pipeline::Preprocessed {
        train_src: pipeline::read_tokenized(&layout.processed("train", "src"))?,
        train_tgt: pipeline::read_tokenized(&layout.processed("train", "tgt"))?,
        dev_src: pipeline::read_tokenized(&layout.processed("dev", "src"))?,
        dev_tgt_refs: norm(&cfg.dev_tgt)?,
        test_src: pipeline::read_tokenized(&layout.processed("test", "src"))?,
        test_tgt_refs: norm(&cfg.test_tgt)?,
    })
}

const TRANSLATE_SPEC: &FlagSpec = &FlagSpec {
    usage: "usage: bmtl translate --checkpoint FILE --decoder NAME --input TOKENIZED \
            --output FILE [--beam N] [--alpha A] [--scores FILE]",
    required: &["checkpoint", "decoder", "input", "output"],
    optional: &["beam", "alpha", "scores"],
};

fn cmd_translate(flags: &Flags) -> Result<()> {
    let ckpt = path_of(flags, "checkpoint");
    let input = path_of(flags, "input");
    let decoder = &flags["decoder"];
    let (config, store, src_assets, dec_assets) = pipeline::load_model(&ckpt)?;
    let idx = config
        .decoders
        .iter()
        .position(|d| &d.name == decoder)
        .ok_or_else(|| Error::UnknownDecoder(decoder.clone()))?;
    let sentences = pipeline::read_tokenized(&input)?;
    let mut params = crate::decoding::SearchParams::default();
    params.beam_size = parse_flag(flags, "beam", params.beam_size)?;
    params.length_alpha = parse_flag(flags, "alpha", params.length_alpha)?;
    let translations = crate::decoding::translate_corpus(
        &config,
        &store,
        decoder,
        &sentences,
        &src_assets.table,
        &src_assets.vocab,
        &dec_assets[idx].vocab,
        &params,
    )?;
    let output = path_of(flags, "output");
    let scores = flags.get("scores").map(PathBuf::from);
    crate::decoding::write_hypothesis_file(&output, &translations, scores.as_deref())?;
    write_manifest(
        &output,
        "translate",
        &[("checkpoint", &ckpt), ("input", &input)],
        None,
    )
}

const COMBINE_SPEC: &FlagSpec = &FlagSpec {
    usage: "usage: bmtl combine --hyps A.txt,B.txt[,C.txt...] --output FILE \
            (--lm FILE | --lm-train TOKENIZED) [--lm-out FILE] [--beam N] [--radius R] \
            [--w-lm X] [--w-sys X] [--w-len X] [--lm-order N] [--lambdas L0,L1,...]",
    required: &["hyps", "output"],
    optional: &["lm", "lm-train", "lm-out", "beam", "radius", "w-lm", "w-sys", "w-len", "lm-order", "lambdas"],
};

fn cmd_combine(flags: &Flags) -> Result<()> {
    let hyp_paths: Vec<PathBuf> = flags["hyps"].split(',').map(PathBuf::from).collect();
    if hyp_paths.is_empty() {
        return Err(Error::Config("--hyps needs at least one file".into()));
    }
    let mut systems_by_file = Vec::new();
    for p in &hyp_paths {
        systems_by_file.push(pipeline::read_tokenized(p)?);
    }
    let n_lines = systems_by_file[0].len();
    for (p, s) in hyp_paths.iter().zip(&systems_by_file) {
        if s.len() != n_lines {
            return Err(Error::Mismatch(format!(
                "{} has {} lines, expected {}",
                p.display(),
                s.len(),
                n_lines
            )));
        }
    }

    let order: usize = parse_flag(flags, "lm-order", 3)?;
    let lambdas: Vec<f64> = match flags.get("lambdas") {
        Some(raw) => raw
            .split(',')
            .map(|p| {
                p.trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("--lambdas: cannot parse {p:?}")))
            })
            .collect::<Result<_>>()?,
        None if order == 3 => default_lambdas(),
        None => return Err(Error::Config("--lambdas required for lm-order != 3".into())),
    };
    let lm = match (flags.get("lm"), flags.get("lm-train")) {
        (Some(path), None) => NGramLM::load(Path::new(path), &lambdas)?,
        (None, Some(corpus)) => {
            let sentences = pipeline::read_tokenized(Path::new(corpus))?;
            let lm = train_lm(&sentences, order, &lambdas)?;
            if let Some(out) = flags.get("lm-out") {
                lm.save(Path::new(out))?;
            }
            lm
        }
        _ => {
            return Err(Error::Config(
                "exactly one of --lm or --lm-train is required".into(),
            ))
        }
    };

    let params = CombineParams {
        beam_size: parse_flag(flags, "beam", 32)?,
        radius: parse_flag(flags, "radius", 3)?,
        w_lm: parse_flag(flags, "w-lm", 1.0)?,
        w_sys: parse_flag(flags, "w-sys", 1.0)?,
        w_len: parse_flag(flags, "w-len", 0.0)?,
    };
    let mut combined = Vec::with_capacity(n_lines);
    for line in 0..n_lines {
        let systems: Vec<Vec<String>> =
            systems_by_file.iter().map(|s| s[line].clone()).collect();
        let set = HypothesisSet::new(systems, None)?;
        combined.push(combine_line(&set, &lm, &params)?.words);
    }
    let output = path_of(flags, "output");
    pipeline::write_tokenized(&output, &combined)?;
    let inputs: Vec<(&str, &Path)> =
        hyp_paths.iter().map(|p| ("hyp", p.as_path())).collect();
    write_manifest(&output, "combine", &inputs, None)
}

const SCORE_SPEC: &FlagSpec = &FlagSpec {
    usage: "usage: bmtl score --hyp FILE --ref FILE",
    required: &["hyp", "ref"],
    optional: &[],
};

fn cmd_score(flags: &Flags) -> Result<()> {
    let hyp = crate::textpipe::read_utf8(&path_of(flags, "hyp"))?;
    let reference = crate::textpipe::read_utf8(&path_of(flags, "ref"))?;
    let report = crate::bleu::corpus_bleu(
        &hyp.lines().collect::<Vec<_>>(),
        &reference.lines().collect::<Vec<_>>(),
    )?;
    println!("{report}");
    Ok(())
}

const PARAMS_SPEC: &FlagSpec = &FlagSpec {
    usage: "usage: bmtl params --config FILE\n\
            counts use the configured vocabulary budgets as vocabulary sizes",
    required: &["config"],
    optional: &[],
};

fn cmd_params(flags: &Flags) -> Result<()> {
    let cfg = ExperimentConfig::parse_file(&path_of(flags, "config"))?;
    let model = cfg.model_config(cfg.source_budget, &cfg.decoder_budgets.clone());
    let counts = count_parameters(&model);
    println!("source_embedding\t{}", counts.source_embedding);
    println!("encoder\t{}", counts.encoder);
    for (name, c) in &counts.decoders {
        println!("decoder.{name}\t{c}");
    }
    println!("total\t{}", counts.total);
    println!("baseline_sum\t{}", counts.baseline_sum());
    println!("reduction\t{:.4}", counts.reduction_ratio());
    Ok(())
}

const PIPELINE_SPEC: &FlagSpec = &FlagSpec {
    usage: "usage: bmtl pipeline --config FILE",
    required: &["config"],
    optional: &[],
};

fn cmd_pipeline(flags: &Flags) -> Result<()> {
    let cfg = ExperimentConfig::parse_file(&path_of(flags, "config"))?;
    let report = pipeline::run_pipeline(&cfg)?;
    print!("{}", report.to_text());
    Ok(())
}
