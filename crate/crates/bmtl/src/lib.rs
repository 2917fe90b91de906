//! Multi-granularity neural machine translation at desk scale.
//!
//! One shared BiGRU encoder feeds several conditional-GRU decoders, each
//! predicting the same target sentence at a different subword granularity
//! and trained jointly on a length-normalized combined loss. The decoders'
//! hypotheses can then be merged by a constraint-based combination search
//! into a single output that usually beats any single decoder. Everything
//! is self-contained: preprocessing, byte-pair subword learning, a small
//! reverse-mode autodiff core, training, beam search, combination, and
//! BLEU scoring, with no external model or data dependencies.
//!
//! # Examples
//!
//! The `examples/` directory is the guided tour; each one runs standalone:
//!
//! ```bash
//! cargo run -p bmtl --example preprocess_text     # normalize/tokenize/truecase
//! cargo run -p bmtl --example learn_subwords      # merge ladders over budgets
//! cargo run -p bmtl --example gradient_check      # finite-difference audit
//! cargo run -p bmtl --example count_params        # shared-encoder accounting
//! cargo run -p bmtl --example train_toy           # multitask training run
//! cargo run -p bmtl --example beam_decode         # greedy vs beam search
//! cargo run -p bmtl --example combine_hypotheses  # aligner + combination
//! cargo run -p bmtl --example score_bleu          # corpus BLEU reports
//! cargo run -p bmtl --example full_pipeline       # everything end to end
//! cargo run -p bmtl --example make_toy_corpus     # regenerate data/toy
//! ```
//!
//! The same capabilities are scriptable through the thin `bmtl` binary
//! (`bmtl --help`): preprocess, subword-train, subword-apply, train,
//! translate, combine, score, params, and pipeline subcommands.
//!
//! # Layout
//!
//! * [`textpipe`] — normalization, tokenization, truecasing, inverses
//! * [`subword`] — byte-pair merge tables and vocabularies
//! * [`nn`] — tensors, autodiff tape, Adam, clipping, gradient checking
//! * [`model`] — encoder, attention, conditional-GRU decoders, counting
//! * [`training`] — batching, combined loss, loop, checkpoints
//! * [`decoding`] — greedy and beam search, corpus translation
//! * [`combine`] — pairwise aligner, n-gram LM, constrained combination
//! * [`bleu`] — corpus BLEU-4
//! * [`config`] / [`pipeline`] / [`cli`] — experiment configs and drivers
//! * [`toy`] — synthetic reversal corpora for self-contained experiments

pub mod bleu;
pub mod cli;
pub mod combine;
pub mod config;
pub mod decoding;
pub mod error;
pub mod model;
pub mod nn;
pub mod pipeline;
pub mod rng;
pub mod subword;
pub mod textpipe;
pub mod toy;
pub mod training;

pub use error::{Error, Result};
