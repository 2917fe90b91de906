//! Greedy and beam-search generation from a single decoder.
//!
//! Search is written against the [`StepDecoder`] trait so the toy stubs in
//! the tests and the real model share one code path. Scores are summed
//! log-probabilities; finished hypotheses are ranked by score/length^alpha
//! with alpha = 1 (average log-probability) by default.

use crate::error::{Error, Result};
use crate::model::{
    conditional_gru_step, encode_source, init_decoder_state, DecoderState, EncoderOutput,
    ModelConfig,
};
use crate::nn::{ops, ParameterStore, Scalar};
use crate::subword::{decode_to_words, MergeTable, SubwordVocabulary, BOS_ID, EOS_ID, PAD_ID};

/// One decoded sentence: ids from BOS to EOS inclusive, with its model
/// score and the decoder that produced it.
#[derive(Debug, Clone)]
pub struct Hypothesis {
    pub ids: Vec<u32>,
    pub score: f64,
    pub normalized: f64,
    pub decoder: String,
    /// Search hit the length cap and EOS was appended.
    pub truncated: bool,
}

impl Hypothesis {
    fn assemble(ids: Vec<u32>, score: f64, alpha: f64, decoder: &str, truncated: bool) -> Self {
        debug_assert_eq!(ids.first(), Some(&BOS_ID));
        debug_assert_eq!(ids.last(), Some(&EOS_ID));
        debug_assert!(ids[1..ids.len() - 1]
            .iter()
            .all(|&id| id != BOS_ID && id != EOS_ID && id != PAD_ID));
        debug_assert!(score.is_finite());
        let normalized = normalized_score(score, ids.len(), alpha);
        Hypothesis { ids, score, normalized, decoder: decoder.to_string(), truncated }
    }
}

/// Length counts predicted tokens: everything after BOS, EOS included.
fn normalized_score(score: f64, ids_len: usize, alpha: f64) -> f64 {
    score / ((ids_len - 1) as f64).powf(alpha)
}

/// Anything that can extend a partial hypothesis by one token.
pub trait StepDecoder {
    type State: Clone;
    fn vocab_size(&self) -> usize;
    fn start(&self) -> Self::State;
    /// Next state and log-probabilities over the vocabulary.
    fn step(&self, state: &Self::State, prev_token: u32) -> (Self::State, Vec<f64>);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchParams {
    pub beam_size: usize,
    pub length_alpha: f64,
    /// max_len = factor * source_len + offset, capped below by 1.
    pub max_len_factor: usize,
    pub max_len_offset: usize,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams { beam_size: 4, length_alpha: 1.0, max_len_factor: 3, max_len_offset: 10 }
    }
}

impl SearchParams {
    pub fn max_len_for(&self, source_len: usize) -> usize {
        (self.max_len_factor * source_len + self.max_len_offset).max(1)
    }
}

/// Argmax generation: the highest-probability token each step, lowest id
/// on ties, until EOS or the length cap (EOS then appended and flagged).
pub fn greedy_decode<D: StepDecoder>(
    decoder: &D,
    decoder_name: &str,
    max_len: usize,
    length_alpha: f64,
) -> Hypothesis {
    let mut state = decoder.start();
    let mut prev = BOS_ID;
    let mut ids = vec![BOS_ID];
    let mut score = 0.0;
    loop {
        let (next_state, logp) = decoder.step(&state, prev);
        if ids.len() > max_len {
            ids.push(EOS_ID);
            score += logp[EOS_ID as usize];
            return Hypothesis::assemble(ids, score, length_alpha, decoder_name, true);
        }
        let mut best = EOS_ID;
        let mut best_score = f64::NEG_INFINITY;
        for (tok, &lp) in logp.iter().enumerate() {
            let tok = tok as u32;
            if tok == PAD_ID || tok == BOS_ID {
                continue;
            }
            if lp > best_score {
                best_score = lp;
                best = tok;
            }
        }
        ids.push(best);
        score += best_score;
        if best == EOS_ID {
            return Hypothesis::assemble(ids, score, length_alpha, decoder_name, false);
        }
        state = next_state;
        prev = best;
    }
}

struct Beam<S> {
    state: S,
    ids: Vec<u32>,
    score: f64,
}

/// Standard beam search over log-probabilities. EOS candidates consume a
/// beam slot and move to the finished pool, so beam 1 reproduces greedy
/// exactly. Ties break toward the lexicographically smaller id sequence.
pub fn beam_search_decode<D: StepDecoder>(
    decoder: &D,
    decoder_name: &str,
    beam_size: usize,
    max_len: usize,
    length_alpha: f64,
) -> Hypothesis {
    assert!(beam_size >= 1, "beam_size must be at least 1");
    let mut live = vec![Beam { state: decoder.start(), ids: vec![BOS_ID], score: 0.0 }];
    let mut finished: Vec<(Vec<u32>, f64, bool)> = Vec::new();

    for _step in 0..max_len {
        // (cumulative score, ids, source beam, next state lazily shared)
        let mut pool: Vec<(f64, Vec<u32>, usize, u32)> = Vec::new();
        let mut states = Vec::with_capacity(live.len());
        for (b, beam) in live.iter().enumerate() {
            let prev = *beam.ids.last().expect("non-empty");
            let (next_state, logp) = decoder.step(&beam.state, prev);
            states.push(next_state);
            for (tok, &lp) in logp.iter().enumerate() {
                let tok = tok as u32;
                if tok == PAD_ID || tok == BOS_ID {
                    continue;
                }
                let mut ids = beam.ids.clone();
                ids.push(tok);
                pool.push((beam.score + lp, ids, b, tok));
            }
        }
        pool.sort_by(|a, b| {
            b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal).then_with(|| a.1.cmp(&b.1))
        });
        let mut next_live = Vec::with_capacity(beam_size);
        for (score, ids, b, tok) in pool.into_iter().take(beam_size) {
            if tok == EOS_ID {
                finished.push((ids, score, false));
            } else {
                next_live.push(Beam { state: states[b].clone(), ids, score });
            }
        }
        live = next_live;
        if live.is_empty() {
            break;
        }
    }

    // length cap reached: close out the surviving beams
    for beam in live {
        let prev = *beam.ids.last().expect("non-empty");
        let (_, logp) = decoder.step(&beam.state, prev);
        let mut ids = beam.ids;
        ids.push(EOS_ID);
        finished.push((ids, beam.score + logp[EOS_ID as usize], true));
    }

    let (ids, score, truncated) = finished
        .into_iter()
        .min_by(|a, b| {
            let na = normalized_score(a.1, a.0.len(), length_alpha);
            let nb = normalized_score(b.1, b.0.len(), length_alpha);
            nb.partial_cmp(&na).unwrap_or(std::cmp::Ordering::Equal).then_with(|| a.0.cmp(&b.0))
        })
        .expect("at least one finished hypothesis");
    Hypothesis::assemble(ids, score, length_alpha, decoder_name, truncated)
}

/// The trained model as a step decoder for one source sentence.
pub struct ModelStepDecoder<'a, T: Scalar> {
    config: &'a ModelConfig,
    store: &'a ParameterStore<T>,
    decoder: String,
    enc: EncoderOutput<T>,
    vocab_size: usize,
}

impl<'a, T: Scalar> ModelStepDecoder<'a, T> {
    pub fn new(
        config: &'a ModelConfig,
        store: &'a ParameterStore<T>,
        decoder: &str,
        source_ids: &[u32],
    ) -> Result<Self> {
        let vocab_size = config.decoder(decoder)?.vocab_size;
        let enc = encode_source(config, store, source_ids)?;
        Ok(ModelStepDecoder { config, store, decoder: decoder.to_string(), enc, vocab_size })
    }
}

impl<'a, T: Scalar> StepDecoder for ModelStepDecoder<'a, T> {
    type State = DecoderState<T>;

    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn start(&self) -> DecoderState<T> {
        init_decoder_state(self.config, self.store, &self.decoder, &self.enc)
            .expect("decoder validated at construction")
    }

    fn step(&self, state: &DecoderState<T>, prev_token: u32) -> (DecoderState<T>, Vec<f64>) {
        let (next, logits) =
            conditional_gru_step(self.config, self.store, &self.decoder, state, prev_token, &self.enc)
                .expect("shapes validated at construction");
        let logp = ops::log_softmax(&logits);
        (next, logp.into_iter().map(Scalar::to_f64).collect())
    }
}

/// One translated sentence: word tokens plus the normalized model score.
#[derive(Debug, Clone)]
pub struct Translation {
    pub words: Vec<String>,
    pub normalized_score: f64,
}

/// Beam-decodes a tokenized corpus with one decoder. Input sentences are
/// word-token sequences (the preprocessed corpus format); output keeps
/// their order. Asset integrity against a checkpoint is the caller's job.
pub fn translate_corpus<T: Scalar>(
    config: &ModelConfig,
    store: &ParameterStore<T>,
    decoder: &str,
    sentences: &[Vec<String>],
    src_table: &MergeTable,
    src_vocab: &SubwordVocabulary,
    tgt_vocab: &SubwordVocabulary,
    params: &SearchParams,
) -> Result<Vec<Translation>> {
    config.decoder(decoder)?;
    let mut out = Vec::with_capacity(sentences.len());
    for sentence in sentences {
        let ids = crate::subword::encode_sentence(src_vocab, src_table, sentence);
        let stepper = ModelStepDecoder::new(config, store, decoder, &ids)?;
        let max_len = params.max_len_for(ids.len());
        let hyp = beam_search_decode(&stepper, decoder, params.beam_size, max_len, params.length_alpha);
        let words = decode_to_words(tgt_vocab, &hyp.ids)?;
        out.push(Translation { words, normalized_score: hyp.normalized });
    }
    Ok(out)
}

/// Writes hypotheses one tokenized sentence per line; optionally a sidecar
/// score file with `line<TAB>normalized_score` records.
pub fn write_hypothesis_file(
    path: &std::path::Path,
    translations: &[Translation],
    scores_path: Option<&std::path::Path>,
) -> Result<()> {
    let mut text = String::new();
    for t in translations {
        text.push_str(&t.words.join(" "));
        text.push('\n');
    }
    std::fs::write(path, text)?;
    if let Some(sp) = scores_path {
        let mut text = String::new();
        for (i, t) in translations.iter().enumerate() {
            text.push_str(&format!("{}\t{:.6}\n", i + 1, t.normalized_score));
        }
        std::fs::write(sp, text)?;
    }
    Ok(())
}

/// Sanity gate used by callers that load assets next to a checkpoint.
pub fn verify_vocab_hash(name: &str, expected: u64, vocab: &SubwordVocabulary) -> Result<()> {
    let actual = vocab.content_hash();
    if actual != expected {
        return Err(Error::HashMismatch { name: name.to_string(), expected, actual });
    }
    Ok(())
}
