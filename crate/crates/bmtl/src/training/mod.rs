//! Multi-granularity batching, the combined multitask loss, and the
//! optimization loop: forward with dropout, length-normalized per-decoder
//! losses averaged into one scalar, backward, global-norm clipping at 1,
//! Adam, and dev-BLEU early stopping.

pub mod checkpoint;

pub use checkpoint::{load_checkpoint, save_checkpoint, AssetRef, Checkpoint};

use crate::bleu::corpus_bleu;
use crate::decoding::{greedy_decode, ModelStepDecoder};
use crate::error::{Error, Result};
use crate::model::{Forward, ModelConfig};
use crate::nn::{AdamState, Id, ParameterStore, Scalar, Tape};
use crate::rng::{substream, Rng};
use crate::subword::{
    decode_to_words, encode_sentence, MergeTable, SubwordVocabulary, PAD_ID,
};
use crate::textpipe::{detokenize, detruecase};

/// Learned segmentation assets for one vocabulary.
#[derive(Debug, Clone)]
pub struct SubwordAssets {
    pub table: MergeTable,
    pub vocab: SubwordVocabulary,
}

/// One training pair: source ids plus one target id sequence per decoder,
/// in config order. All sequences carry BOS/EOS.
#[derive(Debug, Clone)]
pub struct EncodedSentence {
    pub source: Vec<u32>,
    pub targets: Vec<Vec<u32>>,
}

/// Segments one target word sequence at every decoder granularity. Each id
/// sequence decodes back to the identical words.
pub fn segment_targets_multi<S: AsRef<str>>(
    words: &[S],
    decoder_assets: &[SubwordAssets],
) -> Vec<Vec<u32>> {
    decoder_assets
        .iter()
        .map(|a| encode_sentence(&a.vocab, &a.table, words))
        .collect()
}

/// Encodes a parallel corpus, dropping pairs whose source or any target
/// exceeds `max_len` subwords (markers excluded). Returns the kept
/// sentences and the dropped count.
pub fn encode_corpus<S: AsRef<str>>(
    sources: &[Vec<S>],
    targets: &[Vec<S>],
    src_assets: &SubwordAssets,
    decoder_assets: &[SubwordAssets],
    max_len: usize,
) -> Result<(Vec<EncodedSentence>, usize)> {
    if sources.len() != targets.len() {
        return Err(Error::Mismatch(format!(
            "source corpus has {} sentences, target has {}",
            sources.len(),
            targets.len()
        )));
    }
    let mut kept = Vec::with_capacity(sources.len());
    let mut dropped = 0usize;
    for (src, tgt) in sources.iter().zip(targets) {
        let source = encode_sentence(&src_assets.vocab, &src_assets.table, src);
        let segmented = segment_targets_multi(tgt, decoder_assets);
        let too_long = source.len().saturating_sub(2) > max_len
            || segmented.iter().any(|t| t.len().saturating_sub(2) > max_len);
        if too_long {
            dropped += 1;
        } else {
            kept.push(EncodedSentence { source, targets: segmented });
        }
    }
    Ok((kept, dropped))
}

/// Padded id matrix with per-row unpadded lengths.
#[derive(Debug, Clone)]
pub struct PaddedIds {
    pub rows: Vec<Vec<u32>>,
    pub lengths: Vec<usize>,
    pub width: usize,
}

impl PaddedIds {
    fn from_sequences(seqs: Vec<Vec<u32>>) -> Self {
        let width = seqs.iter().map(Vec::len).max().unwrap_or(0);
        let lengths: Vec<usize> = seqs.iter().map(Vec::len).collect();
        let rows = seqs
            .into_iter()
            .map(|mut s| {
                s.resize(width, PAD_ID);
                s
            })
            .collect();
        PaddedIds { rows, lengths, width }
    }

    pub fn unpadded(&self, row: usize) -> &[u32] {
        &self.rows[row][..self.lengths[row]]
    }

    pub fn batch_size(&self) -> usize {
        self.rows.len()
    }
}

/// One training batch: aligned padded source and per-decoder target
/// matrices over the same sentences in the same order.
#[derive(Debug, Clone)]
pub struct Batch {
    pub source: PaddedIds,
    pub targets: Vec<PaddedIds>,
}

impl Batch {
    fn from_sentences(sentences: &[&EncodedSentence], n_decoders: usize) -> Self {
        let source =
            PaddedIds::from_sequences(sentences.iter().map(|s| s.source.clone()).collect());
        let targets = (0..n_decoders)
            .map(|k| {
                PaddedIds::from_sequences(sentences.iter().map(|s| s.targets[k].clone()).collect())
            })
            .collect();
        Batch { source, targets }
    }
}

/// Length-bucketed batches: sentences sorted by source length (ties keep
/// corpus order), chunked, and the chunk order shuffled with the seed.
pub fn make_batches(
    corpus: &[EncodedSentence],
    batch_size: usize,
    shuffle_seed: u64,
) -> Vec<Batch> {
    assert!(batch_size > 0, "batch_size must be positive");
    if corpus.is_empty() {
        return Vec::new();
    }
    let n_decoders = corpus[0].targets.len();
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.sort_by_key(|&i| (corpus[i].source.len(), i));
    let mut groups: Vec<Vec<usize>> = order.chunks(batch_size).map(<[usize]>::to_vec).collect();
    Rng::new(shuffle_seed).shuffle(&mut groups);
    groups
        .into_iter()
        .map(|g| {
            let refs: Vec<&EncodedSentence> = g.iter().map(|&i| &corpus[i]).collect();
            Batch::from_sentences(&refs, n_decoders)
        })
        .collect()
}

/// Sum of per-position cross-entropies over non-pad positions of one
/// teacher-forced sentence. `logits[t]` predicts `targets[t]`; BOS is
/// never a prediction target because the caller aligns targets one step
/// ahead of the decoder inputs. Returns the loss node (absent when every
/// position is padded) and the counted positions.
pub fn sequence_nll<T: Scalar>(
    tape: &mut Tape<T>,
    logits: &[Id],
    targets: &[u32],
    pad_mask: &[bool],
) -> Result<(Option<Id>, usize)> {
    assert_eq!(logits.len(), targets.len(), "sequence_nll alignment");
    assert_eq!(logits.len(), pad_mask.len(), "sequence_nll mask alignment");
    let mut terms = Vec::new();
    for ((&logit, &target), &is_pad) in logits.iter().zip(targets).zip(pad_mask) {
        if is_pad {
            continue;
        }
        terms.push(tape.cross_entropy(logit, target as usize)?);
    }
    if terms.is_empty() {
        return Ok((None, 0));
    }
    let count = terms.len();
    Ok((Some(tape.sum(terms)), count))
}

/// How per-decoder losses fold into the training objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossMode {
    /// Mean of length-normalized decoder losses; encoder gradient scale
    /// stays independent of the decoder count.
    Mean,
    /// Plain sum of length-normalized decoder losses.
    Sum,
}

/// combined = (1/K) * sum_k total_k / count_k  (or the plain sum).
pub fn combine_losses(per_decoder: &[(f64, usize)], mode: LossMode) -> Result<f64> {
    let k = per_decoder.len();
    assert!(k > 0, "no decoder losses");
    let mut acc = 0.0;
    for (total, count) in per_decoder {
        if *count == 0 {
            return Err(Error::Numeric("decoder with zero target tokens".into()));
        }
        acc += total / *count as f64;
    }
    Ok(match mode {
        LossMode::Mean => acc / k as f64,
        LossMode::Sum => acc,
    })
}

fn combine_loss_nodes<T: Scalar>(
    tape: &mut Tape<T>,
    per_decoder: &[(Id, usize)],
    mode: LossMode,
) -> Result<Id> {
    let k = per_decoder.len();
    let mut scaled = Vec::with_capacity(k);
    for &(total, count) in per_decoder {
        if count == 0 {
            return Err(Error::Numeric("decoder with zero target tokens".into()));
        }
        let denom = match mode {
            LossMode::Mean => (k * count) as f64,
            LossMode::Sum => count as f64,
        };
        scaled.push(tape.scale(total, 1.0 / denom));
    }
    Ok(tape.sum(scaled))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub clip_norm: f64,
    pub max_updates: u64,
    pub eval_every: u64,
    pub patience: usize,
    pub loss_mode: LossMode,
    /// Multiplicative learning-rate decay applied once per eval interval;
    /// 1.0 disables it.
    pub lr_decay: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            clip_norm: 1.0,
            max_updates: 3000,
            eval_every: 100,
            patience: 5,
            loss_mode: LossMode::Mean,
            lr_decay: 1.0,
            seed: 1,
        }
    }
}

impl TrainConfig {
    /// Pure function of the update counter, so resumed runs see the same
    /// schedule.
    pub fn lr_scale(&self, update: u64) -> f64 {
        if (self.lr_decay - 1.0).abs() < f64::EPSILON {
            1.0
        } else {
            self.lr_decay.powi((update / self.eval_every.max(1)) as i32)
        }
    }
}

/// One optimizer update over a batch. Returns the combined loss value.
pub fn train_step<T: Scalar>(
    config: &ModelConfig,
    store: &mut ParameterStore<T>,
    adam: &mut AdamState<T>,
    batch: &Batch,
    tcfg: &TrainConfig,
    update_index: u64,
) -> Result<f64> {
    let dropout_seed = substream(tcfg.seed, "dropout", update_index);
    let mut tape: Tape<T> = Tape::new();
    let mut fwd = Forward::with_tape(&mut tape, config, store, Some(dropout_seed));

    let k = config.decoders.len();
    let mut totals: Vec<Vec<Id>> = vec![Vec::new(); k];
    let mut counts = vec![0usize; k];
    for row in 0..batch.source.batch_size() {
        let source = batch.source.unpadded(row);
        let targets: Vec<(String, Vec<u32>)> = config
            .decoders
            .iter()
            .enumerate()
            .map(|(i, d)| (d.name.clone(), batch.targets[i].unpadded(row).to_vec()))
            .collect();
        let graph = fwd.bmtl(source, &targets)?;
        for (i, steps) in graph.logits.iter().enumerate() {
            let target_tail = &targets[i].1[1..];
            let mask = vec![false; target_tail.len()];
            let (node, count) = sequence_nll(fwd.tape, steps, target_tail, &mask)?;
            if let Some(node) = node {
                totals[i].push(node);
                counts[i] += count;
            }
        }
    }
    let mut per_decoder: Vec<(Id, usize)> = Vec::with_capacity(k);
    for (i, (nodes, count)) in totals.into_iter().zip(counts).enumerate() {
        if nodes.is_empty() {
            return Err(Error::Numeric(format!(
                "decoder {} saw zero target tokens in batch",
                config.decoders[i].name
            )));
        }
        per_decoder.push((fwd.tape.sum(nodes), count));
    }
    let combined = combine_loss_nodes(fwd.tape, &per_decoder, tcfg.loss_mode)?;
    let loss_value = fwd.tape.value(combined).item().to_f64();
    if !loss_value.is_finite() {
        return Err(Error::NonFinite(format!("combined loss at update {update_index}")));
    }
    drop(fwd);

    let grads = tape.backward(combined)?;
    store.zero_grads();
    let pairs: Vec<(usize, crate::nn::Tensor<T>)> = tape
        .param_grads(&grads)
        .into_iter()
        .map(|(i, g)| (i, g.clone()))
        .collect();
    drop(tape);
    for (idx, g) in &pairs {
        store.accumulate_grad(*idx, g);
    }
    store.clip_global_norm(T::from_f64(tcfg.clip_norm));
    adam.step(store, tcfg.lr_scale(update_index))?;
    store.zero_grads();
    Ok(loss_value)
}

/// Development set for periodic evaluation: source word sequences and the
/// detokenized reference text they should produce.
#[derive(Debug, Clone)]
pub struct DevSet {
    pub sources: Vec<Vec<String>>,
    pub references: Vec<String>,
}

/// Greedy-decodes the dev set with every decoder and scores BLEU against
/// the references after detruecasing and detokenizing.
pub fn evaluate_dev<T: Scalar>(
    config: &ModelConfig,
    store: &ParameterStore<T>,
    dev: &DevSet,
    src_assets: &SubwordAssets,
    decoder_assets: &[SubwordAssets],
    max_len_params: &crate::decoding::SearchParams,
) -> Result<Vec<(String, f64)>> {
    let mut out = Vec::new();
    for (i, spec) in config.decoders.iter().enumerate() {
        let vocab = &decoder_assets[i].vocab;
        let mut hyps = Vec::with_capacity(dev.sources.len());
        for words in &dev.sources {
            let ids = encode_sentence(&src_assets.vocab, &src_assets.table, words);
            let stepper = ModelStepDecoder::new(config, store, &spec.name, &ids)?;
            let hyp = greedy_decode(&stepper, &spec.name, max_len_params.max_len_for(ids.len()), 1.0);
            let words = decode_to_words(vocab, &hyp.ids)?;
            hyps.push(detokenize(&detruecase(&words)));
        }
        let report = corpus_bleu(&hyps, &dev.references)?;
        out.push((spec.name.clone(), report.bleu));
    }
    Ok(out)
}

/// Fires when the average dev BLEU fails to improve for `patience`
/// consecutive evaluations.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopper {
    pub patience: usize,
    pub best_average: f64,
    pub stale_evals: usize,
}

impl EarlyStopper {
    pub fn new(patience: usize) -> Self {
        EarlyStopper { patience, best_average: f64::NEG_INFINITY, stale_evals: 0 }
    }

    pub fn update(&mut self, average_bleu: f64) -> bool {
        if average_bleu > self.best_average {
            self.best_average = average_bleu;
            self.stale_evals = 0;
        } else {
            self.stale_evals += 1;
        }
        self.stale_evals >= self.patience
    }
}

/// Everything a finished training run reports.
#[derive(Debug, Clone, Default)]
pub struct TrainOutcome {
    pub updates: u64,
    /// (update, combined loss) per update.
    pub loss_log: Vec<(u64, f64)>,
    /// (update, decoder, dev BLEU) per evaluation.
    pub eval_log: Vec<(u64, String, f64)>,
    pub best_bleu: Vec<(String, f64)>,
    pub stopped_early: bool,
}

impl TrainOutcome {
    /// Training log in the on-disk format: one `update<TAB>loss` line per
    /// update and one `eval<TAB>update<TAB>decoder<TAB>bleu` per eval.
    pub fn log_text(&self) -> String {
        let mut evals = self.eval_log.iter().peekable();
        let mut out = String::new();
        for (update, loss) in &self.loss_log {
            out.push_str(&format!("{update}\t{loss:.6}\n"));
            while let Some((eu, decoder, bleu)) = evals.peek() {
                if eu == update {
                    out.push_str(&format!("eval\t{eu}\t{decoder}\t{bleu:.2}\n"));
                    evals.next();
                } else {
                    break;
                }
            }
        }
        out
    }
}

/// Runs the loop from `start_update` (0 for fresh runs) until max_updates
/// or early stop. Shuffling, dropout, and the learning-rate schedule are
/// all pure functions of (seed, update), so resuming a checkpoint at
/// update u replays exactly what an uninterrupted run would have done.
#[allow(clippy::too_many_arguments)]
pub fn train_loop<T: Scalar>(
    config: &ModelConfig,
    store: &mut ParameterStore<T>,
    adam: &mut AdamState<T>,
    corpus: &[EncodedSentence],
    dev: Option<(&DevSet, &SubwordAssets, &[SubwordAssets])>,
    tcfg: &TrainConfig,
    start_update: u64,
    stopper: &mut EarlyStopper,
) -> Result<TrainOutcome> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus("training".into()));
    }
    let batches_per_epoch = corpus.len().div_ceil(tcfg.batch_size) as u64;
    let mut outcome = TrainOutcome::default();
    let mut best: Vec<(String, f64)> = config
        .decoders
        .iter()
        .map(|d| (d.name.clone(), f64::NEG_INFINITY))
        .collect();
    let mut epoch_batches: Option<(u64, Vec<Batch>)> = None;

    let mut update = start_update;
    while update < tcfg.max_updates {
        update += 1;
        let epoch = (update - 1) / batches_per_epoch;
        let batch_idx = ((update - 1) % batches_per_epoch) as usize;
        if epoch_batches.as_ref().map(|(e, _)| *e) != Some(epoch) {
            let shuffle_seed = substream(tcfg.seed, "shuffle", epoch);
            epoch_batches = Some((epoch, make_batches(corpus, tcfg.batch_size, shuffle_seed)));
        }
        let (_, batches) = epoch_batches.as_ref().expect("just filled");
        let batch = &batches[batch_idx];

        let loss = train_step(config, store, adam, batch, tcfg, update)?;
        outcome.loss_log.push((update, loss));

        if update % tcfg.eval_every == 0 {
            if let Some((dev, src_assets, dec_assets)) = dev {
                let params = crate::decoding::SearchParams::default();
                let scores =
                    evaluate_dev(config, store, dev, src_assets, dec_assets, &params)?;
                let mut sum = 0.0;
                for (name, bleu) in &scores {
                    outcome.eval_log.push((update, name.clone(), *bleu));
                    sum += bleu;
                    for (bn, bb) in &mut best {
                        if bn == name && *bleu > *bb {
                            *bb = *bleu;
                        }
                    }
                }
                if stopper.update(sum / scores.len() as f64) {
                    outcome.stopped_early = true;
                    break;
                }
            }
        }
    }
    outcome.updates = update;
    outcome.best_bleu = best
        .into_iter()
        .map(|(n, b)| (n, if b.is_finite() { b } else { 0.0 }))
        .collect();
    Ok(outcome)
}
